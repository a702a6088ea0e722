#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "galopp/model.hpp"
#include "galopp/policy.hpp"

#include <cstdio>
#include <random>

using namespace galopp;

namespace
{

Matrix randn(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c)
{
    std::normal_distribution<double> n01;
    return Matrix::NullaryExpr(r, c, [&] { return n01(rng); });
}

// Mean over the real rectangle [i*w, (i+1)*w) x [j*h, (j+1)*h) of a
// piecewise-constant map, integrated cell by cell.
double area_oracle(const CellArray& m, int target, int i, int j)
{
    const double w = static_cast<double>(m.rows()) / target, h = static_cast<double>(m.cols()) / target;
    const double x0 = i * w, x1 = x0 + w, y0 = j * h, y1 = y0 + h;
    double acc = 0.0;
    for (int a = 0; a < m.rows(); ++a)
        for (int b = 0; b < m.cols(); ++b)
        {
            const double ox = std::max(0.0, std::min(x1, a + 1.0) - std::max(x0, static_cast<double>(a)));
            const double oy = std::max(0.0, std::min(y1, b + 1.0) - std::max(y0, static_cast<double>(b)));
            acc += m(a, b) * ox * oy;
        }
    return acc / (w * h);
}

NetworkSpec small_spec()
{
    NetworkSpec s;
    s.input_size = 5;
    s.conv = {{2, 3, 3, 2, 1}, {3, 4, 3, 1, 0}};
    s.actor_hidden = {7, 6};
    s.critic_hidden = {6};
    return s;
}

GraphBatch random_batch(std::mt19937_64& rng, const NetworkSpec& spec, int graphs, int n)
{
    GraphBatch b;
    const int g = spec.input_size;
    b.observations = -randn(rng, graphs * n, 2 * g * g).cwiseAbs() * 0.3;
    b.states = randn(rng, graphs * n, 6);
    b.agents_per_graph = n;
    for (int k = 0; k < graphs; ++k)
    {
        Matrix a = Matrix::Identity(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j)
                a(i, j) = a(j, i) = static_cast<double>(rng() % 2);
        b.adjacency.push_back(a);
    }
    return b;
}

void zero_weights(Network& net)
{
    nd::Checkpoint ck = net.to_checkpoint();
    for (auto& [k, v] : ck.arrays)
        v.setZero();
    net.load_parameters(ck);
}

} // namespace

TEST_CASE("default spec reproduces the layer table")
{
    const NetworkSpec s;
    const auto shapes = s.shape_trace();
    REQUIRE(shapes.size() == 3);
    CHECK(shapes[0] == nd::ImageShape{16, 3, 3});
    CHECK(shapes[1] == nd::ImageShape{32, 1, 1});
    CHECK(shapes[2] == nd::ImageShape{32, 1, 1});
    CHECK(s.embedding_dim() == 32);
    CHECK(s.info_dim() == 38);

    NetworkSpec seven = s;
    seven.input_size = 7;
    CHECK_THROWS(seven.shape_trace());
    CHECK_THROWS(Network(seven, 0));
}

TEST_CASE("network parameter shapes")
{
    Network net(NetworkSpec{}, 1);
    const nd::Checkpoint ck = net.to_checkpoint();
    CHECK(ck.arrays.at("conv0.kernel").rows() == 16);
    CHECK(ck.arrays.at("conv0.kernel").cols() == 2 * 8 * 8);
    CHECK(ck.arrays.at("gcn0.weight").rows() == 38);
    CHECK(ck.arrays.at("gcn0.weight").cols() == 38);
    CHECK(ck.arrays.at("actor.linear0.weight").cols() == 500);
    CHECK(ck.arrays.at("actor.linear1.weight").cols() == 256);
    CHECK(ck.arrays.at("actor.linear2.weight").cols() == 5);
    CHECK(ck.arrays.at("critic.linear2.weight").cols() == 1);
    CHECK(ck.arrays.at("actor.linear0.bias").isZero());
}

TEST_CASE("downsample_minimap")
{
    CHECK((downsample_minimap(CellArray::Constant(20, 20, -7.0), 15).array() - (-7.0)).abs().maxCoeff() < 1e-12);

    std::mt19937_64 rng(2);
    CellArray m = randn(rng, 30, 30).array();
    const Matrix d = downsample_minimap(m, 15);
    for (int i = 0; i < 15; ++i)
        for (int j = 0; j < 15; ++j)
            CHECK(d(i, j) == doctest::Approx(m.block(2 * i, 2 * j, 2, 2).mean()).epsilon(1e-12));

    CellArray r = randn(rng, 20, 23).array();
    const Matrix e = downsample_minimap(r, 15);
    for (int i = 0; i < 15; ++i)
        for (int j = 0; j < 15; ++j)
            CHECK(std::abs(e(i, j) - area_oracle(r, 15, i, j)) < 1e-12);

    CHECK_THROWS(downsample_minimap(CellArray::Zero(10, 10), 15));
}

TEST_CASE("encode_observation")
{
    const GridSpec grid = GridSpec::open(20, 20);
    const NetworkSpec spec;
    AgentState a;
    a.position = {0, 0};
    a.belief.mean = Vector2(0, 0);

    auto [fresh, s0] = encode_observation(a, CellArray::Zero(20, 20), grid, spec);
    CHECK(fresh.local.isZero());
    CHECK(fresh.mini.isZero());
    CHECK(s0 == StateVector::Zero());

    CellArray full = CellArray::Constant(20, 20, -400.0);
    a.position = {0, 19};
    a.belief.mean = Vector2(0, 19);
    auto [corner, s1] = encode_observation(a, full, grid, spec);
    // Window x in [-7, 7], y in [12, 26]: in-bounds cells are x >= 0, y <= 19.
    for (int x = 0; x < 15; ++x)
        for (int y = 0; y < 15; ++y)
        {
            const bool inside = x >= 7 && y <= 7;
            CHECK(corner.local(x, y) == (inside ? -1.0 : 0.0));
        }
    CHECK((corner.mini.array() + 1.0).abs().maxCoeff() < 1e-12);
    CHECK(s1(0) == 0.0);
    CHECK(s1(1) == 19.0);

    a.belief.cov << 2.0, 0.1, 0.1, 3.0;
    a.belief.mean = Vector2(4.4, 5.6);
    const auto [obs, s2] = encode_observation(a, full, grid, spec);
    CHECK(s2(2) == 2.0);
    CHECK(s2(3) == 0.1);
    CHECK(s2(5) == 3.0);
    CHECK(obs.local.minCoeff() >= -1.0);
    CHECK(obs.local.maxCoeff() <= 0.0);
}

TEST_CASE("zero weights give a zero embedding, uniform actions and zero values")
{
    std::mt19937_64 rng(3);
    Network net(NetworkSpec{}, 5);
    zero_weights(net);
    const GraphBatch b = random_batch(rng, net.spec(), 2, 3);
    nd::Tape tape;
    const NetworkOutput out = net.forward(tape, b);
    CHECK(out.embedding.value().isZero());
    CHECK(out.info.cols() == 38);
    CHECK((out.probs.value().array() - 0.2).abs().maxCoeff() < 1e-15);
    CHECK(out.values.value().isZero());
}

TEST_CASE("probabilities sum to one and agents permute consistently")
{
    std::mt19937_64 rng(4);
    Network net(NetworkSpec{}, 6);
    GraphBatch b = random_batch(rng, net.spec(), 1, 4);
    nd::Tape tape(false);
    const NetworkOutput out = net.forward(tape, b);
    for (Eigen::Index r = 0; r < 4; ++r)
        CHECK(std::abs(out.probs.value().row(r).sum() - 1.0) < 1e-9);

    const std::vector<int> perm{2, 0, 3, 1};
    Eigen::PermutationMatrix<Eigen::Dynamic> p(4);
    for (int i = 0; i < 4; ++i)
        p.indices()(i) = perm[i];
    GraphBatch q = b;
    q.observations = p * b.observations;
    q.states = p * b.states;
    q.adjacency[0] = p * b.adjacency[0] * p.transpose();
    nd::Tape tape2(false);
    const NetworkOutput out2 = net.forward(tape2, q);
    CHECK(((p * out.probs.value()) - out2.probs.value()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(((p * out.values.value()) - out2.values.value()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("graphnet aggregation matches the dense product")
{
    std::mt19937_64 rng(8);
    Network net(NetworkSpec{}, 9);
    const Matrix w = net.to_checkpoint().arrays.at("gcn0.weight");
    const Matrix z = randn(rng, 4, 38);
    Matrix a = Matrix::Identity(4, 4);
    a(0, 2) = a(2, 0) = 1.0;
    a(1, 3) = a(3, 1) = 1.0;
    const std::vector<Matrix> adj{a};
    nd::Tape tape;
    const Matrix got = net.graphnet_aggregate(tape, tape.constant(z), adj).value();
    CHECK((got - (a * z * w).cwiseMax(0.0)).cwiseAbs().maxCoeff() < 1e-12);

    // An isolated agent only sees itself.
    const std::vector<Matrix> alone{Matrix::Identity(4, 4)};
    const Matrix iso = net.graphnet_aggregate(tape, tape.constant(z), alone).value();
    CHECK((iso.row(1) - (z.row(1) * w).cwiseMax(0.0)).cwiseAbs().maxCoeff() < 1e-12);

    // Two connected identical agents produce identical rows.
    Matrix twin(2, 38);
    twin.row(0) = z.row(0);
    twin.row(1) = z.row(0);
    const std::vector<Matrix> both{Matrix::Ones(2, 2)};
    const Matrix t = net.graphnet_aggregate(tape, tape.constant(twin), both).value();
    CHECK(t.row(0) == t.row(1));
}

TEST_CASE("full network gradients match finite differences")
{
    std::mt19937_64 rng(10);
    for (int trial = 0; trial < 4; ++trial)
    {
        NetworkSpec spec = small_spec();
        spec.per_agent_actors = trial % 2 == 1;
        spec.n_agents = 3;
        spec.critic_uses_aggregated = trial >= 2;
        Network net(spec, 100 + trial);
        const GraphBatch b = random_batch(rng, spec, 2, 3);
        std::vector<int> actions(6);
        for (auto& a : actions)
            a = static_cast<int>(rng() % 5);

        std::vector<nd::Parameter*> params = net.parameters();
        // Central differences on every parameter entry against the tape gradient.
        nd::Tape tape;
        for (auto* p : params)
            p->zero_grad();
        const NetworkOutput out = net.forward(tape, b);
        tape.backward(nd::add(nd::sum(nd::pick(out.log_probs, actions)), nd::sum(nd::square(out.values))));
        double worst = 0.0;
        const double h = 1e-5;
        for (std::size_t k = 0; k < params.size(); ++k)
            for (Eigen::Index e = 0; e < params[k]->value.size(); ++e)
            {
                const double orig = params[k]->value(e);
                auto loss = [&] {
                    nd::Tape t(false);
                    const NetworkOutput o = net.forward(t, b);
                    return (nd::add(nd::sum(nd::pick(o.log_probs, actions)), nd::sum(nd::square(o.values))))
                        .value()(0, 0);
                };
                params[k]->value(e) = orig + h;
                const double up = loss();
                params[k]->value(e) = orig - h;
                const double down = loss();
                params[k]->value(e) = orig;
                const double num = (up - down) / (2 * h);
                const double ana = params[k]->grad(e);
                worst = std::max(worst, std::abs(ana - num) / std::max({std::abs(ana), std::abs(num), 1e-6}));
            }
        CHECK(worst <= 1e-4);
    }
}

TEST_CASE("checkpoint round-trip reproduces outputs")
{
    std::mt19937_64 rng(12);
    NetworkSpec spec;
    spec.per_agent_actors = true;
    spec.n_agents = 2;
    Network net(spec, 13);
    const std::string path = "test_model_checkpoint.bin";
    nd::save_checkpoint(path, net.to_checkpoint());
    Network back = Network::from_checkpoint(nd::load_checkpoint(path));
    std::remove(path.c_str());
    CHECK(back.spec() == spec);
    const GraphBatch b = random_batch(rng, spec, 1, 2);
    nd::Tape t1(false), t2(false);
    CHECK(net.forward(t1, b).probs.value() == back.forward(t2, b).probs.value());
    CHECK(network_spec_from_json(network_spec_to_json(spec)) == spec);
}
