#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "galopp/ndiff.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <cstdio>
#include <random>

using namespace galopp;
using namespace galopp::nd;

namespace
{

Matrix randn(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c)
{
    std::normal_distribution<double> n01;
    return Matrix::NullaryExpr(r, c, [&] { return n01(rng); });
}

constexpr double tol = 1e-4;

} // namespace

TEST_CASE("conv2d shapes")
{
    CHECK(conv_output_dim(15, 8, 4, 1) == 3);
    CHECK(conv_output_dim(3, 4, 2, 1) == 1);
    CHECK(conv_output_dim(1, 3, 1, 1) == 1);
    CHECK(conv_output_dim(7, 8, 4, 1) == 1);
    CHECK(conv_output_dim(1, 4, 2, 1) == 0);

    Tape tape;
    std::mt19937_64 rng(0);
    CHECK_THROWS(conv2d(tape.constant(randn(rng, 1, 16)), {16, 1, 1}, tape.constant(randn(rng, 32, 16 * 16)),
                        tape.constant(Matrix::Zero(1, 32)), 4, 2, 1));
    ImageShape out;
    conv2d(tape.constant(randn(rng, 2, 2 * 15 * 15)), {2, 15, 15}, tape.constant(randn(rng, 16, 2 * 64)),
           tape.constant(Matrix::Zero(1, 16)), 8, 4, 1, &out);
    CHECK(out == ImageShape{16, 3, 3});
}

TEST_CASE("conv2d of ones is a sum")
{
    Tape tape;
    ImageShape out;
    const Var y = conv2d(tape.constant(Matrix::Ones(1, 9)), {1, 3, 3}, tape.constant(Matrix::Ones(1, 9)),
                         tape.constant(Matrix::Zero(1, 1)), 3, 1, 0, &out);
    CHECK(out == ImageShape{1, 1, 1});
    CHECK(y.value()(0, 0) == 9.0);
}

TEST_CASE("conv2d matches a direct loop oracle")
{
    std::mt19937_64 rng(1);
    const ImageShape in{3, 6, 5};
    const int k = 3, s = 2, p = 1, co = 4;
    const Matrix x = randn(rng, 2, in.size()), w = randn(rng, co, in.channels * k * k), b = randn(rng, 1, co);
    Tape tape;
    ImageShape out;
    const Matrix y = conv2d(tape.constant(x), in, tape.constant(w), tape.constant(b), k, s, p, &out).value();
    for (int n = 0; n < 2; ++n)
        for (int o = 0; o < co; ++o)
            for (int i = 0; i < out.height; ++i)
                for (int j = 0; j < out.width; ++j)
                {
                    double acc = b(0, o);
                    for (int c = 0; c < in.channels; ++c)
                        for (int u = 0; u < k; ++u)
                            for (int v = 0; v < k; ++v)
                            {
                                const int h = i * s - p + u, ww = j * s - p + v;
                                if (h >= 0 && h < in.height && ww >= 0 && ww < in.width)
                                    acc += w(o, c * k * k + u * k + v) * x(n, c * in.height * in.width + h * in.width + ww);
                            }
                    CHECK(y(n, o * out.height * out.width + i * out.width + j) == doctest::Approx(acc).epsilon(1e-12));
                }
}

TEST_CASE("primitive gradients match finite differences on random shapes")
{
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 20; ++trial)
    {
        const int r = 1 + static_cast<int>(rng() % 4), c = 1 + static_cast<int>(rng() % 5),
                  d = 1 + static_cast<int>(rng() % 4);
        const Matrix w = randn(rng, c, d);
        const Matrix a = randn(rng, r, c), b = randn(rng, r, c), bias = randn(rng, 1, d);
        std::vector<int> cols(r);
        for (auto& x : cols)
            x = static_cast<int>(rng() % d);

        CHECK(finite_diff_check([](Tape&, std::span<const Var> v) { return sum(mul(matmul(v[0], v[1]), v[2])); },
                                {a, w, randn(rng, r, d)})
                  .passed(tol));
        CHECK(finite_diff_check([](Tape&, std::span<const Var> v) { return sum(square(linear(v[0], v[1], v[2]))); },
                                {a, w, bias})
                  .passed(tol));
        CHECK(finite_diff_check([](Tape&, std::span<const Var> v) { return mean(mul(sub(v[0], v[1]), exp(v[0]))); },
                                {a, b})
                  .passed(tol));
        // Keep relu/clamp/minimum inputs away from their kinks.
        Matrix safe = a;
        for (Eigen::Index k = 0; k < safe.size(); ++k)
            safe(k) += safe(k) >= 0 ? 0.1 : -0.1;
        CHECK(finite_diff_check([](Tape&, std::span<const Var> v) { return sum(mul(relu(v[0]), v[1])); },
                                {safe, b})
                  .passed(tol));
        CHECK(finite_diff_check([](Tape&, std::span<const Var> v) { return sum(mul(clamp(v[0], -0.05, 0.05), v[1])); },
                                {safe, b})
                  .passed(tol));
        CHECK(finite_diff_check(
                  [](Tape&, std::span<const Var> v) { return sum(minimum(v[0], add(v[0], scale(v[1], 1.0)))); },
                  {a, safe})
                  .passed(tol));
        CHECK(finite_diff_check(
                  [&](Tape&, std::span<const Var> v) {
                      return sum(pick(log_softmax_rows(matmul(v[0], v[1])), cols));
                  },
                  {a, w})
                  .passed(tol));
        CHECK(finite_diff_check(
                  [&](Tape&, std::span<const Var> v) { return sum(square(softmax_rows(add_row(v[0], v[1])))); },
                  {randn(rng, r, d), bias})
                  .passed(tol));
        CHECK(finite_diff_check(
                  [](Tape&, std::span<const Var> v) { return sum(square(flatten(concat_cols(v[0], v[1])))); }, {a, b})
                  .passed(tol));
    }
}

TEST_CASE("conv2d and graph_conv gradients")
{
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 20; ++trial)
    {
        const int ci = 1 + static_cast<int>(rng() % 3), co = 1 + static_cast<int>(rng() % 3);
        const int k = 1 + static_cast<int>(rng() % 3), s = 1 + static_cast<int>(rng() % 2),
                  p = static_cast<int>(rng() % 2);
        const ImageShape in{ci, k + static_cast<int>(rng() % 4), k + static_cast<int>(rng() % 4)};
        CHECK(finite_diff_check(
                  [&](Tape&, std::span<const Var> v) {
                      return sum(square(conv2d(v[0], in, v[1], v[2], k, s, p)));
                  },
                  {randn(rng, 2, in.size()), randn(rng, co, ci * k * k), randn(rng, 1, co)})
                  .passed(tol));

        const int n = 1 + static_cast<int>(rng() % 4), d = 1 + static_cast<int>(rng() % 5);
        Matrix adj = Matrix::Identity(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j)
                adj(i, j) = adj(j, i) = static_cast<double>(rng() % 2);
        const std::vector<Matrix> blocks{adj, adj};
        // Shift the pre-activation well off zero so relu stays differentiable.
        CHECK(finite_diff_check(
                  [&](Tape& t, std::span<const Var> v) {
                      return sum(mul(graph_conv(v[0], blocks, v[1]), v[2]));
                  },
                  {randn(rng, 2 * n, d).array().abs().matrix() + Matrix::Constant(2 * n, d, 0.5),
                   Matrix::Identity(d, d) + 0.1 * randn(rng, d, d), randn(rng, 2 * n, d)})
                  .passed(tol));
    }
}

TEST_CASE("identity map has zero gradient error")
{
    const GradCheckReport r =
        finite_diff_check([](Tape&, std::span<const Var> v) { return sum(v[0]); }, {Matrix::Random(3, 4)});
    CHECK(r.max_rel_error < 1e-9);
    CHECK(r.entries == 12);
}

TEST_CASE("softmax properties")
{
    Tape tape;
    const Var p = softmax_rows(tape.constant(Matrix::Constant(1, 5, 3.0)));
    for (int j = 0; j < 5; ++j)
        CHECK(p.value()(0, j) == doctest::Approx(0.2));
    std::mt19937_64 rng(4);
    const Matrix l = 30.0 * randn(rng, 8, 5);
    const Matrix a = softmax_rows(tape.constant(l)).value();
    const Matrix b = softmax_rows(tape.constant((l.array() + 123.0).matrix())).value();
    for (int i = 0; i < 8; ++i)
        CHECK(std::abs(a.row(i).sum() - 1.0) <= 1e-9);
    CHECK((a - b).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("relu has zero gradient on negatives")
{
    Tape tape;
    const Var x = tape.leaf((Matrix(1, 3) << -2.0, 1.0, -0.5).finished());
    tape.backward(sum(relu(x)));
    CHECK(x.grad()(0, 0) == 0.0);
    CHECK(x.grad()(0, 1) == 1.0);
    CHECK(x.grad()(0, 2) == 0.0);
}

TEST_CASE("graph_conv examples")
{
    Tape tape;
    const Matrix h = (Matrix(1, 3) << 1.0, 2.0, 0.5).finished();
    const std::vector<Matrix> one{Matrix::Ones(1, 1)};
    CHECK(graph_conv(tape.constant(h), one, tape.constant(Matrix::Identity(3, 3))).value() == h);

    const std::vector<Matrix> two{Matrix::Ones(2, 2)};
    const Matrix y = graph_conv(tape.constant(Matrix::Identity(2, 2)), two, tape.constant(Matrix::Identity(2, 2))).value();
    CHECK(y == Matrix::Ones(2, 2));
}

TEST_CASE("backward visits each node once on a diamond")
{
    Tape tape;
    const Var x = tape.leaf(Matrix::Constant(1, 1, 2.0));
    const Var a = scale(x, 3.0), b = square(x);
    const Var y = sum(add(a, b));
    tape.backward(y);
    CHECK(tape.backward_visits() == tape.size());
    CHECK(x.grad()(0, 0) == doctest::Approx(3.0 + 4.0));
}

TEST_CASE("non-finite values are rejected")
{
    Tape tape;
    CHECK_THROWS(exp(tape.constant(Matrix::Constant(1, 1, 1000.0))));
}

TEST_CASE("categorical_sample")
{
    std::mt19937_64 rng(5);
    const std::vector<double> hot{0, 0, 1, 0, 0};
    const Sample s = categorical_sample(hot, rng);
    CHECK(s.index == 2);
    CHECK(s.log_prob == 0.0);

    const std::vector<double> bad{0.5, 0.6};
    CHECK_THROWS(categorical_sample(bad, rng));
    const std::vector<double> neg{1.5, -0.5};
    CHECK_THROWS(categorical_sample(neg, rng));

    // Chi-squared goodness of fit at the 0.001 level, 4 degrees of freedom.
    const std::vector<double> uniform(5, 0.2);
    std::array<int, 5> counts{};
    const int draws = 100000;
    for (int k = 0; k < draws; ++k)
        ++counts[categorical_sample(uniform, rng).index];
    double chi2 = 0.0;
    for (int c : counts)
    {
        chi2 += (c - draws * 0.2) * (c - draws * 0.2) / (draws * 0.2);
        const double sigma = std::sqrt(draws * 0.2 * 0.8);
        CHECK(std::abs(c - draws * 0.2) <= 3 * sigma);
    }
    CHECK(chi2 < boost::math::quantile(boost::math::chi_squared(4), 0.999));

    std::mt19937_64 r1(9), r2(9);
    for (int k = 0; k < 100; ++k)
        CHECK(categorical_sample(uniform, r1).index == categorical_sample(uniform, r2).index);
}

TEST_CASE("adam_step")
{
    Parameter p("p", Matrix::Constant(1, 1, 1.0));
    Parameter* ps[] = {&p};
    OptimizerState st;
    st.lr = 0.1;
    adam_step(ps, st);
    CHECK(p.value(0, 0) == 1.0);

    p.grad(0, 0) = 1.0;
    OptimizerState fresh;
    fresh.lr = 0.1;
    adam_step(ps, fresh);
    // m_hat = g, v_hat = g^2, so the first step is lr * g / (|g| + eps).
    CHECK(p.value(0, 0) - 1.0 == doctest::Approx(-0.1 / (1.0 + 1e-8)).epsilon(1e-12));

    Parameter q("q", Matrix::Zero(1, 1));
    Parameter* qs[] = {&q};
    OptimizerState s2;
    s2.lr = 0.01;
    double prev = 0.0;
    for (int k = 0; k < 500; ++k)
    {
        q.grad(0, 0) = -3.0;
        adam_step(qs, s2);
        const double step = q.value(0, 0) - prev;
        prev = q.value(0, 0);
        CHECK(step == doctest::Approx(0.01).epsilon(1e-6));
    }
}

TEST_CASE("clip_grad_norm")
{
    Parameter a("a", Matrix::Zero(1, 2)), b("b", Matrix::Zero(1, 1));
    a.grad << 3.0, 0.0;
    b.grad << 4.0;
    Parameter* ps[] = {&a, &b};
    CHECK(clip_grad_norm(ps, 1.0) == doctest::Approx(5.0));
    CHECK(a.grad(0, 0) == doctest::Approx(0.6));
    CHECK(b.grad(0, 0) == doctest::Approx(0.8));
}

TEST_CASE("checkpoint round-trip is bit exact")
{
    std::mt19937_64 rng(6);
    Checkpoint ck;
    ck.metadata = "{\"k\": 1}";
    ck.arrays["w"] = randn(rng, 7, 3);
    ck.arrays["b"] = randn(rng, 1, 3);
    const std::string path = "test_ndiff_checkpoint.bin";
    save_checkpoint(path, ck);
    const Checkpoint back = load_checkpoint(path);
    std::remove(path.c_str());
    CHECK(back.metadata == ck.metadata);
    CHECK(back.arrays.size() == 2);
    for (const auto& [k, v] : ck.arrays)
        CHECK(back.arrays.at(k) == v);
    CHECK_THROWS(load_checkpoint("does_not_exist.bin"));
}
