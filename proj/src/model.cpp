#include "galopp/model.hpp"

#include <json.hpp>

#include <cmath>
#include <random>
#include <stdexcept>

namespace galopp
{

std::vector<nd::ImageShape> NetworkSpec::shape_trace() const
{
    std::vector<nd::ImageShape> shapes;
    nd::ImageShape s{2, input_size, input_size};
    for (std::size_t i = 0; i < conv.size(); ++i)
    {
        const ConvLayerSpec& c = conv[i];
        if (c.in_channels != s.channels)
            throw std::invalid_argument("conv layer " + std::to_string(i) + " expects " +
                                        std::to_string(c.in_channels) + " channels, got " +
                                        std::to_string(s.channels));
        const int h = nd::conv_output_dim(s.height, c.kernel, c.stride, c.padding);
        const int w = nd::conv_output_dim(s.width, c.kernel, c.stride, c.padding);
        if (h < 1 || w < 1)
            throw std::invalid_argument("conv layer " + std::to_string(i) + " is infeasible on a " +
                                        std::to_string(s.height) + "x" + std::to_string(s.width) + " input");
        s = {c.out_channels, h, w};
        shapes.push_back(s);
    }
    return shapes;
}

int NetworkSpec::embedding_dim() const
{
    const auto shapes = shape_trace();
    return shapes.empty() ? 2 * input_size * input_size : shapes.back().size();
}

void NetworkSpec::validate() const
{
    if (input_size < 1)
        throw std::invalid_argument("input_size must be positive");
    if (state_dim != 6)
        throw std::invalid_argument("state vector has 6 entries");
    if (gcn_layers < 0)
        throw std::invalid_argument("gcn_layers must be non-negative");
    if (per_agent_actors && n_agents < 1)
        throw std::invalid_argument("per_agent_actors needs n_agents >= 1");
    (void)embedding_dim();
}

Eigen::RowVectorXd ObservationStack::flatten() const
{
    const Eigen::Index g = local.rows();
    Eigen::RowVectorXd row(2 * g * g);
    for (Eigen::Index y = 0; y < g; ++y)
        for (Eigen::Index x = 0; x < g; ++x)
        {
            row(y * g + x) = local(x, y);
            row(g * g + y * g + x) = mini(x, y);
        }
    return row;
}

namespace
{

// Row i holds the overlap of source cells with output interval i, normalized
// to unit row sum.
Matrix area_weights(int source, int target)
{
    Matrix w = Matrix::Zero(target, source);
    const double width = static_cast<double>(source) / target;
    for (int i = 0; i < target; ++i)
    {
        const double lo = i * width;
        const double hi = (i + 1) * width;
        for (int a = static_cast<int>(std::floor(lo)); a < source && a < hi; ++a)
        {
            const double overlap = std::min(hi, a + 1.0) - std::max(lo, static_cast<double>(a));
            if (overlap > 0.0)
                w(i, a) = overlap / width;
        }
    }
    return w;
}

} // namespace

Matrix downsample_minimap(const CellArray& map, int target)
{
    if (target < 1 || target > map.rows() || target > map.cols())
        throw std::invalid_argument("downsample target larger than source map");
    const Matrix wx = area_weights(static_cast<int>(map.rows()), target);
    const Matrix wy = area_weights(static_cast<int>(map.cols()), target);
    return wx * map.matrix() * wy.transpose();
}

std::pair<ObservationStack, StateVector> encode_observation(const AgentState& agent, const CellArray& map_copy,
                                                            const GridSpec& grid, const NetworkSpec& spec)
{
    const int g = spec.input_size;
    const int half = g / 2;
    const double inv = 1.0 / grid.max_penalty;

    int cx = agent.position.x, cy = agent.position.y;
    if (!spec.center_on_true_position)
    {
        cx = static_cast<int>(std::lround(agent.belief.mean.x()));
        cy = static_cast<int>(std::lround(agent.belief.mean.y()));
    }

    ObservationStack stack;
    stack.local = Matrix::Zero(g, g);
    for (int dx = -half; dx < g - half; ++dx)
        for (int dy = -half; dy < g - half; ++dy)
        {
            const Cell c{cx + dx, cy + dy};
            if (grid.in_bounds(c))
                stack.local(dx + half, dy + half) = map_copy(c.x, c.y) * inv;
        }
    stack.mini = downsample_minimap(map_copy, g) * inv;

    StateVector state;
    state << agent.belief.mean, agent.belief.cov(0, 0), agent.belief.cov(0, 1), agent.belief.cov(1, 0),
        agent.belief.cov(1, 1);
    return {std::move(stack), state};
}

namespace
{

Matrix he_uniform(Eigen::Index rows, Eigen::Index cols, int fan_in, std::mt19937_64& rng)
{
    const double bound = std::sqrt(6.0 / fan_in);
    std::uniform_real_distribution<double> u(-bound, bound);
    Matrix m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i)
            m(i, j) = u(rng);
    return m;
}

} // namespace

Network::Network(NetworkSpec spec, std::uint64_t seed) : spec_(std::move(spec))
{
    spec_.validate();
    std::mt19937_64 rng(seed);

    for (std::size_t i = 0; i < spec_.conv.size(); ++i)
    {
        const ConvLayerSpec& c = spec_.conv[i];
        const int fan_in = c.in_channels * c.kernel * c.kernel;
        const std::string name = "conv" + std::to_string(i);
        conv_.push_back({nd::Parameter(name + ".kernel", he_uniform(c.out_channels, fan_in, fan_in, rng)),
                         nd::Parameter(name + ".bias", Matrix::Zero(1, c.out_channels)), c});
    }

    const int d = spec_.info_dim();
    for (int k = 0; k < spec_.gcn_layers; ++k)
        gcn_.emplace_back("gcn" + std::to_string(k) + ".weight", he_uniform(d, d, d, rng));

    auto make_mlp = [&](const std::string& prefix, const std::vector<int>& hidden, int out) {
        std::vector<Dense> layers;
        int in = d;
        std::vector<int> widths = hidden;
        widths.push_back(out);
        for (std::size_t i = 0; i < widths.size(); ++i)
        {
            const std::string name = prefix + ".linear" + std::to_string(i);
            layers.push_back({nd::Parameter(name + ".weight", he_uniform(in, widths[i], in, rng)),
                              nd::Parameter(name + ".bias", Matrix::Zero(1, widths[i]))});
            in = widths[i];
        }
        return layers;
    };
    const int n_actors = spec_.per_agent_actors ? spec_.n_agents : 1;
    for (int a = 0; a < n_actors; ++a)
        actors_.push_back(make_mlp(n_actors == 1 ? "actor" : "actor" + std::to_string(a), spec_.actor_hidden,
                                   action_count));
    critic_ = make_mlp("critic", spec_.critic_hidden, 1);
}

std::vector<nd::Parameter*> Network::parameters()
{
    std::vector<nd::Parameter*> out;
    for (auto& c : conv_)
    {
        out.push_back(&c.kernel);
        out.push_back(&c.bias);
    }
    for (auto& w : gcn_)
        out.push_back(&w);
    for (auto& actor : actors_)
        for (auto& l : actor)
        {
            out.push_back(&l.weight);
            out.push_back(&l.bias);
        }
    for (auto& l : critic_)
    {
        out.push_back(&l.weight);
        out.push_back(&l.bias);
    }
    return out;
}

std::size_t Network::parameter_count() const
{
    std::size_t n = 0;
    for (auto* p : const_cast<Network*>(this)->parameters())
        n += static_cast<std::size_t>(p->value.size());
    return n;
}

nd::Var Network::conv_embed(nd::Tape& tape, nd::Var observations)
{
    nd::ImageShape shape{2, spec_.input_size, spec_.input_size};
    if (observations.cols() != shape.size())
        throw std::invalid_argument("conv_embed: observation width " + std::to_string(observations.cols()) +
                                    " does not match a 2x" + std::to_string(spec_.input_size) + "x" +
                                    std::to_string(spec_.input_size) + " stack");
    nd::Var x = observations;
    for (auto& c : conv_)
    {
        nd::ImageShape next;
        x = nd::relu(nd::conv2d(x, shape, tape.param(c.kernel), tape.param(c.bias), c.spec.kernel, c.spec.stride,
                                c.spec.padding, &next));
        shape = next;
    }
    return nd::flatten(x);
}

nd::Var Network::build_information_vector(nd::Tape& tape, nd::Var embedding, const Matrix& states)
{
    if (states.cols() != spec_.state_dim || states.rows() != embedding.rows())
        throw std::invalid_argument("build_information_vector: state matrix shape mismatch");
    Eigen::RowVectorXd s(6);
    s << spec_.position_scale, spec_.position_scale, spec_.covariance_scale, spec_.covariance_scale,
        spec_.covariance_scale, spec_.covariance_scale;
    const Matrix scaled = states.array().rowwise() * s.array();
    return nd::concat_cols(embedding, tape.constant(scaled));
}

nd::Var Network::graphnet_aggregate(nd::Tape& tape, nd::Var info, std::span<const Matrix> adjacency)
{
    nd::Var h = info;
    for (auto& w : gcn_)
        h = nd::graph_conv(h, adjacency, tape.param(w));
    return h;
}

nd::Var Network::mlp(nd::Tape& tape, nd::Var x, std::vector<Dense>& layers)
{
    for (std::size_t i = 0; i < layers.size(); ++i)
    {
        x = nd::linear(x, tape.param(layers[i].weight), tape.param(layers[i].bias));
        if (i + 1 < layers.size())
            x = nd::relu(x);
    }
    return x;
}

nd::Var Network::actor_logits(nd::Tape& tape, nd::Var aggregated, int agents_per_graph)
{
    if (actors_.size() == 1)
        return mlp(tape, aggregated, actors_.front());
    if (agents_per_graph != static_cast<int>(actors_.size()))
        throw std::invalid_argument("per-agent actors need one actor per agent in every graph");
    std::vector<std::vector<int>> rows(actors_.size());
    for (Eigen::Index r = 0; r < aggregated.rows(); ++r)
        rows[r % agents_per_graph].push_back(static_cast<int>(r));
    std::vector<nd::Var> parts;
    for (std::size_t a = 0; a < actors_.size(); ++a)
        parts.push_back(mlp(tape, nd::gather_rows(aggregated, rows[a]), actors_[a]));
    return nd::scatter_rows(parts, rows, aggregated.rows());
}

nd::Var Network::critic_forward(nd::Tape& tape, nd::Var input)
{
    return mlp(tape, input, critic_);
}

NetworkOutput Network::forward(nd::Tape& tape, const GraphBatch& batch)
{
    if (batch.states.rows() != batch.rows())
        throw std::invalid_argument("forward: observation and state rows differ");
    NetworkOutput out;
    out.embedding = conv_embed(tape, tape.constant(batch.observations));
    out.info = build_information_vector(tape, out.embedding, batch.states);
    out.aggregated = graphnet_aggregate(tape, out.info, batch.adjacency);
    out.logits = actor_logits(tape, out.aggregated, batch.agents_per_graph);
    out.log_probs = nd::log_softmax_rows(out.logits);
    out.probs = nd::exp(out.log_probs);
    out.values = critic_forward(tape, spec_.critic_uses_aggregated ? out.aggregated : out.info);
    return out;
}

nd::Checkpoint Network::to_checkpoint() const
{
    nd::Checkpoint ck;
    ck.metadata = network_spec_to_json(spec_);
    for (auto* p : const_cast<Network*>(this)->parameters())
        ck.arrays.emplace(p->name, p->value);
    return ck;
}

void Network::load_parameters(const nd::Checkpoint& ck)
{
    for (auto* p : parameters())
    {
        auto it = ck.arrays.find(p->name);
        if (it == ck.arrays.end())
            throw std::runtime_error("checkpoint lacks parameter " + p->name);
        if (it->second.rows() != p->value.rows() || it->second.cols() != p->value.cols())
            throw std::runtime_error("checkpoint shape mismatch for " + p->name);
        p->value = it->second;
        p->zero_grad();
    }
}

Network Network::from_checkpoint(const nd::Checkpoint& ck)
{
    Network net(network_spec_from_json(ck.metadata), 0);
    net.load_parameters(ck);
    return net;
}

std::string network_spec_to_json(const NetworkSpec& s)
{
    nlohmann::json j;
    j["input_size"] = s.input_size;
    j["conv"] = nlohmann::json::array();
    for (const auto& c : s.conv)
        j["conv"].push_back({{"in_channels", c.in_channels},
                             {"out_channels", c.out_channels},
                             {"kernel", c.kernel},
                             {"stride", c.stride},
                             {"padding", c.padding}});
    j["state_dim"] = s.state_dim;
    j["gcn_layers"] = s.gcn_layers;
    j["actor_hidden"] = s.actor_hidden;
    j["critic_hidden"] = s.critic_hidden;
    j["gcn_norm"] = std::string(to_string(s.gcn_norm));
    j["critic_uses_aggregated"] = s.critic_uses_aggregated;
    j["per_agent_actors"] = s.per_agent_actors;
    j["n_agents"] = s.n_agents;
    j["center_on_true_position"] = s.center_on_true_position;
    j["position_scale"] = s.position_scale;
    j["covariance_scale"] = s.covariance_scale;
    return j.dump();
}

NetworkSpec network_spec_from_json(const std::string& text)
{
    const auto j = nlohmann::json::parse(text);
    NetworkSpec s;
    s.input_size = j.value("input_size", s.input_size);
    if (j.contains("conv"))
    {
        s.conv.clear();
        for (const auto& c : j["conv"])
            s.conv.push_back({c.at("in_channels").get<int>(), c.at("out_channels").get<int>(),
                              c.at("kernel").get<int>(), c.at("stride").get<int>(), c.at("padding").get<int>()});
    }
    s.state_dim = j.value("state_dim", s.state_dim);
    s.gcn_layers = j.value("gcn_layers", s.gcn_layers);
    s.actor_hidden = j.value("actor_hidden", s.actor_hidden);
    s.critic_hidden = j.value("critic_hidden", s.critic_hidden);
    s.gcn_norm = gcn_norm_from_string(j.value("gcn_norm", std::string("none")));
    s.critic_uses_aggregated = j.value("critic_uses_aggregated", s.critic_uses_aggregated);
    s.per_agent_actors = j.value("per_agent_actors", s.per_agent_actors);
    s.n_agents = j.value("n_agents", s.n_agents);
    s.center_on_true_position = j.value("center_on_true_position", s.center_on_true_position);
    s.position_scale = j.value("position_scale", s.position_scale);
    s.covariance_scale = j.value("covariance_scale", s.covariance_scale);
    return s;
}

} // namespace galopp
