#include "galopp/policy.hpp"

namespace galopp
{

GraphBatch observe(const EnvState& state, const EnvConfig& config, const NetworkSpec& spec)
{
    const int n = static_cast<int>(state.agents.size());
    const int g = spec.input_size;
    GraphBatch batch;
    batch.observations.resize(n, 2 * g * g);
    batch.states.resize(n, 6);
    for (int i = 0; i < n; ++i)
    {
        const auto [stack, sv] = encode_observation(state.agents[i], state.maps[i].values, config.grid, spec);
        batch.observations.row(i) = stack.flatten();
        batch.states.row(i) = sv.transpose();
    }
    batch.adjacency.push_back(gcn_adjacency(state.graph, spec.gcn_norm));
    batch.agents_per_graph = n;
    return batch;
}

Inference infer(Network& net, const GraphBatch& batch)
{
    nd::Tape tape(false);
    const NetworkOutput out = net.forward(tape, batch);
    return {out.probs.value(), out.values.value().col(0)};
}

int argmax_action(const Eigen::Ref<const Eigen::RowVectorXd>& probs)
{
    Eigen::Index best = 0;
    probs.maxCoeff(&best);
    return static_cast<int>(best);
}

std::vector<Action> GaloppController::act(const EnvState& state, const EnvConfig& config, std::mt19937_64& rng)
{
    const Inference inf = infer(net_, observe(state, config, net_.spec()));
    std::vector<Action> actions;
    for (Eigen::Index i = 0; i < inf.probs.rows(); ++i)
    {
        if (greedy_)
        {
            actions.push_back(action_from_index(argmax_action(inf.probs.row(i))));
        }
        else
        {
            const Eigen::RowVectorXd p = inf.probs.row(i);
            actions.push_back(
                action_from_index(nd::categorical_sample(std::span<const double>(p.data(), p.size()), rng).index));
        }
    }
    return actions;
}

} // namespace galopp
