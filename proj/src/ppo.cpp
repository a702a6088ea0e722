#include "galopp/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace galopp
{

void PPOConfig::validate() const
{
    if (!(gamma >= 0.0 && gamma < 1.0))
        throw std::invalid_argument("gamma must lie in [0, 1)");
    if (!(clip > 0.0))
        throw std::invalid_argument("clip radius must be positive");
    if (minibatch < 1)
        throw std::invalid_argument("minibatch size must be at least 1");
    if (epochs < 1)
        throw std::invalid_argument("epochs must be at least 1");
}

GraphBatch RolloutBuffer::batch(std::span<const int> step_ids) const
{
    GraphBatch b;
    b.agents_per_graph = n_agents;
    const Eigen::Index rows = static_cast<Eigen::Index>(step_ids.size()) * n_agents;
    b.observations.resize(rows, observations.cols());
    b.states.resize(rows, states.cols());
    Eigen::Index r = 0;
    for (int t : step_ids)
    {
        b.observations.middleRows(r, n_agents) = observations.middleRows(static_cast<Eigen::Index>(t) * n_agents, n_agents);
        b.states.middleRows(r, n_agents) = states.middleRows(static_cast<Eigen::Index>(t) * n_agents, n_agents);
        b.adjacency.push_back(adjacency[t]);
        r += n_agents;
    }
    return b;
}

void RolloutBuffer::append(const RolloutBuffer& other)
{
    if (steps == 0)
    {
        *this = other;
        return;
    }
    if (other.n_agents != n_agents)
        throw std::invalid_argument("append: agent counts differ");
    Matrix obs(observations.rows() + other.observations.rows(), observations.cols());
    obs << observations, other.observations;
    observations = std::move(obs);
    Matrix st(states.rows() + other.states.rows(), states.cols());
    st << states, other.states;
    states = std::move(st);
    for (int s : other.episode_starts)
        episode_starts.push_back(s + steps);
    adjacency.insert(adjacency.end(), other.adjacency.begin(), other.adjacency.end());
    actions.insert(actions.end(), other.actions.begin(), other.actions.end());
    log_probs.insert(log_probs.end(), other.log_probs.begin(), other.log_probs.end());
    values.insert(values.end(), other.values.begin(), other.values.end());
    rewards.insert(rewards.end(), other.rewards.begin(), other.rewards.end());
    raw_rewards.insert(raw_rewards.end(), other.raw_rewards.begin(), other.raw_rewards.end());
    steps += other.steps;
}

RolloutBuffer collect_rollout(EnvState& state, const EnvConfig& config, Network& policy, int steps,
                              std::mt19937_64& rng, double reward_scale, bool greedy)
{
    const int n = static_cast<int>(state.agents.size());
    const int width = 2 * policy.spec().input_size * policy.spec().input_size;
    RolloutBuffer buf;
    buf.n_agents = n;
    buf.steps = steps;
    buf.observations.resize(static_cast<Eigen::Index>(steps) * n, width);
    buf.states.resize(static_cast<Eigen::Index>(steps) * n, 6);
    buf.episode_starts.push_back(0);

    std::vector<Action> joint(n);
    for (int t = 0; t < steps; ++t)
    {
        GraphBatch b = observe(state, config, policy.spec());
        const Inference inf = infer(policy, b);
        for (int i = 0; i < n; ++i)
        {
            const Eigen::RowVectorXd p = inf.probs.row(i);
            int a = 0;
            if (greedy)
                a = argmax_action(p);
            else
                a = nd::categorical_sample(std::span<const double>(p.data(), p.size()), rng).index;
            joint[i] = action_from_index(a);
            buf.actions.push_back(a);
            buf.log_probs.push_back(std::log(p(a)));
            buf.values.push_back(inf.values(i));
        }
        buf.observations.middleRows(static_cast<Eigen::Index>(t) * n, n) = b.observations;
        buf.states.middleRows(static_cast<Eigen::Index>(t) * n, n) = b.states;
        buf.adjacency.push_back(std::move(b.adjacency.front()));

        const StepResult r = env_step(state, config, joint);
        buf.raw_rewards.push_back(r.reward);
        buf.rewards.push_back(r.reward * reward_scale);
    }
    return buf;
}

std::vector<double> discounted_returns(std::span<const double> rewards, double gamma)
{
    std::vector<double> g(rewards.size());
    double next = 0.0;
    for (std::size_t k = rewards.size(); k-- > 0;)
    {
        next = rewards[k] + gamma * next;
        g[k] = next;
    }
    return g;
}

std::vector<double> buffer_returns(const RolloutBuffer& buffer, double gamma)
{
    std::vector<double> out;
    out.reserve(buffer.rewards.size());
    for (std::size_t e = 0; e < buffer.episode_starts.size(); ++e)
    {
        const std::size_t begin = buffer.episode_starts[e];
        const std::size_t end =
            e + 1 < buffer.episode_starts.size() ? buffer.episode_starts[e + 1] : buffer.rewards.size();
        const auto g = discounted_returns(std::span<const double>(buffer.rewards).subspan(begin, end - begin), gamma);
        out.insert(out.end(), g.begin(), g.end());
    }
    return out;
}

std::vector<double> advantages(std::span<const double> returns, std::span<const double> values, int n_agents,
                               bool normalize)
{
    if (values.size() != returns.size() * static_cast<std::size_t>(n_agents))
        throw std::invalid_argument("advantages: values must hold one entry per step and agent");
    std::vector<double> adv(values.size());
    for (std::size_t k = 0; k < values.size(); ++k)
        adv[k] = returns[k / n_agents] - values[k];
    if (normalize && adv.size() > 1)
    {
        const double mean = std::accumulate(adv.begin(), adv.end(), 0.0) / static_cast<double>(adv.size());
        double ss = 0.0;
        for (double a : adv)
            ss += (a - mean) * (a - mean);
        const double sd = std::sqrt(ss / static_cast<double>(adv.size()));
        for (double& a : adv)
            a = (a - mean) / std::max(sd, 1e-8);
    }
    return adv;
}

double clipped_surrogate(double ratio, double advantage, double eps)
{
    return std::min(ratio * advantage, std::clamp(ratio, 1.0 - eps, 1.0 + eps) * advantage);
}

nd::Var clipped_objective(nd::Var new_log_probs, const Vector& old_log_probs, const Vector& advantage, double eps)
{
    nd::Tape& t = *new_log_probs.tape;
    if (new_log_probs.rows() != old_log_probs.size() || advantage.size() != old_log_probs.size())
        throw std::invalid_argument("clipped_objective: misaligned inputs");
    const nd::Var ratio = nd::exp(nd::sub(new_log_probs, t.constant(old_log_probs)));
    const nd::Var adv = t.constant(advantage);
    const nd::Var unclipped = nd::mul(ratio, adv);
    const nd::Var clipped = nd::mul(nd::clamp(ratio, 1.0 - eps, 1.0 + eps), adv);
    return nd::scale(nd::mean(nd::minimum(unclipped, clipped)), -1.0);
}

UpdateStats ppo_update(const RolloutBuffer& buffer, const PPOConfig& config, Network& net,
                       nd::OptimizerState& optimizer, std::mt19937_64& rng)
{
    if (buffer.steps == 0)
        throw std::invalid_argument("ppo_update: empty buffer");
    config.validate();
    optimizer.lr = config.lr;
    const int n = buffer.n_agents;
    const std::vector<double> returns = buffer_returns(buffer, config.gamma);
    const std::vector<double> adv = advantages(returns, buffer.values, n, config.normalize_advantages);

    std::vector<int> order(buffer.steps);
    std::iota(order.begin(), order.end(), 0);
    const int steps_per_batch = std::max(1, config.minibatch / n);
    std::vector<nd::Parameter*> params = net.parameters();

    UpdateStats stats;
    for (int epoch = 0; epoch < config.epochs; ++epoch)
    {
        std::shuffle(order.begin(), order.end(), rng);
        for (int start = 0; start < buffer.steps; start += steps_per_batch)
        {
            const int count = std::min(steps_per_batch, buffer.steps - start);
            const std::span<const int> ids(order.data() + start, count);
            const GraphBatch batch = buffer.batch(ids);
            const Eigen::Index rows = batch.rows();

            std::vector<int> acts(rows);
            Vector old_lp(rows), a_hat(rows), target(rows);
            for (int k = 0; k < count; ++k)
                for (int i = 0; i < n; ++i)
                {
                    const std::size_t src = static_cast<std::size_t>(ids[k]) * n + i;
                    const Eigen::Index r = static_cast<Eigen::Index>(k) * n + i;
                    acts[r] = buffer.actions[src];
                    old_lp(r) = buffer.log_probs[src];
                    a_hat(r) = adv[src];
                    target(r) = returns[ids[k]];
                }

            nd::Tape tape;
            const NetworkOutput out = net.forward(tape, batch);
            const nd::Var new_lp = nd::pick(out.log_probs, acts);
            const nd::Var policy_loss = clipped_objective(new_lp, old_lp, a_hat, config.clip);
            const nd::Var value_loss = nd::mean(nd::square(nd::sub(out.values, tape.constant(target))));
            const nd::Var entropy =
                nd::scale(nd::sum(nd::mul(out.probs, out.log_probs)), -1.0 / static_cast<double>(rows));
            const nd::Var loss = nd::sub(nd::add(policy_loss, nd::scale(value_loss, config.value_coef)),
                                         nd::scale(entropy, config.entropy_coef));

            for (auto* p : params)
                p->zero_grad();
            tape.backward(loss);
            stats.grad_norm = nd::clip_grad_norm(params, config.max_grad_norm);
            nd::adam_step(params, optimizer);

            stats.policy_loss += policy_loss.value()(0, 0);
            stats.value_loss += value_loss.value()(0, 0);
            stats.entropy += entropy.value()(0, 0);
            ++stats.minibatches;
        }
    }
    if (stats.minibatches > 0)
    {
        stats.policy_loss /= stats.minibatches;
        stats.value_loss /= stats.minibatches;
        stats.entropy /= stats.minibatches;
    }
    return stats;
}

} // namespace galopp
