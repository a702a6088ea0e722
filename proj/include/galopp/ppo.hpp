#pragma once

#include "galopp/env.hpp"
#include "galopp/model.hpp"
#include "galopp/policy.hpp"

#include <random>
#include <span>
#include <vector>

namespace galopp
{

struct PPOConfig
{
    double gamma = 0.99;
    double clip = 0.2;
    int minibatch = 64; // timestep-agent samples, rounded to whole timesteps
    int epochs = 4;
    double value_coef = 0.5;
    double entropy_coef = 0.01;
    double lr = 3e-4;
    double max_grad_norm = 0.5;
    bool normalize_advantages = true;
    int episodes = 2000;
    double reward_scale = 0.0; // 0 selects 1 / (A * B * R_max)
    int eval_interval = 100;
    int eval_episodes = 10;
    int checkpoint_interval = 0;

    void validate() const;
};

/// One or more episodes of joint experience. Index k = t * n_agents + i.
struct RolloutBuffer
{
    int n_agents = 0;
    int steps = 0;
    Matrix observations;
    Matrix states;
    std::vector<Matrix> adjacency; // per step
    std::vector<int> actions;
    std::vector<double> log_probs;
    std::vector<double> values;
    std::vector<double> rewards;     // scaled shared reward following step t
    std::vector<double> raw_rewards; // unscaled team reward
    std::vector<int> episode_starts;

    /// Rows of the listed steps, in order, as one graph batch.
    GraphBatch batch(std::span<const int> step_ids) const;
    void append(const RolloutBuffer& other);
};

/// Rolls the policy for `steps` ticks from the given (reset) state.
RolloutBuffer collect_rollout(EnvState& state, const EnvConfig& config, Network& policy, int steps,
                              std::mt19937_64& rng, double reward_scale, bool greedy = false);

/// G(t) = r(t) + gamma * G(t + 1) within one episode, where r(t) is the
/// reward that follows the action taken at t.
std::vector<double> discounted_returns(std::span<const double> rewards, double gamma);

/// Returns for a buffer that may hold several episodes.
std::vector<double> buffer_returns(const RolloutBuffer& buffer, double gamma);

/// A(t, i) = G(t) - V(s_t^i), optionally standardized over the batch.
std::vector<double> advantages(std::span<const double> returns, std::span<const double> values, int n_agents,
                               bool normalize);

/// min(r A, clip(r, 1 - eps, 1 + eps) A) for one sample.
double clipped_surrogate(double ratio, double advantage, double eps);

/// Negated mean clipped surrogate over aligned samples.
nd::Var clipped_objective(nd::Var new_log_probs, const Vector& old_log_probs, const Vector& advantage, double eps);

struct UpdateStats
{
    double policy_loss = 0.0;
    double value_loss = 0.0;
    double entropy = 0.0;
    double grad_norm = 0.0;
    int minibatches = 0;
};

UpdateStats ppo_update(const RolloutBuffer& buffer, const PPOConfig& config, Network& net,
                       nd::OptimizerState& optimizer, std::mt19937_64& rng);

} // namespace galopp
