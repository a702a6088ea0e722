#pragma once

#include "galopp/config.hpp"

#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace galopp
{

struct CurveRow
{
    int episode = 0;
    double train_reward = 0.0; // unscaled episode sum of the team reward
    double eval_reward = std::numeric_limits<double>::quiet_NaN();
    double policy_loss = 0.0;
    double value_loss = 0.0;
    double entropy = 0.0;
};

struct TrainOptions
{
    std::string out_dir; // empty: nothing written
    std::function<void(const CurveRow&)> progress;
};

struct TrainResult
{
    Network network;
    std::vector<CurveRow> curve;
};

/// reset -> collect_rollout -> ppo_update per episode, with periodic
/// evaluation (greedy unless eval_stochastic) and checkpointing.
TrainResult train(const RunConfig& config, const TrainOptions& options = {});

void write_curve_csv(const std::string& path, const std::vector<CurveRow>& curve);

} // namespace galopp
