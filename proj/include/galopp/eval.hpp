#pragma once

#include "galopp/baselines.hpp"
#include "galopp/env.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace galopp
{

struct StepRecord
{
    std::vector<Cell> positions;
    std::vector<char> localized;
    CellArray field;
    double reward = 0.0;
};

/// Everything needed to redraw an episode.
struct EpisodeLog
{
    GridSpec grid;
    double comm_range = 0.0;
    int sensing_range = 0;
    std::vector<Role> roles;
    std::vector<StepRecord> steps; // steps[0] is the reset state

    std::string to_json() const;
    static EpisodeLog from_json(const std::string& text);
};

struct EpisodeResult
{
    double total_reward = 0.0;     // sum over t = 1..T of the team reward
    std::vector<int> unlocalized;  // per agent, steps spent unlocalized
    int steps = 0;
    std::optional<EpisodeLog> log;
};

using EnvFactory = std::function<EnvConfig(std::uint64_t episode_seed)>;

struct EpisodeSpec
{
    int n_agents = 2;
    int n_anchors = 1;
    int steps = 200;
    ResetOptions reset;
};

EpisodeResult run_episode(Controller& controller, const EnvConfig& config, const EpisodeSpec& spec,
                          std::uint64_t seed, bool keep_log = false);

struct EvalReport
{
    std::string policy;
    std::vector<double> episode_rewards;
    double mean = 0.0;
    std::optional<double> ci95; // half-width; absent for fewer than two episodes
    std::vector<double> disconnection_percent; // per auxiliary, averaged over episodes
    double mean_disconnection = 0.0;
    std::vector<std::uint64_t> seeds;

    double lower() const { return mean - ci95.value_or(0.0); }
    double upper() const { return mean + ci95.value_or(0.0); }
};

/// Episode k uses environment seed derive_seed(seed, k) and a separate policy stream.
EvalReport run_eval(Controller& controller, const EnvFactory& make_env, const EpisodeSpec& spec, int episodes,
                    std::uint64_t seed);

/// Half-width of the two-sided t confidence interval for the mean.
std::optional<double> confidence_half_width(std::span<const double> samples, double level = 0.95);

/// Percent of logged steps (excluding the reset state) each auxiliary spent
/// unlocalized, in agent order.
std::vector<double> disconnection_stats(const EpisodeLog& log);

/// Closed-form episode reward when nothing is ever monitored.
double no_monitoring_reward(const GridSpec& grid, int steps);

} // namespace galopp
