#pragma once

#include "galopp/env.hpp"
#include "galopp/eval.hpp"
#include "galopp/model.hpp"
#include "galopp/ppo.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>

namespace galopp
{

/// Run configuration; serialized as a flat-ish JSON object.
struct RunConfig
{
    std::string map = "open"; // "open", "generated", or a path to a '#'/'.' map file
    int width = 20;
    int height = 20;
    double obstacle_fraction = 0.0; // used by "generated"; regenerated per episode
    double decay = 1.0;
    double max_penalty = 400.0;
    int sensing_range = 3;
    double comm_range = 12.0;
    int episode_length = 200;
    int n_agents = 2;
    int n_anchors = 1;
    Matrix2 process_noise = 0.5 * Matrix2::Identity();
    Matrix2 measurement_noise = 1e-4 * Matrix2::Identity();
    Matrix2 reset_covariance = Matrix2::Zero();
    MapMode map_mode = MapMode::decentralized;
    std::uint64_t seed = 0;
    int eval_episodes = 100;
    bool eval_stochastic = false;
    NetworkSpec network;
    PPOConfig ppo;

    /// Environment for one episode; a generated map depends on the seed.
    EnvConfig make_env(std::uint64_t episode_seed) const;
    EnvFactory env_factory() const;
    EpisodeSpec episode_spec() const;
    /// Network spec with grid-dependent fields filled in.
    NetworkSpec resolved_network() const;
    double resolved_reward_scale() const;

    nlohmann::json to_json() const;
    static RunConfig from_json(const nlohmann::json& j);
    static RunConfig load(const std::string& path);
};

} // namespace galopp
