#include "galopp/config.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

namespace galopp
{

namespace
{

Matrix2 covariance_from_json(const nlohmann::json& j)
{
    if (j.is_number())
        return j.get<double>() * Matrix2::Identity();
    const auto rows = j.get<std::vector<std::vector<double>>>();
    if (rows.size() != 2 || rows[0].size() != 2 || rows[1].size() != 2)
        throw std::invalid_argument("covariance must be a scalar or a 2x2 array");
    Matrix2 m;
    m << rows[0][0], rows[0][1], rows[1][0], rows[1][1];
    return m;
}

nlohmann::json covariance_to_json(const Matrix2& m)
{
    return {{m(0, 0), m(0, 1)}, {m(1, 0), m(1, 1)}};
}

} // namespace

EnvConfig RunConfig::make_env(std::uint64_t episode_seed) const
{
    EnvConfig c;
    if (map == "open")
        c.grid = GridSpec::open(width, height, decay, max_penalty);
    else if (map == "generated")
        c.grid = generate_obstacles(width, height, obstacle_fraction, derive_seed(episode_seed, 0x6d6170), decay,
                                    max_penalty);
    else
        c.grid = load_map_file(map, decay, max_penalty);
    c.sensor.range = sensing_range;
    c.comm_range = comm_range;
    c.motion.process_noise = process_noise;
    c.observation.measurement_noise = measurement_noise;
    c.reset_cov = reset_covariance;
    c.map_mode = map_mode;
    return c;
}

EnvFactory RunConfig::env_factory() const
{
    if (map == "generated")
        return [cfg = *this](std::uint64_t s) { return cfg.make_env(s); };
    return [env = make_env(0)](std::uint64_t) { return env; };
}

EpisodeSpec RunConfig::episode_spec() const
{
    return {n_agents, n_anchors, episode_length, {}};
}

NetworkSpec RunConfig::resolved_network() const
{
    NetworkSpec s = network;
    const EnvConfig env = make_env(seed);
    s.position_scale = 1.0 / std::max(env.grid.width, env.grid.height);
    s.n_agents = n_agents;
    return s;
}

double RunConfig::resolved_reward_scale() const
{
    if (ppo.reward_scale > 0.0)
        return ppo.reward_scale;
    const EnvConfig env = make_env(seed);
    return 1.0 / (static_cast<double>(env.grid.width) * env.grid.height * max_penalty);
}

nlohmann::json RunConfig::to_json() const
{
    nlohmann::json j;
    j["map"] = map;
    j["width"] = width;
    j["height"] = height;
    j["obstacle_fraction"] = obstacle_fraction;
    j["decay"] = decay;
    j["max_penalty"] = max_penalty;
    j["sensing_range"] = sensing_range;
    j["comm_range"] = comm_range;
    j["episode_length"] = episode_length;
    j["n_agents"] = n_agents;
    j["n_anchors"] = n_anchors;
    j["process_noise"] = covariance_to_json(process_noise);
    j["measurement_noise"] = covariance_to_json(measurement_noise);
    j["reset_covariance"] = covariance_to_json(reset_covariance);
    j["map_mode"] = std::string(to_string(map_mode));
    j["seed"] = seed;
    j["eval_episodes"] = eval_episodes;
    j["eval_stochastic"] = eval_stochastic;
    j["network"] = nlohmann::json::parse(network_spec_to_json(network));
    j["ppo"] = {{"gamma", ppo.gamma},
                {"clip", ppo.clip},
                {"minibatch", ppo.minibatch},
                {"epochs", ppo.epochs},
                {"value_coef", ppo.value_coef},
                {"entropy_coef", ppo.entropy_coef},
                {"lr", ppo.lr},
                {"max_grad_norm", ppo.max_grad_norm},
                {"normalize_advantages", ppo.normalize_advantages},
                {"episodes", ppo.episodes},
                {"reward_scale", ppo.reward_scale},
                {"eval_interval", ppo.eval_interval},
                {"eval_episodes", ppo.eval_episodes},
                {"checkpoint_interval", ppo.checkpoint_interval}};
    return j;
}

RunConfig RunConfig::from_json(const nlohmann::json& j)
{
    static const char* known[] = {"map", "width", "height", "obstacle_fraction", "decay", "max_penalty",
                                  "sensing_range", "comm_range", "episode_length", "n_agents", "n_anchors",
                                  "process_noise", "measurement_noise", "reset_covariance", "map_mode", "seed",
                                  "eval_episodes", "eval_stochastic", "network", "ppo"};
    for (const auto& [key, _] : j.items())
        if (std::find(std::begin(known), std::end(known), key) == std::end(known))
            throw std::invalid_argument("unknown config key: " + key);

    RunConfig c;
    c.map = j.value("map", c.map);
    c.width = j.value("width", c.width);
    c.height = j.value("height", c.height);
    c.obstacle_fraction = j.value("obstacle_fraction", c.obstacle_fraction);
    c.decay = j.value("decay", c.decay);
    c.max_penalty = j.value("max_penalty", c.max_penalty);
    c.sensing_range = j.value("sensing_range", c.sensing_range);
    c.comm_range = j.value("comm_range", c.comm_range);
    c.episode_length = j.value("episode_length", c.episode_length);
    c.n_agents = j.value("n_agents", c.n_agents);
    c.n_anchors = j.value("n_anchors", c.n_anchors);
    if (j.contains("process_noise"))
        c.process_noise = covariance_from_json(j["process_noise"]);
    if (j.contains("measurement_noise"))
        c.measurement_noise = covariance_from_json(j["measurement_noise"]);
    if (j.contains("reset_covariance"))
        c.reset_covariance = covariance_from_json(j["reset_covariance"]);
    c.map_mode = map_mode_from_string(j.value("map_mode", std::string("decentralized")));
    c.seed = j.value("seed", c.seed);
    c.eval_episodes = j.value("eval_episodes", c.eval_episodes);
    c.eval_stochastic = j.value("eval_stochastic", c.eval_stochastic);
    if (j.contains("network"))
        c.network = network_spec_from_json(j["network"].dump());
    if (j.contains("ppo"))
    {
        const auto& p = j["ppo"];
        c.ppo.gamma = p.value("gamma", c.ppo.gamma);
        c.ppo.clip = p.value("clip", c.ppo.clip);
        c.ppo.minibatch = p.value("minibatch", c.ppo.minibatch);
        c.ppo.epochs = p.value("epochs", c.ppo.epochs);
        c.ppo.value_coef = p.value("value_coef", c.ppo.value_coef);
        c.ppo.entropy_coef = p.value("entropy_coef", c.ppo.entropy_coef);
        c.ppo.lr = p.value("lr", c.ppo.lr);
        c.ppo.max_grad_norm = p.value("max_grad_norm", c.ppo.max_grad_norm);
        c.ppo.normalize_advantages = p.value("normalize_advantages", c.ppo.normalize_advantages);
        c.ppo.episodes = p.value("episodes", c.ppo.episodes);
        c.ppo.reward_scale = p.value("reward_scale", c.ppo.reward_scale);
        c.ppo.eval_interval = p.value("eval_interval", c.ppo.eval_interval);
        c.ppo.eval_episodes = p.value("eval_episodes", c.ppo.eval_episodes);
        c.ppo.checkpoint_interval = p.value("checkpoint_interval", c.ppo.checkpoint_interval);
    }
    if (c.n_anchors < 1 || c.n_anchors > c.n_agents)
        throw std::invalid_argument("config requires 1 <= n_anchors <= n_agents");
    if (c.sensing_range < 0 || c.comm_range < 0.0)
        throw std::invalid_argument("ranges must be non-negative");
    c.ppo.validate();
    return c;
}

RunConfig RunConfig::load(const std::string& path)
{
    std::ifstream f(path);
    if (!f)
        throw std::runtime_error("cannot open config " + path);
    return from_json(nlohmann::json::parse(f));
}

} // namespace galopp
