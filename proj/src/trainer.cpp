#include "galopp/trainer.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <stdexcept>

namespace galopp
{

void write_curve_csv(const std::string& path, const std::vector<CurveRow>& curve)
{
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("cannot write " + path);
    out << "episode,train_reward,eval_reward,policy_loss,value_loss,entropy\n";
    out << std::setprecision(17);
    for (const auto& r : curve)
    {
        out << r.episode << ',' << r.train_reward << ',';
        if (!std::isnan(r.eval_reward))
            out << r.eval_reward;
        out << ',' << r.policy_loss << ',' << r.value_loss << ',' << r.entropy << '\n';
    }
}

TrainResult train(const RunConfig& config, const TrainOptions& options)
{
    const EnvFactory make_env = config.env_factory();
    const EpisodeSpec spec = config.episode_spec();
    const double reward_scale = config.resolved_reward_scale();

    TrainResult result{Network(config.resolved_network(), derive_seed(config.seed, 0x6e6574)), {}};
    Network& net = result.network;
    nd::OptimizerState optimizer;
    optimizer.lr = config.ppo.lr;
    std::mt19937_64 rng(derive_seed(config.seed, 0x747261));

    namespace fs = std::filesystem;
    if (!options.out_dir.empty())
    {
        fs::create_directories(options.out_dir);
        std::ofstream(options.out_dir + "/config.json") << config.to_json().dump(2) << '\n';
    }

    for (int ep = 1; ep <= config.ppo.episodes; ++ep)
    {
        const std::uint64_t episode_seed = derive_seed(config.seed, 1000000ull + static_cast<std::uint64_t>(ep));
        const EnvConfig env = make_env(episode_seed);
        EnvState state = reset(env, spec.n_agents, spec.n_anchors, episode_seed, spec.reset);
        const RolloutBuffer buffer = collect_rollout(state, env, net, spec.steps, rng, reward_scale);
        const UpdateStats stats = ppo_update(buffer, config.ppo, net, optimizer, rng);

        CurveRow row;
        row.episode = ep;
        for (double r : buffer.raw_rewards)
            row.train_reward += r;
        row.policy_loss = stats.policy_loss;
        row.value_loss = stats.value_loss;
        row.entropy = stats.entropy;
        if (config.ppo.eval_interval > 0 && (ep % config.ppo.eval_interval == 0 || ep == config.ppo.episodes))
        {
            GaloppController controller(net, !config.eval_stochastic);
            row.eval_reward =
                run_eval(controller, make_env, spec, config.ppo.eval_episodes, derive_seed(config.seed, 0x65766c))
                    .mean;
        }
        result.curve.push_back(row);
        if (options.progress)
            options.progress(row);

        if (!options.out_dir.empty() && config.ppo.checkpoint_interval > 0 && ep % config.ppo.checkpoint_interval == 0)
            nd::save_checkpoint(options.out_dir + "/checkpoint_" + std::to_string(ep) + ".bin", net.to_checkpoint());
    }

    if (!options.out_dir.empty())
    {
        nd::save_checkpoint(options.out_dir + "/checkpoint.bin", net.to_checkpoint());
        write_curve_csv(options.out_dir + "/learning_curve.csv", result.curve);
    }
    return result;
}

} // namespace galopp
