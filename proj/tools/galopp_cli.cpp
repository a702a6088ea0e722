// Command-line entry point: train, eval, baseline, sweep, render.
#include "galopp/harness.hpp"
#include "galopp/trainer.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>

using namespace galopp;

namespace
{

RunConfig load_config(const std::string& path, std::optional<std::uint64_t> seed, std::optional<int> episodes)
{
    RunConfig c = path.empty() ? RunConfig{} : RunConfig::load(path);
    if (seed)
        c.seed = *seed;
    if (episodes)
        c.eval_episodes = *episodes;
    return c;
}

void write_eval(const std::string& out, const RunConfig& config, const EvalReport& r)
{
    std::cout << std::setprecision(10) << r.policy << ": mean " << r.mean << " +/- " << r.ci95.value_or(0.0)
              << " (95% CI, " << r.episode_rewards.size() << " episodes), disconnected " << r.mean_disconnection
              << "%\n";
    if (out.empty())
        return;
    std::filesystem::create_directories(out);
    std::ofstream csv(out + "/metrics.csv");
    csv << std::setprecision(17) << "episode,seed,reward\n";
    for (std::size_t k = 0; k < r.episode_rewards.size(); ++k)
        csv << k << ',' << r.seeds[k] << ',' << r.episode_rewards[k] << '\n';
    std::ofstream summary(out + "/summary.csv");
    summary << std::setprecision(17) << "policy,episodes,mean_reward,ci95,mean_disconnection_percent\n"
            << r.policy << ',' << r.episode_rewards.size() << ',' << r.mean << ',' << r.ci95.value_or(0.0) << ','
            << r.mean_disconnection << '\n';
    std::ofstream(out + "/config.json") << config.to_json().dump(2) << '\n';
}

void log_trajectory(const std::string& path, PolicyKind kind, const RunConfig& config, Network* net)
{
    std::unique_ptr<Controller> c;
    switch (kind)
    {
    case PolicyKind::galopp: c = std::make_unique<GaloppController>(*net, !config.eval_stochastic); break;
    case PolicyKind::rs: c = std::make_unique<RandomSearch>(); break;
    case PolicyKind::rsec: c = std::make_unique<RandomSearchEnsuredComm>(); break;
    case PolicyKind::gs: c = std::make_unique<GreedySearch>(); break;
    }
    const std::uint64_t s = derive_seed(config.seed, 0);
    const EpisodeResult res = run_episode(*c, config.make_env(s), config.episode_spec(), s, true);
    std::ofstream(path) << res.log->to_json();
    std::cout << "trajectory written to " << path << " (reward " << res.total_reward << ")\n";
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Multi-agent persistent monitoring with localization constraints"};
    app.require_subcommand(1);

    std::string config_path, out, checkpoint, policy = "galopp", trajectory;
    std::optional<std::uint64_t> seed;
    std::optional<int> episodes;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
        sub->add_option("--seed", seed, "Override the configuration seed");
        sub->add_option("--out", out, "Output directory");
    };

    auto* train_cmd = app.add_subcommand("train", "Train a GALOPP policy with PPO");
    common(train_cmd);
    std::optional<int> train_episodes;
    train_cmd->add_option("--episodes", train_episodes, "Override the number of training episodes");

    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a policy");
    common(eval_cmd);
    eval_cmd->add_option("--policy", policy, "galopp, rs, rsec or gs")
        ->check(CLI::IsMember({"galopp", "rs", "rsec", "gs"}));
    eval_cmd->add_option("--checkpoint", checkpoint, "Trained GALOPP weights");
    eval_cmd->add_option("--episodes", episodes, "Evaluation episodes");
    eval_cmd->add_option("--trajectory", trajectory, "Also log one episode to this JSON file");

    auto* base_cmd = app.add_subcommand("baseline", "Evaluate a baseline policy");
    common(base_cmd);
    base_cmd->add_option("--policy", policy, "rs, rsec or gs")->check(CLI::IsMember({"rs", "rsec", "gs"}))->required();
    base_cmd->add_option("--episodes", episodes, "Evaluation episodes");
    base_cmd->add_option("--trajectory", trajectory, "Also log one episode to this JSON file");

    auto* sweep_cmd = app.add_subcommand("sweep", "Sweep one configuration parameter");
    common(sweep_cmd);
    std::string parameter, mode = "eval";
    std::vector<std::string> values;
    sweep_cmd->add_option("--parameter", parameter, "comm_range, sensing_range, n_agents, n_anchors, "
                                                    "obstacle_fraction or map_mode")
        ->required();
    sweep_cmd->add_option("--values", values, "Values; defaults to the preconfigured grid");
    sweep_cmd->add_option("--mode", mode, "train or eval")->check(CLI::IsMember({"train", "eval"}));
    sweep_cmd->add_option("--policy", policy, "Policy for eval mode")
        ->check(CLI::IsMember({"galopp", "rs", "rsec", "gs"}));
    sweep_cmd->add_option("--checkpoint", checkpoint, "GALOPP weights for eval mode");
    sweep_cmd->add_option("--episodes", episodes, "Evaluation episodes per value");

    auto* render_cmd = app.add_subcommand("render", "Render a logged trajectory to PNG frames and an AVI");
    std::string log_path;
    int cell_pixels = 16;
    render_cmd->add_option("trajectory", log_path, "Trajectory JSON from --trajectory")
        ->required()
        ->check(CLI::ExistingFile);
    render_cmd->add_option("--out", out, "Output directory")->required();
    render_cmd->add_option("--cell-pixels", cell_pixels, "Pixels per grid cell")->check(CLI::PositiveNumber);

    CLI11_PARSE(app, argc, argv);

    try
    {
        if (*train_cmd)
        {
            RunConfig config = load_config(config_path, seed, std::nullopt);
            if (train_episodes)
                config.ppo.episodes = *train_episodes;
            TrainOptions options;
            options.out_dir = out;
            options.progress = [](const CurveRow& r) {
                if (!std::isnan(r.eval_reward))
                    std::cout << "episode " << r.episode << " train " << r.train_reward << " eval " << r.eval_reward
                              << std::endl;
            };
            TrainResult result = train(config, options);
            const EvalReport report = evaluate_policy(PolicyKind::galopp, config, &result.network,
                                                      config.eval_episodes, derive_seed(config.seed, 0x74657374));
            write_eval(out, config, report);
        }
        else if (*eval_cmd || *base_cmd)
        {
            const RunConfig config = load_config(config_path, seed, episodes);
            const PolicyKind kind = policy_kind_from_string(policy);
            std::optional<Network> net;
            if (kind == PolicyKind::galopp)
            {
                if (checkpoint.empty())
                    throw std::invalid_argument("--checkpoint is required for the galopp policy");
                net.emplace(Network::from_checkpoint(nd::load_checkpoint(checkpoint)));
            }
            Network* np = net ? &*net : nullptr;
            const EvalReport report =
                evaluate_policy(kind, config, np, config.eval_episodes, derive_seed(config.seed, 0x74657374));
            write_eval(out, config, report);
            if (!trajectory.empty())
                log_trajectory(trajectory, kind, config, np);
        }
        else if (*sweep_cmd)
        {
            const RunConfig config = load_config(config_path, seed, episodes);
            const SweepParameter p = sweep_parameter_from_string(parameter);
            if (values.empty())
                values = default_sweep_values(p, config);
            SweepOptions options;
            options.mode = mode == "train" ? SweepMode::train : SweepMode::eval;
            options.policy = policy_kind_from_string(policy);
            options.checkpoint = checkpoint;
            options.out_dir = out;
            for (const auto& row : sweep(p, values, config, options))
                std::cout << parameter << '=' << row.value << ": " << row.report.mean << " +/- "
                          << row.report.ci95.value_or(0.0) << '\n';
        }
        else if (*render_cmd)
        {
            std::ifstream in(log_path);
            const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
            RenderOptions options;
            options.out_dir = out;
            options.cell_pixels = cell_pixels;
            std::cout << render(EpisodeLog::from_json(text), options) << " frames written to " << out << '\n';
        }
    }
    catch (const std::exception& e)
    {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
