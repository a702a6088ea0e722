#include "galopp/eval.hpp"

#include <boost/math/distributions/students_t.hpp>
#include <json.hpp>

#include <cmath>
#include <numeric>

namespace galopp
{

EpisodeResult run_episode(Controller& controller, const EnvConfig& config, const EpisodeSpec& spec,
                          std::uint64_t seed, bool keep_log)
{
    EnvState state = reset(config, spec.n_agents, spec.n_anchors, seed, spec.reset);
    std::mt19937_64 policy_rng(derive_seed(seed, 0x706f6c));

    EpisodeResult result;
    result.unlocalized.assign(spec.n_agents, 0);
    auto record = [&](double reward) {
        StepRecord r;
        r.positions = state.positions();
        for (const auto& a : state.agents)
            r.localized.push_back(a.localized);
        r.field = state.field.values;
        r.reward = reward;
        result.log->steps.push_back(std::move(r));
    };
    if (keep_log)
    {
        result.log.emplace();
        result.log->grid = config.grid;
        result.log->comm_range = config.comm_range;
        result.log->sensing_range = config.sensor.range;
        result.log->roles = state.roles();
        record(team_reward(state.field));
    }

    for (int t = 0; t < spec.steps; ++t)
    {
        const std::vector<Action> actions = controller.act(state, config, policy_rng);
        const StepResult step = env_step(state, config, actions);
        result.total_reward += step.reward;
        for (int i = 0; i < spec.n_agents; ++i)
            if (!state.agents[i].localized)
                ++result.unlocalized[i];
        if (keep_log)
            record(step.reward);
    }
    result.steps = spec.steps;
    return result;
}

std::optional<double> confidence_half_width(std::span<const double> samples, double level)
{
    const std::size_t n = samples.size();
    if (n < 2)
        return std::nullopt;
    const double mean = std::accumulate(samples.begin(), samples.end(), 0.0) / static_cast<double>(n);
    double ss = 0.0;
    for (double x : samples)
        ss += (x - mean) * (x - mean);
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    const boost::math::students_t dist(static_cast<double>(n - 1));
    const double t = boost::math::quantile(boost::math::complement(dist, (1.0 - level) / 2.0));
    return t * sd / std::sqrt(static_cast<double>(n));
}

EvalReport run_eval(Controller& controller, const EnvFactory& make_env, const EpisodeSpec& spec, int episodes,
                    std::uint64_t seed)
{
    EvalReport report;
    report.policy = controller.name();
    std::vector<double> disconnect_sum(spec.n_agents, 0.0);
    for (int k = 0; k < episodes; ++k)
    {
        const std::uint64_t s = derive_seed(seed, static_cast<std::uint64_t>(k));
        report.seeds.push_back(s);
        const EpisodeResult r = run_episode(controller, make_env(s), spec, s);
        report.episode_rewards.push_back(r.total_reward);
        for (int i = 0; i < spec.n_agents; ++i)
            disconnect_sum[i] += 100.0 * r.unlocalized[i] / std::max(1, r.steps);
    }
    if (episodes > 0)
        report.mean = std::accumulate(report.episode_rewards.begin(), report.episode_rewards.end(), 0.0) / episodes;
    report.ci95 = confidence_half_width(report.episode_rewards);
    for (int i = spec.n_anchors; i < spec.n_agents; ++i)
        report.disconnection_percent.push_back(episodes > 0 ? disconnect_sum[i] / episodes : 0.0);
    if (!report.disconnection_percent.empty())
        report.mean_disconnection =
            std::accumulate(report.disconnection_percent.begin(), report.disconnection_percent.end(), 0.0) /
            static_cast<double>(report.disconnection_percent.size());
    return report;
}

std::vector<double> disconnection_stats(const EpisodeLog& log)
{
    std::vector<double> out;
    const std::size_t steps = log.steps.size() > 1 ? log.steps.size() - 1 : 0;
    for (std::size_t i = 0; i < log.roles.size(); ++i)
    {
        if (log.roles[i] != Role::auxiliary)
            continue;
        std::size_t off = 0;
        for (std::size_t t = 1; t < log.steps.size(); ++t)
            off += log.steps[t].localized[i] ? 0 : 1;
        out.push_back(steps ? 100.0 * static_cast<double>(off) / static_cast<double>(steps) : 0.0);
    }
    return out;
}

double no_monitoring_reward(const GridSpec& grid, int steps)
{
    double total = 0.0;
    for (int x = 0; x < grid.width; ++x)
        for (int y = 0; y < grid.height; ++y)
        {
            if (grid.obstacles(x, y))
                continue;
            for (int t = 1; t <= steps; ++t)
                total -= std::min(grid.decay(x, y) * t, grid.max_penalty);
        }
    return total;
}

std::string EpisodeLog::to_json() const
{
    nlohmann::json j;
    j["map"] = to_map_text(grid);
    j["max_penalty"] = grid.max_penalty;
    j["comm_range"] = comm_range;
    j["sensing_range"] = sensing_range;
    j["roles"] = nlohmann::json::array();
    for (Role r : roles)
        j["roles"].push_back(r == Role::anchor ? "anchor" : "auxiliary");
    j["steps"] = nlohmann::json::array();
    for (const auto& s : steps)
    {
        nlohmann::json js;
        js["reward"] = s.reward;
        js["positions"] = nlohmann::json::array();
        for (const auto& c : s.positions)
            js["positions"].push_back({c.x, c.y});
        js["localized"] = nlohmann::json::array();
        for (char l : s.localized)
            js["localized"].push_back(static_cast<bool>(l));
        std::vector<double> flat(s.field.data(), s.field.data() + s.field.size());
        js["field"] = flat;
        j["steps"].push_back(std::move(js));
    }
    return j.dump();
}

EpisodeLog EpisodeLog::from_json(const std::string& text)
{
    const auto j = nlohmann::json::parse(text);
    EpisodeLog log;
    log.grid = load_map(j.at("map").get<std::string>(), 1.0, j.value("max_penalty", 400.0));
    log.comm_range = j.at("comm_range").get<double>();
    log.sensing_range = j.at("sensing_range").get<int>();
    for (const auto& r : j.at("roles"))
        log.roles.push_back(r.get<std::string>() == "anchor" ? Role::anchor : Role::auxiliary);
    for (const auto& js : j.at("steps"))
    {
        StepRecord s;
        s.reward = js.at("reward").get<double>();
        for (const auto& p : js.at("positions"))
            s.positions.push_back({p.at(0).get<int>(), p.at(1).get<int>()});
        for (const auto& l : js.at("localized"))
            s.localized.push_back(l.get<bool>() ? 1 : 0);
        const auto flat = js.at("field").get<std::vector<double>>();
        if (static_cast<int>(flat.size()) != log.grid.width * log.grid.height)
            throw std::runtime_error("episode log field size does not match the map");
        s.field = Eigen::Map<const CellArray>(flat.data(), log.grid.width, log.grid.height);
        log.steps.push_back(std::move(s));
    }
    return log;
}

} // namespace galopp
