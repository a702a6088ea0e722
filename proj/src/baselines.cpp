#include "galopp/baselines.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace galopp
{

PolicyKind policy_kind_from_string(std::string_view s)
{
    if (s == "galopp")
        return PolicyKind::galopp;
    if (s == "rs")
        return PolicyKind::rs;
    if (s == "rsec")
        return PolicyKind::rsec;
    if (s == "gs")
        return PolicyKind::gs;
    throw std::invalid_argument("unknown policy: " + std::string(s));
}

std::string_view to_string(PolicyKind k)
{
    switch (k)
    {
    case PolicyKind::galopp: return "galopp";
    case PolicyKind::rs: return "rs";
    case PolicyKind::rsec: return "rsec";
    case PolicyKind::gs: return "gs";
    }
    return "?";
}

Action rs_action(std::mt19937_64& rng)
{
    std::uniform_int_distribution<int> pick(0, action_count - 1);
    return action_from_index(pick(rng));
}

std::vector<Action> RandomSearch::act(const EnvState& state, const EnvConfig&, std::mt19937_64& rng)
{
    std::vector<Action> actions;
    for (std::size_t i = 0; i < state.agents.size(); ++i)
        actions.push_back(rs_action(rng));
    return actions;
}

std::vector<Action> rsec_action(const EnvState& state, const EnvConfig& config, std::mt19937_64& rng)
{
    std::vector<Cell> tentative = state.positions();
    const std::vector<Role> roles = state.roles();
    std::vector<Action> actions(state.agents.size(), Action::stay);

    auto reachable = [&](const std::vector<Cell>& pos) {
        return build_graph(pos, roles, config.comm_range).anchor_reachable;
    };

    for (std::size_t i = 0; i < state.agents.size(); ++i)
    {
        const std::vector<bool> before = reachable(tentative);
        std::vector<Action> remaining(all_actions.begin(), all_actions.end());
        while (!remaining.empty())
        {
            std::uniform_int_distribution<std::size_t> pick(0, remaining.size() - 1);
            const std::size_t k = pick(rng);
            const Action candidate = remaining[k];
            remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(k));

            std::vector<Cell> trial = tentative;
            trial[i] = apply_action(tentative[i], candidate, config.grid);
            const std::vector<bool> after = reachable(trial);
            bool ok = true;
            for (std::size_t j = 0; j < roles.size(); ++j)
                if (roles[j] == Role::auxiliary && before[j] && !after[j])
                    ok = false;
            if (ok)
            {
                actions[i] = candidate;
                tentative = std::move(trial);
                break;
            }
        }
    }
    return actions;
}

Action gs_action(const AgentState& agent, const CellArray& map_copy, const GridSpec& grid, std::mt19937_64& rng)
{
    double best = 0.0;
    std::vector<Action> ties;
    for (Action a : all_actions)
    {
        if (a != Action::stay)
        {
            const Eigen::Vector2i d = displacement(a);
            if (!grid.is_free({agent.position.x + d.x(), agent.position.y + d.y()}))
                continue;
        }
        const Cell target = apply_action(agent.position, a, grid);
        const double v = map_copy(target.x, target.y);
        if (ties.empty() || v < best)
        {
            best = v;
            ties.assign(1, a);
        }
        else if (v == best)
        {
            ties.push_back(a);
        }
    }
    std::uniform_int_distribution<std::size_t> pick(0, ties.size() - 1);
    return ties[pick(rng)];
}

std::vector<Action> GreedySearch::act(const EnvState& state, const EnvConfig& config, std::mt19937_64& rng)
{
    std::vector<Action> actions;
    for (std::size_t i = 0; i < state.agents.size(); ++i)
        actions.push_back(gs_action(state.agents[i], state.maps[i].values, config.grid, rng));
    return actions;
}

} // namespace galopp
