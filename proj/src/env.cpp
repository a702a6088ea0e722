#include "galopp/env.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace galopp
{

std::vector<Cell> EnvState::positions() const
{
    std::vector<Cell> out;
    out.reserve(agents.size());
    for (const auto& a : agents)
        out.push_back(a.position);
    return out;
}

std::vector<Role> EnvState::roles() const
{
    std::vector<Role> out;
    out.reserve(agents.size());
    for (const auto& a : agents)
        out.push_back(a.role);
    return out;
}

int EnvState::auxiliary_unlocalized_count() const
{
    return static_cast<int>(std::count_if(agents.begin(), agents.end(), [](const AgentState& a) {
        return a.role == Role::auxiliary && !a.localized;
    }));
}

EnvState reset(const EnvConfig& config, int n_agents, int n_anchors, std::uint64_t seed, ResetOptions options)
{
    if (n_anchors < 1 || n_anchors > n_agents)
        throw std::invalid_argument("reset requires 1 <= n_anchors <= n_agents");
    const GridSpec& grid = config.grid;
    std::vector<Cell> free_cells;
    for (int x = 0; x < grid.width; ++x)
        for (int y = 0; y < grid.height; ++y)
            if (!grid.obstacles(x, y))
                free_cells.push_back({x, y});
    if (static_cast<int>(free_cells.size()) < n_agents)
        throw std::invalid_argument("fewer free cells than agents");

    EnvState s;
    s.rng.seed(seed);
    std::vector<Role> roles(n_agents, Role::auxiliary);
    std::fill_n(roles.begin(), n_anchors, Role::anchor);

    constexpr int max_tries = 10000;
    for (int attempt = 0;; ++attempt)
    {
        // Partial Fisher-Yates draw of n distinct cells.
        for (int i = 0; i < n_agents; ++i)
        {
            std::uniform_int_distribution<std::size_t> pick(i, free_cells.size() - 1);
            std::swap(free_cells[i], free_cells[pick(s.rng)]);
        }
        std::vector<Cell> pos(free_cells.begin(), free_cells.begin() + n_agents);
        s.graph = build_graph(pos, roles, config.comm_range);
        const bool ok = std::all_of(s.graph.anchor_reachable.begin(), s.graph.anchor_reachable.end(),
                                    [](bool b) { return b; });
        if (!options.connected_start || ok)
            break;
        if (attempt + 1 >= max_tries)
            throw std::runtime_error("no connected start found");
    }

    s.agents.resize(n_agents);
    for (int i = 0; i < n_agents; ++i)
    {
        AgentState& a = s.agents[i];
        a.id = i;
        a.role = roles[i];
        a.position = free_cells[i];
        a.belief.mean = Vector2(a.position.x, a.position.y);
        a.belief.cov = a.role == Role::anchor ? Matrix2::Zero() : config.reset_cov;
        a.localized = true;
    }
    s.field = PenaltyField::zeros(grid);
    s.maps.resize(n_agents);
    for (int i = 0; i < n_agents; ++i)
        s.maps[i] = {i, CellArray::Zero(grid.width, grid.height)};
    s.step_index = 0;
    return s;
}

CellMask monitored_cells(const EnvState& state, const EnvConfig& config)
{
    CellMask mask = CellMask::Constant(config.grid.width, config.grid.height, false);
    for (const auto& a : state.agents)
        if (a.localized)
            mark_footprint(a.position, config.sensor, config.grid, mask);
    return mask;
}

namespace
{

// Relative-position observation of the first localized agent inside the
// footprint of an unlocalized auxiliary.
void observe_neighbours(EnvState& s, const EnvConfig& config, std::size_t i)
{
    AgentState& self = s.agents[i];
    const int l = config.sensor.range;
    for (const auto& other : s.agents)
    {
        if (other.id == self.id || !other.localized)
            continue;
        if (std::abs(other.position.x - self.position.x) > l || std::abs(other.position.y - self.position.y) > l)
            continue;
        const Vector2 observed_true(other.position.x, other.position.y);
        const Vector2 relative = observed_true - Vector2(self.position.x, self.position.y);
        const Matrix2& q = config.observation.measurement_noise;
        std::normal_distribution<double> unit(0.0, 1.0);
        const Eigen::LLT<Matrix2> llt(q);
        const Vector2 noise = llt.matrixL() * Vector2(unit(s.rng), unit(s.rng));

        ObservationModel obs = config.observation;
        Vector2 z;
        try
        {
            obs.observation = build_observation_matrix(relative, observed_true);
            z = relative + noise;
        }
        catch (const SingularObservation&)
        {
            obs.observation = Matrix2::Identity();
            z = observed_true - relative + noise;
        }
        self.belief = kf_update(self.belief, z, obs);
        return;
    }
}

} // namespace

StepResult env_step(EnvState& s, const EnvConfig& config, std::span<const Action> actions)
{
    if (actions.size() != s.agents.size())
        throw std::invalid_argument("env_step: one action per agent required");
    const GridSpec& grid = config.grid;

    std::vector<Vector2> executed(s.agents.size());
    for (std::size_t i = 0; i < s.agents.size(); ++i)
    {
        const Cell before = s.agents[i].position;
        s.agents[i].position = apply_action(before, actions[i], grid);
        executed[i] = Vector2(s.agents[i].position.x - before.x, s.agents[i].position.y - before.y);
    }

    const std::vector<Cell> pos = s.positions();
    const std::vector<Role> roles = s.roles();
    s.graph = build_graph(pos, roles, config.comm_range);

    for (std::size_t i = 0; i < s.agents.size(); ++i)
        if (s.agents[i].role == Role::auxiliary)
            s.agents[i].belief = kf_predict(s.agents[i].belief, executed[i], config.motion);
    s.agents = resolve_localization(std::move(s.agents), s.graph, config.reset_cov);
    for (std::size_t i = 0; i < s.agents.size(); ++i)
        if (!s.agents[i].localized)
            observe_neighbours(s, config, i);

    std::vector<CellMask> sensed(s.agents.size());
    CellMask monitored = CellMask::Constant(grid.width, grid.height, false);
    std::vector<char> localized(s.agents.size());
    for (std::size_t i = 0; i < s.agents.size(); ++i)
    {
        sensed[i] = CellMask::Constant(grid.width, grid.height, false);
        mark_footprint(s.agents[i].position, config.sensor, grid, sensed[i]);
        localized[i] = s.agents[i].localized;
        if (localized[i])
            monitored = monitored || sensed[i];
    }

    s.field = step_field(s.field, monitored, grid);
    if (config.map_mode == MapMode::centralized)
    {
        for (auto& m : s.maps)
            m.values = s.field.values;
    }
    else
    {
        decay_agent_maps(s.maps, grid, sensed, localized, s.graph);
    }
    ++s.step_index;
    return {team_reward(s.field)};
}

} // namespace galopp
