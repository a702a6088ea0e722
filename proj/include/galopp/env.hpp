#pragma once

#include "galopp/comms.hpp"
#include "galopp/grid.hpp"
#include "galopp/loc.hpp"

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace galopp
{

/// Everything env_step needs besides the state itself.
struct EnvConfig
{
    GridSpec grid;
    SensorConfig sensor{3};
    double comm_range = 20.0;
    MotionModel motion;
    ObservationModel observation; // only the noise term is used; C comes from the geometry
    Matrix2 reset_cov = Matrix2::Zero();
    MapMode map_mode = MapMode::decentralized;
};

struct EnvState
{
    PenaltyField field;
    std::vector<AgentState> agents;
    std::vector<AgentMap> maps; // one copy per agent
    ConnectivityGraph graph;
    int step_index = 0;
    std::mt19937_64 rng; // measurement noise stream

    std::vector<Cell> positions() const;
    std::vector<Role> roles() const;
    int auxiliary_unlocalized_count() const;
};

struct ResetOptions
{
    /// Resample placements until every auxiliary is anchor-reachable.
    bool connected_start = false;
};

/// Distinct uniformly random free cells; ids [0, n_anchors) are anchors.
EnvState reset(const EnvConfig& config, int n_agents, int n_anchors, std::uint64_t seed,
               ResetOptions options = {});

/// Cells monitored this step: footprints of anchors and localized auxiliaries.
CellMask monitored_cells(const EnvState& state, const EnvConfig& config);

struct StepResult
{
    double reward = 0.0;
};

/// Advances the world one tick in place: simultaneous moves, graph rebuild,
/// localization, penalty update, map-copy maintenance. Returns the team reward
/// of the post-step field.
StepResult env_step(EnvState& state, const EnvConfig& config, std::span<const Action> actions);

} // namespace galopp
