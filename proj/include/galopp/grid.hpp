#pragma once

#include "galopp/types.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace galopp
{

/// Static description of the monitored world: extent, obstacles and
/// per-cell decay. Arrays are width x height, indexed (x, y).
struct GridSpec
{
    int width = 0;
    int height = 0;
    CellMask obstacles;
    CellArray decay;
    double max_penalty = 400.0;

    static GridSpec open(int width, int height, double decay = 1.0, double max_penalty = 400.0);

    bool in_bounds(const Cell& c) const
    {
        return c.x >= 0 && c.y >= 0 && c.x < width && c.y < height;
    }
    bool is_free(const Cell& c) const { return in_bounds(c) && !obstacles(c.x, c.y); }
    int free_count() const;
    int obstacle_count() const { return static_cast<int>(obstacles.count()); }

    /// Throws std::invalid_argument when an invariant is broken.
    void validate() const;
};

/// Parses the '#'/'.' map format. Row 0 of the text is the top of the
/// world, so text row r maps to y = height - 1 - r.
GridSpec load_map(std::string_view text, double decay = 1.0, double max_penalty = 400.0);
GridSpec load_map_file(const std::string& path, double decay = 1.0, double max_penalty = 400.0);
std::string to_map_text(const GridSpec& grid);

/// Random rectangular obstacles covering round(fraction * A * B) cells while
/// keeping the free space a single 4-connected component.
GridSpec generate_obstacles(int width, int height, double fraction, std::uint64_t seed,
                            double decay = 1.0, double max_penalty = 400.0);

/// True when the free cells form one 4-connected component.
bool free_space_connected(const GridSpec& grid);

struct SensorConfig
{
    int range = 1;
    int footprint() const { return 2 * range + 1; }
};

/// The g x g square around pos, clipped to the grid, minus obstacle cells.
std::vector<Cell> sense_footprint(const Cell& pos, const SensorConfig& sensor, const GridSpec& grid);
void mark_footprint(const Cell& pos, const SensorConfig& sensor, const GridSpec& grid, CellMask& mask);

struct PenaltyField
{
    CellArray values;
    long time = 0;

    static PenaltyField zeros(const GridSpec& grid);
};

/// One tick of the penalty dynamics: monitored cells reset to 0, the rest
/// decay by their rate and clamp at -max_penalty.
PenaltyField step_field(const PenaltyField& field, const CellMask& monitored, const GridSpec& grid);

/// In-place variant for per-agent map copies.
void decay_cells(CellArray& values, const CellMask& monitored, const GridSpec& grid);

double team_reward(const PenaltyField& field);

/// Illegal moves (off-grid or into an obstacle) leave the agent in place.
Cell apply_action(const Cell& pos, Action action, const GridSpec& grid);

} // namespace galopp
