#pragma once

#include "galopp/grid.hpp"
#include "galopp/types.hpp"

#include <span>
#include <utility>
#include <vector>

namespace galopp
{

/// Range-limited communication graph over the agents at one time step.
struct ConnectivityGraph
{
    int n = 0;
    std::vector<std::pair<int, int>> edges; // i < j
    Matrix adjacency;                       // 0/1, unit diagonal
    std::vector<bool> anchor_reachable;
    std::vector<int> component; // connected-component label per agent

    bool linked(int i, int j) const { return adjacency(i, j) != 0.0; }
    int component_count() const;
};

/// Edges join agents whose Euclidean distance is at most `range`.
/// Anchor reachability is a depth-first search seeded from every anchor.
ConnectivityGraph build_graph(std::span<const Cell> positions, std::span<const Role> roles, double range);

/// Reachability from anchors via depth-first search over an adjacency matrix.
std::vector<bool> anchor_reachability(const Matrix& adjacency, std::span<const Role> roles);

enum class GcnNorm
{
    none,
    sym
};

GcnNorm gcn_norm_from_string(std::string_view s);
std::string_view to_string(GcnNorm n);

/// A_g as fed to the graph convolution: raw (self-loops included) or D^-1/2 A D^-1/2.
Matrix gcn_adjacency(const ConnectivityGraph& graph, GcnNorm norm);

struct AgentMap
{
    int owner = 0;
    CellArray values;
};

/// Cell-wise maximum over maps of equal shape.
CellArray merge_maps(std::span<const CellArray> maps);

/// Replaces each member's copy with the element-wise maximum over its
/// connected component.
void merge_components(std::vector<AgentMap>& maps, const ConnectivityGraph& graph);

/// Per-agent copy maintenance for one step: decay every copy, zero the
/// owner's sensed cells when the owner is localized, then merge per component.
void decay_agent_maps(std::vector<AgentMap>& maps, const GridSpec& grid,
                      std::span<const CellMask> sensed, std::span<const char> localized,
                      const ConnectivityGraph& graph);

} // namespace galopp
