#include "galopp/comms.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace galopp
{

int ConnectivityGraph::component_count() const
{
    int m = -1;
    for (int c : component)
        m = std::max(m, c);
    return m + 1;
}

std::vector<bool> anchor_reachability(const Matrix& adjacency, std::span<const Role> roles)
{
    const int n = static_cast<int>(roles.size());
    std::vector<bool> seen(n, false);
    std::vector<int> stack;
    for (int s = 0; s < n; ++s)
    {
        if (roles[s] != Role::anchor || seen[s])
            continue;
        seen[s] = true;
        stack.push_back(s);
        while (!stack.empty())
        {
            const int u = stack.back();
            stack.pop_back();
            for (int v = 0; v < n; ++v)
                if (v != u && adjacency(u, v) != 0.0 && !seen[v])
                {
                    seen[v] = true;
                    stack.push_back(v);
                }
        }
    }
    return seen;
}

ConnectivityGraph build_graph(std::span<const Cell> positions, std::span<const Role> roles, double range)
{
    if (range < 0.0)
        throw std::invalid_argument("communication range must be non-negative");
    if (positions.size() != roles.size())
        throw std::invalid_argument("positions and roles differ in length");

    ConnectivityGraph g;
    g.n = static_cast<int>(positions.size());
    g.adjacency = Matrix::Identity(g.n, g.n);
    for (int i = 0; i < g.n; ++i)
        for (int j = i + 1; j < g.n; ++j)
            if (distance(positions[i], positions[j]) <= range)
            {
                g.edges.emplace_back(i, j);
                g.adjacency(i, j) = g.adjacency(j, i) = 1.0;
            }
    g.anchor_reachable = anchor_reachability(g.adjacency, roles);

    g.component.assign(g.n, -1);
    int label = 0;
    std::vector<int> stack;
    for (int s = 0; s < g.n; ++s)
    {
        if (g.component[s] >= 0)
            continue;
        g.component[s] = label;
        stack.push_back(s);
        while (!stack.empty())
        {
            const int u = stack.back();
            stack.pop_back();
            for (int v = 0; v < g.n; ++v)
                if (g.adjacency(u, v) != 0.0 && g.component[v] < 0)
                {
                    g.component[v] = label;
                    stack.push_back(v);
                }
        }
        ++label;
    }
    return g;
}

GcnNorm gcn_norm_from_string(std::string_view s)
{
    if (s == "none")
        return GcnNorm::none;
    if (s == "sym")
        return GcnNorm::sym;
    throw std::invalid_argument("unknown gcn_norm: " + std::string(s));
}

std::string_view to_string(GcnNorm n)
{
    return n == GcnNorm::sym ? "sym" : "none";
}

Matrix gcn_adjacency(const ConnectivityGraph& graph, GcnNorm norm)
{
    if (norm == GcnNorm::none)
        return graph.adjacency;
    const Vector d = graph.adjacency.rowwise().sum().cwiseSqrt().cwiseInverse();
    return d.asDiagonal() * graph.adjacency * d.asDiagonal();
}

CellArray merge_maps(std::span<const CellArray> maps)
{
    if (maps.empty())
        throw std::invalid_argument("merge_maps needs at least one map");
    CellArray out = maps.front();
    for (std::size_t k = 1; k < maps.size(); ++k)
    {
        if (maps[k].rows() != out.rows() || maps[k].cols() != out.cols())
            throw std::invalid_argument("merge_maps: shape mismatch");
        out = out.max(maps[k]);
    }
    return out;
}

void merge_components(std::vector<AgentMap>& maps, const ConnectivityGraph& graph)
{
    if (static_cast<int>(maps.size()) != graph.n)
        throw std::invalid_argument("one map per agent required");
    for (int c = 0; c < graph.component_count(); ++c)
    {
        std::vector<int> members;
        for (int i = 0; i < graph.n; ++i)
            if (graph.component[i] == c)
                members.push_back(i);
        if (members.size() < 2)
            continue;
        CellArray merged = maps[members.front()].values;
        for (std::size_t k = 1; k < members.size(); ++k)
        {
            const CellArray& m = maps[members[k]].values;
            if (m.rows() != merged.rows() || m.cols() != merged.cols())
                throw std::invalid_argument("merge_maps: shape mismatch");
            merged = merged.max(m);
        }
        for (int i : members)
            maps[i].values = merged;
    }
}

void decay_agent_maps(std::vector<AgentMap>& maps, const GridSpec& grid,
                      std::span<const CellMask> sensed, std::span<const char> localized,
                      const ConnectivityGraph& graph)
{
    const CellMask none = CellMask::Constant(grid.width, grid.height, false);
    for (std::size_t i = 0; i < maps.size(); ++i)
        decay_cells(maps[i].values, localized[i] ? sensed[i] : none, grid);
    merge_components(maps, graph);
}

} // namespace galopp
