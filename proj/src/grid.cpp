#include "galopp/grid.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>

namespace galopp
{

std::string_view to_string(Action a)
{
    switch (a)
    {
    case Action::up: return "up";
    case Action::down: return "down";
    case Action::left: return "left";
    case Action::right: return "right";
    case Action::stay: return "stay";
    }
    return "?";
}

std::string_view to_string(MapMode m)
{
    return m == MapMode::centralized ? "centralized" : "decentralized";
}

MapMode map_mode_from_string(std::string_view s)
{
    if (s == "centralized")
        return MapMode::centralized;
    if (s == "decentralized")
        return MapMode::decentralized;
    throw std::invalid_argument("unknown map mode: " + std::string(s));
}

GridSpec GridSpec::open(int width, int height, double decay, double max_penalty)
{
    GridSpec g;
    g.width = width;
    g.height = height;
    g.obstacles = CellMask::Constant(width, height, false);
    g.decay = CellArray::Constant(width, height, decay);
    g.max_penalty = max_penalty;
    g.validate();
    return g;
}

int GridSpec::free_count() const
{
    return width * height - obstacle_count();
}

void GridSpec::validate() const
{
    if (width < 1 || height < 1)
        throw std::invalid_argument("grid must be at least 1x1");
    if (obstacles.rows() != width || obstacles.cols() != height || decay.rows() != width ||
        decay.cols() != height)
        throw std::invalid_argument("grid arrays do not match the grid extent");
    if (!(max_penalty > 0.0))
        throw std::invalid_argument("max_penalty must be positive");
    for (int x = 0; x < width; ++x)
        for (int y = 0; y < height; ++y)
            if (!obstacles(x, y) && !(decay(x, y) > 0.0))
                throw std::invalid_argument("decay must be positive on free cells");
}

GridSpec load_map(std::string_view text, double decay, double max_penalty)
{
    std::vector<std::string> rows;
    std::string line;
    std::istringstream in{std::string(text)};
    while (std::getline(in, line))
    {
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty())
            continue;
        rows.push_back(line);
    }
    if (rows.empty())
        throw std::invalid_argument("empty map");

    const int width = static_cast<int>(rows.front().size());
    const int height = static_cast<int>(rows.size());
    GridSpec g = GridSpec::open(width, height, decay, max_penalty);
    for (int r = 0; r < height; ++r)
    {
        if (static_cast<int>(rows[r].size()) != width)
            throw std::invalid_argument("ragged map: row " + std::to_string(r) + " has length " +
                                        std::to_string(rows[r].size()) + ", expected " +
                                        std::to_string(width));
        const int y = height - 1 - r;
        for (int x = 0; x < width; ++x)
        {
            const char ch = rows[r][x];
            if (ch == '#')
                g.obstacles(x, y) = true;
            else if (ch != '.')
                throw std::invalid_argument(std::string("unknown map character '") + ch + "'");
        }
    }
    return g;
}

GridSpec load_map_file(const std::string& path, double decay, double max_penalty)
{
    std::ifstream f(path);
    if (!f)
        throw std::runtime_error("cannot open map file " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return load_map(ss.str(), decay, max_penalty);
}

std::string to_map_text(const GridSpec& grid)
{
    std::string out;
    for (int y = grid.height - 1; y >= 0; --y)
    {
        for (int x = 0; x < grid.width; ++x)
            out += grid.obstacles(x, y) ? '#' : '.';
        out += '\n';
    }
    return out;
}

bool free_space_connected(const GridSpec& grid)
{
    const int total = grid.free_count();
    if (total == 0)
        return true;
    CellMask seen = CellMask::Constant(grid.width, grid.height, false);
    std::vector<Cell> stack;
    for (int x = 0; x < grid.width && stack.empty(); ++x)
        for (int y = 0; y < grid.height; ++y)
            if (!grid.obstacles(x, y))
            {
                stack.push_back({x, y});
                seen(x, y) = true;
                break;
            }
    int reached = 0;
    while (!stack.empty())
    {
        const Cell c = stack.back();
        stack.pop_back();
        ++reached;
        for (Action a : {Action::up, Action::down, Action::left, Action::right})
        {
            const Eigen::Vector2i d = displacement(a);
            const Cell n{c.x + d.x(), c.y + d.y()};
            if (grid.is_free(n) && !seen(n.x, n.y))
            {
                seen(n.x, n.y) = true;
                stack.push_back(n);
            }
        }
    }
    return reached == total;
}

GridSpec generate_obstacles(int width, int height, double fraction, std::uint64_t seed, double decay,
                            double max_penalty)
{
    if (fraction < 0.0 || fraction > 0.3)
        throw std::invalid_argument("obstacle fraction must lie in [0, 0.3]");
    GridSpec g = GridSpec::open(width, height, decay, max_penalty);
    int remaining = static_cast<int>(std::lround(fraction * width * height));
    if (remaining >= width * height)
        throw std::invalid_argument("obstacle fraction leaves no free cell");

    std::mt19937_64 rng(seed);
    const int max_side = std::max(1, std::min(width, height) / 5);
    std::uniform_int_distribution<int> side(1, max_side);
    std::uniform_int_distribution<int> px(0, width - 1);
    std::uniform_int_distribution<int> py(0, height - 1);

    constexpr int max_attempts = 200000;
    for (int attempt = 0; remaining > 0; ++attempt)
    {
        if (attempt >= max_attempts)
            throw std::runtime_error("could not place obstacles without disconnecting free space");
        int w = side(rng);
        int h = side(rng);
        w = std::min(w, remaining);
        h = std::min(h, std::max(1, remaining / w));
        const int x0 = px(rng);
        const int y0 = py(rng);
        if (x0 + w > width || y0 + h > height)
            continue;
        if (g.obstacles.block(x0, y0, w, h).any())
            continue;
        g.obstacles.block(x0, y0, w, h).setConstant(true);
        if (!free_space_connected(g))
        {
            g.obstacles.block(x0, y0, w, h).setConstant(false);
            continue;
        }
        remaining -= w * h;
    }
    return g;
}

std::vector<Cell> sense_footprint(const Cell& pos, const SensorConfig& sensor, const GridSpec& grid)
{
    std::vector<Cell> cells;
    const int l = sensor.range;
    for (int x = pos.x - l; x <= pos.x + l; ++x)
        for (int y = pos.y - l; y <= pos.y + l; ++y)
            if (grid.is_free({x, y}))
                cells.push_back({x, y});
    return cells;
}

void mark_footprint(const Cell& pos, const SensorConfig& sensor, const GridSpec& grid, CellMask& mask)
{
    const int l = sensor.range;
    const int x0 = std::max(0, pos.x - l), x1 = std::min(grid.width - 1, pos.x + l);
    const int y0 = std::max(0, pos.y - l), y1 = std::min(grid.height - 1, pos.y + l);
    for (int x = x0; x <= x1; ++x)
        for (int y = y0; y <= y1; ++y)
            if (!grid.obstacles(x, y))
                mask(x, y) = true;
}

PenaltyField PenaltyField::zeros(const GridSpec& grid)
{
    return {CellArray::Zero(grid.width, grid.height), 0};
}

void decay_cells(CellArray& values, const CellMask& monitored, const GridSpec& grid)
{
    const double floor = -grid.max_penalty;
    for (int y = 0; y < grid.height; ++y)
        for (int x = 0; x < grid.width; ++x)
        {
            if (grid.obstacles(x, y))
                values(x, y) = 0.0;
            else if (monitored(x, y))
                values(x, y) = 0.0;
            else
                values(x, y) = std::max(values(x, y) - grid.decay(x, y), floor);
        }
}

PenaltyField step_field(const PenaltyField& field, const CellMask& monitored, const GridSpec& grid)
{
    PenaltyField next = field;
    decay_cells(next.values, monitored, grid);
    ++next.time;
    return next;
}

double team_reward(const PenaltyField& field)
{
    return field.values.sum();
}

Cell apply_action(const Cell& pos, Action action, const GridSpec& grid)
{
    const Eigen::Vector2i d = displacement(action);
    const Cell next{pos.x + d.x(), pos.y + d.y()};
    return grid.is_free(next) ? next : pos;
}

} // namespace galopp
