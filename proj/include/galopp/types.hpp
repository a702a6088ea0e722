#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace galopp
{

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Matrix2 = Eigen::Matrix2d;
using Vector2 = Eigen::Vector2d;

// Per-cell grids are indexed (x, y): x = column, y = row counted bottom-up.
using CellArray = Eigen::ArrayXXd;
using CellMask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

struct Cell
{
    int x = 0;
    int y = 0;

    friend bool operator==(const Cell&, const Cell&) = default;
};

inline double distance(const Cell& a, const Cell& b)
{
    const double dx = a.x - b.x;
    const double dy = a.y - b.y;
    return std::sqrt(dx * dx + dy * dy);
}

// Action order follows the five-action space: up, down, left, right, stay.
enum class Action : int
{
    up = 0,
    down = 1,
    left = 2,
    right = 3,
    stay = 4
};

inline constexpr int action_count = 5;

inline constexpr std::array<Action, action_count> all_actions{
    Action::up, Action::down, Action::left, Action::right, Action::stay};

inline Eigen::Vector2i displacement(Action a)
{
    switch (a)
    {
    case Action::up: return {0, 1};
    case Action::down: return {0, -1};
    case Action::left: return {-1, 0};
    case Action::right: return {1, 0};
    case Action::stay: return {0, 0};
    }
    return {0, 0};
}

inline Action action_from_index(int i)
{
    if (i < 0 || i >= action_count)
        throw std::out_of_range("action index " + std::to_string(i));
    return static_cast<Action>(i);
}

std::string_view to_string(Action a);

enum class Role
{
    anchor,
    auxiliary
};

enum class MapMode
{
    decentralized,
    centralized
};

std::string_view to_string(MapMode m);
MapMode map_mode_from_string(std::string_view s);

} // namespace galopp

namespace galopp
{

/// splitmix64 finalizer; derives independent stream seeds from (base, salt).
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t salt)
{
    std::uint64_t z = base + 0x9e3779b97f4a7c15ull * (salt + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

} // namespace galopp
