#pragma once

#include "galopp/policy.hpp"

#include <random>
#include <string_view>

namespace galopp
{

enum class PolicyKind
{
    galopp,
    rs,
    rsec,
    gs
};

PolicyKind policy_kind_from_string(std::string_view s);
std::string_view to_string(PolicyKind k);

/// Uniform over the five actions.
Action rs_action(std::mt19937_64& rng);

/// Random actions that never unlocalize an auxiliary. Agents are processed in
/// id order; each candidate is checked against the tentative configuration
/// (earlier agents moved, later agents in place) and rejected if an auxiliary
/// that is anchor-reachable there would lose reachability. Falls back to stay.
std::vector<Action> rsec_action(const EnvState& state, const EnvConfig& config, std::mt19937_64& rng);

/// Moves to the reachable cell with the largest accumulated penalty in the
/// agent's own map copy (most negative value); ties are broken uniformly.
Action gs_action(const AgentState& agent, const CellArray& map_copy, const GridSpec& grid, std::mt19937_64& rng);

class RandomSearch final : public Controller
{
  public:
    std::vector<Action> act(const EnvState& state, const EnvConfig&, std::mt19937_64& rng) override;
    std::string name() const override { return "rs"; }
};

class RandomSearchEnsuredComm final : public Controller
{
  public:
    std::vector<Action> act(const EnvState& state, const EnvConfig& config, std::mt19937_64& rng) override
    {
        return rsec_action(state, config, rng);
    }
    std::string name() const override { return "rsec"; }
};

class GreedySearch final : public Controller
{
  public:
    std::vector<Action> act(const EnvState& state, const EnvConfig& config, std::mt19937_64& rng) override;
    std::string name() const override { return "gs"; }
};

} // namespace galopp
