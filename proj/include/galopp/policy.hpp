#pragma once

#include "galopp/env.hpp"
#include "galopp/model.hpp"

#include <random>
#include <string>
#include <vector>

namespace galopp
{

/// Network inputs for the current step: one graph, one row per agent.
GraphBatch observe(const EnvState& state, const EnvConfig& config, const NetworkSpec& spec);

struct Inference
{
    Matrix probs;  // rows x 5
    Vector values; // rows
};

/// Forward pass without gradient tracking.
Inference infer(Network& net, const GraphBatch& batch);

int argmax_action(const Eigen::Ref<const Eigen::RowVectorXd>& probs);

/// Chooses one action per agent for the current state.
class Controller
{
  public:
    virtual ~Controller() = default;
    virtual std::vector<Action> act(const EnvState& state, const EnvConfig& config, std::mt19937_64& rng) = 0;
    virtual std::string name() const = 0;
};

class GaloppController final : public Controller
{
  public:
    GaloppController(Network& net, bool greedy) : net_(net), greedy_(greedy) {}
    std::vector<Action> act(const EnvState& state, const EnvConfig& config, std::mt19937_64& rng) override;
    std::string name() const override { return "galopp"; }

  private:
    Network& net_;
    bool greedy_;
};

} // namespace galopp
