#pragma once

#include "galopp/comms.hpp"
#include "galopp/grid.hpp"
#include "galopp/loc.hpp"
#include "galopp/ndiff.hpp"

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

namespace galopp
{

struct ConvLayerSpec
{
    int in_channels = 0;
    int out_channels = 0;
    int kernel = 0;
    int stride = 1;
    int padding = 0;

    friend bool operator==(const ConvLayerSpec&, const ConvLayerSpec&) = default;
};

struct NetworkSpec
{
    int input_size = 15; // observation window edge; both channels are input_size^2
    std::vector<ConvLayerSpec> conv{{2, 16, 8, 4, 1}, {16, 32, 4, 2, 1}, {32, 32, 3, 1, 1}};
    int state_dim = 6;
    int gcn_layers = 1;
    std::vector<int> actor_hidden{500, 256};
    std::vector<int> critic_hidden{500, 256};
    GcnNorm gcn_norm = GcnNorm::none;
    bool critic_uses_aggregated = false;
    bool per_agent_actors = false;
    int n_agents = 1; // actor count when per_agent_actors is set
    bool center_on_true_position = false;
    double position_scale = 1.0 / 30.0;
    double covariance_scale = 0.01;

    /// Image shapes after each conv layer; throws when a layer is infeasible.
    std::vector<nd::ImageShape> shape_trace() const;
    int embedding_dim() const;
    int info_dim() const { return embedding_dim() + state_dim; }
    void validate() const;

    friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

/// Two g x g channels indexed (x, y): the local slice and the mini-map.
struct ObservationStack
{
    Matrix local;
    Matrix mini;

    /// Channel-first row vector, image row = y, image column = x.
    Eigen::RowVectorXd flatten() const;
};

using StateVector = Eigen::Matrix<double, 6, 1>;

/// Area-weighted mean pooling of an A x B map onto g x g.
Matrix downsample_minimap(const CellArray& map, int target);

/// Local slice around the believed (or true) position plus the mini-map,
/// both divided by max_penalty, and the raw state vector (mu, vec(Sigma)).
std::pair<ObservationStack, StateVector> encode_observation(const AgentState& agent, const CellArray& map_copy,
                                                            const GridSpec& grid, const NetworkSpec& spec);

/// Inputs for a batch of graphs with equal agent counts. Row r belongs to
/// graph r / agents_per_graph, agent r % agents_per_graph.
struct GraphBatch
{
    Matrix observations; // rows x (2 * g * g)
    Matrix states;       // rows x 6
    std::vector<Matrix> adjacency;
    int agents_per_graph = 1;

    Eigen::Index rows() const { return observations.rows(); }
};

struct NetworkOutput
{
    nd::Var embedding;  // rows x 32
    nd::Var info;       // z, rows x 38
    nd::Var aggregated; // z', rows x 38
    nd::Var logits;
    nd::Var log_probs;
    nd::Var probs;
    nd::Var values; // rows x 1
};

class Network
{
  public:
    Network(NetworkSpec spec, std::uint64_t seed);

    const NetworkSpec& spec() const { return spec_; }
    std::vector<nd::Parameter*> parameters();
    std::size_t parameter_count() const;

    nd::Var conv_embed(nd::Tape& tape, nd::Var observations);
    nd::Var build_information_vector(nd::Tape& tape, nd::Var embedding, const Matrix& states);
    nd::Var graphnet_aggregate(nd::Tape& tape, nd::Var info, std::span<const Matrix> adjacency);
    /// Returns logits; softmax of them gives the five action probabilities.
    nd::Var actor_logits(nd::Tape& tape, nd::Var aggregated, int agents_per_graph);
    nd::Var critic_forward(nd::Tape& tape, nd::Var input);

    NetworkOutput forward(nd::Tape& tape, const GraphBatch& batch);

    nd::Checkpoint to_checkpoint() const;
    static Network from_checkpoint(const nd::Checkpoint& ck);
    void load_parameters(const nd::Checkpoint& ck);

  private:
    struct Dense
    {
        nd::Parameter weight; // in x out
        nd::Parameter bias;   // 1 x out
    };
    struct Conv
    {
        nd::Parameter kernel; // out x (in * k * k)
        nd::Parameter bias;
        ConvLayerSpec spec;
    };

    nd::Var mlp(nd::Tape& tape, nd::Var x, std::vector<Dense>& layers);

    NetworkSpec spec_;
    std::vector<Conv> conv_;
    std::vector<nd::Parameter> gcn_;
    std::vector<std::vector<Dense>> actors_;
    std::vector<Dense> critic_;
};

std::string network_spec_to_json(const NetworkSpec& spec);
NetworkSpec network_spec_from_json(const std::string& text);

} // namespace galopp
