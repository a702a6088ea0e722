#pragma once

// Minimal reverse-mode differentiation over dense Eigen matrices.
//
// Every value is a 2-D matrix whose rows are batch samples. Images are stored
// one per row, flattened channel-first (c * H * W + h * W + w).

#include "galopp/types.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace galopp::nd
{

struct Parameter
{
    std::string name;
    Matrix value;
    Matrix grad;

    Parameter() = default;
    Parameter(std::string n, Matrix v)
        : name(std::move(n)), value(std::move(v)), grad(Matrix::Zero(value.rows(), value.cols()))
    {
    }
    void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

class Tape;

/// Handle to a recorded node.
struct Var
{
    Tape* tape = nullptr;
    int id = -1;

    const Matrix& value() const;
    const Matrix& grad() const;
    Eigen::Index rows() const { return value().rows(); }
    Eigen::Index cols() const { return value().cols(); }
};

class Tape
{
  public:
    using Backward = std::function<void(Tape&, int self)>;

    /// A tape with tracking off records values only (inference).
    explicit Tape(bool tracking = true) : tracking_(tracking) {}

    Var constant(Matrix value);
    Var leaf(Matrix value); // differentiable input; read its gradient with grad()
    Var param(Parameter& p); // reads p.value in place, no copy

    /// Appends a node. It requires a gradient iff any parent does.
    Var record(Matrix value, std::vector<int> parents, Backward backward);

    const Matrix& value(int id) const
    {
        const Node& n = nodes_[id];
        return n.param ? n.param->value : n.value;
    }
    const Matrix& grad(int id) const { return nodes_[id].grad; }
    bool requires_grad(int id) const { return nodes_[id].requires_grad; }

    /// Adds g into the gradient of node id (no-op when it needs none).
    template <class Derived>
    void accumulate(int id, const Eigen::MatrixBase<Derived>& g)
    {
        Node& n = nodes_[id];
        if (!n.requires_grad)
            return;
        if (n.grad.size() == 0)
            n.grad = g;
        else
            n.grad += g;
    }

    /// Reverse sweep from a 1x1 loss; parameter gradients are added into
    /// Parameter::grad.
    void backward(Var loss);

    std::size_t size() const { return nodes_.size(); }
    std::size_t backward_visits() const { return visits_; }

  private:
    struct Node
    {
        Matrix value;
        Matrix grad;
        std::vector<int> parents;
        Backward backward;
        Parameter* param = nullptr;
        bool requires_grad = false;
    };
    std::vector<Node> nodes_;
    std::size_t visits_ = 0;
    bool tracking_ = true;
};

// Affine and elementwise primitives.
Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var add_row(Var x, Var bias); // bias is 1 x cols, broadcast over rows
Var linear(Var x, Var weight, Var bias); // x W + b; W is in x out
Var relu(Var x);
Var exp(Var x);
Var square(Var x);
Var clamp(Var x, double lo, double hi);
Var minimum(Var a, Var b);
Var sum(Var x);
Var mean(Var x);
Var concat_cols(Var a, Var b);
Var flatten(Var x);

// Row-wise distributions.
Var softmax_rows(Var logits);
Var log_softmax_rows(Var logits);
Var pick(Var x, std::span<const int> columns); // n x 1 with x(i, columns[i])

// Row routing.
Var gather_rows(Var x, std::span<const int> rows);
Var scatter_rows(std::span<const Var> parts, std::span<const std::vector<int>> rows, Eigen::Index total_rows);

struct ImageShape
{
    int channels = 0;
    int height = 0;
    int width = 0;
    int size() const { return channels * height * width; }
    friend bool operator==(const ImageShape&, const ImageShape&) = default;
};

int conv_output_dim(int in, int kernel, int stride, int padding);

/// Zero-padded cross-correlation. kernel is out_channels x (in_channels * k * k),
/// bias is 1 x out_channels.
Var conv2d(Var input, const ImageShape& in_shape, Var kernel, Var bias, int kernel_size, int stride,
           int padding, ImageShape* out_shape = nullptr);

/// Mixes consecutive row blocks: rows of block k are replaced by A_k times them.
Var block_mix(Var x, std::span<const Matrix> blocks);

/// relu(A_g H W) applied independently to every graph in the batch.
Var graph_conv(Var h, std::span<const Matrix> adjacency, Var weight);

// Sampling.

struct Sample
{
    int index = 0;
    double log_prob = 0.0;
};

/// Draws an index from a probability vector. Throws std::invalid_argument on
/// negative entries or a sum farther than 1e-6 from 1.
Sample categorical_sample(std::span<const double> probabilities, std::mt19937_64& rng);

// Optimization.

struct OptimizerState
{
    double lr = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long step = 0;
    std::vector<Matrix> m;
    std::vector<Matrix> v;
};

/// Bias-corrected adaptive-moment step using each parameter's grad.
void adam_step(std::span<Parameter* const> params, OptimizerState& state);

/// Rescales gradients so their global L2 norm is at most max_norm; returns the
/// norm before clipping.
double clip_grad_norm(std::span<Parameter* const> params, double max_norm);

// Verification.

struct GradCheckReport
{
    double max_rel_error = 0.0;
    double max_abs_error = 0.0;
    std::vector<double> per_input_rel_error;
    std::size_t entries = 0;

    bool passed(double tol) const { return max_rel_error <= tol; }
};

using ScalarFunction = std::function<Var(Tape&, std::span<const Var>)>;

/// Compares tape gradients of a scalar function against central differences
/// (step h) for every entry of every input. Relative error per entry is
/// |a - n| / max(|a|, |n|, 1e-6).
GradCheckReport finite_diff_check(const ScalarFunction& f, const std::vector<Matrix>& inputs, double h = 1e-5);

// Checkpoints: binary key -> matrix map with shape headers and a metadata string.

struct Checkpoint
{
    std::string metadata;
    std::map<std::string, Matrix> arrays;
};

void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

} // namespace galopp::nd
