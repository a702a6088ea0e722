#include "galopp/ndiff.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace galopp::nd
{

const Matrix& Var::value() const
{
    return tape->value(id);
}

const Matrix& Var::grad() const
{
    return tape->grad(id);
}

Var Tape::record(Matrix value, std::vector<int> parents, Backward backward)
{
    if (!value.allFinite())
        throw std::domain_error("non-finite value produced on tape");
    Node n;
    n.value = std::move(value);
    n.requires_grad = false;
    for (int p : parents)
        n.requires_grad = n.requires_grad || nodes_[p].requires_grad;
    n.parents = std::move(parents);
    if (n.requires_grad)
        n.backward = std::move(backward);
    nodes_.push_back(std::move(n));
    return {this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::constant(Matrix value)
{
    return record(std::move(value), {}, {});
}

Var Tape::leaf(Matrix value)
{
    Var v = record(std::move(value), {}, {});
    nodes_[v.id].requires_grad = tracking_;
    return v;
}

Var Tape::param(Parameter& p)
{
    Node n;
    n.param = &p;
    n.requires_grad = tracking_;
    nodes_.push_back(std::move(n));
    return {this, static_cast<int>(nodes_.size()) - 1};
}

void Tape::backward(Var loss)
{
    if (loss.tape != this)
        throw std::invalid_argument("backward: variable belongs to another tape");
    Node& root = nodes_[loss.id];
    if (value(loss.id).size() != 1)
        throw std::invalid_argument("backward: loss must be a 1x1 value");
    if (!root.requires_grad)
        return;
    root.grad = Matrix::Ones(1, 1);
    for (int i = loss.id; i >= 0; --i)
    {
        Node& n = nodes_[i];
        if (!n.requires_grad || n.grad.size() == 0)
            continue;
        ++visits_;
        if (n.backward)
            n.backward(*this, i);
        if (n.param)
        {
            if (n.param->grad.size() == 0)
                n.param->grad = Matrix::Zero(n.param->value.rows(), n.param->value.cols());
            n.param->grad += n.grad;
        }
    }
}

namespace
{

void require_same_tape(Var a, Var b)
{
    if (a.tape != b.tape)
        throw std::invalid_argument("operands live on different tapes");
}

void require_same_shape(Var a, Var b, const char* op)
{
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw std::invalid_argument(std::string(op) + ": shape mismatch");
}

} // namespace

Var matmul(Var a, Var b)
{
    require_same_tape(a, b);
    if (a.cols() != b.rows())
        throw std::invalid_argument("matmul: inner dimensions differ");
    Tape& t = *a.tape;
    return t.record(a.value() * b.value(), {a.id, b.id}, [a = a.id, b = b.id](Tape& t, int self) {
        const Matrix& g = t.grad(self);
        if (t.requires_grad(a))
            t.accumulate(a, g * t.value(b).transpose());
        if (t.requires_grad(b))
            t.accumulate(b, t.value(a).transpose() * g);
    });
}

Var add(Var a, Var b)
{
    require_same_tape(a, b);
    require_same_shape(a, b, "add");
    return a.tape->record(a.value() + b.value(), {a.id, b.id}, [a = a.id, b = b.id](Tape& t, int self) {
        t.accumulate(a, t.grad(self));
        t.accumulate(b, t.grad(self));
    });
}

Var sub(Var a, Var b)
{
    require_same_tape(a, b);
    require_same_shape(a, b, "sub");
    return a.tape->record(a.value() - b.value(), {a.id, b.id}, [a = a.id, b = b.id](Tape& t, int self) {
        t.accumulate(a, t.grad(self));
        t.accumulate(b, -t.grad(self));
    });
}

Var mul(Var a, Var b)
{
    require_same_tape(a, b);
    require_same_shape(a, b, "mul");
    return a.tape->record(a.value().cwiseProduct(b.value()), {a.id, b.id},
                          [a = a.id, b = b.id](Tape& t, int self) {
                              const Matrix& g = t.grad(self);
                              if (t.requires_grad(a))
                                  t.accumulate(a, g.cwiseProduct(t.value(b)));
                              if (t.requires_grad(b))
                                  t.accumulate(b, g.cwiseProduct(t.value(a)));
                          });
}

Var scale(Var a, double s)
{
    return a.tape->record(s * a.value(), {a.id}, [a = a.id, s](Tape& t, int self) {
        t.accumulate(a, s * t.grad(self));
    });
}

Var add_row(Var x, Var bias)
{
    require_same_tape(x, bias);
    if (bias.rows() != 1 || bias.cols() != x.cols())
        throw std::invalid_argument("add_row: bias must be 1 x cols");
    Matrix y = x.value();
    y.rowwise() += bias.value().row(0);
    return x.tape->record(std::move(y), {x.id, bias.id}, [x = x.id, b = bias.id](Tape& t, int self) {
        const Matrix& g = t.grad(self);
        t.accumulate(x, g);
        if (t.requires_grad(b))
            t.accumulate(b, g.colwise().sum());
    });
}

Var linear(Var x, Var weight, Var bias)
{
    return add_row(matmul(x, weight), bias);
}

Var relu(Var x)
{
    return x.tape->record(x.value().cwiseMax(0.0), {x.id}, [x = x.id](Tape& t, int self) {
        const Matrix& v = t.value(x);
        t.accumulate(x, (v.array() > 0.0).select(t.grad(self), 0.0));
    });
}

Var exp(Var x)
{
    return x.tape->record(x.value().array().exp().matrix(), {x.id}, [x = x.id](Tape& t, int self) {
        t.accumulate(x, t.grad(self).cwiseProduct(t.value(self)));
    });
}

Var square(Var x)
{
    return x.tape->record(x.value().cwiseAbs2(), {x.id}, [x = x.id](Tape& t, int self) {
        t.accumulate(x, 2.0 * t.grad(self).cwiseProduct(t.value(x)));
    });
}

Var clamp(Var x, double lo, double hi)
{
    if (lo > hi)
        throw std::invalid_argument("clamp: lo > hi");
    return x.tape->record(x.value().cwiseMax(lo).cwiseMin(hi), {x.id}, [x = x.id, lo, hi](Tape& t, int self) {
        const auto v = t.value(x).array();
        t.accumulate(x, (v >= lo && v <= hi).select(t.grad(self), 0.0));
    });
}

Var minimum(Var a, Var b)
{
    require_same_tape(a, b);
    require_same_shape(a, b, "minimum");
    return a.tape->record(a.value().cwiseMin(b.value()), {a.id, b.id}, [a = a.id, b = b.id](Tape& t, int self) {
        const auto take_a = t.value(a).array() <= t.value(b).array();
        const Matrix& g = t.grad(self);
        if (t.requires_grad(a))
            t.accumulate(a, take_a.select(g, 0.0));
        if (t.requires_grad(b))
            t.accumulate(b, take_a.select(Matrix::Zero(g.rows(), g.cols()), g));
    });
}

Var sum(Var x)
{
    Matrix y(1, 1);
    y(0, 0) = x.value().sum();
    return x.tape->record(std::move(y), {x.id}, [x = x.id](Tape& t, int self) {
        const Matrix& v = t.value(x);
        t.accumulate(x, Matrix::Constant(v.rows(), v.cols(), t.grad(self)(0, 0)));
    });
}

Var mean(Var x)
{
    const double n = static_cast<double>(x.value().size());
    if (n == 0)
        throw std::invalid_argument("mean of an empty value");
    return scale(sum(x), 1.0 / n);
}

Var concat_cols(Var a, Var b)
{
    require_same_tape(a, b);
    if (a.rows() != b.rows())
        throw std::invalid_argument("concat_cols: row counts differ");
    Matrix y(a.rows(), a.cols() + b.cols());
    y << a.value(), b.value();
    const Eigen::Index ca = a.cols();
    return a.tape->record(std::move(y), {a.id, b.id}, [a = a.id, b = b.id, ca](Tape& t, int self) {
        const Matrix& g = t.grad(self);
        if (t.requires_grad(a))
            t.accumulate(a, g.leftCols(ca));
        if (t.requires_grad(b))
            t.accumulate(b, g.rightCols(g.cols() - ca));
    });
}

Var flatten(Var x)
{
    return x;
}

Var softmax_rows(Var logits)
{
    Matrix y = logits.value();
    for (Eigen::Index r = 0; r < y.rows(); ++r)
    {
        y.row(r).array() -= y.row(r).maxCoeff();
        y.row(r) = y.row(r).array().exp();
        y.row(r) /= y.row(r).sum();
    }
    return logits.tape->record(std::move(y), {logits.id}, [x = logits.id](Tape& t, int self) {
        const Matrix& p = t.value(self);
        const Matrix& g = t.grad(self);
        const Vector dot = g.cwiseProduct(p).rowwise().sum();
        t.accumulate(x, p.cwiseProduct(g - dot.replicate(1, g.cols())));
    });
}

Var log_softmax_rows(Var logits)
{
    Matrix y = logits.value();
    for (Eigen::Index r = 0; r < y.rows(); ++r)
    {
        const double m = y.row(r).maxCoeff();
        const double lse = m + std::log((y.row(r).array() - m).exp().sum());
        y.row(r).array() -= lse;
    }
    return logits.tape->record(std::move(y), {logits.id}, [x = logits.id](Tape& t, int self) {
        const Matrix p = t.value(self).array().exp().matrix();
        const Matrix& g = t.grad(self);
        const Vector total = g.rowwise().sum();
        t.accumulate(x, g - p.cwiseProduct(total.replicate(1, g.cols())));
    });
}

Var pick(Var x, std::span<const int> columns)
{
    if (static_cast<Eigen::Index>(columns.size()) != x.rows())
        throw std::invalid_argument("pick: one column index per row required");
    Matrix y(x.rows(), 1);
    for (Eigen::Index r = 0; r < x.rows(); ++r)
    {
        if (columns[r] < 0 || columns[r] >= x.cols())
            throw std::out_of_range("pick: column index out of range");
        y(r, 0) = x.value()(r, columns[r]);
    }
    std::vector<int> cols(columns.begin(), columns.end());
    return x.tape->record(std::move(y), {x.id}, [x = x.id, cols = std::move(cols)](Tape& t, int self) {
        const Matrix& g = t.grad(self);
        Matrix dx = Matrix::Zero(t.value(x).rows(), t.value(x).cols());
        for (Eigen::Index r = 0; r < dx.rows(); ++r)
            dx(r, cols[r]) = g(r, 0);
        t.accumulate(x, dx);
    });
}

Var gather_rows(Var x, std::span<const int> rows)
{
    Matrix y(static_cast<Eigen::Index>(rows.size()), x.cols());
    for (std::size_t k = 0; k < rows.size(); ++k)
    {
        if (rows[k] < 0 || rows[k] >= x.rows())
            throw std::out_of_range("gather_rows: row index out of range");
        y.row(k) = x.value().row(rows[k]);
    }
    std::vector<int> idx(rows.begin(), rows.end());
    return x.tape->record(std::move(y), {x.id}, [x = x.id, idx = std::move(idx)](Tape& t, int self) {
        const Matrix& g = t.grad(self);
        Matrix dx = Matrix::Zero(t.value(x).rows(), t.value(x).cols());
        for (std::size_t k = 0; k < idx.size(); ++k)
            dx.row(idx[k]) += g.row(k);
        t.accumulate(x, dx);
    });
}

Var scatter_rows(std::span<const Var> parts, std::span<const std::vector<int>> rows, Eigen::Index total_rows)
{
    if (parts.empty() || parts.size() != rows.size())
        throw std::invalid_argument("scatter_rows: parts and row lists differ");
    Tape& t = *parts.front().tape;
    const Eigen::Index cols = parts.front().cols();
    Matrix y = Matrix::Zero(total_rows, cols);
    std::vector<int> parents;
    for (std::size_t p = 0; p < parts.size(); ++p)
    {
        if (parts[p].cols() != cols || parts[p].rows() != static_cast<Eigen::Index>(rows[p].size()))
            throw std::invalid_argument("scatter_rows: part shape mismatch");
        for (std::size_t k = 0; k < rows[p].size(); ++k)
            y.row(rows[p][k]) = parts[p].value().row(k);
        parents.push_back(parts[p].id);
    }
    std::vector<std::vector<int>> idx(rows.begin(), rows.end());
    std::vector<int> ids = parents;
    return t.record(std::move(y), std::move(parents), [ids, idx = std::move(idx)](Tape& t, int self) {
        const Matrix& g = t.grad(self);
        for (std::size_t p = 0; p < ids.size(); ++p)
        {
            if (!t.requires_grad(ids[p]))
                continue;
            Matrix dp(static_cast<Eigen::Index>(idx[p].size()), g.cols());
            for (std::size_t k = 0; k < idx[p].size(); ++k)
                dp.row(k) = g.row(idx[p][k]);
            t.accumulate(ids[p], dp);
        }
    });
}

int conv_output_dim(int in, int kernel, int stride, int padding)
{
    const int span = in + 2 * padding - kernel;
    if (stride <= 0 || span < 0)
        return 0;
    return span / stride + 1;
}

namespace
{

struct ConvGeometry
{
    ImageShape in;
    int out_h = 0;
    int out_w = 0;
    int k = 0;
    int stride = 1;
    int pad = 0;

    int patch() const { return in.channels * k * k; }
    int positions() const { return out_h * out_w; }
};

// Patches of every sample stacked: (batch * positions) x (channels * k * k).
Matrix im2col(const Matrix& x, const ConvGeometry& geo)
{
    const Eigen::Index batch = x.rows();
    Matrix cols = Matrix::Zero(batch * geo.positions(), geo.patch());
    const int h = geo.in.height, w = geo.in.width, k = geo.k;
    for (Eigen::Index b = 0; b < batch; ++b)
        for (int oy = 0; oy < geo.out_h; ++oy)
            for (int ox = 0; ox < geo.out_w; ++ox)
            {
                const Eigen::Index row = b * geo.positions() + oy * geo.out_w + ox;
                for (int c = 0; c < geo.in.channels; ++c)
                    for (int ky = 0; ky < k; ++ky)
                    {
                        const int iy = oy * geo.stride - geo.pad + ky;
                        if (iy < 0 || iy >= h)
                            continue;
                        for (int kx = 0; kx < k; ++kx)
                        {
                            const int ix = ox * geo.stride - geo.pad + kx;
                            if (ix < 0 || ix >= w)
                                continue;
                            cols(row, (c * k + ky) * k + kx) = x(b, (c * h + iy) * w + ix);
                        }
                    }
            }
    return cols;
}

Matrix col2im(const Matrix& dcols, Eigen::Index batch, const ConvGeometry& geo)
{
    Matrix dx = Matrix::Zero(batch, geo.in.size());
    const int h = geo.in.height, w = geo.in.width, k = geo.k;
    for (Eigen::Index b = 0; b < batch; ++b)
        for (int oy = 0; oy < geo.out_h; ++oy)
            for (int ox = 0; ox < geo.out_w; ++ox)
            {
                const Eigen::Index row = b * geo.positions() + oy * geo.out_w + ox;
                for (int c = 0; c < geo.in.channels; ++c)
                    for (int ky = 0; ky < k; ++ky)
                    {
                        const int iy = oy * geo.stride - geo.pad + ky;
                        if (iy < 0 || iy >= h)
                            continue;
                        for (int kx = 0; kx < k; ++kx)
                        {
                            const int ix = ox * geo.stride - geo.pad + kx;
                            if (ix < 0 || ix >= w)
                                continue;
                            dx(b, (c * h + iy) * w + ix) += dcols(row, (c * k + ky) * k + kx);
                        }
                    }
            }
    return dx;
}

} // namespace

Var conv2d(Var input, const ImageShape& in_shape, Var kernel, Var bias, int kernel_size, int stride, int padding,
           ImageShape* out_shape)
{
    require_same_tape(input, kernel);
    require_same_tape(input, bias);
    if (input.cols() != in_shape.size())
        throw std::invalid_argument("conv2d: input width does not match the image shape");
    ConvGeometry geo{in_shape, conv_output_dim(in_shape.height, kernel_size, stride, padding),
                     conv_output_dim(in_shape.width, kernel_size, stride, padding), kernel_size, stride, padding};
    if (geo.out_h < 1 || geo.out_w < 1)
        throw std::invalid_argument("conv2d: non-positive output dimension for input " +
                                    std::to_string(in_shape.height) + "x" + std::to_string(in_shape.width));
    const Eigen::Index out_c = kernel.rows();
    if (kernel.cols() != geo.patch())
        throw std::invalid_argument("conv2d: kernel width does not match in_channels * k * k");
    if (bias.rows() != 1 || bias.cols() != out_c)
        throw std::invalid_argument("conv2d: bias must be 1 x out_channels");

    const Eigen::Index batch = input.rows();
    Matrix cols = im2col(input.value(), geo);
    Matrix prod = cols * kernel.value().transpose(); // (batch * P) x out_c
    prod.rowwise() += bias.value().row(0);

    const int positions = geo.positions();
    Matrix y(batch, out_c * positions);
    for (Eigen::Index b = 0; b < batch; ++b)
        for (Eigen::Index c = 0; c < out_c; ++c)
            y.block(b, c * positions, 1, positions) = prod.block(b * positions, c, positions, 1).transpose();

    if (out_shape)
        *out_shape = {static_cast<int>(out_c), geo.out_h, geo.out_w};

    return input.tape->record(
        std::move(y), {input.id, kernel.id, bias.id},
        [x = input.id, kid = kernel.id, bid = bias.id, geo, cols = std::move(cols), out_c, batch](Tape& t, int self) {
            const Matrix& g = t.grad(self);
            const int positions = geo.positions();
            Matrix dprod(batch * positions, out_c);
            for (Eigen::Index b = 0; b < batch; ++b)
                for (Eigen::Index c = 0; c < out_c; ++c)
                    dprod.block(b * positions, c, positions, 1) = g.block(b, c * positions, 1, positions).transpose();
            if (t.requires_grad(kid))
                t.accumulate(kid, dprod.transpose() * cols);
            if (t.requires_grad(bid))
                t.accumulate(bid, dprod.colwise().sum());
            if (t.requires_grad(x))
                t.accumulate(x, col2im(dprod * t.value(kid), batch, geo));
        });
}

Var block_mix(Var x, std::span<const Matrix> blocks)
{
    Eigen::Index total = 0;
    for (const auto& a : blocks)
    {
        if (a.rows() != a.cols())
            throw std::invalid_argument("block_mix: adjacency blocks must be square");
        total += a.rows();
    }
    if (total != x.rows())
        throw std::invalid_argument("block_mix: blocks do not cover the rows");
    Matrix y(x.rows(), x.cols());
    Eigen::Index r = 0;
    for (const auto& a : blocks)
    {
        y.middleRows(r, a.rows()).noalias() = a * x.value().middleRows(r, a.rows());
        r += a.rows();
    }
    std::vector<Matrix> kept(blocks.begin(), blocks.end());
    return x.tape->record(std::move(y), {x.id}, [x = x.id, kept = std::move(kept)](Tape& t, int self) {
        const Matrix& g = t.grad(self);
        Matrix dx(g.rows(), g.cols());
        Eigen::Index r = 0;
        for (const auto& a : kept)
        {
            dx.middleRows(r, a.rows()).noalias() = a.transpose() * g.middleRows(r, a.rows());
            r += a.rows();
        }
        t.accumulate(x, dx);
    });
}

Var graph_conv(Var h, std::span<const Matrix> adjacency, Var weight)
{
    if (h.cols() != weight.rows())
        throw std::invalid_argument("graph_conv: feature width does not match W");
    return relu(block_mix(matmul(h, weight), adjacency));
}

Sample categorical_sample(std::span<const double> probabilities, std::mt19937_64& rng)
{
    if (probabilities.empty())
        throw std::invalid_argument("categorical_sample: empty distribution");
    double total = 0.0;
    for (double p : probabilities)
    {
        if (!(p >= 0.0) || !std::isfinite(p))
            throw std::invalid_argument("categorical_sample: negative or non-finite probability");
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-6)
        throw std::invalid_argument("categorical_sample: probabilities do not sum to 1");

    std::uniform_real_distribution<double> unit(0.0, total);
    const double u = unit(rng);
    double acc = 0.0;
    int chosen = -1;
    for (std::size_t i = 0; i < probabilities.size(); ++i)
    {
        if (probabilities[i] <= 0.0)
            continue;
        chosen = static_cast<int>(i);
        acc += probabilities[i];
        if (u < acc)
            break;
    }
    return {chosen, std::log(probabilities[chosen])};
}

void adam_step(std::span<Parameter* const> params, OptimizerState& s)
{
    if (s.m.size() != params.size())
    {
        s.m.clear();
        s.v.clear();
        for (const Parameter* p : params)
        {
            s.m.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
            s.v.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
        }
    }
    ++s.step;
    const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
    const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
    for (std::size_t k = 0; k < params.size(); ++k)
    {
        Parameter& p = *params[k];
        if (p.grad.rows() != p.value.rows() || p.grad.cols() != p.value.cols())
            throw std::invalid_argument("adam_step: gradient shape mismatch for " + p.name);
        s.m[k] = s.beta1 * s.m[k] + (1.0 - s.beta1) * p.grad;
        s.v[k] = s.beta2 * s.v[k] + (1.0 - s.beta2) * p.grad.cwiseAbs2();
        p.value.array() -= s.lr * (s.m[k].array() / c1) / ((s.v[k].array() / c2).sqrt() + s.eps);
    }
}

double clip_grad_norm(std::span<Parameter* const> params, double max_norm)
{
    double sq = 0.0;
    for (const Parameter* p : params)
        sq += p->grad.squaredNorm();
    const double norm = std::sqrt(sq);
    if (norm > max_norm && norm > 0.0)
        for (Parameter* p : params)
            p->grad *= max_norm / norm;
    return norm;
}

GradCheckReport finite_diff_check(const ScalarFunction& f, const std::vector<Matrix>& inputs, double h)
{
    GradCheckReport report;
    Tape tape;
    std::vector<Var> leaves;
    for (const auto& m : inputs)
        leaves.push_back(tape.leaf(m));
    tape.backward(f(tape, leaves));

    auto evaluate = [&](const std::vector<Matrix>& xs) {
        Tape t;
        std::vector<Var> vs;
        for (const auto& m : xs)
            vs.push_back(t.constant(m));
        return f(t, vs).value()(0, 0);
    };

    std::vector<Matrix> work = inputs;
    for (std::size_t k = 0; k < inputs.size(); ++k)
    {
        const Matrix& analytic_full = tape.grad(leaves[k].id);
        double worst = 0.0;
        for (Eigen::Index i = 0; i < inputs[k].size(); ++i)
        {
            const double x0 = inputs[k](i);
            work[k](i) = x0 + h;
            const double fp = evaluate(work);
            work[k](i) = x0 - h;
            const double fm = evaluate(work);
            work[k](i) = x0;
            const double numeric = (fp - fm) / (2.0 * h);
            const double analytic = analytic_full.size() ? analytic_full(i) : 0.0;
            const double abs_err = std::abs(analytic - numeric);
            const double rel = abs_err / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
            worst = std::max(worst, rel);
            report.max_abs_error = std::max(report.max_abs_error, abs_err);
            ++report.entries;
        }
        report.per_input_rel_error.push_back(worst);
        report.max_rel_error = std::max(report.max_rel_error, worst);
    }
    return report;
}

namespace
{

constexpr char checkpoint_magic[] = "GALOPPCK1";

void write_u64(std::ofstream& out, std::uint64_t v)
{
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint64_t read_u64(std::ifstream& in)
{
    std::uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in)
        throw std::runtime_error("checkpoint truncated");
    return v;
}

std::string read_string(std::ifstream& in)
{
    const std::uint64_t n = read_u64(in);
    if (n > (1ull << 32))
        throw std::runtime_error("checkpoint string length is implausible");
    std::string s(n, '\0');
    in.read(s.data(), static_cast<std::streamsize>(n));
    if (!in)
        throw std::runtime_error("checkpoint truncated");
    return s;
}

} // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ck)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot write checkpoint " + path);
    out.write(checkpoint_magic, sizeof checkpoint_magic - 1);
    write_u64(out, ck.metadata.size());
    out.write(ck.metadata.data(), static_cast<std::streamsize>(ck.metadata.size()));
    write_u64(out, ck.arrays.size());
    for (const auto& [name, m] : ck.arrays)
    {
        write_u64(out, name.size());
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_u64(out, static_cast<std::uint64_t>(m.rows()));
        write_u64(out, static_cast<std::uint64_t>(m.cols()));
        out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
    }
    if (!out)
        throw std::runtime_error("failed writing checkpoint " + path);
}

Checkpoint load_checkpoint(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot open checkpoint " + path);
    char magic[sizeof checkpoint_magic - 1];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, checkpoint_magic, sizeof magic) != 0)
        throw std::runtime_error("not a checkpoint file: " + path);
    Checkpoint ck;
    ck.metadata = read_string(in);
    const std::uint64_t count = read_u64(in);
    for (std::uint64_t k = 0; k < count; ++k)
    {
        std::string name = read_string(in);
        const auto rows = static_cast<Eigen::Index>(read_u64(in));
        const auto cols = static_cast<Eigen::Index>(read_u64(in));
        Matrix m(rows, cols);
        in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
        if (!in)
            throw std::runtime_error("checkpoint truncated in " + name);
        ck.arrays.emplace(std::move(name), std::move(m));
    }
    return ck;
}

} // namespace galopp::nd
