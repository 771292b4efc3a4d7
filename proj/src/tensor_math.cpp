#include "evfl/tensor_math.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "evfl/rng.hpp"

namespace evfl {

double Rng::next_gaussian() {
    if (have_spare_) {
        have_spare_ = false;
        return spare_;
    }
    // Box-Muller on (0,1] x [0,1) so the log argument is never zero.
    double u1 = 1.0 - next_unit();
    double u2 = next_unit();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_)
        throw DimError("DenseMatrix: data length " + std::to_string(data_.size()) +
                       " does not match " + std::to_string(rows_) + "x" + std::to_string(cols_));
}

void throw_dim(const char* op, std::size_t got, std::size_t want) {
    throw DimError(std::string(op) + ": dimension mismatch, got " + std::to_string(got) +
                   ", expected " + std::to_string(want));
}

Vector affine_forward(const DenseMatrix& W, const Vector& b, const Vector& x) {
    if (x.size() != W.cols()) throw_dim("affine_forward(x)", x.size(), W.cols());
    if (!b.empty() && b.size() != W.rows()) throw_dim("affine_forward(b)", b.size(), W.rows());
    Vector y(W.rows(), 0.0);
    const double* w = W.data();
    const std::size_t cols = W.cols();
    for (std::size_t r = 0; r < W.rows(); ++r) {
        const double* row = w + r * cols;
        double acc = 0.0;
        for (std::size_t c = 0; c < cols; ++c) acc += row[c] * x[c];
        y[r] = b.empty() ? acc : acc + b[r];
    }
    return y;
}

AffineGrads affine_backward(const DenseMatrix& W, bool has_bias, const Vector& x,
                            const Vector& g_out) {
    if (x.size() != W.cols()) throw_dim("affine_backward(x)", x.size(), W.cols());
    if (g_out.size() != W.rows()) throw_dim("affine_backward(g_out)", g_out.size(), W.rows());
    AffineGrads g;
    g.gW = DenseMatrix(W.rows(), W.cols());
    const std::size_t cols = W.cols();
    for (std::size_t r = 0; r < W.rows(); ++r) {
        double* grow = g.gW.data() + r * cols;
        const double go = g_out[r];
        for (std::size_t c = 0; c < cols; ++c) grow[c] = go * x[c];
    }
    if (has_bias) g.gb = g_out;
    g.gx.assign(W.cols(), 0.0);
    const double* w = W.data();
    for (std::size_t r = 0; r < W.rows(); ++r) {
        const double* row = w + r * cols;
        const double go = g_out[r];
        for (std::size_t c = 0; c < cols; ++c) g.gx[c] += row[c] * go;
    }
    return g;
}

Vector relu(const Vector& v) {
    Vector out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] > 0.0 ? v[i] : 0.0;
    return out;
}

Vector relu_backward(const Vector& pre, const Vector& g_out) {
    if (pre.size() != g_out.size()) throw_dim("relu_backward", g_out.size(), pre.size());
    Vector out(pre.size());
    for (std::size_t i = 0; i < pre.size(); ++i) out[i] = pre[i] > 0.0 ? g_out[i] : 0.0;
    return out;
}

SoftmaxCeResult softmax_cross_entropy(const Vector& logits, int label) {
    if (logits.empty()) throw DimError("softmax_cross_entropy: empty logits");
    if (label < 0 || static_cast<std::size_t>(label) >= logits.size())
        throw DimError("softmax_cross_entropy: label " + std::to_string(label) +
                       " out of range for " + std::to_string(logits.size()) + " classes");
    SoftmaxCeResult res;
    // First maximum wins, which gives the documented lowest-index tie-break.
    std::size_t arg = 0;
    double zmax = logits[0];
    for (std::size_t i = 1; i < logits.size(); ++i) {
        if (logits[i] > zmax) {
            zmax = logits[i];
            arg = i;
        }
    }
    res.predicted = static_cast<int>(arg);
    double denom = 0.0;
    for (double z : logits) denom += std::exp(z - zmax);
    res.loss = std::log(denom) - (logits[static_cast<std::size_t>(label)] - zmax);
    res.grad_logits.resize(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) {
        double p = std::exp(logits[i] - zmax) / denom;
        res.grad_logits[i] = p - (static_cast<std::size_t>(label) == i ? 1.0 : 0.0);
    }
    return res;
}

double dot(const Vector& a, const Vector& b) {
    if (a.size() != b.size()) throw_dim("dot", b.size(), a.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

double squared_norm(const Vector& v) {
    double acc = 0.0;
    for (double x : v) acc += x * x;
    return acc;
}

void axpy(double a, const Vector& x, Vector& y) {
    if (x.size() != y.size()) throw_dim("axpy", x.size(), y.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

} // namespace evfl
