#pragma once
// Minimal dense linear algebra for the simulator: row-major matrices,
// affine forward/backward, ReLU, and softmax cross-entropy.  Everything is
// 64-bit and sequential so that results are bitwise reproducible; matrix
// sizes here never justify anything fancier than a tight triple loop.

#include <cstddef>
#include <vector>

#include "evfl/error.hpp"

namespace evfl {

using Vector = std::vector<double>;

class DenseMatrix {
public:
    DenseMatrix() = default;
    DenseMatrix(std::size_t rows, std::size_t cols)
        : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}
    DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    bool operator==(const DenseMatrix& o) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// y = W x + b.  Pass an empty b for a bias-free map; a non-empty b whose
// length differs from W's row count is an error.
Vector affine_forward(const DenseMatrix& W, const Vector& b, const Vector& x);

struct AffineGrads {
    DenseMatrix gW;  // dL/dW = g_out * x^T
    Vector gb;       // dL/db = g_out (empty when the layer had no bias)
    Vector gx;       // dL/dx = W^T g_out
};

AffineGrads affine_backward(const DenseMatrix& W, bool has_bias, const Vector& x,
                            const Vector& g_out);

// Elementwise max(v, 0).
Vector relu(const Vector& v);

// Backward through ReLU given the *pre-activation* values.  The subgradient
// at exactly 0 is taken as 0.
Vector relu_backward(const Vector& pre, const Vector& g_out);

struct SoftmaxCeResult {
    double loss = 0.0;
    Vector grad_logits;  // softmax(logits) - onehot(label)
    int predicted = 0;   // argmax of logits; ties break to the lowest index
};

// Numerically stable softmax cross-entropy (max-logit subtraction).
SoftmaxCeResult softmax_cross_entropy(const Vector& logits, int label);

// Shared helpers.
double dot(const Vector& a, const Vector& b);
double squared_norm(const Vector& v);
// y += a * x
void axpy(double a, const Vector& x, Vector& y);

[[noreturn]] void throw_dim(const char* op, std::size_t got, std::size_t want);

} // namespace evfl
