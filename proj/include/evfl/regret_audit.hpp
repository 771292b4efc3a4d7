#pragma once
// Empirical regret audits.
//
// The DLR audit replays a recorded per-round full-gradient trace and
// accumulates || grad S_{t,l,alpha} ||^2, where S is the discounted sliding
// average of the last l losses.  During warm-up (t < l) the average runs
// over the t rounds that exist, normalized by sum_{i<t} alpha^i — the
// definitional truncation, which intentionally differs from the optimizer
// buffer's zeros-padded full-window normalizer.
//
// The convex audit runs OGD on a linear split model over a separable
// stream and compares the accumulated online loss against the best fixed
// parameters in hindsight, recomputed per prefix by an offline full-batch
// descent oracle.

#include <cstdint>
#include <deque>
#include <string>
#include <utility>
#include <vector>

#include "evfl/models.hpp"
#include "evfl/streams.hpp"
#include "evfl/tensor_math.hpp"

namespace evfl {

struct GradientTrace {
    std::size_t dim = 0;
    std::vector<Vector> grads;  // grads[i] is round i+1
};

// Binary trace format, little-endian: magic "EVFLTRAC", u32 version,
// u64 dim, u64 count, then count*dim doubles.
void save_trace(const std::string& path, const GradientTrace& trace);
GradientTrace load_trace(const std::string& path);

// Streaming DLR accumulator: push one full gradient per round.
class DlrAccumulator {
public:
    DlrAccumulator(std::size_t l, double alpha);

    void push(const Vector& grad);
    double value() const { return total_; }
    std::uint64_t rounds() const { return rounds_; }

private:
    std::size_t l_;
    double alpha_;
    std::deque<Vector> window_;  // front = newest
    double total_ = 0.0;
    std::uint64_t rounds_ = 0;
};

// DLR_l(T) at each checkpoint T (and nothing else).  Checkpoints must be
// ascending and within the trace length.
std::vector<std::pair<std::uint64_t, double>> empirical_dlr(
    const GradientTrace& trace, std::size_t l, double alpha,
    const std::vector<std::uint64_t>& checkpoints);

// Least-squares slope of log(value) against log(T).  Non-positive values
// are skipped; fewer than two usable points is an error.
double fit_loglog_slope(const std::vector<std::pair<std::uint64_t, double>>& points);

// ----- convex regret -------------------------------------------------------

// Offline comparator: minimizes the mean composite loss over a fixed sample
// set by full-batch gradient descent with backtracking line search, from a
// given start.  Stops at gradient infinity-norm <= tol or after max_iters.
struct OfflineOracleResult {
    Vector params;
    double mean_loss = 0.0;
    std::uint64_t iters = 0;
};

OfflineOracleResult offline_oracle(const SplitModel& structure,
                                   const std::vector<StreamSample>& samples,
                                   std::size_t prefix, const Vector& start,
                                   double tol = 1e-8, std::uint64_t max_iters = 20000);

// R_T = sum_{t<=T} f^t(w^t) - min_w sum_{t<=T} f^t(w), with the comparator
// recomputed per prefix.  The minimizer search runs from two starts — the
// supplied warm start (typically the online run's final parameters) and a
// fresh seeded init — and keeps the better, since the split parameterization
// is bilinear rather than jointly convex and an all-zero start would sit on
// a saddle.  oracle_sane records comparator <= online average per prefix.
struct ConvexRegretResult {
    std::vector<std::pair<std::uint64_t, double>> regret;  // (T, R_T)
    std::vector<double> online_mean_loss;                  // per checkpoint
    std::vector<double> oracle_mean_loss;                  // per checkpoint
    bool oracle_sane = true;
};

ConvexRegretResult convex_regret(const SplitModel& structure,
                                 const std::vector<double>& online_losses,
                                 const std::vector<StreamSample>& samples,
                                 const std::vector<std::uint64_t>& checkpoints,
                                 const Vector& warm_start, std::uint64_t init_seed,
                                 double tol = 1e-8, std::uint64_t max_iters = 20000);

} // namespace evfl
