#pragma once
// Online optimizers for the split model.
//
//   OGD  - plain online gradient descent on each round's gradient.
//   DLR  - descent on the discounted local-regret smoothed gradient: each
//          participant keeps a bounded FIFO buffer of its last l (flat)
//          gradients and steps along the exponentially weighted average.
//   SLR  - static local regret: every round re-evaluates the last l samples
//          at the *current* parameters and steps along the uniform average
//          (l fresh passes per participant per round instead of DLR's one).
//
// Buffer convention: the smoothed gradient always divides by the full-window
// normalizer W = sum_{i=0}^{l-1} alpha^i, so during warm-up the missing
// entries act as implicit zeros.  A passive round enqueues an explicit zero.

#include <cstddef>
#include <deque>
#include <string>

#include "evfl/models.hpp"
#include "evfl/streams.hpp"
#include "evfl/tensor_math.hpp"

namespace evfl {

class GradBuffer {
public:
    // l >= 1; alpha in (0, 1].  (alpha = 1 gives a plain windowed average
    // and is permitted at the buffer level; config validation restricts the
    // DLR setting to (0, 1).)
    GradBuffer(std::size_t l, double alpha);

    // Newest-first storage; pushing beyond capacity evicts the oldest.
    void push(Vector g);
    void push_zero(std::size_t dim) { push(Vector(dim, 0.0)); }

    // (1/W) * sum_i alpha^i * entry[i] with W the full-window normalizer.
    Vector smoothed() const;

    std::size_t size() const { return entries_.size(); }
    std::size_t capacity() const { return cap_; }
    double alpha() const { return alpha_; }
    double normalizer() const { return W_; }
    const std::deque<Vector>& entries() const { return entries_; }

private:
    std::size_t cap_;
    double alpha_;
    double W_;
    std::deque<Vector> entries_;  // front = newest
};

enum class OptKind { OGD, SLR, DLR };

std::string to_string(OptKind k);

struct OptimizerSpec {
    OptKind kind = OptKind::DLR;
    std::size_t l = 10;       // window length (SLR/DLR)
    double alpha = 0.95;      // attenuation (DLR)
    double eta_server = 0.1;
    double eta_client = 0.1;
    // "constant" or "inv_sqrt" (eta_t = eta / sqrt(t), used by the convex
    // regret audit).
    std::string eta_schedule = "constant";

    double eta_at(double base, std::uint64_t t) const;
};

// One OGD step: params -= eta * g.
void ogd_step(Mlp& params, const Vector& g, double eta);

// One DLR step: enqueue g, then params -= eta * smoothed().
void dlr_participant_step(Mlp& params, GradBuffer& buf, Vector g, double eta);

// Uniform-average gradients over a replayed window, all evaluated at the
// current parameters (the SLR objective).  `window` is newest-first; the
// caller may pass the newest sample's already-computed gradients via
// `seed_*` to avoid recomputing the i=0 term (they are counted as the main
// round's passes, not the window's).  Pass counters are incremented for the
// fresh passes this call performs: one forward per client and one
// forward+backward for the server per *additional* window sample, plus one
// backward per listed client per additional sample.
struct SlrWindowGrads {
    Vector server;                 // flat head gradient, averaged
    std::vector<Vector> clients;   // flat per-client gradients, averaged
                                   // (empty vectors for clients not in `update_clients`)
};

struct PassCounters {
    std::uint64_t server_fwd = 0, server_bwd = 0;
    std::vector<std::uint64_t> client_fwd, client_bwd;
};

SlrWindowGrads slr_window_gradient(const Mlp& server, const std::vector<Mlp>& clients,
                                   const std::deque<StreamSample>& window,
                                   const std::vector<std::uint32_t>& update_clients,
                                   const Vector& seed_server_grad,
                                   const std::vector<Vector>& seed_client_grads,
                                   PassCounters* passes);

} // namespace evfl
