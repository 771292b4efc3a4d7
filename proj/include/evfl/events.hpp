#pragma once
// Client activation policies.  Per round the policy yields the set of
// activated clients; everyone else stays passive and only answers the
// server's embedding query.

#include <cstdint>
#include <variant>
#include <vector>

#include "evfl/rng.hpp"
#include "evfl/tensor_math.hpp"

namespace evfl {

struct FullPolicy {};

struct RandomPolicy {
    // One probability per client (or a single entry broadcast to all).
    std::vector<double> probs;
};

struct EventPolicy {
    // Client m activates iff mean(x_m) > gamma, strictly.
    double gamma = 0.0;
};

using ActivationPolicy = std::variant<FullPolicy, RandomPolicy, EventPolicy>;

// Returns activated client indices (0-based), sorted ascending.  Random
// policies consume one draw per client from `act_rng` in client order, so
// the consumption pattern is identical regardless of outcomes; Full and
// Event consume nothing.
std::vector<std::uint32_t> decide_activation(const ActivationPolicy& policy,
                                             const std::vector<Vector>& parts,
                                             Rng& act_rng);

} // namespace evfl
