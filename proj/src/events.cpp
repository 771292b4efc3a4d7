#include "evfl/events.hpp"

namespace evfl {

std::vector<std::uint32_t> decide_activation(const ActivationPolicy& policy,
                                             const std::vector<Vector>& parts,
                                             Rng& act_rng) {
    std::vector<std::uint32_t> active;
    const std::size_t M = parts.size();
    if (std::holds_alternative<FullPolicy>(policy)) {
        active.reserve(M);
        for (std::size_t m = 0; m < M; ++m) active.push_back(static_cast<std::uint32_t>(m));
        return active;
    }
    if (const auto* rp = std::get_if<RandomPolicy>(&policy)) {
        if (rp->probs.empty()) throw DimError("RandomPolicy: no probabilities");
        if (rp->probs.size() != 1 && rp->probs.size() != M)
            throw_dim("RandomPolicy(probs)", rp->probs.size(), M);
        for (std::size_t m = 0; m < M; ++m) {
            double p = rp->probs.size() == 1 ? rp->probs[0] : rp->probs[m];
            double u = act_rng.next_unit();
            if (u < p) active.push_back(static_cast<std::uint32_t>(m));
        }
        return active;
    }
    const auto& ep = std::get<EventPolicy>(policy);
    for (std::size_t m = 0; m < M; ++m) {
        const Vector& x = parts[m];
        if (x.empty()) throw DimError("EventPolicy: empty feature part");
        double mean = 0.0;
        for (double v : x) mean += v;
        mean /= static_cast<double>(x.size());
        if (mean > ep.gamma) active.push_back(static_cast<std::uint32_t>(m));
    }
    return active;
}

} // namespace evfl
