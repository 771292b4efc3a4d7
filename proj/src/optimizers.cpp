#include "evfl/optimizers.hpp"

#include <cmath>

namespace evfl {

GradBuffer::GradBuffer(std::size_t l, double alpha) : cap_(l), alpha_(alpha) {
    if (l == 0) throw DimError("GradBuffer: window length must be >= 1");
    if (!(alpha > 0.0) || alpha > 1.0)
        throw DimError("GradBuffer: alpha must lie in (0, 1], got " + std::to_string(alpha));
    // W = sum_{i=0}^{l-1} alpha^i, accumulated term by term so that small l
    // matches hand arithmetic exactly.
    W_ = 0.0;
    double w = 1.0;
    for (std::size_t i = 0; i < l; ++i) {
        W_ += w;
        w *= alpha_;
    }
}

void GradBuffer::push(Vector g) {
    if (!entries_.empty() && g.size() != entries_.front().size())
        throw_dim("GradBuffer::push", g.size(), entries_.front().size());
    entries_.push_front(std::move(g));
    if (entries_.size() > cap_) entries_.pop_back();
}

Vector GradBuffer::smoothed() const {
    if (entries_.empty()) throw DimError("GradBuffer::smoothed: buffer is empty");
    Vector acc(entries_.front().size(), 0.0);
    double w = 1.0;
    for (const auto& g : entries_) {
        axpy(w, g, acc);
        w *= alpha_;
    }
    double inv = 1.0 / W_;
    for (auto& v : acc) v *= inv;
    return acc;
}

std::string to_string(OptKind k) {
    switch (k) {
        case OptKind::OGD: return "ogd";
        case OptKind::SLR: return "slr";
        case OptKind::DLR: return "dlr";
    }
    return "?";
}

double OptimizerSpec::eta_at(double base, std::uint64_t t) const {
    if (eta_schedule == "inv_sqrt")
        return base / std::sqrt(static_cast<double>(t == 0 ? 1 : t));
    return base;
}

void ogd_step(Mlp& params, const Vector& g, double eta) {
    axpy_params(params, -eta, g);
}

void dlr_participant_step(Mlp& params, GradBuffer& buf, Vector g, double eta) {
    buf.push(std::move(g));
    axpy_params(params, -eta, buf.smoothed());
}

SlrWindowGrads slr_window_gradient(const Mlp& server, const std::vector<Mlp>& clients,
                                   const std::deque<StreamSample>& window,
                                   const std::vector<std::uint32_t>& update_clients,
                                   const Vector& seed_server_grad,
                                   const std::vector<Vector>& seed_client_grads,
                                   PassCounters* passes) {
    if (window.empty()) throw DimError("slr_window_gradient: empty window");
    const std::size_t M = clients.size();
    SlrWindowGrads out;
    out.server = seed_server_grad;
    out.clients.resize(M);
    std::vector<bool> wanted(M, false);
    for (std::uint32_t m : update_clients) {
        wanted[m] = true;
        out.clients[m] = seed_client_grads[m];
    }

    std::vector<std::size_t> embed_dims(M);
    for (std::size_t m = 0; m < M; ++m) embed_dims[m] = clients[m].output_dim();

    // Replay every sample after the newest at the current parameters.
    for (std::size_t i = 1; i < window.size(); ++i) {
        const StreamSample& s = window[i];
        std::vector<Vector> embeddings(M);
        std::vector<MlpTrace> traces(M);
        for (std::size_t m = 0; m < M; ++m) {
            embeddings[m] = mlp_forward(clients[m], s.parts[m], &traces[m]);
            if (passes) ++passes->client_fwd[m];
        }
        ServerEval ev = server_forward(server, embeddings, s.label);
        if (passes) ++passes->server_fwd;
        ServerGrads sg = server_backward(server, ev, embed_dims);
        if (passes) ++passes->server_bwd;
        axpy(1.0, sg.gparams, out.server);
        for (std::size_t m = 0; m < M; ++m) {
            if (!wanted[m]) continue;
            MlpGrads cg = mlp_backward(clients[m], traces[m], sg.v[m]);
            if (passes) ++passes->client_bwd[m];
            axpy(1.0, cg.gparams, out.clients[m]);
        }
    }

    const double inv = 1.0 / static_cast<double>(window.size());
    for (auto& v : out.server) v *= inv;
    for (std::size_t m = 0; m < M; ++m)
        for (auto& v : out.clients[m]) v *= inv;
    return out;
}

} // namespace evfl
