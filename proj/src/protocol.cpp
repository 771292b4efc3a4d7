#include "evfl/protocol.hpp"

#include <cmath>
#include <string>

namespace evfl {

namespace {

constexpr std::uint64_t kBytesPerElem = 4;  // 32-bit wire format
constexpr std::uint64_t kQueryBytes = 8;

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

} // namespace

const char* to_string(MessageKind k) {
    switch (k) {
        case MessageKind::EmbeddingUp: return "embedding_up";
        case MessageKind::Query: return "query";
        case MessageKind::GradientDown: return "gradient_down";
        case MessageKind::EmbeddingWindowUp: return "embedding_window_up";
        case MessageKind::GradientWindowDown: return "gradient_window_down";
    }
    return "?";
}

Session::Session(Mlp server, std::vector<Mlp> clients, SampleStream stream,
                 ActivationPolicy policy, std::uint64_t activation_seed, OptimizerSpec opt,
                 std::uint64_t metrics_window, bool count_query_bytes, SessionHooks hooks)
    : server_(std::move(server)),
      clients_(std::move(clients)),
      stream_(std::move(stream)),
      policy_(std::move(policy)),
      act_rng_(activation_seed),
      opt_(opt),
      count_query_bytes_(count_query_bytes),
      hooks_(std::move(hooks)),
      server_buf_(opt.kind == OptKind::DLR ? opt.l : 1,
                  opt.kind == OptKind::DLR ? opt.alpha : 1.0),
      preq_(metrics_window) {
    if (clients_.empty()) throw DimError("Session: no clients");
    std::size_t concat = 0;
    for (std::size_t m = 0; m < clients_.size(); ++m) {
        if (clients_[m].input_dim() != stream_.partition().dim(m))
            throw_dim("Session(client input)", clients_[m].input_dim(),
                      stream_.partition().dim(m));
        concat += clients_[m].output_dim();
    }
    if (server_.input_dim() != concat)
        throw_dim("Session(server input)", server_.input_dim(), concat);
    if (opt_.kind == OptKind::DLR) {
        client_bufs_.reserve(clients_.size());
        for (std::size_t m = 0; m < clients_.size(); ++m)
            client_bufs_.emplace_back(opt_.l, opt_.alpha);
    }
    active_counts_.assign(clients_.size(), 0);
    passes_.client_fwd.assign(clients_.size(), 0);
    passes_.client_bwd.assign(clients_.size(), 0);
    client_sec_.assign(clients_.size(), 0.0);
}

void Session::emit(const Message& msg, std::uint64_t& up, std::uint64_t& down) {
    switch (msg.kind) {
        case MessageKind::EmbeddingUp:
        case MessageKind::EmbeddingWindowUp:
            up += msg.bytes;
            break;
        case MessageKind::GradientDown:
        case MessageKind::GradientWindowDown:
            down += msg.bytes;
            break;
        case MessageKind::Query:
            if (count_query_bytes_) down += msg.bytes;
            break;
    }
    if (hooks_.on_message) hooks_.on_message(msg);
}

RoundRecord Session::run_round(std::uint64_t t) {
    const std::size_t M = clients_.size();
    RoundRecord rec;
    rec.t = t;
    rec.client_fwd.assign(M, 0);
    rec.client_bwd.assign(M, 0);

    StreamSample sample = stream_.next(t);
    rec.active = decide_activation(policy_, sample.parts, act_rng_);
    rec.empty_activation = rec.active.empty();
    if (rec.empty_activation) ++empty_rounds_;
    std::vector<bool> is_active(M, false);
    for (std::uint32_t m : rec.active) {
        is_active[m] = true;
        ++active_counts_[m];
    }

    if (opt_.kind == OptKind::SLR) {
        replay_.push_front(sample);
        if (replay_.size() > opt_.l) replay_.pop_back();
    }

    // Every client evaluates its embedding at current parameters.
    std::vector<Vector> embeddings(M);
    std::vector<MlpTrace> traces(M);
    for (std::size_t m = 0; m < M; ++m) {
        auto t0 = std::chrono::steady_clock::now();
        embeddings[m] = mlp_forward(clients_[m], sample.parts[m], &traces[m]);
        client_sec_[m] += seconds_since(t0);
        ++passes_.client_fwd[m];
        ++rec.client_fwd[m];
    }

    // Uplink: activated clients send unprompted; passive ones answer a query.
    const std::uint64_t slots = opt_.kind == OptKind::SLR ? opt_.l : 1;
    const MessageKind up_kind =
        opt_.kind == OptKind::SLR ? MessageKind::EmbeddingWindowUp : MessageKind::EmbeddingUp;
    for (std::uint32_t m : rec.active) {
        std::uint64_t elems = slots * clients_[m].output_dim();
        emit({up_kind, m + 1, 0, t, elems, elems * kBytesPerElem}, rec.bytes_up,
             rec.bytes_down);
    }
    for (std::size_t m = 0; m < M; ++m) {
        if (is_active[m]) continue;
        emit({MessageKind::Query, 0, static_cast<std::uint32_t>(m) + 1, t, 0, kQueryBytes},
             rec.bytes_up, rec.bytes_down);
        std::uint64_t elems = slots * clients_[m].output_dim();
        emit({up_kind, static_cast<std::uint32_t>(m) + 1, 0, t, elems,
              elems * kBytesPerElem},
             rec.bytes_up, rec.bytes_down);
    }

    // Server evaluation and backward at round-t parameters.
    auto s0 = std::chrono::steady_clock::now();
    ServerEval ev = server_forward(server_, embeddings, sample.label);
    ++passes_.server_fwd;
    ++rec.server_fwd;
    if (!std::isfinite(ev.loss)) {
        server_sec_ += seconds_since(s0);
        throw RuntimeAbort("non-finite loss at round " + std::to_string(t));
    }
    std::vector<std::size_t> embed_dims(M);
    for (std::size_t m = 0; m < M; ++m) embed_dims[m] = clients_[m].output_dim();
    ServerGrads sg = server_backward(server_, ev, embed_dims);
    ++passes_.server_bwd;
    ++rec.server_bwd;
    server_sec_ += seconds_since(s0);

    rec.loss = ev.loss;
    rec.correct = ev.predicted == sample.label;
    preq_.record(rec.correct);
    loss_sum_ += ev.loss;
    if (hooks_.on_loss) hooks_.on_loss(t, ev.loss);

    // Activated clients' chain-rule gradients (training cost).
    std::vector<Vector> client_grads(M);
    for (std::uint32_t m : rec.active) {
        auto t0 = std::chrono::steady_clock::now();
        client_grads[m] = mlp_backward(clients_[m], traces[m], sg.v[m]).gparams;
        client_sec_[m] += seconds_since(t0);
        ++passes_.client_bwd[m];
        ++rec.client_bwd[m];
    }

    // Full-gradient trace (audit only): passive clients' gradients are
    // computed on the side, uncharged.
    if (hooks_.on_trace) {
        Vector full = sg.gparams;
        for (std::size_t m = 0; m < M; ++m) {
            if (is_active[m]) {
                full.insert(full.end(), client_grads[m].begin(), client_grads[m].end());
            } else {
                Vector g = mlp_backward(clients_[m], traces[m], sg.v[m]).gparams;
                full.insert(full.end(), g.begin(), g.end());
            }
        }
        hooks_.on_trace(t, full);
    }

    // Updates.  The server updates every round; activated clients update;
    // under DLR passive clients only receive a zero in their buffer.
    const double eta0 = opt_.eta_at(opt_.eta_server, t);
    const double etam = opt_.eta_at(opt_.eta_client, t);
    switch (opt_.kind) {
        case OptKind::OGD: {
            auto t0 = std::chrono::steady_clock::now();
            ogd_step(server_, sg.gparams, eta0);
            server_sec_ += seconds_since(t0);
            for (std::uint32_t m : rec.active) {
                auto t1 = std::chrono::steady_clock::now();
                ogd_step(clients_[m], client_grads[m], etam);
                client_sec_[m] += seconds_since(t1);
            }
            break;
        }
        case OptKind::DLR: {
            auto t0 = std::chrono::steady_clock::now();
            dlr_participant_step(server_, server_buf_, std::move(sg.gparams), eta0);
            server_sec_ += seconds_since(t0);
            for (std::size_t m = 0; m < M; ++m) {
                auto t1 = std::chrono::steady_clock::now();
                if (is_active[m]) {
                    dlr_participant_step(clients_[m], client_bufs_[m],
                                         std::move(client_grads[m]), etam);
                } else {
                    client_bufs_[m].push_zero(clients_[m].param_count());
                }
                client_sec_[m] += seconds_since(t1);
            }
            break;
        }
        case OptKind::SLR: {
            // Window replay at current parameters.  All of it is server-
            // coordinated, so its wall clock lands on the server timer; the
            // pass counters still attribute per participant.
            auto t0 = std::chrono::steady_clock::now();
            SlrWindowGrads wg = slr_window_gradient(server_, clients_, replay_, rec.active,
                                                    sg.gparams, client_grads, &passes_);
            ogd_step(server_, wg.server, eta0);
            for (std::uint32_t m : rec.active) ogd_step(clients_[m], wg.clients[m], etam);
            server_sec_ += seconds_since(t0);
            break;
        }
    }

    // Downlink to activated clients only.
    const MessageKind down_kind = opt_.kind == OptKind::SLR ? MessageKind::GradientWindowDown
                                                            : MessageKind::GradientDown;
    for (std::uint32_t m : rec.active) {
        std::uint64_t elems = slots * clients_[m].output_dim();
        emit({down_kind, 0, m + 1, t, elems, elems * kBytesPerElem}, rec.bytes_up,
             rec.bytes_down);
    }

    bytes_up_total_ += rec.bytes_up;
    bytes_down_total_ += rec.bytes_down;
    ++rounds_done_;
    return rec;
}

void Session::run(std::uint64_t rounds) {
    try {
        for (std::uint64_t t = 1; t <= rounds; ++t) run_round(t);
    } catch (...) {
        preq_.flush_tail();  // keep partial metrics readable after an abort
        throw;
    }
    preq_.flush_tail();
}

SessionSummary Session::summary() const {
    if (rounds_done_ == 0) throw DimError("Session::summary: no rounds executed");
    SessionSummary s;
    s.rounds = rounds_done_;
    s.accumulated_error_rate = preq_.accumulated_error_rate();
    s.mean_loss = loss_sum_ / static_cast<double>(rounds_done_);
    s.bytes_up = bytes_up_total_;
    s.bytes_down = bytes_down_total_;
    const double mb = 1024.0 * 1024.0;
    s.comm_mb_up = static_cast<double>(bytes_up_total_) / mb;
    s.comm_mb_down = static_cast<double>(bytes_down_total_) / mb;
    s.comm_mb_total = static_cast<double>(bytes_up_total_ + bytes_down_total_) / mb;
    s.comm_mb_mean_direction = s.comm_mb_total / 2.0;
    s.activation_freq.resize(clients_.size());
    for (std::size_t m = 0; m < clients_.size(); ++m)
        s.activation_freq[m] =
            static_cast<double>(active_counts_[m]) / static_cast<double>(rounds_done_);
    s.empty_activation_rounds = empty_rounds_;
    s.server_fwd = passes_.server_fwd;
    s.server_bwd = passes_.server_bwd;
    s.client_fwd = passes_.client_fwd;
    s.client_bwd = passes_.client_bwd;
    return s;
}

SessionTiming Session::timing() const {
    SessionTiming t;
    t.server_seconds = server_sec_;
    t.client_seconds = client_sec_;
    return t;
}

DryRunTotals accounting_dry_run(std::size_t clients, std::size_t embed_dim, OptKind kind,
                                std::size_t l, std::uint64_t rounds,
                                bool count_query_bytes) {
    (void)count_query_bytes;  // Full activation: no queries are ever sent.
    DryRunTotals totals;
    totals.rounds = rounds;
    const std::uint64_t slots = kind == OptKind::SLR ? l : 1;
    const std::uint64_t per_client = slots * embed_dim * kBytesPerElem;
    for (std::uint64_t t = 1; t <= rounds; ++t) {
        totals.bytes_up += clients * per_client;    // everyone uploads
        totals.bytes_down += clients * per_client;  // everyone is activated
    }
    return totals;
}

} // namespace evfl
