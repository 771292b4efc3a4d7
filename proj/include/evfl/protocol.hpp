#pragma once
// The round protocol.  Each round renders the event-driven exchange
// synchronously and deterministically:
//
//   1. the stream emits sample t; the activation policy picks the active set
//   2. every client produces its embedding at current parameters (activated
//      clients send unprompted; passive clients answer an 8-byte query)
//   3. the server evaluates loss/prediction on ALL embeddings (test-then-
//      train: the prediction is recorded before any update)
//   4. the server backpropagates, updates itself every round, and sends
//      gradients only to activated clients, which then update; under DLR a
//      passive client's buffer receives an explicit zero and its parameters
//      stay untouched
//
// Wire pricing: 4 bytes per tensor element (64-bit math inside, 32-bit
// wire), 8 bytes per query.  SLR messages carry fixed l-slot windows.

#include <chrono>
#include <cstdint>
#include <functional>
#include <vector>

#include "evfl/events.hpp"
#include "evfl/metrics.hpp"
#include "evfl/models.hpp"
#include "evfl/optimizers.hpp"
#include "evfl/streams.hpp"

namespace evfl {

enum class MessageKind {
    EmbeddingUp,
    Query,
    GradientDown,
    EmbeddingWindowUp,
    GradientWindowDown,
};

const char* to_string(MessageKind k);

// Participant ids: 0 = server, 1..M = clients.
struct Message {
    MessageKind kind;
    std::uint32_t from;
    std::uint32_t to;
    std::uint64_t round;
    std::uint64_t elems;  // tensor elements (0 for queries)
    std::uint64_t bytes;  // priced size on the wire
};

struct RoundRecord {
    std::uint64_t t = 0;
    double loss = 0.0;
    bool correct = false;
    bool empty_activation = false;
    std::vector<std::uint32_t> active;  // 0-based client indices
    std::uint64_t bytes_up = 0;
    std::uint64_t bytes_down = 0;
    std::uint64_t server_fwd = 0, server_bwd = 0;
    std::vector<std::uint64_t> client_fwd, client_bwd;
};

struct SessionHooks {
    // Every message as it is emitted (events.csv, conservation tests).
    std::function<void(const Message&)> on_message;
    // Full end-to-end gradient [server | client 1 | ... | client M] of round
    // t's loss at round-t parameters, passive clients included.  The extra
    // backward passes this requires are not charged to the pass counters or
    // timers; recording never perturbs training.
    std::function<void(std::uint64_t, const Vector&)> on_trace;
    // Round loss before any update (regret audits).
    std::function<void(std::uint64_t, double)> on_loss;
};

class Session {
public:
    Session(Mlp server, std::vector<Mlp> clients, SampleStream stream,
            ActivationPolicy policy, std::uint64_t activation_seed, OptimizerSpec opt,
            std::uint64_t metrics_window, bool count_query_bytes,
            SessionHooks hooks = {});

    RoundRecord run_round(std::uint64_t t);
    // Runs rounds t = 1..T and flushes the metrics tail.  Throws
    // RuntimeAbort on non-finite loss.
    void run(std::uint64_t rounds);

    SessionSummary summary() const;
    SessionTiming timing() const;
    const PrequentialWindow& prequential() const { return preq_; }

    const Mlp& server() const { return server_; }
    const std::vector<Mlp>& clients() const { return clients_; }
    Mlp& mutable_server() { return server_; }
    std::vector<Mlp>& mutable_clients() { return clients_; }

private:
    Mlp server_;
    std::vector<Mlp> clients_;
    SampleStream stream_;
    ActivationPolicy policy_;
    Rng act_rng_;
    OptimizerSpec opt_;
    bool count_query_bytes_;
    SessionHooks hooks_;

    GradBuffer server_buf_;
    std::vector<GradBuffer> client_bufs_;
    std::deque<StreamSample> replay_;  // SLR window, newest first

    PrequentialWindow preq_;
    double loss_sum_ = 0.0;
    std::uint64_t rounds_done_ = 0;
    std::uint64_t bytes_up_total_ = 0, bytes_down_total_ = 0;
    std::uint64_t empty_rounds_ = 0;
    std::vector<std::uint64_t> active_counts_;
    PassCounters passes_;
    double server_sec_ = 0.0;
    std::vector<double> client_sec_;

    void emit(const Message& msg, std::uint64_t& up, std::uint64_t& down);
};

// Accounting-only dry run under Full activation: byte flows for T rounds
// without any model math.  SLR prices l-slot windows; OGD/DLR price single
// embeddings/gradients.
struct DryRunTotals {
    std::uint64_t rounds = 0;
    std::uint64_t bytes_up = 0;
    std::uint64_t bytes_down = 0;
};

DryRunTotals accounting_dry_run(std::size_t clients, std::size_t embed_dim, OptKind kind,
                                std::size_t l, std::uint64_t rounds,
                                bool count_query_bytes = false);

} // namespace evfl
