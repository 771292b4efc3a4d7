#pragma once
// Prequential (test-then-train) accuracy tracking and session summaries,
// plus the CSV writers for every run artifact.  All CSV numbers are printed
// with %.17g so files round-trip and identical runs produce identical bytes.

#include <cstdint>
#include <string>
#include <vector>

#include "evfl/error.hpp"

namespace evfl {

struct WindowPoint {
    std::uint64_t samples_seen = 0;
    double error_rate = 0.0;
    bool partial = false;  // trailing window shorter than the configured size
};

// Sliding non-overlapping error window: emits one point per completed
// window of `window_size` predictions, each made before the model saw the
// label (the caller records pre-update correctness).
class PrequentialWindow {
public:
    explicit PrequentialWindow(std::uint64_t window_size);

    void record(bool correct);
    // Emits the in-progress window (if any) as a partial point.
    void flush_tail();

    std::uint64_t total_seen() const { return total_seen_; }
    std::uint64_t total_errors() const { return total_errors_; }
    double accumulated_error_rate() const;
    const std::vector<WindowPoint>& series() const { return series_; }

private:
    std::uint64_t window_size_;
    std::uint64_t in_window_ = 0;
    std::uint64_t window_errors_ = 0;
    std::uint64_t total_seen_ = 0;
    std::uint64_t total_errors_ = 0;
    std::vector<WindowPoint> series_;
};

struct SessionSummary {
    std::uint64_t rounds = 0;
    double accumulated_error_rate = 0.0;
    double mean_loss = 0.0;
    std::uint64_t bytes_up = 0;
    std::uint64_t bytes_down = 0;
    // MB = 1024 * 1024 bytes.
    double comm_mb_up = 0.0;
    double comm_mb_down = 0.0;
    double comm_mb_total = 0.0;
    double comm_mb_mean_direction = 0.0;
    std::vector<double> activation_freq;       // per client
    std::uint64_t empty_activation_rounds = 0;
    std::uint64_t server_fwd = 0, server_bwd = 0;
    std::vector<std::uint64_t> client_fwd, client_bwd;
};

// Wall-clock compute per participant, kept out of SessionSummary/summary.csv
// so those stay byte-deterministic across runs.
struct SessionTiming {
    double server_seconds = 0.0;
    std::vector<double> client_seconds;
};

std::string format_double(double v);

void write_runtime_error_csv(const std::string& path, const std::vector<WindowPoint>& pts);
void write_summary_csv(const std::string& path, const SessionSummary& s);
void write_timing_csv(const std::string& path, const SessionTiming& t);
void write_series_csv(const std::string& path, const char* value_column,
                      const std::vector<std::pair<std::uint64_t, double>>& pts);

} // namespace evfl
