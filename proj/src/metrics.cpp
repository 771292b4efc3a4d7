#include "evfl/metrics.hpp"

#include <cstdio>
#include <fstream>

namespace evfl {

PrequentialWindow::PrequentialWindow(std::uint64_t window_size) : window_size_(window_size) {
    if (window_size_ == 0) throw DimError("PrequentialWindow: window size must be >= 1");
}

void PrequentialWindow::record(bool correct) {
    ++total_seen_;
    ++in_window_;
    if (!correct) {
        ++total_errors_;
        ++window_errors_;
    }
    if (in_window_ == window_size_) {
        series_.push_back({total_seen_,
                           static_cast<double>(window_errors_) /
                               static_cast<double>(window_size_),
                           false});
        in_window_ = 0;
        window_errors_ = 0;
    }
}

void PrequentialWindow::flush_tail() {
    if (in_window_ == 0) return;
    series_.push_back({total_seen_,
                       static_cast<double>(window_errors_) / static_cast<double>(in_window_),
                       true});
    in_window_ = 0;
    window_errors_ = 0;
}

double PrequentialWindow::accumulated_error_rate() const {
    if (total_seen_ == 0) throw DimError("PrequentialWindow: no samples recorded");
    return static_cast<double>(total_errors_) / static_cast<double>(total_seen_);
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace {

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    return out;
}

} // namespace

void write_runtime_error_csv(const std::string& path, const std::vector<WindowPoint>& pts) {
    auto out = open_out(path);
    out << "samples_seen,window_error_rate,partial\n";
    for (const auto& p : pts)
        out << p.samples_seen << "," << format_double(p.error_rate) << ","
            << (p.partial ? 1 : 0) << "\n";
    if (!out) throw IoError("write failed: " + path);
}

void write_summary_csv(const std::string& path, const SessionSummary& s) {
    auto out = open_out(path);
    out << "rounds,accumulated_error_rate,mean_loss,bytes_up,bytes_down,comm_mb_up,"
           "comm_mb_down,comm_mb_total,comm_mb_mean_direction,empty_activation_rounds,"
           "server_fwd,server_bwd";
    for (std::size_t m = 0; m < s.activation_freq.size(); ++m)
        out << ",activation_freq_client" << (m + 1);
    for (std::size_t m = 0; m < s.client_fwd.size(); ++m)
        out << ",fwd_client" << (m + 1) << ",bwd_client" << (m + 1);
    out << "\n";
    out << s.rounds << "," << format_double(s.accumulated_error_rate) << ","
        << format_double(s.mean_loss) << "," << s.bytes_up << "," << s.bytes_down << ","
        << format_double(s.comm_mb_up) << "," << format_double(s.comm_mb_down) << ","
        << format_double(s.comm_mb_total) << ","
        << format_double(s.comm_mb_mean_direction) << "," << s.empty_activation_rounds
        << "," << s.server_fwd << "," << s.server_bwd;
    for (double f : s.activation_freq) out << "," << format_double(f);
    for (std::size_t m = 0; m < s.client_fwd.size(); ++m)
        out << "," << s.client_fwd[m] << "," << s.client_bwd[m];
    out << "\n";
    if (!out) throw IoError("write failed: " + path);
}

void write_timing_csv(const std::string& path, const SessionTiming& t) {
    auto out = open_out(path);
    out << "participant,compute_seconds\n";
    out << "server," << format_double(t.server_seconds) << "\n";
    for (std::size_t m = 0; m < t.client_seconds.size(); ++m)
        out << "client" << (m + 1) << "," << format_double(t.client_seconds[m]) << "\n";
    if (!out) throw IoError("write failed: " + path);
}

void write_series_csv(const std::string& path, const char* value_column,
                      const std::vector<std::pair<std::uint64_t, double>>& pts) {
    auto out = open_out(path);
    out << "T," << value_column << "\n";
    for (const auto& [t, v] : pts) out << t << "," << format_double(v) << "\n";
    if (!out) throw IoError("write failed: " + path);
}

} // namespace evfl
