#pragma once
// Experiment driver: expands the sweep, runs one deterministic session per
// point, and writes the artifact tree
//
//   <output_dir>/resolved_config.json
//   <output_dir>/manifest.csv
//   <output_dir>/<point>/runtime_error.csv     prequential error series
//   <output_dir>/<point>/summary.csv           deterministic session summary
//   <output_dir>/<point>/timing.csv            wall clock (not deterministic)
//   <output_dir>/<point>/events.csv            per-message log (opt-in)
//   <output_dir>/<point>/dlr_series.csv        audit (opt-in)
//   <output_dir>/<point>/trace.bin             full-gradient trace (opt-in)
//   <output_dir>/<point>/server.ckpt, client<m>.ckpt   final params (opt-in)
//
// A point that aborts (non-finite loss, IO failure) is recorded in the
// manifest and the remaining points still run.

#include <string>
#include <vector>

#include "evfl/config.hpp"
#include "evfl/metrics.hpp"

namespace evfl {

struct PointResult {
    std::string name;
    bool ok = false;
    std::string error;       // abort reason when !ok
    SessionSummary summary;  // valid when ok
};

struct ExperimentResult {
    std::vector<PointResult> points;

    bool all_ok() const;
    bool any_ok() const;
    // 0 = every point succeeded, 2 = every point failed, 3 = partial.
    int exit_code() const;
};

// Throws ConfigError when validation fails; per-point runtime failures are
// captured in the result instead of thrown.  `output_dir` overrides the
// config's own setting when non-empty.
ExperimentResult run_experiment(const ExperimentConfig& cfg,
                                const std::string& output_dir = "");

} // namespace evfl
