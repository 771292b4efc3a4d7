#pragma once
// Error taxonomy for the evfl core.  Everything user-facing derives from
// evfl::Error so the C API and CLI can map failures onto stable exit codes.

#include <stdexcept>
#include <string>
#include <vector>

namespace evfl {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Shape/dimension mismatch in tensor or model operations.  Message names the
// offending operation and both shapes.
struct DimError : Error {
    using Error::Error;
};

// Malformed external data: IDX/CSV/trace/checkpoint parse failures.
struct FormatError : Error {
    using Error::Error;
};

// Filesystem-level failure (open/read/write).
struct IoError : Error {
    using Error::Error;
};

// Invalid experiment configuration.  Carries the full list of field-precise
// diagnostics so callers can report every problem at once.
struct ConfigError : Error {
    explicit ConfigError(std::vector<std::string> diags)
        : Error(join(diags)), diagnostics(std::move(diags)) {}
    explicit ConfigError(const std::string& msg)
        : Error(msg), diagnostics{msg} {}

    std::vector<std::string> diagnostics;

private:
    static std::string join(const std::vector<std::string>& diags) {
        std::string out;
        for (const auto& d : diags) {
            if (!out.empty()) out += "\n";
            out += d;
        }
        return out;
    }
};

// A session hit a non-recoverable runtime condition (non-finite loss,
// mid-run IO failure).  The sweep driver records these and moves on.
struct RuntimeAbort : Error {
    using Error::Error;
};

} // namespace evfl
