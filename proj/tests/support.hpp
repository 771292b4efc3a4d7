#pragma once
// Shared helpers for the test binaries: finite differences, determinism
// hashing, temp directories, a synthetic digit fixture in IDX format, and a
// tiny CSV reader for checking written artifacts.

#include <unistd.h>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "evfl/rng.hpp"
#include "evfl/streams.hpp"
#include "evfl/tensor_math.hpp"

namespace test_support {

// Central two-point estimate of the directional derivative of f at x along v.
inline double directional_fd(const std::function<double(const evfl::Vector&)>& f,
                             const evfl::Vector& x, const evfl::Vector& v,
                             double h = 1e-5) {
    evfl::Vector plus = x, minus = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        plus[i] += h * v[i];
        minus[i] -= h * v[i];
    }
    return (f(plus) - f(minus)) / (2.0 * h);
}

// Coordinate FD for small problems.
inline evfl::Vector gradient_fd(const std::function<double(const evfl::Vector&)>& f,
                                const evfl::Vector& x, double h = 1e-6) {
    evfl::Vector g(x.size(), 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) {
        evfl::Vector plus = x, minus = x;
        plus[i] += h;
        minus[i] -= h;
        g[i] = (f(plus) - f(minus)) / (2.0 * h);
    }
    return g;
}

// Relative error with a unit floor, so tiny absolute values do not explode.
inline double rel_err(double a, double b) {
    return std::fabs(a - b) / std::max({1.0, std::fabs(a), std::fabs(b)});
}

// FNV-1a over the raw bytes of a double vector (bitwise determinism checks).
inline std::uint64_t hash_doubles(const std::vector<double>& v) {
    std::uint64_t h = 1469598103934665603ull;
    const unsigned char* p = reinterpret_cast<const unsigned char*>(v.data());
    for (std::size_t i = 0; i < v.size() * sizeof(double); ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

class TempDir {
public:
    TempDir() {
        static int counter = 0;
        std::filesystem::path base = std::filesystem::temp_directory_path();
        path_ = base / ("evfl-test-" + std::to_string(::getpid()) + "-" +
                        std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }
    std::string file(const std::string& name) const { return (path_ / name).string(); }

private:
    std::filesystem::path path_;
};

// Synthetic 28x28 digit-like fixture: each class is a smooth deterministic
// template plus per-pixel noise, written as a genuine IDX image/label pair.
// Returns {images_path, labels_path}.
inline std::pair<std::string, std::string> make_digit_fixture(
    const std::string& dir, std::size_t per_class, std::uint64_t seed,
    double noise_sigma = 16.0) {
    const std::size_t rows = 28, cols = 28, classes = 10;
    const std::size_t n = per_class * classes;
    std::vector<std::vector<std::uint8_t>> pixels(n, std::vector<std::uint8_t>(rows * cols));
    std::vector<std::uint8_t> labels(n);
    evfl::Rng rng(seed);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t c = i % classes;
        labels[i] = static_cast<std::uint8_t>(c);
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t cc = 0; cc < cols; ++cc) {
                const double t = 127.5 * (1.0 + std::sin(0.35 * double(r) + 1.7 * double(c)) *
                                                    std::cos(0.30 * double(cc) - 0.9 * double(c)));
                double v = t + noise_sigma * rng.next_gaussian();
                if (v < 0.0) v = 0.0;
                if (v > 255.0) v = 255.0;
                pixels[i][r * cols + cc] = static_cast<std::uint8_t>(v + 0.5);
            }
        }
    }
    const std::string img = dir + "/fixture-images.idx";
    const std::string lab = dir + "/fixture-labels.idx";
    evfl::write_idx(img, lab, pixels, labels, rows, cols);
    return {img, lab};
}

// Minimal CSV reader (no quote handling; artifacts under test are numeric).
inline std::vector<std::vector<std::string>> read_csv(const std::string& path) {
    std::ifstream in(path);
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (!line.empty() && line.back() == ',') cells.push_back("");
        rows.push_back(std::move(cells));
    }
    return rows;
}

} // namespace test_support
