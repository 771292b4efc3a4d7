#pragma once
// Data streams: dataset loading (IDX, CSV, synthetic generators), vertical
// feature partitioning, and the class-conditional sampler that turns a
// finite dataset into an endless (optionally drifting) sample stream.

#include <array>
#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <vector>

#include "evfl/rng.hpp"
#include "evfl/tensor_math.hpp"

namespace evfl {

struct Dataset {
    std::size_t feature_dim = 0;
    int num_classes = 0;
    std::vector<Vector> features;  // already normalized/standardized
    std::vector<int> labels;
    std::vector<std::vector<std::size_t>> by_class;  // sample indices per class

    // Image geometry when loaded from IDX (used by the translation
    // augmentation); zero otherwise.
    std::size_t img_rows = 0;
    std::size_t img_cols = 0;
    double background = 0.0;  // fill value for shifted-out pixels

    void rebuild_class_index();
};

// IDX pair loader.  Big-endian headers: magic 0x00000803 for images
// (count, rows, cols) and 0x00000801 for labels (count).  Pixels are
// normalized to [-1, 1] via x / 127.5 - 1.
Dataset load_idx(const std::string& images_path, const std::string& labels_path,
                 int num_classes = 10);

// Writes an IDX pair in the same format (byte pixels).  Used for fixtures.
void write_idx(const std::string& images_path, const std::string& labels_path,
               const std::vector<std::vector<std::uint8_t>>& images,
               const std::vector<std::uint8_t>& labels, std::size_t rows, std::size_t cols);

// Numeric CSV with one label column.  Feature columns are standardized to
// zero mean / unit variance using statistics from the first
// `standardize_rows` rows; columns with sigma < 1e-8 are treated as
// constant (divide by 1).  Labels map to class indices via `label_values`
// (value at index i -> class i, matched within 1e-9) or, when empty, by
// rounding to the nearest integer.  A leading non-numeric header row is
// skipped automatically.
Dataset load_csv(const std::string& path, std::size_t label_column, int num_classes,
                 std::size_t standardize_rows = 10000,
                 const std::vector<double>& label_values = {});

// Synthetic generators, all fully determined by `rng`.
struct SyntheticSpec {
    std::string variant = "blobs";  // "blobs" | "separable"
    std::size_t samples = 4000;
    std::size_t dim = 16;
    int classes = 4;
    double noise = 0.3;    // blobs: per-coordinate gaussian noise
    double radius = 1.0;   // blobs: class-mean scale
    double margin = 0.5;   // separable: minimum |w* . x|
};
Dataset make_synthetic(const SyntheticSpec& spec, Rng& rng);

// ----- vertical partition --------------------------------------------------

struct FeaturePartition {
    std::vector<std::size_t> offsets;  // size M+1, offsets[0] = 0, back() = dim
    std::size_t clients() const { return offsets.empty() ? 0 : offsets.size() - 1; }
    std::size_t dim(std::size_t m) const { return offsets[m + 1] - offsets[m]; }
};

// Contiguous equal split of `dim` features over M clients; when M does not
// divide dim the first (dim mod M) clients take one extra feature.
FeaturePartition equal_partition(std::size_t dim, std::size_t clients);

std::vector<Vector> split_features(const Vector& x, const FeaturePartition& p);
Vector concat_features(const std::vector<Vector>& parts);

// ----- streaming -----------------------------------------------------------

struct ClassSampler {
    Vector probs;                       // simplex over classes
    std::uint64_t resample_period = 0;  // 0 = stationary
};

struct StreamSample {
    std::uint64_t t = 0;
    std::vector<Vector> parts;
    int label = 0;
};

// Endless stream over a dataset: each round draws a class from the sampler's
// current distribution, then a uniform sample index within that class (with
// replacement).  When resample_period is set, the class distribution is
// redrawn as normalize(U(0,1)^K) at every round with t % period == 0, before
// that round's draw.  All randomness comes from the stream's own rng.
class SampleStream {
public:
    SampleStream(const Dataset& data, FeaturePartition partition, ClassSampler sampler,
                 std::uint64_t data_seed, bool augment_translate = false,
                 std::uint64_t max_shift = 2);

    StreamSample next(std::uint64_t t);

    const Vector& class_probs() const { return sampler_.probs; }
    const FeaturePartition& partition() const { return partition_; }
    const Dataset& dataset() const { return *data_; }

private:
    const Dataset* data_;
    FeaturePartition partition_;
    ClassSampler sampler_;
    Rng rng_;
    bool augment_translate_;
    std::uint64_t max_shift_;

    Vector translated(const Vector& img);
};

} // namespace evfl
