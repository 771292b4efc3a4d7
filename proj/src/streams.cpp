#include "evfl/streams.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>

namespace evfl {

void Dataset::rebuild_class_index() {
    by_class.assign(static_cast<std::size_t>(num_classes), {});
    for (std::size_t i = 0; i < labels.size(); ++i) {
        int y = labels[i];
        if (y < 0 || y >= num_classes)
            throw FormatError("dataset: label " + std::to_string(y) + " out of range [0, " +
                              std::to_string(num_classes) + ")");
        by_class[static_cast<std::size_t>(y)].push_back(i);
    }
}

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using File = std::unique_ptr<std::FILE, FileCloser>;

std::uint32_t read_be32(std::FILE* f, const char* what) {
    unsigned char b[4];
    if (std::fread(b, 1, 4, f) != 4)
        throw FormatError(std::string("idx: truncated while reading ") + what);
    return (static_cast<std::uint32_t>(b[0]) << 24) | (static_cast<std::uint32_t>(b[1]) << 16) |
           (static_cast<std::uint32_t>(b[2]) << 8) | static_cast<std::uint32_t>(b[3]);
}

void write_be32(std::FILE* f, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>((v >> 24) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>(v & 0xff)};
    if (std::fwrite(b, 1, 4, f) != 4) throw IoError("idx: short write");
}

constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

} // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path,
                 int num_classes) {
    File fi(std::fopen(images_path.c_str(), "rb"));
    if (!fi) throw IoError("idx: cannot open " + images_path);
    File fl(std::fopen(labels_path.c_str(), "rb"));
    if (!fl) throw IoError("idx: cannot open " + labels_path);

    std::uint32_t magic = read_be32(fi.get(), "image magic");
    if (magic != kIdxImagesMagic)
        throw FormatError("idx: bad image magic in " + images_path + " (got " +
                          std::to_string(magic) + ", want 2051)");
    std::uint32_t count = read_be32(fi.get(), "image count");
    std::uint32_t rows = read_be32(fi.get(), "rows");
    std::uint32_t cols = read_be32(fi.get(), "cols");

    std::uint32_t lmagic = read_be32(fl.get(), "label magic");
    if (lmagic != kIdxLabelsMagic)
        throw FormatError("idx: bad label magic in " + labels_path + " (got " +
                          std::to_string(lmagic) + ", want 2049)");
    std::uint32_t lcount = read_be32(fl.get(), "label count");
    if (lcount != count)
        throw FormatError("idx: image/label count mismatch (" + std::to_string(count) +
                          " images vs " + std::to_string(lcount) + " labels)");

    Dataset ds;
    ds.num_classes = num_classes;
    ds.img_rows = rows;
    ds.img_cols = cols;
    ds.feature_dim = static_cast<std::size_t>(rows) * cols;
    ds.background = 0.0 / 127.5 - 1.0;
    ds.features.reserve(count);
    ds.labels.reserve(count);

    std::vector<unsigned char> buf(ds.feature_dim);
    for (std::uint32_t i = 0; i < count; ++i) {
        if (std::fread(buf.data(), 1, buf.size(), fi.get()) != buf.size())
            throw FormatError("idx: truncated image payload in " + images_path);
        Vector x(ds.feature_dim);
        for (std::size_t k = 0; k < buf.size(); ++k)
            x[k] = static_cast<double>(buf[k]) / 127.5 - 1.0;
        ds.features.push_back(std::move(x));
        unsigned char y;
        if (std::fread(&y, 1, 1, fl.get()) != 1)
            throw FormatError("idx: truncated label payload in " + labels_path);
        ds.labels.push_back(static_cast<int>(y));
    }
    ds.rebuild_class_index();
    return ds;
}

void write_idx(const std::string& images_path, const std::string& labels_path,
               const std::vector<std::vector<std::uint8_t>>& images,
               const std::vector<std::uint8_t>& labels, std::size_t rows, std::size_t cols) {
    if (images.size() != labels.size())
        throw DimError("write_idx: image/label count mismatch");
    File fi(std::fopen(images_path.c_str(), "wb"));
    if (!fi) throw IoError("idx: cannot open " + images_path + " for writing");
    File fl(std::fopen(labels_path.c_str(), "wb"));
    if (!fl) throw IoError("idx: cannot open " + labels_path + " for writing");
    write_be32(fi.get(), kIdxImagesMagic);
    write_be32(fi.get(), static_cast<std::uint32_t>(images.size()));
    write_be32(fi.get(), static_cast<std::uint32_t>(rows));
    write_be32(fi.get(), static_cast<std::uint32_t>(cols));
    for (const auto& img : images) {
        if (img.size() != rows * cols) throw DimError("write_idx: bad image size");
        if (std::fwrite(img.data(), 1, img.size(), fi.get()) != img.size())
            throw IoError("idx: short write");
    }
    write_be32(fl.get(), kIdxLabelsMagic);
    write_be32(fl.get(), static_cast<std::uint32_t>(labels.size()));
    if (!labels.empty() &&
        std::fwrite(labels.data(), 1, labels.size(), fl.get()) != labels.size())
        throw IoError("idx: short write");
}

Dataset load_csv(const std::string& path, std::size_t label_column, int num_classes,
                 std::size_t standardize_rows, const std::vector<double>& label_values) {
    std::ifstream in(path);
    if (!in) throw IoError("csv: cannot open " + path);

    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<double> vals;
        std::stringstream ss(line);
        std::string cell;
        bool numeric = true;
        while (std::getline(ss, cell, ',')) {
            try {
                std::size_t pos = 0;
                double v = std::stod(cell, &pos);
                while (pos < cell.size() && std::isspace(static_cast<unsigned char>(cell[pos])))
                    ++pos;
                if (pos != cell.size()) throw std::invalid_argument(cell);
                vals.push_back(v);
            } catch (const std::exception&) {
                numeric = false;
                break;
            }
        }
        if (!numeric) {
            if (lineno == 1) continue;  // header row
            throw FormatError("csv: non-numeric cell at line " + std::to_string(lineno) +
                              " of " + path);
        }
        if (!rows.empty() && vals.size() != rows.front().size())
            throw FormatError("csv: ragged row at line " + std::to_string(lineno) + " of " +
                              path);
        rows.push_back(std::move(vals));
    }
    if (rows.empty()) throw FormatError("csv: no data rows in " + path);
    std::size_t ncols = rows.front().size();
    if (label_column >= ncols)
        throw FormatError("csv: label column " + std::to_string(label_column) +
                          " out of range for " + std::to_string(ncols) + " columns");

    Dataset ds;
    ds.num_classes = num_classes;
    ds.feature_dim = ncols - 1;

    // Standardization statistics from the first standardize_rows rows.
    std::size_t nstat = std::min<std::size_t>(standardize_rows, rows.size());
    Vector mean(ds.feature_dim, 0.0), var(ds.feature_dim, 0.0);
    for (std::size_t i = 0; i < nstat; ++i) {
        std::size_t fc = 0;
        for (std::size_t c = 0; c < ncols; ++c) {
            if (c == label_column) continue;
            mean[fc++] += rows[i][c];
        }
    }
    for (auto& v : mean) v /= static_cast<double>(nstat);
    for (std::size_t i = 0; i < nstat; ++i) {
        std::size_t fc = 0;
        for (std::size_t c = 0; c < ncols; ++c) {
            if (c == label_column) continue;
            double d = rows[i][c] - mean[fc];
            var[fc++] += d * d;
        }
    }
    Vector sigma(ds.feature_dim);
    for (std::size_t k = 0; k < ds.feature_dim; ++k) {
        double s = std::sqrt(var[k] / static_cast<double>(nstat));
        sigma[k] = (s < 1e-8) ? 1.0 : s;
    }

    for (const auto& row : rows) {
        Vector x(ds.feature_dim);
        std::size_t fc = 0;
        for (std::size_t c = 0; c < ncols; ++c) {
            if (c == label_column) continue;
            x[fc] = (row[c] - mean[fc]) / sigma[fc];
            ++fc;
        }
        ds.features.push_back(std::move(x));
        double raw = row[label_column];
        int y = -1;
        if (label_values.empty()) {
            y = static_cast<int>(std::lround(raw));
        } else {
            for (std::size_t k = 0; k < label_values.size(); ++k)
                if (std::fabs(raw - label_values[k]) < 1e-9) {
                    y = static_cast<int>(k);
                    break;
                }
            if (y < 0)
                throw FormatError("csv: label value " + std::to_string(raw) +
                                  " not in class map");
        }
        ds.labels.push_back(y);
    }
    ds.rebuild_class_index();
    return ds;
}

Dataset make_synthetic(const SyntheticSpec& spec, Rng& rng) {
    if (spec.classes < 2) throw FormatError("synthetic: need at least 2 classes");
    if (spec.dim == 0 || spec.samples == 0) throw FormatError("synthetic: empty spec");
    Dataset ds;
    ds.num_classes = spec.classes;
    ds.feature_dim = spec.dim;

    if (spec.variant == "blobs") {
        std::vector<Vector> means(static_cast<std::size_t>(spec.classes), Vector(spec.dim));
        for (auto& mu : means)
            for (auto& v : mu) v = spec.radius * rng.next_gaussian();
        for (std::size_t i = 0; i < spec.samples; ++i) {
            int y = static_cast<int>(rng.next_index(static_cast<std::uint64_t>(spec.classes)));
            Vector x(spec.dim);
            const Vector& mu = means[static_cast<std::size_t>(y)];
            for (std::size_t k = 0; k < spec.dim; ++k)
                x[k] = mu[k] + spec.noise * rng.next_gaussian();
            ds.features.push_back(std::move(x));
            ds.labels.push_back(y);
        }
    } else if (spec.variant == "separable") {
        if (spec.classes != 2)
            throw FormatError("synthetic: variant 'separable' is two-class");
        Vector w(spec.dim);
        double norm = 0.0;
        for (auto& v : w) {
            v = rng.next_gaussian();
            norm += v * v;
        }
        norm = std::sqrt(norm);
        for (auto& v : w) v /= norm;
        for (std::size_t i = 0; i < spec.samples; ++i) {
            Vector x(spec.dim);
            double s = 0.0;
            do {
                for (auto& v : x) v = rng.next_gaussian();
                s = dot(w, x);
            } while (std::fabs(s) < spec.margin);
            ds.labels.push_back(s > 0.0 ? 1 : 0);
            ds.features.push_back(std::move(x));
        }
    } else {
        throw FormatError("synthetic: unknown variant '" + spec.variant + "'");
    }
    ds.rebuild_class_index();
    return ds;
}

FeaturePartition equal_partition(std::size_t dim, std::size_t clients) {
    if (clients == 0) throw DimError("equal_partition: zero clients");
    if (dim < clients)
        throw DimError("equal_partition: " + std::to_string(dim) + " features cannot cover " +
                       std::to_string(clients) + " clients");
    FeaturePartition p;
    p.offsets.resize(clients + 1);
    std::size_t base = dim / clients;
    std::size_t extra = dim % clients;
    p.offsets[0] = 0;
    for (std::size_t m = 0; m < clients; ++m)
        p.offsets[m + 1] = p.offsets[m] + base + (m < extra ? 1 : 0);
    return p;
}

std::vector<Vector> split_features(const Vector& x, const FeaturePartition& p) {
    if (p.offsets.empty() || p.offsets.back() != x.size())
        throw_dim("split_features", x.size(), p.offsets.empty() ? 0 : p.offsets.back());
    std::vector<Vector> parts;
    parts.reserve(p.clients());
    for (std::size_t m = 0; m < p.clients(); ++m)
        parts.emplace_back(x.begin() + static_cast<std::ptrdiff_t>(p.offsets[m]),
                           x.begin() + static_cast<std::ptrdiff_t>(p.offsets[m + 1]));
    return parts;
}

Vector concat_features(const std::vector<Vector>& parts) {
    Vector x;
    for (const auto& part : parts) x.insert(x.end(), part.begin(), part.end());
    return x;
}

SampleStream::SampleStream(const Dataset& data, FeaturePartition partition,
                           ClassSampler sampler, std::uint64_t data_seed,
                           bool augment_translate, std::uint64_t max_shift)
    : data_(&data),
      partition_(std::move(partition)),
      sampler_(std::move(sampler)),
      rng_(data_seed),
      augment_translate_(augment_translate),
      max_shift_(max_shift) {
    if (sampler_.probs.empty())
        sampler_.probs.assign(static_cast<std::size_t>(data.num_classes),
                              1.0 / static_cast<double>(data.num_classes));
    if (sampler_.probs.size() != static_cast<std::size_t>(data.num_classes))
        throw_dim("SampleStream(probs)", sampler_.probs.size(),
                  static_cast<std::size_t>(data.num_classes));
    if (partition_.offsets.back() != data.feature_dim)
        throw_dim("SampleStream(partition)", partition_.offsets.back(), data.feature_dim);
    if (augment_translate_ && (data.img_rows == 0 || data.img_cols == 0))
        throw FormatError("SampleStream: translation augmentation needs image data");
    for (int c = 0; c < data.num_classes; ++c)
        if (data.by_class[static_cast<std::size_t>(c)].empty())
            throw FormatError("SampleStream: class " + std::to_string(c) +
                              " has no samples to draw from");
}

Vector SampleStream::translated(const Vector& img) {
    // Uniform shift in [-max_shift, +max_shift] per axis; vacated pixels take
    // the background value.
    std::uint64_t span = 2 * max_shift_ + 1;
    std::int64_t dr = static_cast<std::int64_t>(rng_.next_index(span)) -
                      static_cast<std::int64_t>(max_shift_);
    std::int64_t dc = static_cast<std::int64_t>(rng_.next_index(span)) -
                      static_cast<std::int64_t>(max_shift_);
    std::int64_t R = static_cast<std::int64_t>(data_->img_rows);
    std::int64_t C = static_cast<std::int64_t>(data_->img_cols);
    Vector out(img.size(), data_->background);
    for (std::int64_t r = 0; r < R; ++r) {
        std::int64_t sr = r - dr;
        if (sr < 0 || sr >= R) continue;
        for (std::int64_t c = 0; c < C; ++c) {
            std::int64_t sc = c - dc;
            if (sc < 0 || sc >= C) continue;
            out[static_cast<std::size_t>(r * C + c)] =
                img[static_cast<std::size_t>(sr * C + sc)];
        }
    }
    return out;
}

StreamSample SampleStream::next(std::uint64_t t) {
    if (sampler_.resample_period != 0 && t % sampler_.resample_period == 0) {
        // Drift event: redraw the class distribution as normalize(U(0,1)^K).
        double sum = 0.0;
        for (auto& p : sampler_.probs) {
            p = rng_.next_unit();
            sum += p;
        }
        for (auto& p : sampler_.probs) p /= sum;
    }
    // Class draw by CDF inversion, then uniform index within the class.
    double u = rng_.next_unit();
    std::size_t cls = sampler_.probs.size() - 1;
    double acc = 0.0;
    for (std::size_t c = 0; c < sampler_.probs.size(); ++c) {
        acc += sampler_.probs[c];
        if (u < acc) {
            cls = c;
            break;
        }
    }
    const auto& bucket = data_->by_class[cls];
    std::size_t idx = bucket[rng_.next_index(bucket.size())];

    StreamSample s;
    s.t = t;
    s.label = data_->labels[idx];
    if (augment_translate_) {
        s.parts = split_features(translated(data_->features[idx]), partition_);
    } else {
        s.parts = split_features(data_->features[idx], partition_);
    }
    return s;
}

} // namespace evfl
