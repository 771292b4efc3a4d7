#include "evfl/regret_audit.hpp"

#include <cmath>
#include <cstring>

#include "binio.hpp"

namespace evfl {

namespace {
constexpr char kTraceMagic[8] = {'E', 'V', 'F', 'L', 'T', 'R', 'A', 'C'};
constexpr std::uint32_t kTraceVersion = 1;
} // namespace

void save_trace(const std::string& path, const GradientTrace& trace) {
    auto f = binio::open_write(path, "trace");
    if (std::fwrite(kTraceMagic, 1, 8, f.get()) != 8) throw IoError("trace: short write");
    binio::put_u32(f.get(), kTraceVersion);
    binio::put_u64(f.get(), trace.dim);
    binio::put_u64(f.get(), trace.grads.size());
    for (const auto& g : trace.grads) {
        if (g.size() != trace.dim) throw_dim("save_trace(entry)", g.size(), trace.dim);
        binio::put_f64(f.get(), g.data(), g.size());
    }
}

GradientTrace load_trace(const std::string& path) {
    auto f = binio::open_read(path, "trace");
    char magic[8];
    if (std::fread(magic, 1, 8, f.get()) != 8 || std::memcmp(magic, kTraceMagic, 8) != 0)
        throw FormatError("trace: bad magic in " + path);
    std::uint32_t version = binio::get_u32(f.get(), "trace");
    if (version != kTraceVersion)
        throw FormatError("trace: unsupported version " + std::to_string(version));
    GradientTrace trace;
    trace.dim = binio::get_u64(f.get(), "trace");
    std::uint64_t count = binio::get_u64(f.get(), "trace");
    if (trace.dim == 0) throw FormatError("trace: zero dimension in " + path);
    trace.grads.assign(count, Vector(trace.dim));
    for (auto& g : trace.grads) binio::get_f64(f.get(), g.data(), g.size(), "trace");
    return trace;
}

DlrAccumulator::DlrAccumulator(std::size_t l, double alpha) : l_(l), alpha_(alpha) {
    if (l_ == 0) throw DimError("DlrAccumulator: window length must be >= 1");
    if (!(alpha > 0.0) || alpha > 1.0)
        throw DimError("DlrAccumulator: alpha must lie in (0, 1], got " +
                       std::to_string(alpha));
}

void DlrAccumulator::push(const Vector& grad) {
    if (!window_.empty() && grad.size() != window_.front().size())
        throw_dim("DlrAccumulator::push", grad.size(), window_.front().size());
    window_.push_front(grad);
    if (window_.size() > l_) window_.pop_back();
    ++rounds_;

    // grad S_{t,l,alpha} over the rounds that actually exist: weights
    // alpha^i for i = 0..k-1, normalized by their own sum (k = min(t, l)).
    Vector acc(grad.size(), 0.0);
    double w = 1.0;
    double norm = 0.0;
    for (const auto& g : window_) {
        axpy(w, g, acc);
        norm += w;
        w *= alpha_;
    }
    double inv = 1.0 / norm;
    double sq = 0.0;
    for (double v : acc) {
        double x = v * inv;
        sq += x * x;
    }
    total_ += sq;
}

std::vector<std::pair<std::uint64_t, double>> empirical_dlr(
    const GradientTrace& trace, std::size_t l, double alpha,
    const std::vector<std::uint64_t>& checkpoints) {
    for (std::size_t i = 0; i < checkpoints.size(); ++i) {
        if (checkpoints[i] == 0 || checkpoints[i] > trace.grads.size())
            throw DimError("empirical_dlr: checkpoint " + std::to_string(checkpoints[i]) +
                           " outside trace of length " + std::to_string(trace.grads.size()));
        if (i > 0 && checkpoints[i] <= checkpoints[i - 1])
            throw DimError("empirical_dlr: checkpoints must be strictly ascending");
    }
    DlrAccumulator acc(l, alpha);
    std::vector<std::pair<std::uint64_t, double>> out;
    std::size_t next = 0;
    for (std::size_t t = 1; t <= trace.grads.size() && next < checkpoints.size(); ++t) {
        acc.push(trace.grads[t - 1]);
        if (t == checkpoints[next]) {
            out.emplace_back(t, acc.value());
            ++next;
        }
    }
    return out;
}

double fit_loglog_slope(const std::vector<std::pair<std::uint64_t, double>>& points) {
    std::vector<std::pair<double, double>> logs;
    for (const auto& [t, v] : points)
        if (v > 0.0 && t > 0) logs.emplace_back(std::log(static_cast<double>(t)), std::log(v));
    if (logs.size() < 2)
        throw DimError("fit_loglog_slope: need at least two positive points, have " +
                       std::to_string(logs.size()));
    double mx = 0.0, my = 0.0;
    for (const auto& [x, y] : logs) {
        mx += x;
        my += y;
    }
    mx /= static_cast<double>(logs.size());
    my /= static_cast<double>(logs.size());
    double num = 0.0, den = 0.0;
    for (const auto& [x, y] : logs) {
        num += (x - mx) * (y - my);
        den += (x - mx) * (x - mx);
    }
    if (den == 0.0) throw DimError("fit_loglog_slope: degenerate abscissae");
    return num / den;
}

// ----- convex regret -------------------------------------------------------

namespace {

// Mean loss and mean gradient over samples[0..prefix).
struct BatchEval {
    double loss = 0.0;
    Vector grad;
};

BatchEval batch_eval(SplitModel& model, const Vector& params,
                     const std::vector<StreamSample>& samples, std::size_t prefix,
                     bool with_grad) {
    unflatten_all(model, params);
    BatchEval ev;
    if (with_grad) ev.grad.assign(params.size(), 0.0);
    for (std::size_t i = 0; i < prefix; ++i) {
        if (with_grad) {
            CompositeGrad g = composite_gradient(model, samples[i].parts, samples[i].label);
            ev.loss += g.loss;
            axpy(1.0, g.grad, ev.grad);
        } else {
            ev.loss += composite_loss(model, samples[i].parts, samples[i].label);
        }
    }
    double inv = 1.0 / static_cast<double>(prefix);
    ev.loss *= inv;
    if (with_grad)
        for (auto& v : ev.grad) v *= inv;
    return ev;
}

} // namespace

OfflineOracleResult offline_oracle(const SplitModel& structure,
                                   const std::vector<StreamSample>& samples,
                                   std::size_t prefix, const Vector& start, double tol,
                                   std::uint64_t max_iters) {
    if (prefix == 0 || prefix > samples.size())
        throw DimError("offline_oracle: bad prefix " + std::to_string(prefix));
    SplitModel model = structure;
    if (start.size() != total_params(model))
        throw_dim("offline_oracle(start)", start.size(), total_params(model));

    OfflineOracleResult res;
    res.params = start;
    BatchEval cur = batch_eval(model, res.params, samples, prefix, true);
    res.mean_loss = cur.loss;
    double step = 1.0;
    for (std::uint64_t it = 0; it < max_iters; ++it) {
        double ginf = 0.0;
        for (double v : cur.grad) ginf = std::max(ginf, std::fabs(v));
        if (ginf <= tol) break;
        // Backtracking: shrink until the mean loss decreases.
        bool moved = false;
        for (int bt = 0; bt < 60; ++bt) {
            Vector trial = res.params;
            axpy(-step, cur.grad, trial);
            BatchEval te = batch_eval(model, trial, samples, prefix, false);
            if (te.loss < cur.loss) {
                res.params = std::move(trial);
                cur = batch_eval(model, res.params, samples, prefix, true);
                step *= 1.25;
                moved = true;
                break;
            }
            step *= 0.5;
        }
        res.iters = it + 1;
        if (!moved) break;  // no descent direction at double precision
    }
    res.mean_loss = cur.loss;
    return res;
}

ConvexRegretResult convex_regret(const SplitModel& structure,
                                 const std::vector<double>& online_losses,
                                 const std::vector<StreamSample>& samples,
                                 const std::vector<std::uint64_t>& checkpoints,
                                 const Vector& warm_start, std::uint64_t init_seed,
                                 double tol, std::uint64_t max_iters) {
    if (online_losses.size() != samples.size())
        throw_dim("convex_regret(losses)", online_losses.size(), samples.size());
    ConvexRegretResult out;

    // Fresh seeded start: same init scheme as the models themselves.
    SplitModel fresh = structure;
    {
        Rng rng(init_seed);
        auto reinit = [&rng](Mlp& m) {
            for (auto& layer : m.layers) {
                double r = std::sqrt(1.0 / static_cast<double>(layer.W.cols()));
                for (std::size_t k = 0; k < layer.W.size(); ++k)
                    layer.W.data()[k] = rng.next_uniform(-r, r);
                for (auto& b : layer.b) b = rng.next_uniform(-r, r);
            }
        };
        reinit(fresh.server);
        for (auto& c : fresh.clients) reinit(c);
    }
    Vector fresh_start = flatten_all(fresh);

    Vector prefix_sum(online_losses.size() + 1, 0.0);
    for (std::size_t i = 0; i < online_losses.size(); ++i)
        prefix_sum[i + 1] = prefix_sum[i] + online_losses[i];

    for (std::uint64_t T : checkpoints) {
        if (T == 0 || T > samples.size())
            throw DimError("convex_regret: checkpoint " + std::to_string(T) +
                           " outside the sample sequence");
        OfflineOracleResult a =
            offline_oracle(structure, samples, T, warm_start, tol, max_iters);
        OfflineOracleResult b =
            offline_oracle(structure, samples, T, fresh_start, tol, max_iters);
        const OfflineOracleResult& best = a.mean_loss <= b.mean_loss ? a : b;
        double online_sum = prefix_sum[T];
        double online_mean = online_sum / static_cast<double>(T);
        out.online_mean_loss.push_back(online_mean);
        out.oracle_mean_loss.push_back(best.mean_loss);
        out.regret.emplace_back(T, online_sum - best.mean_loss * static_cast<double>(T));
        if (best.mean_loss > online_mean) out.oracle_sane = false;
    }
    return out;
}

} // namespace evfl
