#include "evfl/models.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include "binio.hpp"

namespace evfl {

std::size_t Mlp::param_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.W.size() + l.b.size();
    return n;
}

Mlp make_mlp(const std::vector<std::size_t>& widths, bool bias, bool relu_hidden,
             bool relu_after_last, Rng& rng) {
    if (widths.size() < 2) throw DimError("make_mlp: need at least input and output widths");
    Mlp m;
    m.relu_hidden = relu_hidden;
    m.relu_after_last = relu_after_last;
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
        std::size_t fan_in = widths[i];
        std::size_t fan_out = widths[i + 1];
        if (fan_in == 0 || fan_out == 0) throw DimError("make_mlp: zero layer width");
        double r = std::sqrt(1.0 / static_cast<double>(fan_in));
        AffineLayer layer;
        layer.W = DenseMatrix(fan_out, fan_in);
        for (std::size_t k = 0; k < layer.W.size(); ++k)
            layer.W.data()[k] = rng.next_uniform(-r, r);
        if (bias) {
            layer.b.resize(fan_out);
            for (auto& v : layer.b) v = rng.next_uniform(-r, r);
        }
        m.layers.push_back(std::move(layer));
    }
    return m;
}

Vector mlp_forward(const Mlp& m, const Vector& x, MlpTrace* trace) {
    if (m.layers.empty()) throw DimError("mlp_forward: model has no layers");
    if (trace) {
        trace->inputs.clear();
        trace->preacts.clear();
    }
    Vector cur = x;
    for (std::size_t i = 0; i < m.layers.size(); ++i) {
        const auto& l = m.layers[i];
        if (trace) trace->inputs.push_back(cur);
        Vector pre = affine_forward(l.W, l.b, cur);
        if (trace) trace->preacts.push_back(pre);
        bool last = (i + 1 == m.layers.size());
        bool act = last ? m.relu_after_last : m.relu_hidden;
        cur = act ? relu(pre) : std::move(pre);
    }
    return cur;
}

MlpGrads mlp_backward(const Mlp& m, const MlpTrace& trace, const Vector& g_out) {
    if (trace.inputs.size() != m.layers.size() || trace.preacts.size() != m.layers.size())
        throw DimError("mlp_backward: trace does not match model (layers " +
                       std::to_string(trace.inputs.size()) + " vs " +
                       std::to_string(m.layers.size()) + ")");
    MlpGrads out;
    out.gparams.assign(m.param_count(), 0.0);

    // Per-layer flat offsets, filled back-to-front below.
    std::vector<std::size_t> offsets(m.layers.size(), 0);
    std::size_t off = 0;
    for (std::size_t i = 0; i < m.layers.size(); ++i) {
        offsets[i] = off;
        off += m.layers[i].W.size() + m.layers[i].b.size();
    }

    Vector g = g_out;
    for (std::size_t ri = m.layers.size(); ri-- > 0;) {
        const auto& l = m.layers[ri];
        bool last = (ri + 1 == m.layers.size());
        bool act = last ? m.relu_after_last : m.relu_hidden;
        if (act) g = relu_backward(trace.preacts[ri], g);
        AffineGrads ag = affine_backward(l.W, l.has_bias(), trace.inputs[ri], g);
        double* dst = out.gparams.data() + offsets[ri];
        std::memcpy(dst, ag.gW.data(), ag.gW.size() * sizeof(double));
        if (l.has_bias())
            std::memcpy(dst + ag.gW.size(), ag.gb.data(), ag.gb.size() * sizeof(double));
        g = std::move(ag.gx);
    }
    out.gx = std::move(g);
    return out;
}

Vector flatten(const Mlp& m) {
    Vector flat;
    flat.reserve(m.param_count());
    for (const auto& l : m.layers) {
        flat.insert(flat.end(), l.W.data(), l.W.data() + l.W.size());
        flat.insert(flat.end(), l.b.begin(), l.b.end());
    }
    return flat;
}

void unflatten(Mlp& m, const Vector& flat) {
    if (flat.size() != m.param_count())
        throw_dim("unflatten", flat.size(), m.param_count());
    std::size_t off = 0;
    for (auto& l : m.layers) {
        std::memcpy(l.W.data(), flat.data() + off, l.W.size() * sizeof(double));
        off += l.W.size();
        if (l.has_bias()) {
            std::memcpy(l.b.data(), flat.data() + off, l.b.size() * sizeof(double));
            off += l.b.size();
        }
    }
}

void axpy_params(Mlp& m, double a, const Vector& g) {
    if (g.size() != m.param_count()) throw_dim("axpy_params", g.size(), m.param_count());
    std::size_t off = 0;
    for (auto& l : m.layers) {
        double* w = l.W.data();
        const double* src = g.data() + off;
        for (std::size_t k = 0; k < l.W.size(); ++k) w[k] += a * src[k];
        off += l.W.size();
        if (l.has_bias()) {
            const double* sb = g.data() + off;
            for (std::size_t k = 0; k < l.b.size(); ++k) l.b[k] += a * sb[k];
            off += l.b.size();
        }
    }
}

ServerEval server_forward(const Mlp& server, const std::vector<Vector>& embeddings,
                          int label) {
    ServerEval ev;
    std::size_t total = 0;
    for (const auto& e : embeddings) total += e.size();
    ev.concat.reserve(total);
    for (const auto& e : embeddings) ev.concat.insert(ev.concat.end(), e.begin(), e.end());
    if (ev.concat.size() != server.input_dim())
        throw_dim("server_forward(concat)", ev.concat.size(), server.input_dim());
    Vector logits = mlp_forward(server, ev.concat, &ev.trace);
    SoftmaxCeResult ce = softmax_cross_entropy(logits, label);
    ev.loss = ce.loss;
    ev.predicted = ce.predicted;
    ev.grad_logits = std::move(ce.grad_logits);
    return ev;
}

ServerGrads server_backward(const Mlp& server, const ServerEval& eval,
                            const std::vector<std::size_t>& embed_dims) {
    MlpGrads g = mlp_backward(server, eval.trace, eval.grad_logits);
    ServerGrads out;
    out.gparams = std::move(g.gparams);
    std::size_t total = 0;
    for (std::size_t d : embed_dims) total += d;
    if (total != g.gx.size()) throw_dim("server_backward(embed_dims)", total, g.gx.size());
    std::size_t off = 0;
    for (std::size_t d : embed_dims) {
        out.v.emplace_back(g.gx.begin() + off, g.gx.begin() + off + d);
        off += d;
    }
    return out;
}

// ----- composite split model ----------------------------------------------

std::size_t total_params(const SplitModel& sm) {
    std::size_t n = sm.server.param_count();
    for (const auto& c : sm.clients) n += c.param_count();
    return n;
}

Vector flatten_all(const SplitModel& sm) {
    Vector flat = flatten(sm.server);
    flat.reserve(total_params(sm));
    for (const auto& c : sm.clients) {
        Vector cf = flatten(c);
        flat.insert(flat.end(), cf.begin(), cf.end());
    }
    return flat;
}

void unflatten_all(SplitModel& sm, const Vector& flat) {
    if (flat.size() != total_params(sm)) throw_dim("unflatten_all", flat.size(), total_params(sm));
    std::size_t off = sm.server.param_count();
    unflatten(sm.server, Vector(flat.begin(), flat.begin() + static_cast<std::ptrdiff_t>(off)));
    for (auto& c : sm.clients) {
        std::size_t n = c.param_count();
        unflatten(c, Vector(flat.begin() + static_cast<std::ptrdiff_t>(off),
                            flat.begin() + static_cast<std::ptrdiff_t>(off + n)));
        off += n;
    }
}

double composite_loss(const SplitModel& sm, const std::vector<Vector>& parts, int label) {
    if (parts.size() != sm.clients.size())
        throw_dim("composite_loss(parts)", parts.size(), sm.clients.size());
    std::vector<Vector> embeddings(sm.clients.size());
    for (std::size_t m = 0; m < sm.clients.size(); ++m)
        embeddings[m] = mlp_forward(sm.clients[m], parts[m]);
    ServerEval ev = server_forward(sm.server, embeddings, label);
    return ev.loss;
}

CompositeGrad composite_gradient(const SplitModel& sm, const std::vector<Vector>& parts,
                                 int label) {
    if (parts.size() != sm.clients.size())
        throw_dim("composite_gradient(parts)", parts.size(), sm.clients.size());
    const std::size_t M = sm.clients.size();
    std::vector<Vector> embeddings(M);
    std::vector<MlpTrace> traces(M);
    std::vector<std::size_t> embed_dims(M);
    for (std::size_t m = 0; m < M; ++m) {
        embeddings[m] = mlp_forward(sm.clients[m], parts[m], &traces[m]);
        embed_dims[m] = sm.clients[m].output_dim();
    }
    ServerEval ev = server_forward(sm.server, embeddings, label);
    ServerGrads sg = server_backward(sm.server, ev, embed_dims);
    CompositeGrad out;
    out.loss = ev.loss;
    out.grad = std::move(sg.gparams);
    out.grad.reserve(total_params(sm));
    for (std::size_t m = 0; m < M; ++m) {
        MlpGrads cg = mlp_backward(sm.clients[m], traces[m], sg.v[m]);
        out.grad.insert(out.grad.end(), cg.gparams.begin(), cg.gparams.end());
    }
    return out;
}

// ----- checkpoints ---------------------------------------------------------

namespace {
constexpr char kCkptMagic[8] = {'E', 'V', 'F', 'L', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kCkptVersion = 1;
} // namespace

void save_checkpoint(const std::string& path, std::uint32_t participant, const Mlp& m) {
    auto f = binio::open_write(path, "checkpoint");
    if (std::fwrite(kCkptMagic, 1, 8, f.get()) != 8) throw IoError("checkpoint: short write");
    binio::put_u32(f.get(), kCkptVersion);
    binio::put_u32(f.get(), participant);
    binio::put_u32(f.get(), static_cast<std::uint32_t>(m.layers.size()));
    binio::put_u32(f.get(), (m.relu_hidden ? 1u : 0u) | (m.relu_after_last ? 2u : 0u));
    for (const auto& l : m.layers) {
        binio::put_u32(f.get(), static_cast<std::uint32_t>(l.W.rows()));
        binio::put_u32(f.get(), static_cast<std::uint32_t>(l.W.cols()));
        binio::put_u32(f.get(), l.has_bias() ? 1u : 0u);
    }
    Vector flat = flatten(m);
    binio::put_f64(f.get(), flat.data(), flat.size());
}

Mlp load_checkpoint(const std::string& path, std::uint32_t* participant) {
    auto f = binio::open_read(path, "checkpoint");
    char magic[8];
    if (std::fread(magic, 1, 8, f.get()) != 8 || std::memcmp(magic, kCkptMagic, 8) != 0)
        throw FormatError("checkpoint: bad magic in " + path);
    std::uint32_t version = binio::get_u32(f.get(), "checkpoint");
    if (version != kCkptVersion)
        throw FormatError("checkpoint: unsupported version " + std::to_string(version));
    std::uint32_t part = binio::get_u32(f.get(), "checkpoint");
    if (participant) *participant = part;
    std::uint32_t nlayers = binio::get_u32(f.get(), "checkpoint");
    std::uint32_t flags = binio::get_u32(f.get(), "checkpoint");
    Mlp m;
    m.relu_hidden = (flags & 1u) != 0;
    m.relu_after_last = (flags & 2u) != 0;
    for (std::uint32_t i = 0; i < nlayers; ++i) {
        std::uint32_t rows = binio::get_u32(f.get(), "checkpoint");
        std::uint32_t cols = binio::get_u32(f.get(), "checkpoint");
        std::uint32_t bias = binio::get_u32(f.get(), "checkpoint");
        AffineLayer l;
        l.W = DenseMatrix(rows, cols);
        if (bias) l.b.assign(rows, 0.0);
        m.layers.push_back(std::move(l));
    }
    Vector flat(m.param_count());
    binio::get_f64(f.get(), flat.data(), flat.size(), "checkpoint");
    unflatten(m, flat);
    return m;
}

} // namespace evfl
