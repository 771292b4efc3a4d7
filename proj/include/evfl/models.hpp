#pragma once
// Split neural model: per-client encoder MLPs producing embeddings and a
// server head that consumes the concatenated embeddings and emits class
// logits.  Forward passes return explicit trace objects (inputs and
// pre-activations per layer) that the matching backward consumes, so models
// themselves stay immutable during evaluation.

#include <cstdint>
#include <string>
#include <vector>

#include "evfl/rng.hpp"
#include "evfl/tensor_math.hpp"

namespace evfl {

struct AffineLayer {
    DenseMatrix W;
    Vector b;  // empty when the layer has no bias
    bool has_bias() const { return !b.empty(); }
};

// A plain MLP over a config-driven layer list.  Clients use
// relu_after_last = true (the embedding itself is rectified); the server
// head uses relu_after_last = false so the final layer emits raw logits,
// with ReLU applied after every hidden layer in both cases.
struct Mlp {
    std::vector<AffineLayer> layers;
    bool relu_after_last = false;
    bool relu_hidden = true;

    std::size_t input_dim() const { return layers.empty() ? 0 : layers.front().W.cols(); }
    std::size_t output_dim() const { return layers.empty() ? 0 : layers.back().W.rows(); }
    std::size_t param_count() const;
};

struct MlpTrace {
    std::vector<Vector> inputs;   // input to each layer (post-activation of previous)
    std::vector<Vector> preacts;  // W x + b per layer
};

// widths = {in, h1, ..., out}.  Parameters are drawn
// uniform(-sqrt(1/fan_in), +sqrt(1/fan_in)) per layer, weights row-major
// first and then bias, consuming `rng` in that fixed order.
Mlp make_mlp(const std::vector<std::size_t>& widths, bool bias, bool relu_hidden,
             bool relu_after_last, Rng& rng);

Vector mlp_forward(const Mlp& m, const Vector& x, MlpTrace* trace = nullptr);

struct MlpGrads {
    Vector gparams;  // flat, same order as flatten()
    Vector gx;       // gradient w.r.t. the network input
};

// g_out is the gradient w.r.t. the network *output* (post-activation when
// relu_after_last is set).  The trace must come from a forward pass of the
// same network on the same input.
MlpGrads mlp_backward(const Mlp& m, const MlpTrace& trace, const Vector& g_out);

// Flat parameter vector: for each layer, W row-major then b.
Vector flatten(const Mlp& m);
void unflatten(Mlp& m, const Vector& flat);
// params += a * g, with g in flatten() order.
void axpy_params(Mlp& m, double a, const Vector& g);

// ----- server-side composite ---------------------------------------------

struct ServerEval {
    double loss = 0.0;
    int predicted = 0;
    Vector grad_logits;
    MlpTrace trace;
    Vector concat;  // concatenated embeddings fed to the head
};

// Evaluates the head on the concatenation of all client embeddings.
// `embeddings` must have one entry per client in client order.
ServerEval server_forward(const Mlp& server, const std::vector<Vector>& embeddings,
                          int label);

struct ServerGrads {
    Vector gparams;          // flat gradient of the head parameters
    std::vector<Vector> v;   // per-client gradient slice w.r.t. its embedding
};

ServerGrads server_backward(const Mlp& server, const ServerEval& eval,
                            const std::vector<std::size_t>& embed_dims);

// ----- composite split model ----------------------------------------------
// The whole federation's model as one object, used by the gradient audits
// and the offline regret oracle.  The flat layout is [server | client 1 |
// ... | client M], each in flatten() order — the same order the protocol's
// full-gradient trace uses.

struct SplitModel {
    Mlp server;
    std::vector<Mlp> clients;
};

std::size_t total_params(const SplitModel& sm);
Vector flatten_all(const SplitModel& sm);
void unflatten_all(SplitModel& sm, const Vector& flat);

// Composite loss f(w0, h_1(w_1; x_1), ..., h_M(w_M; x_M); y) and its full
// end-to-end gradient at the current parameters.
double composite_loss(const SplitModel& sm, const std::vector<Vector>& parts, int label);

struct CompositeGrad {
    double loss = 0.0;
    Vector grad;
};
CompositeGrad composite_gradient(const SplitModel& sm, const std::vector<Vector>& parts,
                                 int label);

// ----- checkpoints ---------------------------------------------------------
// Binary format, little-endian: magic "EVFLCKPT", u32 version, u32
// participant id, u32 layer count + activation flags, per layer
// {u32 rows, u32 cols, u32 bias}, then all parameters as 64-bit doubles in
// flatten() order.
void save_checkpoint(const std::string& path, std::uint32_t participant, const Mlp& m);
Mlp load_checkpoint(const std::string& path, std::uint32_t* participant = nullptr);

} // namespace evfl
