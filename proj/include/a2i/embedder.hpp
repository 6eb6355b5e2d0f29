#pragma once

#include <filesystem>
#include <vector>

#include "a2i/backbones.hpp"
#include "a2i/rng.hpp"
#include "a2i/types.hpp"

namespace a2i {

// Selected encoder layers concatenated along the feature axis: d_feat x n_a.
struct AudioFeatures {
    MatrixXd values;
    std::vector<int> source_layer_indices;  // 1-based, strictly increasing
};

struct ProjectedSequence {
    MatrixXd values;  // d_token x n_a
};

struct AudioToken {
    VectorXd values;           // d_token
    VectorXd pooling_weights;  // n_a, nonnegative, sums to 1
};

struct EmbedderConfig {
    int d_feat  = 24;  // hidden width x selected layer count
    int d_token = 16;  // text embedding width d_a
    std::vector<int> layer_indices{4, 8, 12};
};

// The only trainable parameters in the system.
struct EmbedderParams {
    MatrixXd w1;      // d_feat x d_feat
    VectorXd b1;      // d_feat
    MatrixXd w2;      // d_token x d_feat
    VectorXd b2;      // d_token
    MatrixXd pool_w;  // d_token x d_token, attentive-pooling score projection
    VectorXd pool_v;  // d_token, score direction

    static EmbedderParams init(const EmbedderConfig& cfg, Rng& rng);
    static EmbedderParams zeros_like(const EmbedderParams& other);

    std::int64_t count() const;
    std::uint64_t checksum() const;
    int d_feat() const { return static_cast<int>(w1.rows()); }
    int d_token() const { return static_cast<int>(w2.rows()); }
};

// Trainable-scalar count for a configuration, without allocating parameters.
std::int64_t embedder_param_count(int d_feat, int d_token);

// Gradients, same shapes as the parameters.
struct EmbedderGrads {
    MatrixXd w1;
    VectorXd b1;
    MatrixXd w2;
    VectorXd b2;
    MatrixXd pool_w;
    VectorXd pool_v;

    static EmbedderGrads zero(const EmbedderParams& p);
    void accumulate(const EmbedderGrads& other, double weight = 1.0);
};

// Applies fn to each (param, grad) pair; used by the optimizer.
template <typename Fn>
void for_each_param(EmbedderParams& p, EmbedderGrads& g, Fn&& fn) {
    fn(p.w1, g.w1);
    fn(p.b1, g.b1);
    fn(p.w2, g.w2);
    fn(p.b2, g.b2);
    fn(p.pool_w, g.pool_w);
    fn(p.pool_v, g.pool_v);
}

double gelu(double x);
double gelu_derivative(double x);

// Stage 1: concatenate the selected layers (1-based indices) feature-wise.
AudioFeatures extract_features(const HiddenStateStack& stack, const std::vector<int>& indices);

// Stage 2: w2 * gelu(w1 * x + b1) + b2, applied per time step.
ProjectedSequence project(const AudioFeatures& features, const EmbedderParams& params);

// Stage 3: softmax-weighted temporal average with learned per-timestep scores
// score_t = pool_v . tanh(pool_w * seq[:, t]).
AudioToken attentive_pool(const ProjectedSequence& seq, const EmbedderParams& params);

// Composition of the three stages with the configured layer indices.
AudioToken embed_audio(const AudioWaveform& wave, const AudioEncoder& encoder,
                       const EmbedderParams& params, const std::vector<int>& indices);

// Forward pass keeping every intermediate needed for the backward pass.
struct EmbedderTrace {
    MatrixXd features;   // F: d_feat x n_a
    MatrixXd pre1;       // H = w1 F + b1
    MatrixXd act1;       // G = gelu(H)
    MatrixXd projected;  // P = w2 G + b2
    MatrixXd pool_pre;   // pool_w P
    MatrixXd pool_tanh;  // U = tanh(pool_pre)
    VectorXd scores;     // s_t = pool_v . U[:, t]
    VectorXd weights;    // alpha = softmax(s)
    VectorXd token;      // P alpha
};

EmbedderTrace embed_forward(const MatrixXd& features, const EmbedderParams& params);

// Accumulates d(loss)/d(params) into grads given d(loss)/d(token).
void embed_backward(const EmbedderTrace& trace, const EmbedderParams& params,
                    const VectorXd& d_token, EmbedderGrads& grads);

// ---------------------------------------------------------------------------
// Checkpoint container: params, layer indices, shape metadata, config
// fingerprint, and (optionally) optimizer moments for resumable training.
// ---------------------------------------------------------------------------

struct Checkpoint {
    EmbedderConfig config;
    EmbedderParams params;
    std::string config_fingerprint;
    std::int64_t step = 0;
    bool has_optimizer_state = false;
    EmbedderGrads adam_m;  // first moments (parameter-shaped)
    EmbedderGrads adam_v;  // second moments
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace a2i
