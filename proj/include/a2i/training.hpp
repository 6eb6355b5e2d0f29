#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "a2i/backbones.hpp"
#include "a2i/conditioning.hpp"
#include "a2i/datapipe.hpp"
#include "a2i/embedder.hpp"

namespace a2i {

struct TrainingBatch {
    std::vector<Latent> latents;  // encoded target frames x0
    std::vector<AudioWaveform> waveforms;
    std::vector<std::string> labels;
    std::vector<std::string> ids;
    // frozen-encoder work cached per sample
    std::vector<MatrixXd> features;
    std::vector<LabelEmbedding> label_embeddings;

    int size() const { return static_cast<int>(latents.size()); }
    void validate() const;
};

struct TrainConfig {
    std::int64_t steps            = 60000;
    double lr                     = 8e-5;
    int batch_size                = 8;
    double lambda_l1              = 1e-4;
    double lambda_cl              = 1e-3;
    bool use_cl                   = false;
    std::uint64_t seed            = 0;
    std::int64_t checkpoint_every = 1000;
    std::string prompt            = "A photo of a";
    TokenPosition token_position  = TokenPosition::kAfterPrompt;
    std::vector<int> layer_indices{4, 8, 12};
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps   = 1e-8;
    std::string config_fingerprint;
    std::filesystem::path output_dir;

    void validate() const;
};

struct LossTerms {
    double ldm = 0.0;
    double l1  = 0.0;
    std::optional<double> cl;
    double lambda_l1 = 0.0;
    double lambda_cl = 0.0;
    double total     = 0.0;

    void validate() const;
};

struct TrainState {
    std::int64_t step = 0;
    EmbedderParams params;
    EmbedderGrads adam_m;
    EmbedderGrads adam_v;
    std::uint64_t seed = 0;
};

// ---------------------------------------------------------------------------
// Loss terms
// ---------------------------------------------------------------------------

// One (timestep, noise) draw per sample; draw order is one t then one
// latent's worth of normals, sample by sample.
struct LdmDraw {
    int t = 0;
    Latent epsilon;
};
std::vector<LdmDraw> draw_ldm_noise(int batch_size, const Latent& shape,
                                    const NoiseSchedule& schedule, Rng& rng);

// Mean over batch and latent elements of |eps - eps_theta(x_t, t, tau)|^2.
double ldm_loss_with_draws(const TrainingBatch& batch, const std::vector<AudioToken>& tokens,
                           const Backbone& backbone, const std::vector<LdmDraw>& draws,
                           const std::string& prompt, TokenPosition position);

double ldm_loss(const TrainingBatch& batch, const std::vector<AudioToken>& tokens,
                const Backbone& backbone, const NoiseSchedule& schedule, Rng& rng,
                const std::string& prompt,
                TokenPosition position = TokenPosition::kAfterPrompt);

// Sum of absolute entries of the token (not the mean).
double l1_regularizer(const VectorXd& token);
// Subgradient, 0 at kinks.
VectorXd l1_gradient(const VectorXd& token);

// (1 - cos(token, label))^2; zero-norm inputs give loss 1 (cosine taken as 0).
double classification_loss(const VectorXd& token, const LabelEmbedding& label);
VectorXd classification_loss_gradient(const VectorXd& token, const LabelEmbedding& label);

// All components with their weighted total for the configured variant. Uses
// the same per-step rng streams as train_step, so the reported numbers match.
LossTerms total_loss(const TrainingBatch& batch, const TrainState& state,
                     const TrainConfig& config, const Backbone& backbone);

// ---------------------------------------------------------------------------
// Optimization loop: gradients reach EmbedderParams only.
// ---------------------------------------------------------------------------

struct StepResult {
    LossTerms terms;
    std::vector<AudioToken> tokens;
};

StepResult train_step(TrainState& state, const TrainingBatch& batch, const TrainConfig& config,
                      const Backbone& backbone);

// In-memory dataset with the frozen-encoder work precomputed.
struct TrainingDataset {
    std::vector<std::string> ids;
    std::vector<std::string> labels;
    std::vector<AudioWaveform> waveforms;
    std::vector<MatrixXd> features;
    std::vector<Latent> latents;
    std::vector<LabelEmbedding> label_embeddings;

    int size() const { return static_cast<int>(ids.size()); }
    TrainingBatch gather(const std::vector<int>& indices) const;

    static TrainingDataset load(const Manifest& manifest, const Backbone& backbone,
                                const std::vector<int>& layer_indices);
};

using TrainObserver = std::function<void(const TrainState&, const LossTerms&,
                                         const std::vector<AudioToken>&, const TrainingBatch&)>;

// Runs the optimization for config.steps, writing loss logs and periodic
// checkpoints under config.output_dir. Returns the final checkpoint path.
std::filesystem::path fit(const Manifest& manifest, const TrainConfig& config,
                          const Backbone& backbone, const TrainObserver& observer = {},
                          const std::filesystem::path& resume_from = {});

}  // namespace a2i
