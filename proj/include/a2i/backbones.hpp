#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "a2i/types.hpp"

namespace a2i {

// ---------------------------------------------------------------------------
// Frozen-model interfaces. Implementations are immutable after construction
// and safe for concurrent read-only use.
// ---------------------------------------------------------------------------

class AudioEncoder {
public:
    virtual ~AudioEncoder() = default;
    // Returns every layer's output (n_a x h each) so callers can select any
    // subset. Deterministic for fixed weights and input.
    virtual HiddenStateStack hidden_states(const AudioWaveform& wave) const = 0;
    virtual int depth() const = 0;
    virtual int hidden_width() const = 0;
    virtual int sample_rate() const = 0;
    virtual int frame_count(std::size_t n_samples) const = 0;
    virtual std::uint64_t weights_checksum() const = 0;
};

class TextEncoder {
public:
    virtual ~TextEncoder() = default;
    // Maps text to content-token ids; begin/end specials are added by encode.
    virtual std::vector<int> tokenize(const std::string& text) const = 0;
    virtual TextEmbeddingSequence encode(const std::vector<int>& content_ids) const = 0;
    virtual int embed_dim() const = 0;
    virtual int vocab_size() const = 0;
    virtual std::uint64_t weights_checksum() const = 0;
};

class LatentCodec {
public:
    virtual ~LatentCodec() = default;
    virtual Latent encode(const Image& image) const = 0;
    virtual Image decode(const Latent& latent) const = 0;
    virtual int image_size() const = 0;
    virtual int latent_channels() const = 0;
    virtual int latent_height() const = 0;
    virtual int latent_width() const = 0;
    virtual std::uint64_t weights_checksum() const = 0;
};

class Denoiser {
public:
    virtual ~Denoiser() = default;
    virtual int cond_width() const = 0;
    // Noise prediction for x_t at step t under conditioning rows (n x d_a).
    virtual Latent predict_noise(const Latent& noisy, int t, const MatrixXd& cond,
                                 const NoiseSchedule& schedule) const = 0;
    // d(loss)/d(cond) given d(loss)/d(predicted noise); one row per cond row.
    virtual MatrixXd cond_backward(const Latent& noisy, int t, const MatrixXd& cond,
                                   const NoiseSchedule& schedule,
                                   const Latent& d_noise_pred) const = 0;
    virtual std::uint64_t weights_checksum() const = 0;
};

// ---------------------------------------------------------------------------
// Shapes and the backbone bundle
// ---------------------------------------------------------------------------

struct BackboneConfig {
    // audio encoder
    int sample_rate = 16000;
    int depth       = 12;
    int hidden      = 8;
    int window      = 400;
    int hop         = 320;
    int dft_bins    = 32;
    int bands       = 8;
    // text encoder
    int d_text = 16;
    int vocab  = 4096;
    // latent autoencoder
    int image_size      = 8;
    int latent_channels = 4;
    int latent_hw       = 8;
    double latent_scale = 2.0;
    // denoiser cross-attention
    int attn_dim = 16;
    // noise schedule
    int timesteps     = 100;
    double beta_start = 1e-4;
    double beta_end   = 2e-2;

    std::uint64_t seed = 0xa21;
};

// Shapes matching the full-scale setup (12-layer/768-wide encoder framed so a
// 5 s, 16 kHz clip yields 248 frames; 768-wide text embeddings).
BackboneConfig reference_backbone_config();

struct Backbone {
    std::string name;
    BackboneConfig config;
    std::unique_ptr<AudioEncoder> audio;
    std::unique_ptr<TextEncoder> text;
    std::unique_ptr<LatentCodec> codec;
    std::unique_ptr<Denoiser> denoiser;
    NoiseSchedule schedule;

    // Covers every frozen parameter; stable across a training run.
    std::uint64_t checksum() const;
};

// Desk-scale preset with a fixed internal seed, so two processes build
// bit-identical toy backbones.
Backbone make_toy_backbone();

// Seeded construction at arbitrary shapes.
Backbone make_backbone_from_config(const BackboneConfig& cfg, const std::string& name);

// Weight container IO for "reference" backbones consumed through these
// interfaces. Round-trips bitwise.
void save_backbone(const Backbone& backbone, const std::filesystem::path& path);
Backbone load_backbone(const std::filesystem::path& path);

// Registry entry point: "toy" builds the preset, "reference" loads weights.
Backbone make_backbone(const std::string& name, const std::string& weights_path);

// Frames produced by a (window, hop) framing of n samples.
int frame_count_for(std::size_t n_samples, int window, int hop);

// Forward process: sqrt(abar_t) x0 + sqrt(1 - abar_t) eps.
Latent add_noise(const Latent& latent, const Latent& epsilon, int t,
                 const NoiseSchedule& schedule);

}  // namespace a2i
