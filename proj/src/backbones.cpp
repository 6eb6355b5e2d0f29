#include "a2i/backbones.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "a2i/rng.hpp"
#include "json.hpp"

namespace a2i {

namespace {

using nlohmann::json;

MatrixXd seeded_matrix(int rows, int cols, double scale, Rng& rng) {
    MatrixXd m(rows, cols);
    for (int c = 0; c < cols; ++c)
        for (int r = 0; r < rows; ++r) m(r, c) = scale * rng.normal();
    return m;
}

constexpr double kPi = 3.14159265358979323846;

// ---------------------------------------------------------------------------
// Audio encoder: Hann-windowed band log-energies per frame, pushed through a
// stack of frozen tanh layers with a per-layer skip from the band features.
// ---------------------------------------------------------------------------

class SpectralAudioEncoder final : public AudioEncoder {
public:
    SpectralAudioEncoder(const BackboneConfig& cfg, Rng rng) : cfg_(cfg) {
        layer_w_.reserve(cfg.depth);
        layer_skip_.reserve(cfg.depth);
        layer_b_.reserve(cfg.depth);
        const double in_scale   = 0.3 / std::sqrt(static_cast<double>(cfg.bands));
        const double rec_scale  = 1.0 / std::sqrt(static_cast<double>(cfg.hidden));
        const double skip_scale = 0.5 / std::sqrt(static_cast<double>(cfg.bands));
        for (int l = 0; l < cfg.depth; ++l) {
            if (l == 0) {
                layer_w_.push_back(seeded_matrix(cfg.hidden, cfg.bands, in_scale, rng));
            } else {
                layer_w_.push_back(seeded_matrix(cfg.hidden, cfg.hidden, rec_scale, rng));
            }
            layer_skip_.push_back(seeded_matrix(cfg.hidden, cfg.bands, skip_scale, rng));
            layer_b_.push_back(seeded_matrix(cfg.hidden, 1, 0.1, rng).col(0));
        }
    }

    SpectralAudioEncoder(const BackboneConfig& cfg, std::vector<MatrixXd> w,
                         std::vector<MatrixXd> skip, std::vector<VectorXd> b)
        : cfg_(cfg), layer_w_(std::move(w)), layer_skip_(std::move(skip)), layer_b_(std::move(b)) {}

    HiddenStateStack hidden_states(const AudioWaveform& wave) const override {
        wave.validate();
        if (wave.sample_rate != cfg_.sample_rate)
            fail("audio encoder: unsupported sample rate " + std::to_string(wave.sample_rate) +
                 " (expected " + std::to_string(cfg_.sample_rate) + "; resample on load)");
        const int n_frames = frame_count(wave.samples.size());
        if (n_frames < 1)
            fail("audio encoder: clip shorter than one analysis window");

        MatrixXd band_feats(cfg_.bands, n_frames);
        for (int f = 0; f < n_frames; ++f)
            band_feats.col(f) = frame_band_energies(wave, f * cfg_.hop);

        HiddenStateStack stack;
        stack.layers.reserve(cfg_.depth);
        MatrixXd state;
        for (int l = 0; l < cfg_.depth; ++l) {
            MatrixXd pre = l == 0 ? MatrixXd(layer_w_[0] * band_feats)
                                  : MatrixXd(layer_w_[l] * state);
            pre.noalias() += layer_skip_[l] * band_feats;
            pre.colwise() += layer_b_[l];
            state = pre.array().tanh().matrix();
            stack.layers.push_back(state.transpose());  // n_a x h
        }
        return stack;
    }

    int depth() const override { return cfg_.depth; }
    int hidden_width() const override { return cfg_.hidden; }
    int sample_rate() const override { return cfg_.sample_rate; }
    int frame_count(std::size_t n_samples) const override {
        return frame_count_for(n_samples, cfg_.window, cfg_.hop);
    }
    std::uint64_t weights_checksum() const override {
        std::uint64_t h = kFnvOffset;
        for (const auto& m : layer_w_) h = checksum(m, h);
        for (const auto& m : layer_skip_) h = checksum(m, h);
        for (const auto& v : layer_b_) h = checksum(v, h);
        return h;
    }

    const std::vector<MatrixXd>& layer_w() const { return layer_w_; }
    const std::vector<MatrixXd>& layer_skip() const { return layer_skip_; }
    const std::vector<VectorXd>& layer_b() const { return layer_b_; }

private:
    VectorXd frame_band_energies(const AudioWaveform& wave, int start) const {
        const int w = cfg_.window;
        const int bins = cfg_.dft_bins;
        VectorXd mag2(bins);
        for (int k = 0; k < bins; ++k) {
            const double omega = kPi * (k + 1) / (bins + 1);
            double re = 0.0, im = 0.0;
            for (int i = 0; i < w; ++i) {
                const double hann = 0.5 - 0.5 * std::cos(2.0 * kPi * i / (w - 1));
                const double s    = wave.samples[start + i] * hann;
                re += s * std::cos(omega * i);
                im -= s * std::sin(omega * i);
            }
            mag2[k] = re * re + im * im;
        }
        VectorXd bands(cfg_.bands);
        const int per_band = bins / cfg_.bands;
        for (int b = 0; b < cfg_.bands; ++b) {
            double acc = 0.0;
            for (int k = 0; k < per_band; ++k) acc += mag2[b * per_band + k];
            bands[b] = std::log(1e-6 + acc / per_band);
        }
        return bands;
    }

    BackboneConfig cfg_;
    std::vector<MatrixXd> layer_w_;
    std::vector<MatrixXd> layer_skip_;
    std::vector<VectorXd> layer_b_;
};

// ---------------------------------------------------------------------------
// Text encoder: whitespace/punctuation word tokenizer with a hashed content
// vocabulary, seeded embedding table, and begin/end specials.
// ---------------------------------------------------------------------------

class HashedVocabTextEncoder final : public TextEncoder {
public:
    HashedVocabTextEncoder(const BackboneConfig& cfg, Rng rng)
        : cfg_(cfg),
          table_(seeded_matrix(cfg.vocab + 2, cfg.d_text,
                               1.0 / std::sqrt(static_cast<double>(cfg.d_text)), rng)) {}

    HashedVocabTextEncoder(const BackboneConfig& cfg, MatrixXd table)
        : cfg_(cfg), table_(std::move(table)) {}

    std::vector<int> tokenize(const std::string& text) const override {
        std::vector<int> ids;
        std::string word;
        auto flush = [&] {
            if (!word.empty()) {
                ids.push_back(static_cast<int>(fnv1a64(word) % cfg_.vocab));
                word.clear();
            }
        };
        for (char ch : text) {
            if (std::isalnum(static_cast<unsigned char>(ch))) {
                word.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
            } else {
                flush();
            }
        }
        flush();
        return ids;
    }

    TextEmbeddingSequence encode(const std::vector<int>& content_ids) const override {
        if (content_ids.empty()) fail("text encoder: empty prompt");
        for (int id : content_ids)
            if (id < 0 || id >= cfg_.vocab)
                fail("text encoder: token id " + std::to_string(id) + " out of vocabulary");

        const int n = static_cast<int>(content_ids.size());
        TextEmbeddingSequence seq;
        seq.embeddings.resize(n + 2, cfg_.d_text);
        seq.token_ids.reserve(n + 2);
        seq.special_token_mask.reserve(n + 2);

        seq.embeddings.row(0) = table_.row(bos_id());
        seq.token_ids.push_back(bos_id());
        seq.special_token_mask.push_back(true);
        for (int i = 0; i < n; ++i) {
            seq.embeddings.row(i + 1) = table_.row(content_ids[i]);
            seq.token_ids.push_back(content_ids[i]);
            seq.special_token_mask.push_back(false);
        }
        seq.embeddings.row(n + 1) = table_.row(eos_id());
        seq.token_ids.push_back(eos_id());
        seq.special_token_mask.push_back(true);
        return seq;
    }

    int embed_dim() const override { return cfg_.d_text; }
    int vocab_size() const override { return cfg_.vocab; }
    std::uint64_t weights_checksum() const override { return checksum(table_); }

    int bos_id() const { return cfg_.vocab; }
    int eos_id() const { return cfg_.vocab + 1; }
    const MatrixXd& table() const { return table_; }

private:
    BackboneConfig cfg_;
    MatrixXd table_;
};

// ---------------------------------------------------------------------------
// Latent autoencoder: exact invertible linear map. RGB planes are centered
// and scaled into the first three latent channels; remaining channels are
// zero at encode time and ignored by decode.
// ---------------------------------------------------------------------------

class ScaledPlaneCodec final : public LatentCodec {
public:
    explicit ScaledPlaneCodec(const BackboneConfig& cfg) : cfg_(cfg) {
        if (cfg.latent_channels < 3) fail("codec: needs at least 3 latent channels");
        if (cfg.latent_hw != cfg.image_size)
            fail("codec: latent spatial size must match image size for the invertible map");
    }

    Latent encode(const Image& image) const override {
        if (image.width != cfg_.image_size || image.height != cfg_.image_size)
            fail("codec: image must be " + std::to_string(cfg_.image_size) + "x" +
                 std::to_string(cfg_.image_size) + " RGB, got " + std::to_string(image.width) +
                 "x" + std::to_string(image.height));
        if (image.rgb.size() != static_cast<std::size_t>(image.width) * image.height * 3)
            fail("codec: image channel count is not RGB");
        Latent z;
        z.channels = cfg_.latent_channels;
        z.height   = cfg_.latent_hw;
        z.width    = cfg_.latent_hw;
        z.scale    = cfg_.latent_scale;
        z.values   = VectorXd::Zero(z.size());
        const int hw = z.height * z.width;
        for (int c = 0; c < 3; ++c)
            for (int i = 0; i < hw; ++i)
                z.values[c * hw + i] = cfg_.latent_scale * (image.rgb[3 * i + c] - 0.5);
        return z;
    }

    Image decode(const Latent& latent) const override {
        if (latent.channels != cfg_.latent_channels || latent.height != cfg_.latent_hw ||
            latent.width != cfg_.latent_hw)
            fail("codec: latent shape mismatch");
        Image im;
        im.width  = cfg_.image_size;
        im.height = cfg_.image_size;
        im.rgb.resize(static_cast<std::size_t>(im.width) * im.height * 3);
        const int hw = latent.height * latent.width;
        for (int c = 0; c < 3; ++c)
            for (int i = 0; i < hw; ++i)
                im.rgb[3 * i + c] =
                    std::clamp(latent.values[c * hw + i] / cfg_.latent_scale + 0.5, 0.0, 1.0);
        return im;
    }

    int image_size() const override { return cfg_.image_size; }
    int latent_channels() const override { return cfg_.latent_channels; }
    int latent_height() const override { return cfg_.latent_hw; }
    int latent_width() const override { return cfg_.latent_hw; }
    std::uint64_t weights_checksum() const override {
        return fnv1a64(&cfg_.latent_scale, sizeof(cfg_.latent_scale));
    }

private:
    BackboneConfig cfg_;
};

// ---------------------------------------------------------------------------
// Denoiser: one cross-attention block reads a clean-latent estimate from the
// conditioning sequence (per-position queries, keys/values from cond rows),
// plus a small channel mix of x_t; the noise prediction is the
// schedule-scaled residual against that estimate.
// ---------------------------------------------------------------------------

class CrossAttentionDenoiser final : public Denoiser {
public:
    CrossAttentionDenoiser(const BackboneConfig& cfg, Rng rng) : cfg_(cfg) {
        const int n_pos = cfg.latent_hw * cfg.latent_hw;
        const int dk    = cfg.attn_dim;
        const double qs = 1.0 / std::sqrt(static_cast<double>(dk));
        MatrixXd shared = seeded_matrix(1, dk, 1.0, rng);
        pos_q_ = shared.replicate(n_pos, 1);
        pos_q_ += seeded_matrix(n_pos, dk, 0.1, rng);  // small per-position variation
        w_k_ = seeded_matrix(dk, cfg.d_text, qs, rng);
        w_v_ = seeded_matrix(dk, cfg.d_text, qs, rng);
        w_o_ = seeded_matrix(cfg.latent_channels, dk,
                             1.0 / std::sqrt(static_cast<double>(dk)), rng);
        b_o_ = seeded_matrix(cfg.latent_channels, 1, 0.05, rng).col(0);
        w_x_ = seeded_matrix(cfg.latent_channels, cfg.latent_channels,
                             0.3 / std::sqrt(static_cast<double>(cfg.latent_channels)), rng);
    }

    CrossAttentionDenoiser(const BackboneConfig& cfg, MatrixXd pos_q, MatrixXd wk, MatrixXd wv,
                           MatrixXd wo, VectorXd bo, MatrixXd wx)
        : cfg_(cfg), pos_q_(std::move(pos_q)), w_k_(std::move(wk)), w_v_(std::move(wv)),
          w_o_(std::move(wo)), b_o_(std::move(bo)), w_x_(std::move(wx)) {}

    int cond_width() const override { return cfg_.d_text; }

    Latent predict_noise(const Latent& noisy, int t, const MatrixXd& cond,
                         const NoiseSchedule& schedule) const override {
        check_inputs(noisy, t, cond, schedule);
        const MatrixXd x0 = clean_estimate(noisy, cond);  // n_pos x channels
        const double abar = schedule.alphas_cumprod[t];
        const double sa   = std::sqrt(abar);
        const double sb   = std::sqrt(1.0 - abar);

        Latent eps = noisy;
        const int hw = noisy.height * noisy.width;
        for (int c = 0; c < noisy.channels; ++c)
            for (int i = 0; i < hw; ++i)
                eps.values[c * hw + i] = (noisy.values[c * hw + i] - sa * x0(i, c)) / sb;
        return eps;
    }

    MatrixXd cond_backward(const Latent& noisy, int t, const MatrixXd& cond,
                           const NoiseSchedule& schedule,
                           const Latent& d_noise_pred) const override {
        check_inputs(noisy, t, cond, schedule);
        const double abar = schedule.alphas_cumprod[t];
        const double coef = -std::sqrt(abar) / std::sqrt(1.0 - abar);

        const int n_pos = noisy.height * noisy.width;
        const int hw    = n_pos;

        // recompute forward attention
        const MatrixXd keys   = cond * w_k_.transpose();   // R x dk
        const MatrixXd vals   = cond * w_v_.transpose();   // R x dk
        const double norm     = 1.0 / std::sqrt(static_cast<double>(cfg_.attn_dim));
        MatrixXd scores       = pos_q_ * keys.transpose() * norm;  // n_pos x R
        MatrixXd attn(scores.rows(), scores.cols());
        for (int i = 0; i < scores.rows(); ++i) {
            const double m = scores.row(i).maxCoeff();
            Eigen::RowVectorXd e = (scores.row(i).array() - m).exp();
            attn.row(i) = e / e.sum();
        }

        // d(loss)/d(x0 readout)
        MatrixXd d_x0(n_pos, noisy.channels);
        for (int c = 0; c < noisy.channels; ++c)
            for (int i = 0; i < hw; ++i)
                d_x0(i, c) = coef * d_noise_pred.values[c * hw + i];

        const MatrixXd d_ctx = d_x0 * w_o_;                 // n_pos x dk
        MatrixXd d_vals      = attn.transpose() * d_ctx;    // R x dk
        MatrixXd d_attn      = d_ctx * vals.transpose();    // n_pos x R
        MatrixXd d_scores(d_attn.rows(), d_attn.cols());
        for (int i = 0; i < d_attn.rows(); ++i) {
            const double dot = attn.row(i).dot(d_attn.row(i));
            d_scores.row(i)  = (attn.row(i).array() * (d_attn.row(i).array() - dot)).matrix();
        }
        MatrixXd d_keys = d_scores.transpose() * pos_q_ * norm;  // R x dk
        return d_keys * w_k_ + d_vals * w_v_;                    // R x d_text
    }

    std::uint64_t weights_checksum() const override {
        std::uint64_t h = checksum(pos_q_);
        h = checksum(w_k_, h);
        h = checksum(w_v_, h);
        h = checksum(w_o_, h);
        h = checksum(b_o_, h);
        h = checksum(w_x_, h);
        return h;
    }

    const MatrixXd& pos_q() const { return pos_q_; }
    const MatrixXd& w_k() const { return w_k_; }
    const MatrixXd& w_v() const { return w_v_; }
    const MatrixXd& w_o() const { return w_o_; }
    const VectorXd& b_o() const { return b_o_; }
    const MatrixXd& w_x() const { return w_x_; }

private:
    void check_inputs(const Latent& noisy, int t, const MatrixXd& cond,
                      const NoiseSchedule& schedule) const {
        if (cond.cols() != cfg_.d_text)
            fail("denoiser: conditioning width " + std::to_string(cond.cols()) +
                 " does not match expected " + std::to_string(cfg_.d_text));
        if (cond.rows() < 1) fail("denoiser: empty conditioning");
        if (t < 0 || t >= schedule.steps()) fail("denoiser: step index out of range");
        if (noisy.channels != cfg_.latent_channels || noisy.height != cfg_.latent_hw ||
            noisy.width != cfg_.latent_hw)
            fail("denoiser: latent shape mismatch");
    }

    // Clean-latent estimate: cross-attention readout of the conditioning
    // sequence plus a small channel mix of the noisy latent (n_pos x channels).
    MatrixXd clean_estimate(const Latent& noisy, const MatrixXd& cond) const {
        const MatrixXd keys = cond * w_k_.transpose();
        const MatrixXd vals = cond * w_v_.transpose();
        const double norm   = 1.0 / std::sqrt(static_cast<double>(cfg_.attn_dim));
        MatrixXd scores     = pos_q_ * keys.transpose() * norm;
        MatrixXd ctx(scores.rows(), vals.cols());
        for (int i = 0; i < scores.rows(); ++i) {
            const double m = scores.row(i).maxCoeff();
            Eigen::RowVectorXd e = (scores.row(i).array() - m).exp();
            ctx.row(i) = (e / e.sum()) * vals;
        }
        MatrixXd x0 = ctx * w_o_.transpose();
        x0.rowwise() += b_o_.transpose();
        const int hw = noisy.height * noisy.width;
        for (int c = 0; c < noisy.channels; ++c)
            for (int i = 0; i < hw; ++i)
                for (int c2 = 0; c2 < noisy.channels; ++c2)
                    x0(i, c) += w_x_(c, c2) * noisy.values[c2 * hw + i];
        return x0;
    }

    BackboneConfig cfg_;
    MatrixXd pos_q_;  // n_pos x dk
    MatrixXd w_k_;    // dk x d_text
    MatrixXd w_v_;    // dk x d_text
    MatrixXd w_o_;    // channels x dk
    VectorXd b_o_;    // channels
    MatrixXd w_x_;    // channels x channels, small x_t mix
};

// ---------------------------------------------------------------------------
// Serialization helpers
// ---------------------------------------------------------------------------

void write_matrix(std::ostream& os, const MatrixXd& m) {
    const std::uint32_t r = static_cast<std::uint32_t>(m.rows());
    const std::uint32_t c = static_cast<std::uint32_t>(m.cols());
    os.write(reinterpret_cast<const char*>(&r), 4);
    os.write(reinterpret_cast<const char*>(&c), 4);
    os.write(reinterpret_cast<const char*>(m.data()),
             static_cast<std::streamsize>(sizeof(double) * m.size()));
}

MatrixXd read_matrix(std::istream& is) {
    std::uint32_t r = 0, c = 0;
    is.read(reinterpret_cast<char*>(&r), 4);
    is.read(reinterpret_cast<char*>(&c), 4);
    if (!is) fail("backbone weights: truncated matrix header");
    MatrixXd m(r, c);
    is.read(reinterpret_cast<char*>(m.data()),
            static_cast<std::streamsize>(sizeof(double) * m.size()));
    if (!is) fail("backbone weights: truncated matrix data");
    return m;
}

json config_to_json(const BackboneConfig& c) {
    return json{{"sample_rate", c.sample_rate}, {"depth", c.depth},     {"hidden", c.hidden},
                {"window", c.window},           {"hop", c.hop},         {"dft_bins", c.dft_bins},
                {"bands", c.bands},             {"d_text", c.d_text},   {"vocab", c.vocab},
                {"image_size", c.image_size},   {"latent_channels", c.latent_channels},
                {"latent_hw", c.latent_hw},     {"latent_scale", c.latent_scale},
                {"attn_dim", c.attn_dim},       {"timesteps", c.timesteps},
                {"beta_start", c.beta_start},   {"beta_end", c.beta_end},
                {"seed", c.seed}};
}

BackboneConfig config_from_json(const json& j) {
    BackboneConfig c;
    c.sample_rate     = j.at("sample_rate");
    c.depth           = j.at("depth");
    c.hidden          = j.at("hidden");
    c.window          = j.at("window");
    c.hop             = j.at("hop");
    c.dft_bins        = j.at("dft_bins");
    c.bands           = j.at("bands");
    c.d_text          = j.at("d_text");
    c.vocab           = j.at("vocab");
    c.image_size      = j.at("image_size");
    c.latent_channels = j.at("latent_channels");
    c.latent_hw       = j.at("latent_hw");
    c.latent_scale    = j.at("latent_scale");
    c.attn_dim        = j.at("attn_dim");
    c.timesteps       = j.at("timesteps");
    c.beta_start      = j.at("beta_start");
    c.beta_end        = j.at("beta_end");
    c.seed            = j.at("seed");
    return c;
}

constexpr char kBackboneMagic[8] = {'A', '2', 'I', 'B', 'K', '0', '0', '1'};

}  // namespace

int frame_count_for(std::size_t n_samples, int window, int hop) {
    if (window <= 0 || hop <= 0) fail("framing: window and hop must be positive");
    if (n_samples < static_cast<std::size_t>(window)) return 0;
    return static_cast<int>((n_samples - window) / hop) + 1;
}

Latent add_noise(const Latent& latent, const Latent& epsilon, int t,
                 const NoiseSchedule& schedule) {
    latent.validate();
    if (!latent.same_shape(epsilon)) fail("add_noise: noise shape does not match latent");
    if (t < 0 || t >= schedule.steps()) fail("add_noise: step index out of range");
    const double abar = schedule.alphas_cumprod[t];
    Latent out         = latent;
    out.values         = std::sqrt(abar) * latent.values + std::sqrt(1.0 - abar) * epsilon.values;
    return out;
}

BackboneConfig reference_backbone_config() {
    BackboneConfig c;
    c.sample_rate = 16000;
    c.depth       = 12;
    c.hidden      = 768;
    c.window      = 720;  // (80000 - 720)/320 + 1 = 248 frames for a 5 s clip
    c.hop         = 320;
    c.d_text      = 768;
    c.vocab       = 49408;
    c.image_size  = 64;
    c.latent_hw   = 64;
    c.attn_dim    = 64;
    c.timesteps   = 1000;
    return c;
}

std::uint64_t Backbone::checksum() const {
    std::uint64_t h = audio->weights_checksum();
    h = fnv1a64(&h, sizeof(h));
    std::uint64_t parts[3] = {text->weights_checksum(), codec->weights_checksum(),
                              denoiser->weights_checksum()};
    h = fnv1a64(parts, sizeof(parts), h);
    return a2i::checksum(schedule.alphas_cumprod, h);
}

Backbone make_backbone_from_config(const BackboneConfig& cfg, const std::string& name) {
    Backbone b;
    b.name     = name;
    b.config   = cfg;
    b.audio    = std::make_unique<SpectralAudioEncoder>(cfg, rng_stream(cfg.seed, "audio_enc"));
    b.text     = std::make_unique<HashedVocabTextEncoder>(cfg, rng_stream(cfg.seed, "text_enc"));
    b.codec    = std::make_unique<ScaledPlaneCodec>(cfg);
    b.denoiser = std::make_unique<CrossAttentionDenoiser>(cfg, rng_stream(cfg.seed, "denoiser"));
    b.schedule = NoiseSchedule::linear_beta(cfg.timesteps, cfg.beta_start, cfg.beta_end);
    b.schedule.validate();
    return b;
}

Backbone make_toy_backbone() {
    return make_backbone_from_config(BackboneConfig{}, "toy");
}

void save_backbone(const Backbone& backbone, const std::filesystem::path& path) {
    const auto* audio = dynamic_cast<const SpectralAudioEncoder*>(backbone.audio.get());
    const auto* text  = dynamic_cast<const HashedVocabTextEncoder*>(backbone.text.get());
    const auto* den   = dynamic_cast<const CrossAttentionDenoiser*>(backbone.denoiser.get());
    if (!audio || !text || !den) fail("save_backbone: unsupported backbone implementation");

    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) fail("cannot write backbone weights: " + path.string());

    const std::string header =
        json{{"version", 1}, {"name", backbone.name}, {"config", config_to_json(backbone.config)}}
            .dump();
    os.write(kBackboneMagic, 8);
    const std::uint32_t header_len = static_cast<std::uint32_t>(header.size());
    os.write(reinterpret_cast<const char*>(&header_len), 4);
    os.write(header.data(), header_len);

    for (const auto& m : audio->layer_w()) write_matrix(os, m);
    for (const auto& m : audio->layer_skip()) write_matrix(os, m);
    for (const auto& v : audio->layer_b()) write_matrix(os, v);
    write_matrix(os, text->table());
    write_matrix(os, den->pos_q());
    write_matrix(os, den->w_k());
    write_matrix(os, den->w_v());
    write_matrix(os, den->w_o());
    write_matrix(os, den->b_o());
    write_matrix(os, den->w_x());
    if (!os) fail("short write on backbone weights: " + path.string());
}

Backbone load_backbone(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) fail("cannot open backbone weights: " + path.string());

    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kBackboneMagic, 8) != 0)
        fail("not a backbone weights file: " + path.string());
    std::uint32_t header_len = 0;
    is.read(reinterpret_cast<char*>(&header_len), 4);
    std::string header(header_len, '\0');
    is.read(header.data(), header_len);
    if (!is) fail("truncated backbone header: " + path.string());

    const json j = json::parse(header);
    if (j.at("version") != 1) fail("unsupported backbone weights version");
    const BackboneConfig cfg = config_from_json(j.at("config"));

    std::vector<MatrixXd> w, skip;
    std::vector<VectorXd> bias;
    for (int l = 0; l < cfg.depth; ++l) w.push_back(read_matrix(is));
    for (int l = 0; l < cfg.depth; ++l) skip.push_back(read_matrix(is));
    for (int l = 0; l < cfg.depth; ++l) bias.push_back(read_matrix(is).col(0));
    MatrixXd table = read_matrix(is);
    MatrixXd pos_q = read_matrix(is);
    MatrixXd wk    = read_matrix(is);
    MatrixXd wv    = read_matrix(is);
    MatrixXd wo    = read_matrix(is);
    VectorXd bo    = read_matrix(is).col(0);
    MatrixXd wx    = read_matrix(is);

    Backbone b;
    b.name   = j.at("name");
    b.config = cfg;
    b.audio  = std::make_unique<SpectralAudioEncoder>(cfg, std::move(w), std::move(skip),
                                                      std::move(bias));
    b.text   = std::make_unique<HashedVocabTextEncoder>(cfg, std::move(table));
    b.codec  = std::make_unique<ScaledPlaneCodec>(cfg);
    b.denoiser = std::make_unique<CrossAttentionDenoiser>(cfg, std::move(pos_q), std::move(wk),
                                                          std::move(wv), std::move(wo),
                                                          std::move(bo), std::move(wx));
    b.schedule = NoiseSchedule::linear_beta(cfg.timesteps, cfg.beta_start, cfg.beta_end);
    b.schedule.validate();
    return b;
}

Backbone make_backbone(const std::string& name, const std::string& weights_path) {
    if (name == "toy") return make_toy_backbone();
    if (name == "reference") {
        if (weights_path.empty())
            fail("reference backbone requires a weights path (config key backbone_weights)");
        Backbone b = load_backbone(weights_path);
        b.name     = "reference";
        return b;
    }
    fail("unknown backbone name: " + name + " (expected \"toy\" or \"reference\")");
}

}  // namespace a2i
