#include "a2i/training.hpp"

#include <chrono>
#include <cmath>
#include <fstream>

#include "a2i/png_io.hpp"
#include "a2i/wav_io.hpp"
#include "json.hpp"

namespace a2i {

namespace {

using nlohmann::json;

Latent latent_like(const Latent& shape) {
    Latent l  = shape;
    l.values  = VectorXd::Zero(shape.size());
    return l;
}

Latent draw_normal_latent(const Latent& shape, Rng& rng) {
    Latent l = latent_like(shape);
    for (int i = 0; i < l.values.size(); ++i) l.values[i] = rng.normal();
    return l;
}

// Shared forward machinery for loss evaluation and the training step.
struct SampleForward {
    EmbedderTrace trace;
    ConditioningSequence cond;
    Latent noisy;
    Latent noise_pred;
    double sq_err = 0.0;
};

SampleForward forward_sample(const MatrixXd& features, const Latent& latent,
                             const LdmDraw& draw, const EmbedderParams& params,
                             const Backbone& backbone, const std::string& prompt,
                             TokenPosition position) {
    SampleForward f;
    f.trace = embed_forward(features, params);
    AudioToken token{f.trace.token, f.trace.weights};
    f.cond       = build_conditioning(token, prompt, *backbone.text, position);
    f.noisy      = add_noise(latent, draw.epsilon, draw.t, backbone.schedule);
    f.noise_pred = backbone.denoiser->predict_noise(f.noisy, draw.t, f.cond.embeddings,
                                                    backbone.schedule);
    f.sq_err     = (f.noise_pred.values - draw.epsilon.values).squaredNorm();
    return f;
}

double wallclock_s() {
    return std::chrono::duration<double>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
}

}  // namespace

void TrainingBatch::validate() const {
    const std::size_t n = latents.size();
    if (n == 0) fail("training batch: empty");
    if (waveforms.size() != n || labels.size() != n || ids.size() != n ||
        features.size() != n || label_embeddings.size() != n)
        fail("training batch: field lengths differ");
}

void TrainConfig::validate() const {
    if (steps < 0) fail("config: steps must be >= 0");
    if (lr < 0) fail("config: learning rate must be >= 0");
    if (batch_size < 1) fail("config: batch_size must be >= 1");
    if (lambda_l1 < 0) fail("config: lambda_l1 must be >= 0");
    if (lambda_cl < 0) fail("config: lambda_cl must be >= 0");
    if (checkpoint_every < 1) fail("config: checkpoint_every must be >= 1");
    if (layer_indices.empty()) fail("config: layer_indices must be nonempty");
}

void LossTerms::validate() const {
    const double expected = ldm + lambda_l1 * l1 + (cl ? lambda_cl * *cl : 0.0);
    if (!std::isfinite(total) || std::abs(total - expected) > 1e-9 * std::max(1.0, std::abs(total)))
        fail("loss terms: total does not equal the weighted component sum");
}

std::vector<LdmDraw> draw_ldm_noise(int batch_size, const Latent& shape,
                                    const NoiseSchedule& schedule, Rng& rng) {
    std::vector<LdmDraw> draws;
    draws.reserve(batch_size);
    for (int i = 0; i < batch_size; ++i) {
        LdmDraw d;
        d.t       = static_cast<int>(rng.uniform_int(schedule.steps()));
        d.epsilon = draw_normal_latent(shape, rng);
        draws.push_back(std::move(d));
    }
    return draws;
}

double ldm_loss_with_draws(const TrainingBatch& batch, const std::vector<AudioToken>& tokens,
                           const Backbone& backbone, const std::vector<LdmDraw>& draws,
                           const std::string& prompt, TokenPosition position) {
    batch.validate();
    if (static_cast<int>(tokens.size()) != batch.size() ||
        static_cast<int>(draws.size()) != batch.size())
        fail("ldm_loss: tokens/draws do not match batch size");

    double acc = 0.0;
    for (int i = 0; i < batch.size(); ++i) {
        const ConditioningSequence cond =
            build_conditioning(tokens[i], prompt, *backbone.text, position);
        const Latent noisy = add_noise(batch.latents[i], draws[i].epsilon, draws[i].t,
                                       backbone.schedule);
        const Latent pred  = backbone.denoiser->predict_noise(noisy, draws[i].t, cond.embeddings,
                                                              backbone.schedule);
        acc += (pred.values - draws[i].epsilon.values).squaredNorm() /
               static_cast<double>(batch.latents[i].size());
    }
    return acc / batch.size();
}

double ldm_loss(const TrainingBatch& batch, const std::vector<AudioToken>& tokens,
                const Backbone& backbone, const NoiseSchedule& schedule, Rng& rng,
                const std::string& prompt, TokenPosition position) {
    batch.validate();
    const auto draws = draw_ldm_noise(batch.size(), batch.latents[0], schedule, rng);
    return ldm_loss_with_draws(batch, tokens, backbone, draws, prompt, position);
}

double l1_regularizer(const VectorXd& token) {
    return token.cwiseAbs().sum();
}

VectorXd l1_gradient(const VectorXd& token) {
    VectorXd g(token.size());
    for (int i = 0; i < token.size(); ++i)
        g[i] = token[i] > 0.0 ? 1.0 : (token[i] < 0.0 ? -1.0 : 0.0);
    return g;
}

double classification_loss(const VectorXd& token, const LabelEmbedding& label) {
    const double nt = token.norm();
    const double nl = label.values.norm();
    if (nt == 0.0 || nl == 0.0) {
        log_warn("classification loss: zero-norm token or label ('" + label.label_text +
                 "'), treating cosine as 0");
        return 1.0;
    }
    const double cos = std::clamp(token.dot(label.values) / (nt * nl), -1.0, 1.0);
    return (1.0 - cos) * (1.0 - cos);
}

VectorXd classification_loss_gradient(const VectorXd& token, const LabelEmbedding& label) {
    const double nt = token.norm();
    const double nl = label.values.norm();
    if (nt == 0.0 || nl == 0.0) return VectorXd::Zero(token.size());
    const double cos = token.dot(label.values) / (nt * nl);
    // d/de (1-cos)^2 = -2 (1-cos) * dcos/de
    const VectorXd dcos = label.values / (nt * nl) - token * (cos / (nt * nt));
    return -2.0 * (1.0 - cos) * dcos;
}

LossTerms total_loss(const TrainingBatch& batch, const TrainState& state,
                     const TrainConfig& config, const Backbone& backbone) {
    batch.validate();
    config.validate();

    std::vector<AudioToken> tokens;
    tokens.reserve(batch.size());
    for (int i = 0; i < batch.size(); ++i) {
        const EmbedderTrace t = embed_forward(batch.features[i], state.params);
        tokens.push_back(AudioToken{t.token, t.weights});
    }

    LossTerms terms;
    terms.lambda_l1 = config.lambda_l1;
    terms.lambda_cl = config.use_cl ? config.lambda_cl : 0.0;

    std::vector<LdmDraw> draws;
    draws.reserve(batch.size());
    for (int i = 0; i < batch.size(); ++i) {
        Rng rng = rng_stream(state.seed, "ldm_draw", static_cast<std::uint64_t>(state.step), i);
        auto d  = draw_ldm_noise(1, batch.latents[i], backbone.schedule, rng);
        draws.push_back(std::move(d[0]));
    }
    terms.ldm = ldm_loss_with_draws(batch, tokens, backbone, draws, config.prompt,
                                    config.token_position);

    double l1_acc = 0.0, cl_acc = 0.0;
    for (int i = 0; i < batch.size(); ++i) {
        l1_acc += l1_regularizer(tokens[i].values);
        if (config.use_cl)
            cl_acc += classification_loss(tokens[i].values, batch.label_embeddings[i]);
    }
    terms.l1 = l1_acc / batch.size();
    if (config.use_cl) terms.cl = cl_acc / batch.size();

    terms.total = terms.ldm + terms.lambda_l1 * terms.l1 + (terms.cl ? terms.lambda_cl * *terms.cl : 0.0);
    return terms;
}

StepResult train_step(TrainState& state, const TrainingBatch& batch, const TrainConfig& config,
                      const Backbone& backbone) {
    batch.validate();
    config.validate();

    const int B = batch.size();
    EmbedderGrads grads = EmbedderGrads::zero(state.params);

    LossTerms terms;
    terms.lambda_l1 = config.lambda_l1;
    terms.lambda_cl = config.use_cl ? config.lambda_cl : 0.0;

    std::vector<AudioToken> tokens;
    tokens.reserve(B);

    double ldm_acc = 0.0, l1_acc = 0.0, cl_acc = 0.0;
    for (int i = 0; i < B; ++i) {
        Rng rng = rng_stream(state.seed, "ldm_draw", static_cast<std::uint64_t>(state.step), i);
        const auto draws = draw_ldm_noise(1, batch.latents[i], backbone.schedule, rng);
        const LdmDraw& draw = draws[0];

        const SampleForward f = forward_sample(batch.features[i], batch.latents[i], draw,
                                               state.params, backbone, config.prompt,
                                               config.token_position);
        const int latent_dim = batch.latents[i].size();
        ldm_acc += f.sq_err / latent_dim;

        // d(ldm)/d(noise_pred), batch-mean of per-element squared error
        Latent d_pred   = f.noise_pred;
        d_pred.values   = 2.0 / (static_cast<double>(B) * latent_dim) *
                        (f.noise_pred.values - draw.epsilon.values);
        const MatrixXd d_cond = backbone.denoiser->cond_backward(
            f.noisy, draw.t, f.cond.embeddings, backbone.schedule, d_pred);

        // only the audio-token row reaches trainable parameters
        VectorXd d_token = d_cond.row(f.cond.audio_token_position).transpose();

        l1_acc += l1_regularizer(f.trace.token);
        d_token += (config.lambda_l1 / B) * l1_gradient(f.trace.token);

        if (config.use_cl) {
            cl_acc += classification_loss(f.trace.token, batch.label_embeddings[i]);
            d_token += (config.lambda_cl / B) *
                       classification_loss_gradient(f.trace.token, batch.label_embeddings[i]);
        }

        embed_backward(f.trace, state.params, d_token, grads);
        tokens.push_back(AudioToken{f.trace.token, f.trace.weights});
    }

    terms.ldm = ldm_acc / B;
    terms.l1  = l1_acc / B;
    if (config.use_cl) terms.cl = cl_acc / B;
    terms.total =
        terms.ldm + terms.lambda_l1 * terms.l1 + (terms.cl ? terms.lambda_cl * *terms.cl : 0.0);

    if (!std::isfinite(terms.total)) {
        std::string ids;
        for (const auto& id : batch.ids) ids += id + " ";
        fail("train_step: non-finite loss at step " + std::to_string(state.step) +
             " (batch: " + ids + ")");
    }

    // Adam update over the embedder parameters only
    const double t  = static_cast<double>(state.step + 1);
    const double b1 = config.adam_beta1, b2 = config.adam_beta2;
    const double bias1 = 1.0 - std::pow(b1, t);
    const double bias2 = 1.0 - std::pow(b2, t);
    auto update = [&](auto& m_moments, auto& v_moments, auto& param, const auto& grad) {
        m_moments = b1 * m_moments + (1.0 - b1) * grad;
        v_moments = b2 * v_moments + (1.0 - b2) * grad.cwiseProduct(grad);
        param -= (config.lr / bias1) * m_moments.cwiseQuotient(
                     ((v_moments / bias2).cwiseSqrt().array() + config.adam_eps).matrix());
    };
    update(state.adam_m.w1, state.adam_v.w1, state.params.w1, grads.w1);
    update(state.adam_m.b1, state.adam_v.b1, state.params.b1, grads.b1);
    update(state.adam_m.w2, state.adam_v.w2, state.params.w2, grads.w2);
    update(state.adam_m.b2, state.adam_v.b2, state.params.b2, grads.b2);
    update(state.adam_m.pool_w, state.adam_v.pool_w, state.params.pool_w, grads.pool_w);
    update(state.adam_m.pool_v, state.adam_v.pool_v, state.params.pool_v, grads.pool_v);

    ++state.step;
    return StepResult{terms, std::move(tokens)};
}

TrainingBatch TrainingDataset::gather(const std::vector<int>& indices) const {
    TrainingBatch b;
    for (int idx : indices) {
        if (idx < 0 || idx >= size()) fail("dataset: batch index out of range");
        b.ids.push_back(ids[idx]);
        b.labels.push_back(labels[idx]);
        b.waveforms.push_back(waveforms[idx]);
        b.features.push_back(features[idx]);
        b.latents.push_back(latents[idx]);
        b.label_embeddings.push_back(label_embeddings[idx]);
    }
    return b;
}

TrainingDataset TrainingDataset::load(const Manifest& manifest, const Backbone& backbone,
                                      const std::vector<int>& layer_indices) {
    if (manifest.records.empty()) fail("training dataset: manifest has no records");
    TrainingDataset ds;
    for (const auto& rec : manifest.records) {
        try {
            AudioWaveform wave = load_audio(rec.audio_path, backbone.audio->sample_rate());
            const HiddenStateStack stack = backbone.audio->hidden_states(wave);
            const AudioFeatures feats    = extract_features(stack, layer_indices);
            const Image frame            = read_png(rec.frame_path);
            ds.latents.push_back(backbone.codec->encode(frame));
            ds.features.push_back(feats.values);
            ds.waveforms.push_back(std::move(wave));
            ds.labels.push_back(rec.label);
            ds.label_embeddings.push_back(encode_label(rec.label, *backbone.text));
            ds.ids.push_back(rec.id);
        } catch (const std::exception& e) {
            fail("failed to load sample '" + rec.id + "': " + e.what());
        }
    }
    return ds;
}

std::filesystem::path fit(const Manifest& manifest, const TrainConfig& config,
                          const Backbone& backbone, const TrainObserver& observer,
                          const std::filesystem::path& resume_from) {
    config.validate();
    std::filesystem::create_directories(config.output_dir);

    const TrainingDataset dataset =
        TrainingDataset::load(manifest, backbone, config.layer_indices);

    const int d_feat =
        backbone.audio->hidden_width() * static_cast<int>(config.layer_indices.size());
    EmbedderConfig embed_cfg;
    embed_cfg.d_feat        = d_feat;
    embed_cfg.d_token       = backbone.text->embed_dim();
    embed_cfg.layer_indices = config.layer_indices;

    TrainState state;
    state.seed = config.seed;
    if (!resume_from.empty()) {
        Checkpoint ckpt = load_checkpoint(resume_from);
        if (!ckpt.has_optimizer_state)
            fail("cannot resume: checkpoint has no optimizer state: " + resume_from.string());
        if (ckpt.config.d_feat != d_feat || ckpt.config.d_token != embed_cfg.d_token)
            fail("cannot resume: checkpoint shapes do not match backbone");
        state.step   = ckpt.step;
        state.params = std::move(ckpt.params);
        state.adam_m = std::move(ckpt.adam_m);
        state.adam_v = std::move(ckpt.adam_v);
    } else {
        Rng init_rng = rng_stream(config.seed, "embedder_init");
        state.params = EmbedderParams::init(embed_cfg, init_rng);
        state.adam_m = EmbedderGrads::zero(state.params);
        state.adam_v = EmbedderGrads::zero(state.params);
    }

    log_info("trainable parameters: " + std::to_string(state.params.count()));

    std::ofstream loss_log(config.output_dir / "losses.jsonl",
                           resume_from.empty() ? std::ios::trunc : std::ios::app);
    std::ofstream full_log(config.output_dir / "train_log.jsonl",
                           resume_from.empty() ? std::ios::trunc : std::ios::app);
    if (!loss_log || !full_log) fail("cannot open training logs under " +
                                     config.output_dir.string());

    const std::uint64_t frozen_before = backbone.checksum();

    auto save_state = [&](const std::filesystem::path& path) {
        Checkpoint ckpt;
        ckpt.config              = embed_cfg;
        ckpt.params              = state.params;
        ckpt.config_fingerprint  = config.config_fingerprint;
        ckpt.step                = state.step;
        ckpt.has_optimizer_state = true;
        ckpt.adam_m              = state.adam_m;
        ckpt.adam_v              = state.adam_v;
        save_checkpoint(ckpt, path);
    };

    while (state.step < config.steps) {
        Rng batch_rng = rng_stream(config.seed, "batch",
                                   static_cast<std::uint64_t>(state.step));
        std::vector<int> indices(config.batch_size);
        for (auto& idx : indices)
            idx = static_cast<int>(batch_rng.uniform_int(dataset.size()));
        const TrainingBatch batch = dataset.gather(indices);

        const StepResult result = train_step(state, batch, config, backbone);

        json rec{{"step", state.step},
                 {"ldm", result.terms.ldm},
                 {"l1", result.terms.l1},
                 {"total", result.terms.total}};
        if (result.terms.cl) rec["cl"] = *result.terms.cl;
        loss_log << rec.dump() << "\n";
        rec["wallclock"] = wallclock_s();
        full_log << rec.dump() << "\n";

        if (observer) observer(state, result.terms, result.tokens, batch);

        if (state.step % config.checkpoint_every == 0 && state.step < config.steps) {
            char name[48];
            std::snprintf(name, sizeof(name), "checkpoint_%08lld.a2ic",
                          static_cast<long long>(state.step));
            save_state(config.output_dir / name);
        }
    }

    if (backbone.checksum() != frozen_before)
        fail("backbone parameters changed during training; freezing contract violated");

    const std::filesystem::path final_path = config.output_dir / "checkpoint_final.a2ic";
    save_state(final_path);
    return final_path;
}

}  // namespace a2i
