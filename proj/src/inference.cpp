#include "a2i/inference.hpp"

#include <cmath>
#include <fstream>

#include "a2i/rng.hpp"
#include "a2i/wav_io.hpp"
#include "json.hpp"

namespace a2i {

namespace {

using nlohmann::json;

// Evenly strided descending timestep subsequence covering [0, T-1].
std::vector<int> timestep_sequence(int num_steps, int T) {
    std::vector<int> ts;
    ts.reserve(num_steps);
    if (num_steps == 1) {
        ts.push_back(T - 1);
        return ts;
    }
    for (int k = 0; k < num_steps; ++k) {
        const int t = static_cast<int>(
            std::llround(static_cast<double>(T - 1) * (num_steps - 1 - k) / (num_steps - 1)));
        if (ts.empty() || t < ts.back()) ts.push_back(t);
    }
    return ts;
}

}  // namespace

void GenerationRequest::validate(int schedule_steps) const {
    waveform.validate();
    if (num_steps < 1) fail("generation: num_steps must be >= 1");
    if (num_steps > schedule_steps)
        fail("generation: num_steps exceeds the schedule length " +
             std::to_string(schedule_steps));
    if (!std::isfinite(guidance_scale) || guidance_scale < 0)
        fail("generation: guidance_scale must be finite and >= 0");
    if (num_images < 1) fail("generation: num_images must be >= 1");
}

Latent sample_reverse(const Latent& latent_noise, const MatrixXd& cond, int num_steps,
                      const NoiseSchedule& schedule, const Denoiser& denoiser,
                      double guidance_scale, const MatrixXd* uncond) {
    latent_noise.validate();
    if (num_steps < 1 || num_steps > schedule.steps())
        fail("sample_reverse: step count does not fit the schedule");
    if (guidance_scale != 0.0 && uncond == nullptr)
        fail("sample_reverse: guidance requested without an unconditional sequence");

    const std::vector<int> ts = timestep_sequence(num_steps, schedule.steps());
    Latent x = latent_noise;
    for (std::size_t k = 0; k < ts.size(); ++k) {
        const int t       = ts[k];
        const double abar = schedule.alphas_cumprod[t];

        Latent eps = denoiser.predict_noise(x, t, cond, schedule);
        if (guidance_scale != 0.0) {
            const Latent eps_u = denoiser.predict_noise(x, t, *uncond, schedule);
            eps.values += guidance_scale * (eps.values - eps_u.values);
        }

        // project to the clean-latent estimate, then re-noise to the next step
        const VectorXd x0 =
            (x.values - std::sqrt(1.0 - abar) * eps.values) / std::sqrt(abar);
        const double abar_prev =
            k + 1 < ts.size() ? schedule.alphas_cumprod[ts[k + 1]] : 1.0;
        x.values = std::sqrt(abar_prev) * x0 + std::sqrt(1.0 - abar_prev) * eps.values;
    }
    return x;
}

std::vector<Image> generate(const GenerationRequest& request, const Checkpoint& checkpoint,
                            const Backbone& backbone, const std::string& prompt,
                            TokenPosition position) {
    request.validate(backbone.schedule.steps());

    const int d_feat = backbone.audio->hidden_width() *
                       static_cast<int>(checkpoint.config.layer_indices.size());
    if (checkpoint.config.d_feat != d_feat ||
        checkpoint.config.d_token != backbone.text->embed_dim())
        fail("checkpoint is not shape-compatible with the backbone (d_feat " +
             std::to_string(checkpoint.config.d_feat) + " vs " + std::to_string(d_feat) +
             ", d_token " + std::to_string(checkpoint.config.d_token) + " vs " +
             std::to_string(backbone.text->embed_dim()) + ")");

    // generation accepts any rate; the encoder contract wants its own
    const AudioWaveform wave = resample(request.waveform, backbone.audio->sample_rate());

    const AudioToken token = embed_audio(wave, *backbone.audio, checkpoint.params,
                                         checkpoint.config.layer_indices);
    const ConditioningSequence cond =
        build_conditioning(token, prompt, *backbone.text, position);

    // unconditional branch: the prompt without the audio token
    MatrixXd uncond;
    if (request.guidance_scale != 0.0) {
        const TextEmbeddingSequence seq =
            backbone.text->encode(backbone.text->tokenize(prompt));
        uncond = seq.embeddings;
    }

    Latent shape;
    shape.channels = backbone.codec->latent_channels();
    shape.height   = backbone.codec->latent_height();
    shape.width    = backbone.codec->latent_width();
    shape.values   = VectorXd::Zero(shape.size());

    std::vector<Image> images;
    images.reserve(request.num_images);
    for (int k = 0; k < request.num_images; ++k) {
        Rng rng  = rng_stream(request.seed, "gen_noise", k);
        Latent x = shape;
        for (int i = 0; i < x.values.size(); ++i) x.values[i] = rng.normal();
        const Latent out = sample_reverse(x, cond.embeddings, request.num_steps,
                                          backbone.schedule, *backbone.denoiser,
                                          request.guidance_scale,
                                          request.guidance_scale != 0.0 ? &uncond : nullptr);
        images.push_back(backbone.codec->decode(out));
    }
    return images;
}

void write_generation_sidecar(const std::filesystem::path& png_path,
                              const GenerationMetadata& meta) {
    std::filesystem::path p = png_path;
    p.replace_extension(".json");
    const json j{{"sample_id", meta.sample_id},
                 {"seed", meta.seed},
                 {"image_index", meta.image_index},
                 {"num_steps", meta.num_steps},
                 {"guidance_scale", meta.guidance_scale},
                 {"checkpoint_fingerprint", meta.checkpoint_fingerprint},
                 {"image", png_path.filename().string()}};
    std::ofstream os(p, std::ios::binary | std::ios::trunc);
    if (!os) fail("cannot write generation sidecar: " + p.string());
    os << j.dump(2) << "\n";
}

GenerationMetadata read_generation_sidecar(const std::filesystem::path& json_path) {
    std::ifstream is(json_path, std::ios::binary);
    if (!is) fail("cannot open generation sidecar: " + json_path.string());
    const json j = json::parse(is);
    GenerationMetadata m;
    m.sample_id              = j.at("sample_id");
    m.seed                   = j.at("seed");
    m.image_index            = j.at("image_index");
    m.num_steps              = j.at("num_steps");
    m.guidance_scale         = j.at("guidance_scale");
    m.checkpoint_fingerprint = j.at("checkpoint_fingerprint");
    return m;
}

}  // namespace a2i
