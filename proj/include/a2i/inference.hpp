#pragma once

#include <filesystem>
#include <vector>

#include "a2i/backbones.hpp"
#include "a2i/conditioning.hpp"
#include "a2i/embedder.hpp"

namespace a2i {

struct GenerationRequest {
    AudioWaveform waveform;
    std::uint64_t seed   = 0;
    int num_steps        = 50;
    double guidance_scale = 0.0;  // 0 disables classifier-free guidance
    int num_images       = 1;

    void validate(int schedule_steps) const;
};

// Deterministic reverse sampling: iterative noise prediction and clean-latent
// projection over an evenly strided timestep subsequence; no stochastic noise
// injection. When guidance_scale is 0 the unconditional branch is never
// evaluated.
Latent sample_reverse(const Latent& latent_noise, const MatrixXd& cond, int num_steps,
                      const NoiseSchedule& schedule, const Denoiser& denoiser,
                      double guidance_scale = 0.0, const MatrixXd* uncond = nullptr);

// Audio to images: embed, condition, sample, decode. Deterministic given
// (seed, request, checkpoint, backbone); image k uses its own noise stream.
std::vector<Image> generate(const GenerationRequest& request, const Checkpoint& checkpoint,
                            const Backbone& backbone, const std::string& prompt,
                            TokenPosition position = TokenPosition::kAfterPrompt);

// Sidecar record written next to every generated PNG.
struct GenerationMetadata {
    std::string sample_id;
    std::uint64_t seed = 0;
    int image_index    = 0;
    int num_steps      = 0;
    double guidance_scale = 0.0;
    std::string checkpoint_fingerprint;
};

void write_generation_sidecar(const std::filesystem::path& png_path,
                              const GenerationMetadata& meta);
GenerationMetadata read_generation_sidecar(const std::filesystem::path& json_path);

}  // namespace a2i
