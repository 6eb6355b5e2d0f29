#pragma once

#include <filesystem>

#include "a2i/types.hpp"

namespace a2i {

// Reads a mono PCM WAV file (16-bit integer or 32-bit float samples).
AudioWaveform read_wav(const std::filesystem::path& path);

// Writes 16-bit PCM. Samples are clamped to [-1, 1].
void write_wav(const std::filesystem::path& path, const AudioWaveform& wave);

// Linear-interpolation resampler.
AudioWaveform resample(const AudioWaveform& wave, int target_rate);

// read_wav + resample to the encoder's declared rate.
AudioWaveform load_audio(const std::filesystem::path& path, int target_rate);

}  // namespace a2i
