#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "a2i/plugins.hpp"
#include "a2i/rng.hpp"
#include "a2i/types.hpp"

namespace a2i {

struct SampleRecord {
    std::string id;
    std::string audio_path;
    std::string frame_path;
    std::string label;
    double clip_score  = 0.0;
    double duration_s  = 0.0;
    int sample_rate    = 0;
    bool padded        = false;
};

struct Manifest {
    std::vector<SampleRecord> records;
    std::string split = "train";
    std::string provenance;
};

// Line-delimited records, one JSON object per line; split/provenance and
// build statistics live in a sibling .meta.json file.
void save_manifest(const Manifest& manifest, const std::filesystem::path& path,
                   const std::map<std::string, std::int64_t>& stats = {});
Manifest load_manifest(const std::filesystem::path& path);

struct CropResult {
    AudioWaveform waveform;
    bool padded        = false;
    std::size_t offset = 0;  // start sample of the crop in the source
};

// Contiguous crop of exactly duration_s * sample_rate samples, start drawn
// uniformly over valid offsets; shorter inputs are zero-padded at the end.
CropResult crop_audio(const AudioWaveform& wave, double duration_s, Rng& rng);

// Argmax of scorer(image, label); ties break to the lowest index.
struct FrameChoice {
    int index        = 0;
    double clip_score = 0.0;
};
FrameChoice select_frame(const std::vector<Image>& frames, const std::string& label,
                         const ClipScorer& scorer);

struct FilterDecision {
    bool keep = false;
    std::string image_label;
    std::string audio_label;
    double image_score = 0.0;
    double audio_score = 0.0;
    std::string reason;  // set when dropped
};

// Keep iff both classifier outputs agree with the sample label under the
// matcher rule (score >= threshold each).
FilterDecision filter_sample(const Image& frame, const AudioWaveform& audio,
                             const std::string& label, const ImageClassifier& image_classifier,
                             const AudioClassifier& audio_classifier, const LabelMatcher& matcher,
                             double threshold);

struct DatapipeConfig {
    double crop_seconds     = 5.0;
    double filter_threshold = 0.75;
    std::uint64_t seed      = 0;
    std::string split       = "train";
    std::filesystem::path output_dir;  // cropped clips land in output_dir/clips
};

struct ManifestBuildResult {
    Manifest manifest;
    std::map<std::string, std::int64_t> stats;  // kept / dropped-by-reason counts
};

// Source layout: {root}/{class_label}/{clip_id}.wav with candidate frames in
// {root}/{class_label}/{clip_id}.frames/*.png. Underscores in class
// directory names map to spaces in labels.
ManifestBuildResult build_manifest(const std::filesystem::path& source_dir,
                                   const DatapipeConfig& config, const ClipScorer& scorer,
                                   const ImageClassifier& image_classifier,
                                   const AudioClassifier& audio_classifier,
                                   const LabelMatcher& matcher);

}  // namespace a2i
