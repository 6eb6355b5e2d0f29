#pragma once

#include <array>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "a2i/backbones.hpp"
#include "a2i/plugins.hpp"

namespace a2i {

// Desk-scale stand-ins for the external models behind the plugin interfaces.
// A class label gets a deterministic signature: a palette color for its
// target images and a band-centered tone for its audio. The same assignment
// drives the synthetic datasets, the toy scorer/classifiers, and the toy
// embedding spaces, so the end-to-end pipeline is learnable and measurable.

struct ClassSignature {
    std::array<double, 3> color;  // rgb in [0, 1]
    double tone_hz;
};

// Deterministic signature assignment over a label set (sorted order defines
// the palette/tone index). At most 8 distinct classes.
class ToyClassMap {
public:
    explicit ToyClassMap(std::vector<std::string> labels);
    ClassSignature signature(const std::string& label) const;
    const std::vector<std::string>& labels() const { return labels_; }

private:
    std::vector<std::string> labels_;  // sorted, unique
};

std::array<double, 3> mean_rgb(const Image& image);

class ToyClipScorer final : public ClipScorer {
public:
    explicit ToyClipScorer(ToyClassMap map) : map_(std::move(map)) {}
    double score(const Image& image, const std::string& text) const override;

private:
    ToyClassMap map_;
};

class ToyImageClassifier final : public ImageClassifier {
public:
    explicit ToyImageClassifier(ToyClassMap map) : map_(std::move(map)) {}
    std::string classify(const Image& image) const override;

private:
    ToyClassMap map_;
};

class ToyAudioClassifier final : public AudioClassifier {
public:
    explicit ToyAudioClassifier(ToyClassMap map) : map_(std::move(map)) {}
    std::string classify(const AudioWaveform& wave) const override;

private:
    ToyClassMap map_;
};

// Text-embedding cosine between the two labels, rescaled to [0, 1].
class TextCosineLabelMatcher final : public LabelMatcher {
public:
    explicit TextCosineLabelMatcher(const TextEncoder& encoder) : encoder_(encoder) {}
    double similarity(const std::string& a, const std::string& b) const override;

private:
    const TextEncoder& encoder_;
};

class ToyCrossModalEmbedder final : public CrossModalEmbedder {
public:
    explicit ToyCrossModalEmbedder(ToyClassMap map) : map_(std::move(map)) {}
    VectorXd embed_image(const Image& image) const override;
    VectorXd embed_audio(const AudioWaveform& wave) const override;

private:
    ToyClassMap map_;
};

class ToyImageEmbedder final : public ImageEmbedder {
public:
    VectorXd embed(const Image& image) const override;
};

class ToyVisionFeatures final : public VisionFeatureExtractor {
public:
    VectorXd features(const Image& image) const override;
};

// Bundle wired from a manifest's label set (or an explicit one).
struct ToyPlugins {
    explicit ToyPlugins(std::vector<std::string> labels, const TextEncoder& text_encoder);
    ToyClassMap class_map;
    ToyClipScorer scorer;
    ToyImageClassifier image_classifier;
    ToyAudioClassifier audio_classifier;
    TextCosineLabelMatcher matcher;
    ToyCrossModalEmbedder cross_modal;
    ToyImageEmbedder image_embedder;
    ToyVisionFeatures vision_features;
};

// Discovers class labels from a {root}/{class}/... source tree.
std::vector<std::string> discover_labels(const std::filesystem::path& source_dir);

// ---------------------------------------------------------------------------
// Synthetic dataset: per clip a band-limited tone (with per-clip amplitude
// and phase jitter) and a handful of candidate frames where index 1 carries
// the exact class color. Clip ids listed in inconsistent_ids get frames of a
// mismatching class so the consistency filter drops them.
// ---------------------------------------------------------------------------

struct ToyDatasetSpec {
    std::vector<std::string> classes;
    int clips_per_class = 2;
    double duration_s   = 5.0;
    int sample_rate     = 16000;
    int image_size      = 8;
    int frames_per_clip = 5;
    std::uint64_t seed  = 7;
    std::vector<std::string> inconsistent_ids;  // "{class}_{k}" entries
};

void write_toy_dataset(const std::filesystem::path& root, const ToyDatasetSpec& spec);

}  // namespace a2i
