#pragma once

#include <string>

#include "a2i/types.hpp"

namespace a2i {

// Pluggable external-model surfaces. The toy world implements all of them;
// full-scale counterparts (CLIP-like scorers, inception-style feature nets,
// audio taggers) plug in behind the same contracts.

// (image, text) similarity in [-1, 1].
class ClipScorer {
public:
    virtual ~ClipScorer() = default;
    virtual double score(const Image& image, const std::string& text) const = 0;
};

class ImageClassifier {
public:
    virtual ~ImageClassifier() = default;
    virtual std::string classify(const Image& image) const = 0;
};

class AudioClassifier {
public:
    virtual ~AudioClassifier() = default;
    virtual std::string classify(const AudioWaveform& wave) const = 0;
};

// Label-to-label agreement in [0, 1].
class LabelMatcher {
public:
    virtual ~LabelMatcher() = default;
    virtual double similarity(const std::string& a, const std::string& b) const = 0;
};

// Shared audio/image embedding space (Wav2Clip-style) for the AIS metric.
class CrossModalEmbedder {
public:
    virtual ~CrossModalEmbedder() = default;
    virtual VectorXd embed_image(const Image& image) const = 0;
    virtual VectorXd embed_audio(const AudioWaveform& wave) const = 0;
};

// Image embedding space (CLIP-style) for the IIS metric.
class ImageEmbedder {
public:
    virtual ~ImageEmbedder() = default;
    virtual VectorXd embed(const Image& image) const = 0;
};

// Feature extractor backing FID.
class VisionFeatureExtractor {
public:
    virtual ~VisionFeatureExtractor() = default;
    virtual VectorXd features(const Image& image) const = 0;
};

}  // namespace a2i
