#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "a2i/common.hpp"

namespace a2i {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Mono audio, amplitudes nominally in [-1, 1].
struct AudioWaveform {
    std::vector<double> samples;
    int sample_rate = 0;

    double duration_s() const {
        return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
    }
    void validate() const {
        if (samples.empty()) fail("waveform: empty");
        if (sample_rate <= 0) fail("waveform: sample_rate must be positive");
    }
};

// 8-bit-representable RGB image held as doubles in [0, 1], interleaved
// row-major (r, g, b per pixel).
struct Image {
    int width  = 0;
    int height = 0;
    std::vector<double> rgb;

    static Image solid(int w, int h, double r, double g, double b) {
        Image im;
        im.width  = w;
        im.height = h;
        im.rgb.resize(static_cast<std::size_t>(w) * h * 3);
        for (int i = 0; i < w * h; ++i) {
            im.rgb[3 * i + 0] = r;
            im.rgb[3 * i + 1] = g;
            im.rgb[3 * i + 2] = b;
        }
        return im;
    }
    double& at(int x, int y, int c) { return rgb[3 * (static_cast<std::size_t>(y) * width + x) + c]; }
    double at(int x, int y, int c) const { return rgb[3 * (static_cast<std::size_t>(y) * width + x) + c]; }
    bool empty() const { return rgb.empty(); }
};

// Per-layer encoder outputs; every layer is n_a x h (time x hidden width).
struct HiddenStateStack {
    std::vector<MatrixXd> layers;

    int layer_count() const { return static_cast<int>(layers.size()); }
    int frames() const { return layers.empty() ? 0 : static_cast<int>(layers[0].rows()); }
    int hidden_width() const { return layers.empty() ? 0 : static_cast<int>(layers[0].cols()); }

    void validate() const {
        if (layers.empty()) fail("hidden state stack: no layers");
        for (const auto& l : layers) {
            if (l.rows() != layers[0].rows() || l.cols() != layers[0].cols())
                fail("hidden state stack: layer shape mismatch");
        }
    }
};

// Autoencoder latent, stored channel-major: values[c*h*w + y*w + x].
struct Latent {
    VectorXd values;
    int channels = 0;
    int height   = 0;
    int width    = 0;
    double scale = 1.0;  // autoencoder scaling applied at encode time

    int size() const { return channels * height * width; }
    bool same_shape(const Latent& o) const {
        return channels == o.channels && height == o.height && width == o.width;
    }
    void validate() const {
        if (values.size() != size()) fail("latent: value count does not match shape");
        if (!values.allFinite()) fail("latent: non-finite values");
    }
};

// Text-encoder output. One embedding row per token; special (begin/end)
// tokens are flagged in the mask and do not count as content.
struct TextEmbeddingSequence {
    MatrixXd embeddings;               // n_tokens x d_a
    std::vector<int> token_ids;
    std::vector<bool> special_token_mask;

    int tokens() const { return static_cast<int>(embeddings.rows()); }
    int content_tokens() const {
        int n = 0;
        for (bool s : special_token_mask)
            if (!s) ++n;
        return n;
    }
};

// Cumulative-product noise schedule for the forward process.
struct NoiseSchedule {
    VectorXd alphas_cumprod;  // length T, in (0, 1], non-increasing

    int steps() const { return static_cast<int>(alphas_cumprod.size()); }

    void validate() const {
        if (alphas_cumprod.size() == 0) fail("schedule: empty");
        if (alphas_cumprod[0] < 0.98) fail("schedule: alpha_bar[0] must be close to 1");
        for (int t = 0; t < steps(); ++t) {
            const double a = alphas_cumprod[t];
            if (!(a > 0.0 && a <= 1.0)) fail("schedule: alpha_bar out of (0, 1]");
            if (t > 0 && a > alphas_cumprod[t - 1] + 1e-15)
                fail("schedule: alpha_bar must be non-increasing");
        }
    }

    static NoiseSchedule linear_beta(int T, double beta_start, double beta_end) {
        if (T < 1) fail("schedule: T must be >= 1");
        NoiseSchedule s;
        s.alphas_cumprod.resize(T);
        double prod = 1.0;
        for (int t = 0; t < T; ++t) {
            const double beta = T == 1 ? beta_start
                                       : beta_start + (beta_end - beta_start) * t / (T - 1);
            prod *= 1.0 - beta;
            s.alphas_cumprod[t] = prod;
        }
        return s;
    }
};

inline std::uint64_t checksum(const MatrixXd& m, std::uint64_t h = kFnvOffset) {
    return fnv1a64(m.data(), sizeof(double) * m.size(), h);
}
inline std::uint64_t checksum(const VectorXd& v, std::uint64_t h = kFnvOffset) {
    return fnv1a64(v.data(), sizeof(double) * v.size(), h);
}

}  // namespace a2i
