#include "a2i/toyworld.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "a2i/conditioning.hpp"
#include "a2i/png_io.hpp"
#include "a2i/rng.hpp"
#include "a2i/wav_io.hpp"

namespace a2i {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Well-separated palette; index order matches tone band order.
constexpr std::array<std::array<double, 3>, 8> kPalette{{
    {0.90, 0.10, 0.10},  // red
    {0.10, 0.75, 0.15},  // green
    {0.15, 0.25, 0.95},  // blue
    {0.95, 0.85, 0.10},  // yellow
    {0.85, 0.15, 0.85},  // magenta
    {0.10, 0.85, 0.85},  // cyan
    {0.95, 0.55, 0.10},  // orange
    {0.55, 0.15, 0.75},  // purple
}};

// Band centers of the toy encoder's 8 analysis bands (32 bins over Nyquist).
double band_center_hz(int band, int sample_rate) {
    const double bin_hz = sample_rate / 2.0 / 33.0;
    return (4.0 * band + 2.5) * bin_hz;
}

double goertzel_power(const AudioWaveform& wave, double freq_hz) {
    const double omega = 2.0 * kPi * freq_hz / wave.sample_rate;
    const double coef  = 2.0 * std::cos(omega);
    double s0 = 0.0, s1 = 0.0, s2 = 0.0;
    for (double x : wave.samples) {
        s0 = x + coef * s1 - s2;
        s2 = s1;
        s1 = s0;
    }
    return s1 * s1 + s2 * s2 - coef * s1 * s2;
}

VectorXd downsample_features(const Image& image, int grid) {
    VectorXd out(grid * grid * 3);
    for (int gy = 0; gy < grid; ++gy) {
        for (int gx = 0; gx < grid; ++gx) {
            double acc[3] = {0, 0, 0};
            int count     = 0;
            const int x0 = gx * image.width / grid, x1 = (gx + 1) * image.width / grid;
            const int y0 = gy * image.height / grid, y1 = (gy + 1) * image.height / grid;
            for (int y = y0; y < std::max(y1, y0 + 1) && y < image.height; ++y)
                for (int x = x0; x < std::max(x1, x0 + 1) && x < image.width; ++x) {
                    for (int c = 0; c < 3; ++c) acc[c] += image.at(x, y, c);
                    ++count;
                }
            for (int c = 0; c < 3; ++c)
                out[(gy * grid + gx) * 3 + c] = count ? acc[c] / count : 0.0;
        }
    }
    return out;
}

MatrixXd fixed_projection(int rows, int cols, std::uint64_t seed) {
    Rng rng = rng_stream(seed, "toy_projection");
    MatrixXd m(rows, cols);
    const double scale = 1.0 / std::sqrt(static_cast<double>(cols));
    for (int c = 0; c < cols; ++c)
        for (int r = 0; r < rows; ++r) m(r, c) = scale * rng.normal();
    return m;
}

VectorXd centered_color(const std::array<double, 3>& rgb) {
    VectorXd v(3);
    for (int c = 0; c < 3; ++c) v[c] = rgb[c] - 0.5;
    const double n = v.norm();
    return n > 0 ? VectorXd(v / n) : v;
}

}  // namespace

ToyClassMap::ToyClassMap(std::vector<std::string> labels) {
    std::set<std::string> uniq(labels.begin(), labels.end());
    labels_.assign(uniq.begin(), uniq.end());
    if (labels_.empty()) fail("toy class map: no labels");
    if (labels_.size() > kPalette.size())
        fail("toy class map supports at most " + std::to_string(kPalette.size()) +
             " classes, got " + std::to_string(labels_.size()));
}

ClassSignature ToyClassMap::signature(const std::string& label) const {
    const auto it = std::lower_bound(labels_.begin(), labels_.end(), label);
    std::size_t index;
    if (it != labels_.end() && *it == label) {
        index = static_cast<std::size_t>(it - labels_.begin());
    } else {
        index = fnv1a64(label) % kPalette.size();  // unseen label: hashed fallback
    }
    return ClassSignature{kPalette[index], band_center_hz(static_cast<int>(index), 16000)};
}

std::array<double, 3> mean_rgb(const Image& image) {
    std::array<double, 3> acc{0, 0, 0};
    const int n = image.width * image.height;
    if (n == 0) fail("mean_rgb: empty image");
    for (int i = 0; i < n; ++i)
        for (int c = 0; c < 3; ++c) acc[c] += image.rgb[3 * i + c];
    for (int c = 0; c < 3; ++c) acc[c] /= n;
    return acc;
}

double ToyClipScorer::score(const Image& image, const std::string& text) const {
    const VectorXd vi = centered_color(mean_rgb(image));
    const VectorXd vt = centered_color(map_.signature(text).color);
    const double n    = vi.norm() * vt.norm();
    return n > 0 ? std::clamp(vi.dot(vt) / n, -1.0, 1.0) : 0.0;
}

std::string ToyImageClassifier::classify(const Image& image) const {
    const auto rgb = mean_rgb(image);
    std::string best;
    double best_d = std::numeric_limits<double>::infinity();
    for (const auto& label : map_.labels()) {
        const auto sig = map_.signature(label);
        double d       = 0;
        for (int c = 0; c < 3; ++c) d += (rgb[c] - sig.color[c]) * (rgb[c] - sig.color[c]);
        if (d < best_d) {
            best_d = d;
            best   = label;
        }
    }
    return best;
}

std::string ToyAudioClassifier::classify(const AudioWaveform& wave) const {
    wave.validate();
    std::string best;
    double best_p = -1.0;
    for (const auto& label : map_.labels()) {
        const double p = goertzel_power(wave, map_.signature(label).tone_hz);
        if (p > best_p) {
            best_p = p;
            best   = label;
        }
    }
    return best;
}

double TextCosineLabelMatcher::similarity(const std::string& a, const std::string& b) const {
    if (a == b) return 1.0;
    const LabelEmbedding ea = encode_label(a, encoder_);
    const LabelEmbedding eb = encode_label(b, encoder_);
    const double n = ea.values.norm() * eb.values.norm();
    if (n <= 0) return 0.0;
    const double cos = std::clamp(ea.values.dot(eb.values) / n, -1.0, 1.0);
    return 0.5 * (cos + 1.0);
}

VectorXd ToyCrossModalEmbedder::embed_image(const Image& image) const {
    return centered_color(mean_rgb(image));
}

VectorXd ToyCrossModalEmbedder::embed_audio(const AudioWaveform& wave) const {
    // infer the nearest class tone, then embed its color: a shared space
    std::string best;
    double best_p = -1.0;
    for (const auto& label : map_.labels()) {
        const double p = goertzel_power(wave, map_.signature(label).tone_hz);
        if (p > best_p) {
            best_p = p;
            best   = label;
        }
    }
    return centered_color(map_.signature(best).color);
}

VectorXd ToyImageEmbedder::embed(const Image& image) const {
    static const MatrixXd proj = fixed_projection(8, 48, 0x11aa);
    VectorXd v = proj * downsample_features(image, 4);
    const double n = v.norm();
    return n > 0 ? VectorXd(v / n) : v;
}

VectorXd ToyVisionFeatures::features(const Image& image) const {
    static const MatrixXd proj = fixed_projection(8, 48, 0x22bb);
    return proj * downsample_features(image, 4);
}

ToyPlugins::ToyPlugins(std::vector<std::string> labels, const TextEncoder& text_encoder)
    : class_map(std::move(labels)),
      scorer(class_map),
      image_classifier(class_map),
      audio_classifier(class_map),
      matcher(text_encoder),
      cross_modal(class_map) {}

std::vector<std::string> discover_labels(const std::filesystem::path& source_dir) {
    if (!std::filesystem::is_directory(source_dir))
        fail("data root does not exist: " + source_dir.string());
    std::vector<std::string> labels;
    for (const auto& e : std::filesystem::directory_iterator(source_dir)) {
        if (!e.is_directory()) continue;
        std::string label = e.path().filename().string();
        std::replace(label.begin(), label.end(), '_', ' ');
        labels.push_back(label);
    }
    std::sort(labels.begin(), labels.end());
    return labels;
}

void write_toy_dataset(const std::filesystem::path& root, const ToyDatasetSpec& spec) {
    if (spec.classes.empty()) fail("toy dataset: no classes");
    ToyClassMap map(spec.classes);
    std::filesystem::create_directories(root);

    const std::set<std::string> inconsistent(spec.inconsistent_ids.begin(),
                                             spec.inconsistent_ids.end());

    for (const auto& cls : spec.classes) {
        std::string dir_name = cls;
        std::replace(dir_name.begin(), dir_name.end(), ' ', '_');
        const std::filesystem::path class_dir = root / dir_name;
        std::filesystem::create_directories(class_dir);

        const ClassSignature sig = map.signature(cls);
        for (int k = 0; k < spec.clips_per_class; ++k) {
            const std::string clip_id = "clip" + std::to_string(k);
            const std::string id      = dir_name + "_" + clip_id;
            Rng rng                   = rng_stream(spec.seed, "toy_clip", fnv1a64(id));

            // band-limited tone with per-clip jitter
            AudioWaveform wave;
            wave.sample_rate = spec.sample_rate;
            const auto n     = static_cast<std::size_t>(spec.duration_s * spec.sample_rate);
            wave.samples.resize(n);
            const double amp   = 0.4 + 0.2 * rng.uniform();
            const double phase = 2.0 * kPi * rng.uniform();
            for (std::size_t i = 0; i < n; ++i)
                wave.samples[i] =
                    amp * std::sin(2.0 * kPi * sig.tone_hz * i / spec.sample_rate + phase);
            write_wav(class_dir / (clip_id + ".wav"), wave);

            // frames: index 1 is the designed best (exact class color)
            const bool bad = inconsistent.count(id) > 0;
            std::array<double, 3> frame_color = sig.color;
            if (bad) {
                // borrow another class's color so the image classifier disagrees
                for (const auto& other : map.labels()) {
                    if (other != cls) {
                        frame_color = map.signature(other).color;
                        break;
                    }
                }
            }
            const std::filesystem::path frames_dir = class_dir / (clip_id + ".frames");
            std::filesystem::create_directories(frames_dir);
            for (int f = 0; f < spec.frames_per_clip; ++f) {
                std::array<double, 3> c = frame_color;
                if (f != 1) {
                    const double dim = 0.45 + 0.1 * rng.uniform();
                    for (auto& v : c) v *= dim;  // off-frames: dimmed color
                }
                Image im = Image::solid(spec.image_size, spec.image_size, c[0], c[1], c[2]);
                char name[32];
                std::snprintf(name, sizeof(name), "frame%03d.png", f);
                write_png(frames_dir / name, im);
            }
        }
    }
}

}  // namespace a2i
