#include "a2i/datapipe.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "a2i/png_io.hpp"
#include "a2i/wav_io.hpp"
#include "json.hpp"

namespace a2i {

namespace {

using nlohmann::json;

json record_to_json(const SampleRecord& r) {
    return json{{"id", r.id},
                {"audio_path", r.audio_path},
                {"frame_path", r.frame_path},
                {"label", r.label},
                {"clip_score", r.clip_score},
                {"duration_s", r.duration_s},
                {"sample_rate", r.sample_rate},
                {"padded", r.padded}};
}

SampleRecord record_from_json(const json& j) {
    SampleRecord r;
    r.id          = j.at("id");
    r.audio_path  = j.at("audio_path");
    r.frame_path  = j.at("frame_path");
    r.label       = j.at("label");
    r.clip_score  = j.at("clip_score");
    r.duration_s  = j.at("duration_s");
    r.sample_rate = j.at("sample_rate");
    r.padded      = j.at("padded");
    return r;
}

std::vector<std::filesystem::path> sorted_entries(const std::filesystem::path& dir,
                                                  const std::string& extension) {
    std::vector<std::filesystem::path> out;
    if (!std::filesystem::is_directory(dir)) return out;
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
        if (extension.empty() ? e.is_directory() : e.path().extension() == extension)
            out.push_back(e.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace

void save_manifest(const Manifest& manifest, const std::filesystem::path& path,
                   const std::map<std::string, std::int64_t>& stats) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) fail("cannot write manifest: " + path.string());
    for (const auto& r : manifest.records) os << record_to_json(r).dump() << "\n";
    if (!os) fail("short write on manifest: " + path.string());

    json meta{{"split", manifest.split},
              {"provenance", manifest.provenance},
              {"record_count", manifest.records.size()}};
    for (const auto& [k, v] : stats) meta["stats"][k] = v;
    std::filesystem::path meta_path = path;
    meta_path += ".meta.json";
    std::ofstream ms(meta_path, std::ios::binary | std::ios::trunc);
    ms << meta.dump(2) << "\n";
}

Manifest load_manifest(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) fail("cannot open manifest: " + path.string());
    Manifest m;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            m.records.push_back(record_from_json(json::parse(line)));
        } catch (const json::exception& e) {
            fail("manifest " + path.string() + " line " + std::to_string(line_no) + ": " +
                 e.what());
        }
    }
    std::filesystem::path meta_path = path;
    meta_path += ".meta.json";
    if (std::filesystem::exists(meta_path)) {
        std::ifstream ms(meta_path, std::ios::binary);
        json meta = json::parse(ms, nullptr, false);
        if (!meta.is_discarded()) {
            m.split      = meta.value("split", m.split);
            m.provenance = meta.value("provenance", m.provenance);
        }
    }
    // ids must be unique within a manifest
    std::vector<std::string> ids;
    for (const auto& r : m.records) ids.push_back(r.id);
    std::sort(ids.begin(), ids.end());
    if (std::adjacent_find(ids.begin(), ids.end()) != ids.end())
        fail("manifest has duplicate sample ids: " + path.string());
    return m;
}

CropResult crop_audio(const AudioWaveform& wave, double duration_s, Rng& rng) {
    wave.validate();
    if (duration_s <= 0.0) fail("crop_audio: duration must be positive");
    const auto want = static_cast<std::size_t>(std::llround(duration_s * wave.sample_rate));
    if (want == 0) fail("crop_audio: requested crop is empty");

    CropResult out;
    out.waveform.sample_rate = wave.sample_rate;
    out.waveform.samples.resize(want, 0.0);
    if (wave.samples.size() <= want) {
        std::copy(wave.samples.begin(), wave.samples.end(), out.waveform.samples.begin());
        out.padded = wave.samples.size() < want;
        out.offset = 0;
    } else {
        out.offset = rng.uniform_int(wave.samples.size() - want + 1);
        std::copy_n(wave.samples.begin() + static_cast<std::ptrdiff_t>(out.offset), want,
                    out.waveform.samples.begin());
    }
    return out;
}

FrameChoice select_frame(const std::vector<Image>& frames, const std::string& label,
                         const ClipScorer& scorer) {
    if (frames.empty()) fail("select_frame: no frames");
    FrameChoice best{0, scorer.score(frames[0], label)};
    for (int i = 1; i < static_cast<int>(frames.size()); ++i) {
        const double s = scorer.score(frames[i], label);
        if (s > best.clip_score) best = {i, s};
    }
    return best;
}

FilterDecision filter_sample(const Image& frame, const AudioWaveform& audio,
                             const std::string& label, const ImageClassifier& image_classifier,
                             const AudioClassifier& audio_classifier, const LabelMatcher& matcher,
                             double threshold) {
    FilterDecision d;
    try {
        d.image_label = image_classifier.classify(frame);
        d.audio_label = audio_classifier.classify(audio);
    } catch (const std::exception& e) {
        d.keep   = false;
        d.reason = std::string("classifier failure: ") + e.what();
        return d;
    }
    d.image_score = matcher.similarity(d.image_label, label);
    d.audio_score = matcher.similarity(d.audio_label, label);
    if (d.image_score < threshold) {
        d.reason = "image classifier disagrees";
    } else if (d.audio_score < threshold) {
        d.reason = "audio classifier disagrees";
    } else {
        d.keep = true;
    }
    return d;
}

ManifestBuildResult build_manifest(const std::filesystem::path& source_dir,
                                   const DatapipeConfig& config, const ClipScorer& scorer,
                                   const ImageClassifier& image_classifier,
                                   const AudioClassifier& audio_classifier,
                                   const LabelMatcher& matcher) {
    if (!std::filesystem::is_directory(source_dir))
        fail("data root does not exist: " + source_dir.string());

    const std::filesystem::path clips_dir = config.output_dir / "clips";
    std::filesystem::create_directories(clips_dir);

    ManifestBuildResult result;
    result.manifest.split      = config.split;
    result.manifest.provenance = source_dir.filename().string();
    auto& stats                = result.stats;
    stats["kept"] = stats["dropped_filter"] = stats["dropped_no_frames"] =
        stats["dropped_unreadable"]         = 0;

    for (const auto& class_dir : sorted_entries(source_dir, "")) {
        std::string label = class_dir.filename().string();
        std::replace(label.begin(), label.end(), '_', ' ');

        for (const auto& wav_path : sorted_entries(class_dir, ".wav")) {
            const std::string clip_id = wav_path.stem().string();
            const std::string id      = class_dir.filename().string() + "_" + clip_id;

            std::filesystem::path frames_dir = class_dir / (clip_id + ".frames");
            const auto frame_paths           = sorted_entries(frames_dir, ".png");
            if (frame_paths.empty()) {
                ++stats["dropped_no_frames"];
                log_warn("no frames for clip " + id + ", skipping");
                continue;
            }

            AudioWaveform wave;
            std::vector<Image> frames;
            try {
                wave = read_wav(wav_path);
                for (const auto& fp : frame_paths) frames.push_back(read_png(fp));
            } catch (const std::exception& e) {
                ++stats["dropped_unreadable"];
                log_warn("unreadable media for clip " + id + ": " + e.what());
                continue;
            }

            // per-clip stream keyed by id, so per-clip work is order-free
            Rng rng          = rng_stream(config.seed, "crop", fnv1a64(id));
            CropResult crop  = crop_audio(wave, config.crop_seconds, rng);
            FrameChoice pick = select_frame(frames, label, scorer);

            const FilterDecision decision =
                filter_sample(frames[pick.index], crop.waveform, label, image_classifier,
                              audio_classifier, matcher, config.filter_threshold);
            if (!decision.keep) {
                ++stats["dropped_filter"];
                log_info("filtered out " + id + ": " + decision.reason + " (image=" +
                         decision.image_label + ", audio=" + decision.audio_label + ")");
                continue;
            }

            const std::filesystem::path clip_out = clips_dir / (id + ".wav");
            write_wav(clip_out, crop.waveform);

            SampleRecord rec;
            rec.id          = id;
            rec.audio_path  = clip_out.string();
            rec.frame_path  = frame_paths[pick.index].string();
            rec.label       = label;
            rec.clip_score  = pick.clip_score;
            rec.duration_s  = crop.waveform.duration_s();
            rec.sample_rate = crop.waveform.sample_rate;
            rec.padded      = crop.padded;
            result.manifest.records.push_back(rec);
            ++stats["kept"];
        }
    }
    return result;
}

}  // namespace a2i
