#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "a2i/datapipe.hpp"
#include "a2i/toyworld.hpp"
#include "test_util.hpp"

using namespace a2i;

namespace {

// Scorer keyed by the first pixel's red value, for prescribed score tables.
class TableScorer final : public ClipScorer {
public:
    explicit TableScorer(std::map<int, double> by_red) : by_red_(std::move(by_red)) {}
    double score(const Image& image, const std::string&) const override {
        return by_red_.at(static_cast<int>(std::lround(image.rgb[0] * 255.0)));
    }

private:
    std::map<int, double> by_red_;
};

class FixedClassifier final : public ImageClassifier {
public:
    explicit FixedClassifier(std::string label) : label_(std::move(label)) {}
    std::string classify(const Image&) const override { return label_; }

private:
    std::string label_;
};

class FixedAudioClassifier final : public AudioClassifier {
public:
    explicit FixedAudioClassifier(std::string label) : label_(std::move(label)) {}
    std::string classify(const AudioWaveform&) const override { return label_; }

private:
    std::string label_;
};

class ThrowingClassifier final : public ImageClassifier {
public:
    std::string classify(const Image&) const override { fail("classifier exploded"); }
};

// Matcher with a prescribed score for mismatched labels.
class FixedMatcher final : public LabelMatcher {
public:
    explicit FixedMatcher(double mismatch_score) : score_(mismatch_score) {}
    double similarity(const std::string& a, const std::string& b) const override {
        return a == b ? 1.0 : score_;
    }

private:
    double score_;
};

Image tagged_image(int red255) {
    return Image::solid(4, 4, red255 / 255.0, 0.2, 0.2);
}

}  // namespace

TEST_CASE("crop_audio: 5 s from a 10 s clip is exactly 80000 samples") {
    Rng rng(1);
    const AudioWaveform w = testutil::sine_wave(440.0, 10.0, 16000);
    const CropResult crop = crop_audio(w, 5.0, rng);
    CHECK(crop.waveform.samples.size() == 80000);
    CHECK_FALSE(crop.padded);
    CHECK(crop.offset <= w.samples.size() - 80000);
    // contiguity: the crop equals the source slice at the reported offset
    for (std::size_t i = 0; i < 100; ++i)
        CHECK(crop.waveform.samples[i] == w.samples[crop.offset + i]);
}

TEST_CASE("crop_audio: fixed seed gives the same offset every run") {
    const AudioWaveform w = testutil::sine_wave(440.0, 10.0, 16000);
    Rng a = rng_stream(33, "crop");
    Rng b = rng_stream(33, "crop");
    CHECK(crop_audio(w, 5.0, a).offset == crop_audio(w, 5.0, b).offset);
}

TEST_CASE("crop_audio: short input is zero-padded at the end and flagged") {
    Rng rng(2);
    const AudioWaveform w = testutil::sine_wave(440.0, 3.0, 16000);
    const CropResult crop = crop_audio(w, 5.0, rng);
    CHECK(crop.waveform.samples.size() == 80000);
    CHECK(crop.padded);
    CHECK(crop.offset == 0);
    for (std::size_t i = 0; i < w.samples.size(); ++i)
        CHECK(crop.waveform.samples[i] == w.samples[i]);
    for (std::size_t i = w.samples.size(); i < 80000; ++i)
        CHECK(crop.waveform.samples[i] == 0.0);
}

TEST_CASE("crop_audio rejects empty input and non-positive durations") {
    Rng rng(3);
    AudioWaveform empty;
    empty.sample_rate = 16000;
    CHECK_THROWS_AS(crop_audio(empty, 5.0, rng), Error);
    const AudioWaveform w = testutil::sine_wave(440.0, 1.0, 16000);
    CHECK_THROWS_AS(crop_audio(w, 0.0, rng), Error);
    CHECK_THROWS_AS(crop_audio(w, -1.0, rng), Error);
}

TEST_CASE("select_frame: single frame, argmax, and tie-to-lowest-index") {
    TableScorer scorer({{10, 0.1}, {20, 0.9}, {30, 0.3}});
    const std::vector<Image> frames{tagged_image(10), tagged_image(20), tagged_image(30)};

    const FrameChoice single = select_frame({tagged_image(10)}, "x", scorer);
    CHECK(single.index == 0);
    CHECK(single.clip_score == 0.1);

    const FrameChoice best = select_frame(frames, "x", scorer);
    CHECK(best.index == 1);
    CHECK(best.clip_score == 0.9);

    TableScorer tied({{10, 0.5}, {20, 0.1}, {30, 0.5}});
    CHECK(select_frame(frames, "x", tied).index == 0);

    CHECK_THROWS_AS(select_frame({}, "x", scorer), Error);
}

TEST_CASE("select_frame returns a maximal score (no frame strictly higher)") {
    Rng rng(4);
    for (int trial = 0; trial < 50; ++trial) {
        std::map<int, double> table;
        std::vector<Image> frames;
        const int n = 1 + static_cast<int>(rng.uniform_int(6));
        for (int i = 0; i < n; ++i) {
            table[i] = rng.uniform() * 2.0 - 1.0;
            frames.push_back(tagged_image(i));
        }
        TableScorer scorer(table);
        const FrameChoice pick = select_frame(frames, "x", scorer);
        for (int i = 0; i < n; ++i) CHECK(table[i] <= pick.clip_score);
    }
}

TEST_CASE("filter_sample: agreement keeps, disagreement drops") {
    const Image frame = tagged_image(100);
    const AudioWaveform audio = testutil::sine_wave(440.0, 0.5, 16000);
    FixedMatcher matcher(0.1);

    const FilterDecision keep =
        filter_sample(frame, audio, "dog", FixedClassifier("dog"),
                      FixedAudioClassifier("dog"), matcher, 0.75);
    CHECK(keep.keep);
    CHECK(keep.image_label == "dog");
    CHECK(keep.audio_label == "dog");

    const FilterDecision drop_image =
        filter_sample(frame, audio, "dog", FixedClassifier("lawnmower"),
                      FixedAudioClassifier("dog"), matcher, 0.75);
    CHECK_FALSE(drop_image.keep);
    CHECK(drop_image.reason == "image classifier disagrees");

    const FilterDecision drop_audio =
        filter_sample(frame, audio, "dog", FixedClassifier("dog"),
                      FixedAudioClassifier("lawnmower"), matcher, 0.75);
    CHECK_FALSE(drop_audio.keep);
    CHECK(drop_audio.reason == "audio classifier disagrees");
}

TEST_CASE("filter_sample boundary: scores at the threshold keep (>= rule)") {
    const Image frame = tagged_image(100);
    const AudioWaveform audio = testutil::sine_wave(440.0, 0.5, 16000);
    struct Row {
        double score;
        bool expect_keep;
    };
    // table-driven scan around the 0.75 threshold
    for (const Row row : {Row{0.74, false}, Row{0.7499999, false}, Row{0.75, true},
                          Row{0.7500001, true}, Row{0.76, true}}) {
        FixedMatcher matcher(row.score);
        const FilterDecision d =
            filter_sample(frame, audio, "dog", FixedClassifier("cat"),
                          FixedAudioClassifier("cat"), matcher, 0.75);
        CHECK(d.keep == row.expect_keep);
    }
}

TEST_CASE("filter monotonicity: raising the threshold never keeps more") {
    const Image frame = tagged_image(100);
    const AudioWaveform audio = testutil::sine_wave(440.0, 0.5, 16000);
    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        FixedMatcher matcher(rng.uniform());
        bool prev_keep = true;
        for (double threshold : {0.1, 0.3, 0.5, 0.7, 0.9}) {
            const FilterDecision d =
                filter_sample(frame, audio, "dog", FixedClassifier("cat"),
                              FixedAudioClassifier("cat"), matcher, threshold);
            if (!prev_keep) CHECK_FALSE(d.keep);  // once dropped, stays dropped
            prev_keep = d.keep;
        }
    }
}

TEST_CASE("filter_sample: classifier failure drops the sample with a reason") {
    const Image frame = tagged_image(100);
    const AudioWaveform audio = testutil::sine_wave(440.0, 0.5, 16000);
    FixedMatcher matcher(1.0);
    const FilterDecision d = filter_sample(frame, audio, "dog", ThrowingClassifier(),
                                           FixedAudioClassifier("dog"), matcher, 0.75);
    CHECK_FALSE(d.keep);
    CHECK(d.reason.find("classifier failure") != std::string::npos);
}

TEST_CASE("build_manifest: empty source gives an empty manifest with zero counts") {
    testutil::TempDir dir("empty_src");
    std::filesystem::create_directories(dir / "src");
    const Backbone bb = make_toy_backbone();
    const ToyPlugins plugins(testutil::fixture_classes(), *bb.text);
    DatapipeConfig cfg;
    cfg.output_dir = dir / "out";
    const ManifestBuildResult result =
        build_manifest(dir / "src", cfg, plugins.scorer, plugins.image_classifier,
                       plugins.audio_classifier, plugins.matcher);
    CHECK(result.manifest.records.empty());
    CHECK(result.stats.at("kept") == 0);
    CHECK(result.stats.at("dropped_filter") == 0);
}

TEST_CASE("build_manifest: designed fixture keeps 6 of 8 clips") {
    testutil::TempDir dir("fixture");
    ToyDatasetSpec spec;
    spec.classes          = testutil::fixture_classes();
    spec.clips_per_class  = 2;
    spec.duration_s       = 1.0;
    spec.inconsistent_ids = {"chime_clip0", "hum_clip1"};
    write_toy_dataset(dir / "src", spec);

    const Backbone bb = make_toy_backbone();
    const ToyPlugins plugins(spec.classes, *bb.text);
    DatapipeConfig cfg;
    cfg.output_dir  = dir / "out";
    cfg.crop_seconds = 1.0;
    const ManifestBuildResult result =
        build_manifest(dir / "src", cfg, plugins.scorer, plugins.image_classifier,
                       plugins.audio_classifier, plugins.matcher);

    CHECK(result.manifest.records.size() == 6);
    CHECK(result.stats.at("kept") == 6);
    CHECK(result.stats.at("dropped_filter") == 2);
    for (const auto& rec : result.manifest.records) {
        CHECK(rec.id != "chime_clip0");
        CHECK(rec.id != "hum_clip1");
        CHECK(std::filesystem::exists(rec.audio_path));
        CHECK(std::filesystem::exists(rec.frame_path));
        CHECK(rec.clip_score >= -1.0);
        CHECK(rec.clip_score <= 1.0);
        CHECK(rec.duration_s == doctest::Approx(1.0));
        CHECK_FALSE(rec.padded);
        // the designed best frame is index 1
        CHECK(rec.frame_path.find("frame001.png") != std::string::npos);
    }
}

TEST_CASE("build_manifest: rebuilding with the same seed is byte-identical") {
    testutil::TempDir dir("rebuild");
    ToyDatasetSpec spec;
    spec.classes         = testutil::fixture_classes();
    spec.clips_per_class = 1;
    spec.duration_s      = 1.0;
    write_toy_dataset(dir / "src", spec);

    const Backbone bb = make_toy_backbone();
    const ToyPlugins plugins(spec.classes, *bb.text);
    DatapipeConfig cfg;
    cfg.crop_seconds = 1.0;

    std::string bytes[2];
    for (int run = 0; run < 2; ++run) {
        cfg.output_dir = dir / "out";  // same path both runs
        std::filesystem::remove_all(cfg.output_dir);
        const ManifestBuildResult result =
            build_manifest(dir / "src", cfg, plugins.scorer, plugins.image_classifier,
                           plugins.audio_classifier, plugins.matcher);
        save_manifest(result.manifest, cfg.output_dir / "manifest.jsonl", result.stats);
        bytes[run] = testutil::read_bytes(cfg.output_dir / "manifest.jsonl");
    }
    CHECK(bytes[0] == bytes[1]);
    CHECK_FALSE(bytes[0].empty());
}

TEST_CASE("build_manifest: unreadable media is skipped and counted") {
    testutil::TempDir dir("badmedia");
    ToyDatasetSpec spec;
    spec.classes         = {"chime"};
    spec.clips_per_class = 1;
    spec.duration_s      = 1.0;
    write_toy_dataset(dir / "src", spec);
    // corrupt the wav, keep the frames
    std::ofstream(dir / "src" / "chime" / "clip0.wav", std::ios::trunc) << "garbage";
    // a clip with no frames at all
    std::ofstream(dir / "src" / "chime" / "clip9.wav") << "x";

    const Backbone bb = make_toy_backbone();
    const ToyPlugins plugins(testutil::fixture_classes(), *bb.text);
    DatapipeConfig cfg;
    cfg.output_dir   = dir / "out";
    cfg.crop_seconds = 1.0;
    const ManifestBuildResult result =
        build_manifest(dir / "src", cfg, plugins.scorer, plugins.image_classifier,
                       plugins.audio_classifier, plugins.matcher);
    CHECK(result.manifest.records.empty());
    CHECK(result.stats.at("dropped_unreadable") == 1);
    CHECK(result.stats.at("dropped_no_frames") == 1);
}

TEST_CASE("manifest save/load round-trips and rejects duplicate ids") {
    testutil::TempDir dir("manifest");
    Manifest m;
    m.split      = "val";
    m.provenance = "unit";
    SampleRecord r;
    r.id          = "a_0";
    r.audio_path  = "/tmp/a.wav";
    r.frame_path  = "/tmp/a.png";
    r.label       = "acoustic guitar";
    r.clip_score  = 0.875;
    r.duration_s  = 5.0;
    r.sample_rate = 16000;
    r.padded      = true;
    m.records.push_back(r);
    r.id = "a_1";
    m.records.push_back(r);

    save_manifest(m, dir / "m.jsonl");
    const Manifest back = load_manifest(dir / "m.jsonl");
    REQUIRE(back.records.size() == 2);
    CHECK(back.split == "val");
    CHECK(back.provenance == "unit");
    CHECK(back.records[0].id == "a_0");
    CHECK(back.records[0].label == "acoustic guitar");
    CHECK(back.records[0].clip_score == 0.875);
    CHECK(back.records[0].padded);

    m.records[1].id = "a_0";  // duplicate
    save_manifest(m, dir / "dup.jsonl");
    CHECK_THROWS_AS(load_manifest(dir / "dup.jsonl"), Error);
    CHECK_THROWS_AS(load_manifest(dir / "missing.jsonl"), Error);
}

TEST_CASE("toy class map enforces its class budget and separates signatures") {
    const std::vector<std::string> classes = testutil::fixture_classes();
    const ToyClassMap map(classes);
    for (std::size_t i = 0; i < classes.size(); ++i) {
        const auto a = map.signature(classes[i]);
        for (std::size_t j = i + 1; j < classes.size(); ++j) {
            const auto b = map.signature(classes[j]);
            double d = 0;
            for (int c = 0; c < 3; ++c)
                d += (a.color[c] - b.color[c]) * (a.color[c] - b.color[c]);
            CHECK(d > 0.3);  // colors well separated
            CHECK(std::abs(a.tone_hz - b.tone_hz) > 500.0);
        }
    }
    std::vector<std::string> too_many;
    for (int i = 0; i < 9; ++i) too_many.push_back("c" + std::to_string(i));
    CHECK_THROWS_AS(ToyClassMap{too_many}, Error);
}

TEST_CASE("fixture labels stay below the matcher threshold pairwise") {
    const Backbone bb = make_toy_backbone();
    const TextCosineLabelMatcher matcher(*bb.text);
    const auto classes = testutil::fixture_classes();
    for (std::size_t i = 0; i < classes.size(); ++i) {
        CHECK(matcher.similarity(classes[i], classes[i]) == 1.0);
        for (std::size_t j = i + 1; j < classes.size(); ++j) {
            const double s = matcher.similarity(classes[i], classes[j]);
            CHECK(s < 0.75);
            CHECK(s >= 0.0);
        }
    }
}
