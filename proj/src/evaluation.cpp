#include "a2i/evaluation.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include "a2i/inference.hpp"
#include "a2i/png_io.hpp"
#include "a2i/rng.hpp"
#include "a2i/wav_io.hpp"
#include "json.hpp"

namespace a2i {

namespace {

using nlohmann::json;

double cosine_or_nan(const VectorXd& a, const VectorXd& b) {
    const double n = a.norm() * b.norm();
    if (n == 0.0) return std::numeric_limits<double>::quiet_NaN();
    return a.dot(b) / n;
}

}  // namespace

WinStats win_stats(const std::vector<EmbeddingPair>& pairs) {
    if (pairs.empty()) fail("win rate: no pairs");
    WinStats stats;
    stats.points.reserve(pairs.size());
    stats.margins.reserve(pairs.size());
    for (const auto& p : pairs) {
        if (p.query.size() != p.positive.size() || p.query.size() != p.distractor.size())
            fail("win rate: embedding width mismatch");
        const double sp = cosine_or_nan(p.query, p.positive);
        const double sd = cosine_or_nan(p.query, p.distractor);
        double point;
        double margin;
        if (std::isnan(sp) || std::isnan(sd)) {
            log_warn("win rate: zero-norm embedding, counting the pair as a tie");
            point  = 0.5;
            margin = 0.0;
        } else if (sp > sd) {
            point  = 1.0;
            margin = sp - sd;
        } else if (sp < sd) {
            point  = 0.0;
            margin = sp - sd;
        } else {
            point  = 0.5;
            margin = 0.0;
        }
        stats.points.push_back(point);
        stats.margins.push_back(margin);
    }
    double acc = 0.0;
    for (double p : stats.points) acc += p;
    stats.percent = 100.0 * acc / static_cast<double>(stats.points.size());
    return stats;
}

double pairwise_win_rate(const std::vector<EmbeddingPair>& pairs) {
    return win_stats(pairs).percent;
}

double ais(const std::vector<Image>& generated, const std::vector<AudioWaveform>& paired_audio,
           const std::vector<AudioWaveform>& distractor_audio,
           const CrossModalEmbedder& embedder) {
    if (generated.size() != paired_audio.size() || generated.size() != distractor_audio.size())
        fail("ais: list lengths differ");
    std::vector<EmbeddingPair> pairs;
    pairs.reserve(generated.size());
    std::size_t skipped = 0;
    for (std::size_t i = 0; i < generated.size(); ++i) {
        try {
            pairs.push_back(EmbeddingPair{embedder.embed_image(generated[i]),
                                          embedder.embed_audio(paired_audio[i]),
                                          embedder.embed_audio(distractor_audio[i])});
        } catch (const std::exception& e) {
            ++skipped;
            log_warn("ais: embedder failed on sample " + std::to_string(i) + ": " + e.what());
        }
    }
    if (skipped) log_warn("ais: excluded " + std::to_string(skipped) + " samples");
    return pairwise_win_rate(pairs);
}

double iis(const std::vector<Image>& generated, const std::vector<Image>& ground_truth,
           const std::vector<Image>& distractors, const ImageEmbedder& embedder) {
    if (generated.size() != ground_truth.size() || generated.size() != distractors.size())
        fail("iis: list lengths differ");
    std::vector<EmbeddingPair> pairs;
    pairs.reserve(generated.size());
    std::size_t skipped = 0;
    for (std::size_t i = 0; i < generated.size(); ++i) {
        try {
            pairs.push_back(EmbeddingPair{embedder.embed(generated[i]),
                                          embedder.embed(ground_truth[i]),
                                          embedder.embed(distractors[i])});
        } catch (const std::exception& e) {
            ++skipped;
            log_warn("iis: embedder failed on sample " + std::to_string(i) + ": " + e.what());
        }
    }
    if (skipped) log_warn("iis: excluded " + std::to_string(skipped) + " samples");
    return pairwise_win_rate(pairs);
}

AicResult aic(const std::vector<Image>& generated, const std::vector<std::string>& labels,
              const ImageClassifier& classifier, const LabelMatcher& matcher, double threshold) {
    if (generated.size() != labels.size()) fail("aic: list lengths differ");
    if (generated.empty()) fail("aic: no samples");
    if (threshold < 0.0 || threshold > 1.0) fail("aic: threshold must be in [0, 1]");

    AicResult result;
    int agreements = 0;
    for (std::size_t i = 0; i < generated.size(); ++i) {
        std::string predicted;
        double score = 0.0;
        bool agree   = false;
        try {
            predicted = classifier.classify(generated[i]);
            score     = matcher.similarity(predicted, labels[i]);
            agree     = score > threshold;  // strictly exceeds
        } catch (const std::exception& e) {
            log_warn("aic: classifier failed on sample " + std::to_string(i) +
                     ", counting as disagreement: " + e.what());
        }
        result.predicted.push_back(predicted);
        result.matcher_scores.push_back(score);
        result.agree.push_back(agree);
        if (agree) ++agreements;
    }
    result.percent = 100.0 * agreements / static_cast<double>(generated.size());
    return result;
}

double fid_from_stats(const VectorXd& mu1, const MatrixXd& sigma1, const VectorXd& mu2,
                      const MatrixXd& sigma2) {
    if (mu1.size() != mu2.size() || sigma1.rows() != sigma1.cols() ||
        sigma2.rows() != sigma2.cols() || sigma1.rows() != mu1.size() ||
        sigma2.rows() != mu2.size())
        fail("fid: inconsistent statistic shapes");

    const double mean_term = (mu1 - mu2).squaredNorm();

    // Tr((S1 S2)^1/2) via the symmetrized product: sqrt(S2) S1 sqrt(S2)
    Eigen::SelfAdjointEigenSolver<MatrixXd> es2(0.5 * (sigma2 + sigma2.transpose()));
    if (es2.info() != Eigen::Success) fail("fid: eigendecomposition failed");
    const VectorXd sqrt_vals =
        es2.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    const MatrixXd s2_half =
        es2.eigenvectors() * sqrt_vals.asDiagonal() * es2.eigenvectors().transpose();

    MatrixXd inner = s2_half * (0.5 * (sigma1 + sigma1.transpose())) * s2_half;
    inner          = 0.5 * (inner + inner.transpose());
    Eigen::SelfAdjointEigenSolver<MatrixXd> esp(inner);
    if (esp.info() != Eigen::Success) fail("fid: eigendecomposition failed");
    const double trace_sqrt = esp.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();

    double trace_term = sigma1.trace() + sigma2.trace() - 2.0 * trace_sqrt;
    if (trace_term < 0.0) {
        if (trace_term <= -1e-6)
            fail("fid: covariance square root produced a large negative residue (" +
                 std::to_string(trace_term) + ")");
        trace_term = 0.0;  // tiny numerical residue
    }
    return mean_term + trace_term;
}

double fid(const MatrixXd& features_generated, const MatrixXd& features_reference) {
    if (features_generated.rows() < 2 || features_reference.rows() < 2)
        fail("fid: need at least 2 feature rows per side");
    if (features_generated.cols() != features_reference.cols() ||
        features_generated.cols() < 1)
        fail("fid: feature widths differ or are empty");
    if (!features_generated.allFinite() || !features_reference.allFinite())
        fail("fid: non-finite features");

    auto stats = [](const MatrixXd& x) {
        const VectorXd mu = x.colwise().mean();
        MatrixXd centered = x.rowwise() - mu.transpose();
        const MatrixXd sigma =
            centered.transpose() * centered / static_cast<double>(x.rows() - 1);
        return std::make_pair(mu, sigma);
    };
    const auto [mu1, s1] = stats(features_generated);
    const auto [mu2, s2] = stats(features_reference);
    return fid_from_stats(mu1, s1, mu2, s2);
}

EvalReport evaluate_run(const std::filesystem::path& generation_dir, const Manifest& manifest,
                        const EvalConfig& config, const CrossModalEmbedder& cross_modal,
                        const ImageEmbedder& image_embedder, const ImageClassifier& classifier,
                        const LabelMatcher& matcher, const VisionFeatureExtractor& vision) {
    if (!std::filesystem::is_directory(generation_dir))
        fail("generation directory does not exist: " + generation_dir.string());
    if (manifest.records.empty()) fail("evaluate: manifest has no records");

    std::vector<std::filesystem::path> sidecars;
    for (const auto& e : std::filesystem::directory_iterator(generation_dir)) {
        if (e.path().extension() != ".json") continue;
        if (e.path().filename() == "config.effective.json") continue;  // run metadata
        sidecars.push_back(e.path());
    }
    std::sort(sidecars.begin(), sidecars.end());
    if (sidecars.empty())
        fail("generation directory has no generation sidecars: " + generation_dir.string());

    std::map<std::string, const SampleRecord*> by_id;
    for (const auto& r : manifest.records) by_id[r.id] = &r;

    struct EvalRow {
        std::string id;
        Image generated;
        const SampleRecord* record = nullptr;
        const SampleRecord* distractor = nullptr;
    };
    std::vector<EvalRow> rows;
    std::string fingerprint;
    std::vector<std::string> missing;

    for (const auto& sc : sidecars) {
        GenerationMetadata meta;
        try {
            meta = read_generation_sidecar(sc);
        } catch (const std::exception& e) {
            log_warn("skipping unreadable sidecar " + sc.filename().string() + ": " + e.what());
            continue;
        }
        const auto it = by_id.find(meta.sample_id);
        if (it == by_id.end()) {
            missing.push_back(meta.sample_id);
            continue;
        }
        std::filesystem::path png = sc;
        png.replace_extension(".png");
        EvalRow row;
        try {
            row.generated = read_png(png);
        } catch (const std::exception& e) {
            log_warn("skipping unreadable image " + png.filename().string() + ": " + e.what());
            continue;
        }
        row.id     = meta.sample_id;
        row.record = it->second;
        if (fingerprint.empty()) {
            fingerprint = meta.checkpoint_fingerprint;
        } else if (fingerprint != meta.checkpoint_fingerprint) {
            log_warn("mixed checkpoint fingerprints in generation dir");
        }
        rows.push_back(std::move(row));
    }
    if (!missing.empty()) {
        std::string ids;
        for (const auto& id : missing) ids += id + " ";
        log_warn("generations without manifest records (skipped): " + ids);
    }
    if (rows.empty()) fail("evaluate: no generation/manifest pairs align");
    if (manifest.records.size() < 2)
        fail("evaluate: need at least 2 manifest records to draw distractors");

    // fixed-seed distractor per evaluated row, uniform over other samples
    for (std::size_t i = 0; i < rows.size(); ++i) {
        Rng rng = rng_stream(config.distractor_seed, "distractor", fnv1a64(rows[i].id), i);
        const SampleRecord* self = rows[i].record;
        const SampleRecord* pick = self;
        while (pick == self) {
            pick = &manifest.records[rng.uniform_int(manifest.records.size())];
        }
        rows[i].distractor = pick;
    }

    EvalReport report;
    report.n_samples         = static_cast<int>(rows.size());
    report.config_fingerprint = fingerprint;
    report.rows.resize(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) report.rows[i].id = rows[i].id;

    const bool want_ais = config.metrics.count("ais") > 0;
    const bool want_iis = config.metrics.count("iis") > 0;
    const bool want_aic = config.metrics.count("aic") > 0;
    const bool want_fid = config.metrics.count("fid") > 0;

    if (want_ais) {
        std::vector<EmbeddingPair> pairs;
        pairs.reserve(rows.size());
        for (const auto& row : rows) {
            const AudioWaveform paired = read_wav(row.record->audio_path);
            const AudioWaveform other  = read_wav(row.distractor->audio_path);
            pairs.push_back(EmbeddingPair{cross_modal.embed_image(row.generated),
                                          cross_modal.embed_audio(paired),
                                          cross_modal.embed_audio(other)});
        }
        const WinStats stats = win_stats(pairs);
        report.ais           = stats.percent;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            report.rows[i].ais_win    = stats.points[i];
            report.rows[i].ais_margin = stats.margins[i];
        }
    }
    if (want_iis) {
        std::vector<EmbeddingPair> pairs;
        pairs.reserve(rows.size());
        for (const auto& row : rows) {
            pairs.push_back(EmbeddingPair{image_embedder.embed(row.generated),
                                          image_embedder.embed(read_png(row.record->frame_path)),
                                          image_embedder.embed(read_png(row.distractor->frame_path))});
        }
        const WinStats stats = win_stats(pairs);
        report.iis           = stats.percent;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            report.rows[i].iis_win    = stats.points[i];
            report.rows[i].iis_margin = stats.margins[i];
        }
    }
    if (want_aic) {
        std::vector<Image> images;
        std::vector<std::string> labels;
        for (const auto& row : rows) {
            images.push_back(row.generated);
            labels.push_back(row.record->label);
        }
        const AicResult r = aic(images, labels, classifier, matcher, config.aic_threshold);
        report.aic        = r.percent;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            report.rows[i].aic_agree     = r.agree[i] ? 1 : 0;
            report.rows[i].matcher_score = r.matcher_scores[i];
        }
    }
    if (want_fid) {
        MatrixXd gen_feats(rows.size(), vision.features(rows[0].generated).size());
        for (std::size_t i = 0; i < rows.size(); ++i)
            gen_feats.row(i) = vision.features(rows[i].generated).transpose();
        MatrixXd ref_feats(manifest.records.size(), gen_feats.cols());
        for (std::size_t i = 0; i < manifest.records.size(); ++i)
            ref_feats.row(i) =
                vision.features(read_png(manifest.records[i].frame_path)).transpose();
        report.fid = fid(gen_feats, ref_feats);
    }
    return report;
}

void write_report(const EvalReport& report, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);

    json j{{"n_samples", report.n_samples},
           {"config_fingerprint", report.config_fingerprint},
           {"tool_version", kToolVersion}};
    j["ais"] = report.ais ? json(*report.ais) : json(nullptr);
    j["iis"] = report.iis ? json(*report.iis) : json(nullptr);
    j["aic"] = report.aic ? json(*report.aic) : json(nullptr);
    j["fid"] = report.fid ? json(*report.fid) : json(nullptr);

    std::ofstream os(dir / "report.json", std::ios::binary | std::ios::trunc);
    if (!os) fail("cannot write report: " + (dir / "report.json").string());
    os << j.dump(2) << "\n";

    std::ofstream csv(dir / "per_sample.csv", std::ios::binary | std::ios::trunc);
    if (!csv) fail("cannot write per-sample table: " + (dir / "per_sample.csv").string());
    csv << "id,ais_win,iis_win,aic_agree,matcher_score,ais_margin,iis_margin\n";
    char line[256];
    for (const auto& r : report.rows) {
        std::snprintf(line, sizeof(line), ",%.6f,%.6f,%d,%.6f,%.6f,%.6f\n", r.ais_win, r.iis_win,
                      r.aic_agree, r.matcher_score, r.ais_margin, r.iis_margin);
        csv << r.id << line;
    }
}

EvalReport read_report(const std::filesystem::path& report_json) {
    std::ifstream is(report_json, std::ios::binary);
    if (!is) fail("cannot open report: " + report_json.string());
    const json j = json::parse(is);
    EvalReport r;
    r.n_samples          = j.at("n_samples");
    r.config_fingerprint = j.at("config_fingerprint");
    if (!j.at("ais").is_null()) r.ais = j.at("ais").get<double>();
    if (!j.at("iis").is_null()) r.iis = j.at("iis").get<double>();
    if (!j.at("aic").is_null()) r.aic = j.at("aic").get<double>();
    if (!j.at("fid").is_null()) r.fid = j.at("fid").get<double>();
    return r;
}

}  // namespace a2i
