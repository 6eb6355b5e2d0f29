#pragma once

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "a2i/datapipe.hpp"
#include "a2i/plugins.hpp"
#include "a2i/types.hpp"

namespace a2i {

struct EmbeddingPair {
    VectorXd query;
    VectorXd positive;
    VectorXd distractor;
};

// Percent of pairs with cos(query, positive) > cos(query, distractor).
// Exact ties count 0.5; zero-norm embeddings compare as ties (logged).
double pairwise_win_rate(const std::vector<EmbeddingPair>& pairs);

// Per-pair detail behind the win rate: points in {0, 0.5, 1} and the
// similarity margin sim(query,positive) - sim(query,distractor).
struct WinStats {
    double percent = 0.0;
    std::vector<double> points;
    std::vector<double> margins;
};
WinStats win_stats(const std::vector<EmbeddingPair>& pairs);

// Audio-image similarity: paired-vs-distractor win rate in the shared
// audio/image embedding space.
double ais(const std::vector<Image>& generated, const std::vector<AudioWaveform>& paired_audio,
           const std::vector<AudioWaveform>& distractor_audio,
           const CrossModalEmbedder& embedder);

// Image-image similarity: same, with image embeddings on both sides.
double iis(const std::vector<Image>& generated, const std::vector<Image>& ground_truth,
           const std::vector<Image>& distractors, const ImageEmbedder& embedder);

// Audio-image content agreement: classifier label vs sample label, matched
// strictly above the threshold.
struct AicResult {
    double percent = 0.0;
    std::vector<bool> agree;
    std::vector<double> matcher_scores;
    std::vector<std::string> predicted;
};
AicResult aic(const std::vector<Image>& generated, const std::vector<std::string>& labels,
              const ImageClassifier& classifier, const LabelMatcher& matcher,
              double threshold = 0.75);

// Frechet distance between Gaussian fits: |mu1-mu2|^2 + Tr(S1+S2-2(S1 S2)^1/2).
double fid_from_stats(const VectorXd& mu1, const MatrixXd& sigma1, const VectorXd& mu2,
                      const MatrixXd& sigma2);
// From raw feature rows (n x k and m x k, n,m >= 2), unbiased covariances.
double fid(const MatrixXd& features_generated, const MatrixXd& features_reference);

struct EvalConfig {
    std::uint64_t distractor_seed = 0;
    double aic_threshold          = 0.75;
    std::set<std::string> metrics = {"ais", "iis", "aic", "fid"};
};

struct EvalReport {
    std::optional<double> ais;
    std::optional<double> iis;
    std::optional<double> aic;
    std::optional<double> fid;
    int n_samples = 0;
    std::string config_fingerprint;

    struct Row {
        std::string id;
        double ais_win       = 0.0;
        double iis_win       = 0.0;
        int aic_agree        = 0;
        double matcher_score = 0.0;
        double ais_margin    = 0.0;
        double iis_margin    = 0.0;
    };
    std::vector<Row> rows;
};

// Scores every generated image found in generation_dir (sidecars link images
// to manifest ids) against the manifest. Missing pairs are reported and the
// run continues with the rest.
EvalReport evaluate_run(const std::filesystem::path& generation_dir, const Manifest& manifest,
                        const EvalConfig& config, const CrossModalEmbedder& cross_modal,
                        const ImageEmbedder& image_embedder, const ImageClassifier& classifier,
                        const LabelMatcher& matcher, const VisionFeatureExtractor& vision);

// report.json plus per_sample.csv in the target directory.
void write_report(const EvalReport& report, const std::filesystem::path& dir);
EvalReport read_report(const std::filesystem::path& report_json);

}  // namespace a2i
