#include "a2i/cli.hpp"

#include <iostream>
#include <sstream>

#include "a2i/evaluation.hpp"
#include "a2i/inference.hpp"
#include "a2i/png_io.hpp"
#include "a2i/toyworld.hpp"
#include "a2i/wav_io.hpp"
#include "json.hpp"

namespace a2i {

namespace {

std::set<std::string> metric_set(const std::string& metrics) {
    std::set<std::string> out;
    std::stringstream ss(metrics);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.insert(item);
    }
    return out;
}

std::vector<std::string> manifest_labels(const Manifest& manifest) {
    std::vector<std::string> labels;
    for (const auto& r : manifest.records) labels.push_back(r.label);
    return labels;
}

}  // namespace

std::filesystem::path cmd_prepare_data(const RunConfig& config) {
    config.validate();
    if (config.data_root.empty())
        throw std::invalid_argument("prepare-data: config key data_root is required");
    if (!std::filesystem::is_directory(config.data_root))
        throw std::invalid_argument("prepare-data: data_root does not exist: " +
                                    config.data_root);

    const Backbone backbone = make_backbone(config.backbone, config.backbone_weights);
    const ToyPlugins plugins(discover_labels(config.data_root), *backbone.text);

    const ManifestBuildResult result =
        build_manifest(config.data_root, config.datapipe_config(), plugins.scorer,
                       plugins.image_classifier, plugins.audio_classifier, plugins.matcher);

    const std::filesystem::path manifest_path =
        std::filesystem::path(config.output_dir) / "manifest.jsonl";
    std::filesystem::create_directories(config.output_dir);
    save_manifest(result.manifest, manifest_path, result.stats);
    write_effective_config(config, config.output_dir);

    std::cout << "manifest: " << manifest_path.string() << "\n";
    for (const auto& [k, v] : result.stats) std::cout << "  " << k << ": " << v << "\n";
    return manifest_path;
}

std::filesystem::path cmd_train(const RunConfig& config) {
    config.validate();
    if (config.manifest.empty())
        throw std::invalid_argument("train: config key manifest is required");

    const Backbone backbone = make_backbone(config.backbone, config.backbone_weights);
    const Manifest manifest = load_manifest(config.manifest);
    const TrainConfig train_cfg = config.train_config();

    const int d_feat =
        backbone.audio->hidden_width() * static_cast<int>(config.layer_indices.size());
    std::cout << "trainable parameters: "
              << embedder_param_count(d_feat, backbone.text->embed_dim()) << "\n";

    write_effective_config(config, config.output_dir);
    const std::filesystem::path ckpt = fit(manifest, train_cfg, backbone);
    std::cout << "checkpoint: " << ckpt.string() << "\n";
    return ckpt;
}

GenerateOutcome cmd_generate(const RunConfig& config,
                             const std::vector<std::string>& audio_paths) {
    config.validate();
    if (config.checkpoint.empty())
        throw std::invalid_argument("generate: config key checkpoint is required");
    if (audio_paths.empty())
        throw std::invalid_argument("generate: at least one audio path is required");

    const Backbone backbone   = make_backbone(config.backbone, config.backbone_weights);
    const Checkpoint ckpt     = load_checkpoint(config.checkpoint);
    const TokenPosition pos   = token_position_from_string(config.token_position);
    std::filesystem::create_directories(config.output_dir);
    write_effective_config(config, config.output_dir);

    GenerateOutcome outcome;
    for (const auto& path : audio_paths) {
        GenerationRequest request;
        request.seed           = config.seed;
        request.num_steps      = config.sampler_steps;
        request.guidance_scale = config.guidance_scale;
        request.num_images     = config.num_images;
        try {
            request.waveform = load_audio(path, backbone.audio->sample_rate());
            const std::vector<Image> images = generate(request, ckpt, backbone, config.prompt, pos);
            const std::string sample_id     = std::filesystem::path(path).stem().string();
            for (int k = 0; k < static_cast<int>(images.size()); ++k) {
                char name[192];
                std::snprintf(name, sizeof(name), "%s_%llu_%d.png", sample_id.c_str(),
                              static_cast<unsigned long long>(config.seed), k);
                const std::filesystem::path png_path =
                    std::filesystem::path(config.output_dir) / name;
                write_png(png_path, images[k]);
                GenerationMetadata meta;
                meta.sample_id              = sample_id;
                meta.seed                   = config.seed;
                meta.image_index            = k;
                meta.num_steps              = config.sampler_steps;
                meta.guidance_scale         = config.guidance_scale;
                meta.checkpoint_fingerprint = ckpt.config_fingerprint;
                write_generation_sidecar(png_path, meta);
                outcome.images.push_back(png_path);
            }
        } catch (const std::exception& e) {
            outcome.failures.push_back(path + ": " + e.what());
            log_warn("generate: skipping " + path + ": " + e.what());
        }
    }
    if (outcome.images.empty() && !outcome.failures.empty())
        fail("generate: every input failed");
    return outcome;
}

std::filesystem::path cmd_evaluate(const RunConfig& config) {
    config.validate();
    if (config.manifest.empty())
        throw std::invalid_argument("evaluate: config key manifest is required");
    if (config.generation_dir.empty())
        throw std::invalid_argument("evaluate: config key generation_dir is required");

    const Backbone backbone = make_backbone(config.backbone, config.backbone_weights);
    const Manifest manifest = load_manifest(config.manifest);
    const ToyPlugins plugins(manifest_labels(manifest), *backbone.text);

    EvalConfig eval_cfg;
    eval_cfg.distractor_seed = config.seed;
    eval_cfg.aic_threshold   = config.aic_threshold;
    eval_cfg.metrics         = metric_set(config.metrics);

    const EvalReport report =
        evaluate_run(config.generation_dir, manifest, eval_cfg, plugins.cross_modal,
                     plugins.image_embedder, plugins.image_classifier, plugins.matcher,
                     plugins.vision_features);

    write_report(report, config.output_dir);
    write_effective_config(config, config.output_dir);

    auto show = [](const char* name, const std::optional<double>& v) {
        std::cout << "  " << name << ": ";
        if (v) std::cout << *v;
        else std::cout << "-";
        std::cout << "\n";
    };
    std::cout << "evaluated " << report.n_samples << " generations\n";
    show("ais", report.ais);
    show("iis", report.iis);
    show("aic", report.aic);
    show("fid", report.fid);
    return std::filesystem::path(config.output_dir) / "report.json";
}

std::string cmd_inspect_checkpoint(const std::filesystem::path& checkpoint_path) {
    const Checkpoint ckpt = load_checkpoint(checkpoint_path);
    nlohmann::json j{{"path", checkpoint_path.string()},
                     {"d_feat", ckpt.config.d_feat},
                     {"d_token", ckpt.config.d_token},
                     {"layer_indices", ckpt.config.layer_indices},
                     {"config_fingerprint", ckpt.config_fingerprint},
                     {"step", ckpt.step},
                     {"has_optimizer_state", ckpt.has_optimizer_state},
                     {"trainable_parameters", ckpt.params.count()},
                     {"params_checksum", hex64(ckpt.params.checksum())}};
    return j.dump(2);
}

}  // namespace a2i
