#include <iostream>

#include "CLI11.hpp"
#include "a2i/cli.hpp"

namespace {

// exit codes: 0 success, 1 usage/config error, 2 partial data failure,
// 3 runtime failure

struct GlobalOpts {
    std::string config_path;
    std::vector<std::string> overrides;  // key=value
    std::optional<std::uint64_t> seed;
    std::optional<std::string> output_dir;
    std::optional<std::string> backbone;
    std::optional<std::string> variant;
};

a2i::RunConfig resolve_config(const GlobalOpts& opts) {
    a2i::RunConfig config =
        opts.config_path.empty() ? a2i::default_config() : a2i::load_config(opts.config_path);
    for (const auto& kv : opts.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
        a2i::apply_override(config, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (opts.seed) config.seed = *opts.seed;
    if (opts.output_dir) config.output_dir = *opts.output_dir;
    if (opts.backbone) config.backbone = *opts.backbone;
    if (opts.variant) config.variant = *opts.variant;
    config.validate();
    return config;
}

void add_global_opts(CLI::App* app, GlobalOpts& opts) {
    app->add_option("--config", opts.config_path, "config file (JSON object of schema keys)");
    app->add_option("--set", opts.overrides, "override a config key, e.g. --set steps=100")
        ->take_all();
    app->add_option("--seed", opts.seed, "master seed");
    app->add_option("--output-dir", opts.output_dir, "output directory");
    app->add_option("--backbone", opts.backbone, "backbone name (toy|reference)")
        ->check(CLI::IsMember({"toy", "reference"}));
    app->add_option("--variant", opts.variant, "loss variant (base|cl)")
        ->check(CLI::IsMember({"base", "cl"}));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"audio-conditioned image generation toolkit"};
    app.require_subcommand(1);

    GlobalOpts opts;

    auto* prepare = app.add_subcommand("prepare-data",
                                       "build a training manifest from an audio/frame tree");
    add_global_opts(prepare, opts);
    std::string data_root;
    prepare->add_option("--data-root", data_root, "source tree root");

    auto* train = app.add_subcommand("train", "fit the embedder against a manifest");
    add_global_opts(train, opts);
    std::string manifest_path;
    train->add_option("--manifest", manifest_path, "manifest path");

    auto* generate = app.add_subcommand("generate", "generate images from audio files");
    add_global_opts(generate, opts);
    std::string checkpoint_path;
    std::vector<std::string> audio_paths;
    int num_images = 0;
    generate->add_option("--checkpoint", checkpoint_path, "embedder checkpoint");
    generate->add_option("--audio", audio_paths, "input wav files")->take_all();
    generate->add_option("--num-images", num_images, "images per input");

    auto* evaluate = app.add_subcommand("evaluate", "score a generation directory");
    add_global_opts(evaluate, opts);
    std::string generation_dir;
    std::vector<std::string> metrics;
    evaluate->add_option("--generation-dir", generation_dir, "directory of PNGs + sidecars");
    evaluate->add_option("--manifest", manifest_path, "manifest path");
    evaluate->add_option("--metric", metrics, "restrict to a metric (repeatable)")
        ->check(CLI::IsMember({"ais", "iis", "aic", "fid"}))
        ->take_all();

    auto* inspect = app.add_subcommand("inspect-checkpoint", "print checkpoint metadata");
    std::string inspect_path;
    inspect->add_option("path", inspect_path, "checkpoint file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);  // prints help or the parse error
        return rc == 0 ? 0 : 1;
    }

    try {
        if (inspect->parsed()) {
            std::cout << a2i::cmd_inspect_checkpoint(inspect_path) << "\n";
            return 0;
        }

        a2i::RunConfig config = resolve_config(opts);
        if (prepare->parsed()) {
            if (!data_root.empty()) config.data_root = data_root;
            a2i::cmd_prepare_data(config);
        } else if (train->parsed()) {
            if (!manifest_path.empty()) config.manifest = manifest_path;
            a2i::cmd_train(config);
        } else if (generate->parsed()) {
            if (!checkpoint_path.empty()) config.checkpoint = checkpoint_path;
            if (num_images > 0) config.num_images = num_images;
            const auto outcome = a2i::cmd_generate(config, audio_paths);
            std::cout << "wrote " << outcome.images.size() << " images\n";
            if (!outcome.failures.empty()) {
                for (const auto& f : outcome.failures) std::cerr << "failed: " << f << "\n";
                return 2;
            }
        } else if (evaluate->parsed()) {
            if (!generation_dir.empty()) config.generation_dir = generation_dir;
            if (!manifest_path.empty()) config.manifest = manifest_path;
            if (!metrics.empty()) {
                std::string joined;
                for (const auto& m : metrics) joined += (joined.empty() ? "" : ",") + m;
                config.metrics = joined;
            }
            const auto report = a2i::cmd_evaluate(config);
            std::cout << "report: " << report.string() << "\n";
        }
        return 0;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
