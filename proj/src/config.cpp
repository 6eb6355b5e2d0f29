#include "a2i/config.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace a2i {

namespace {

using nlohmann::json;

json to_json(const RunConfig& c) {
    return json{{"backbone", c.backbone},
                {"backbone_weights", c.backbone_weights},
                {"seed", c.seed},
                {"output_dir", c.output_dir},
                {"data_root", c.data_root},
                {"manifest", c.manifest},
                {"checkpoint", c.checkpoint},
                {"generation_dir", c.generation_dir},
                {"split", c.split},
                {"crop_seconds", c.crop_seconds},
                {"filter_threshold", c.filter_threshold},
                {"layer_indices", c.layer_indices},
                {"steps", c.steps},
                {"lr", c.lr},
                {"batch_size", c.batch_size},
                {"lambda_l1", c.lambda_l1},
                {"lambda_cl", c.lambda_cl},
                {"variant", c.variant},
                {"checkpoint_every", c.checkpoint_every},
                {"adam_beta1", c.adam_beta1},
                {"adam_beta2", c.adam_beta2},
                {"adam_eps", c.adam_eps},
                {"prompt", c.prompt},
                {"token_position", c.token_position},
                {"sampler_steps", c.sampler_steps},
                {"guidance_scale", c.guidance_scale},
                {"num_images", c.num_images},
                {"aic_threshold", c.aic_threshold},
                {"metrics", c.metrics}};
}

void assign_key(RunConfig& c, const std::string& key, const json& v) {
    try {
        if (key == "backbone") c.backbone = v.get<std::string>();
        else if (key == "backbone_weights") c.backbone_weights = v.get<std::string>();
        else if (key == "seed") c.seed = v.get<std::uint64_t>();
        else if (key == "output_dir") c.output_dir = v.get<std::string>();
        else if (key == "data_root") c.data_root = v.get<std::string>();
        else if (key == "manifest") c.manifest = v.get<std::string>();
        else if (key == "checkpoint") c.checkpoint = v.get<std::string>();
        else if (key == "generation_dir") c.generation_dir = v.get<std::string>();
        else if (key == "split") c.split = v.get<std::string>();
        else if (key == "crop_seconds") c.crop_seconds = v.get<double>();
        else if (key == "filter_threshold") c.filter_threshold = v.get<double>();
        else if (key == "layer_indices") c.layer_indices = v.get<std::vector<int>>();
        else if (key == "steps") c.steps = v.get<std::int64_t>();
        else if (key == "lr") c.lr = v.get<double>();
        else if (key == "batch_size") c.batch_size = v.get<int>();
        else if (key == "lambda_l1") c.lambda_l1 = v.get<double>();
        else if (key == "lambda_cl") c.lambda_cl = v.get<double>();
        else if (key == "variant") c.variant = v.get<std::string>();
        else if (key == "checkpoint_every") c.checkpoint_every = v.get<std::int64_t>();
        else if (key == "adam_beta1") c.adam_beta1 = v.get<double>();
        else if (key == "adam_beta2") c.adam_beta2 = v.get<double>();
        else if (key == "adam_eps") c.adam_eps = v.get<double>();
        else if (key == "prompt") c.prompt = v.get<std::string>();
        else if (key == "token_position") c.token_position = v.get<std::string>();
        else if (key == "sampler_steps") c.sampler_steps = v.get<int>();
        else if (key == "guidance_scale") c.guidance_scale = v.get<double>();
        else if (key == "num_images") c.num_images = v.get<int>();
        else if (key == "aic_threshold") c.aic_threshold = v.get<double>();
        else if (key == "metrics") c.metrics = v.get<std::string>();
        else
            throw std::invalid_argument("unknown config key: " + key);
    } catch (const json::exception& e) {
        throw std::invalid_argument("config key '" + key + "': wrong value type (" + e.what() +
                                    ")");
    }
}

}  // namespace

// One entry per accepted key; anything else is rejected at load time.
const std::map<std::string, std::string>& config_schema() {
    static const std::map<std::string, std::string> schema{
        {"backbone", "string: backbone registry name, toy|reference"},
        {"backbone_weights", "string: weights file path for the reference backbone"},
        {"seed", "integer: master seed for every stochastic choice"},
        {"output_dir", "string: directory receiving outputs"},
        {"data_root", "string: source tree {root}/{class}/{clip}.wav (+.frames/)"},
        {"manifest", "string: manifest path (output of prepare-data)"},
        {"checkpoint", "string: embedder checkpoint path"},
        {"generation_dir", "string: directory of generated images + sidecars"},
        {"split", "string: manifest split tag"},
        {"crop_seconds", "real: audio crop length in seconds"},
        {"filter_threshold", "real: consistency-filter agreement threshold in [0,1]"},
        {"layer_indices", "int list: 1-based encoder layers fed to the embedder"},
        {"steps", "integer: optimization steps"},
        {"lr", "real: learning rate"},
        {"batch_size", "integer: samples per step"},
        {"lambda_l1", "real: weight of the l1 token regularizer"},
        {"lambda_cl", "real: weight of the classification loss"},
        {"variant", "string: loss variant, base|cl"},
        {"checkpoint_every", "integer: checkpoint interval in steps"},
        {"adam_beta1", "real: optimizer first-moment decay"},
        {"adam_beta2", "real: optimizer second-moment decay"},
        {"adam_eps", "real: optimizer epsilon"},
        {"prompt", "string: conditioning prompt"},
        {"token_position", "string: audio token placement, after_prompt|sequence_end"},
        {"sampler_steps", "integer: reverse-sampling steps"},
        {"guidance_scale", "real: classifier-free guidance scale, 0 = off"},
        {"num_images", "integer: images per audio input"},
        {"aic_threshold", "real: AIC agreement threshold in [0,1]"},
        {"metrics", "string: comma-separated subset of ais,iis,aic,fid"},
    };
    return schema;
}

void RunConfig::validate() const {
    auto usage = [](const std::string& msg) { throw std::invalid_argument("config: " + msg); };
    if (backbone != "toy" && backbone != "reference")
        usage("backbone must be toy or reference, got '" + backbone + "'");
    if (variant != "base" && variant != "cl")
        usage("variant must be base or cl, got '" + variant + "'");
    if (steps < 0) usage("steps must be >= 0");
    if (lr < 0) usage("lr must be >= 0");
    if (batch_size < 1) usage("batch_size must be >= 1");
    if (lambda_l1 < 0) usage("lambda_l1 must be >= 0");
    if (lambda_cl < 0) usage("lambda_cl must be >= 0");
    if (crop_seconds <= 0) usage("crop_seconds must be positive");
    if (filter_threshold < 0 || filter_threshold > 1)
        usage("filter_threshold must be in [0, 1]");
    if (aic_threshold < 0 || aic_threshold > 1) usage("aic_threshold must be in [0, 1]");
    if (layer_indices.empty()) usage("layer_indices must be nonempty");
    for (std::size_t i = 0; i < layer_indices.size(); ++i) {
        if (layer_indices[i] < 1) usage("layer indices are 1-based");
        if (i > 0 && layer_indices[i] <= layer_indices[i - 1])
            usage("layer_indices must be strictly increasing");
    }
    if (sampler_steps < 1) usage("sampler_steps must be >= 1");
    if (guidance_scale < 0) usage("guidance_scale must be >= 0");
    if (num_images < 1) usage("num_images must be >= 1");
    if (checkpoint_every < 1) usage("checkpoint_every must be >= 1");
    if (token_position != "after_prompt" && token_position != "sequence_end")
        usage("token_position must be after_prompt or sequence_end, got '" + token_position +
              "'");
    std::stringstream ss(metrics);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item != "ais" && item != "iis" && item != "aic" && item != "fid")
            usage("unknown metric '" + item + "'");
    }
}

std::string RunConfig::fingerprint() const {
    return hex64(fnv1a64(to_json(*this).dump()));
}

TrainConfig RunConfig::train_config() const {
    TrainConfig t;
    t.steps              = steps;
    t.lr                 = lr;
    t.batch_size         = batch_size;
    t.lambda_l1          = lambda_l1;
    t.lambda_cl          = lambda_cl;
    t.use_cl             = variant == "cl";
    t.seed               = seed;
    t.checkpoint_every   = checkpoint_every;
    t.prompt             = prompt;
    t.token_position     = token_position_from_string(token_position);
    t.layer_indices      = layer_indices;
    t.adam_beta1         = adam_beta1;
    t.adam_beta2         = adam_beta2;
    t.adam_eps           = adam_eps;
    t.config_fingerprint = fingerprint();
    t.output_dir         = output_dir;
    return t;
}

DatapipeConfig RunConfig::datapipe_config() const {
    DatapipeConfig d;
    d.crop_seconds     = crop_seconds;
    d.filter_threshold = filter_threshold;
    d.seed             = seed;
    d.split            = split;
    d.output_dir       = output_dir;
    return d;
}

RunConfig default_config() {
    return RunConfig{};
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::invalid_argument("cannot open config file: " + path.string());
    json j;
    try {
        j = json::parse(is);
    } catch (const json::exception& e) {
        throw std::invalid_argument("config file " + path.string() + ": " + e.what());
    }
    if (!j.is_object())
        throw std::invalid_argument("config file must hold a single JSON object");
    RunConfig c;
    for (const auto& [key, value] : j.items()) assign_key(c, key, value);
    return c;
}

void apply_override(RunConfig& config, const std::string& key, const std::string& value) {
    if (config_schema().count(key) == 0)
        throw std::invalid_argument("unknown config key: " + key);
    // parse the value with JSON rules; bare words fall back to strings
    json v = json::parse(value, nullptr, false);
    if (v.is_discarded()) v = value;
    assign_key(config, key, v);
}

std::string dump_config(const RunConfig& config, int indent) {
    return to_json(config).dump(indent);
}

void write_effective_config(const RunConfig& config, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    std::ofstream os(dir / "config.effective.json", std::ios::binary | std::ios::trunc);
    if (!os) fail("cannot write effective config under " + dir.string());
    os << dump_config(config) << "\n";
}

}  // namespace a2i
