#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "a2i/conditioning.hpp"
#include "a2i/training.hpp"

namespace a2i {

// Flat, schema-validated run configuration. A config file is a single JSON
// object of these keys; unknown keys are rejected. CLI flags override file
// values, and the effective merged config is written next to every output.
struct RunConfig {
    // run identity / IO
    std::string backbone = "toy";
    std::string backbone_weights;
    std::uint64_t seed = 0;
    std::string output_dir = "out";
    std::string data_root;
    std::string manifest;
    std::string checkpoint;
    std::string generation_dir;
    std::string split = "train";

    // data pipeline
    double crop_seconds     = 5.0;
    double filter_threshold = 0.75;

    // embedder
    std::vector<int> layer_indices{4, 8, 12};

    // optimization
    std::int64_t steps            = 60000;
    double lr                     = 8e-5;
    int batch_size                = 8;
    double lambda_l1              = 1e-4;
    double lambda_cl              = 1e-3;
    std::string variant           = "base";  // base | cl
    std::int64_t checkpoint_every = 1000;
    double adam_beta1             = 0.9;
    double adam_beta2             = 0.999;
    double adam_eps               = 1e-8;

    // conditioning
    std::string prompt         = "A photo of a";
    std::string token_position = "after_prompt";

    // sampling
    int sampler_steps     = 50;
    double guidance_scale = 0.0;
    int num_images        = 1;

    // evaluation
    double aic_threshold = 0.75;
    std::string metrics  = "ais,iis,aic,fid";

    void validate() const;
    std::string fingerprint() const;  // hash of the canonical serialization

    TrainConfig train_config() const;
    DatapipeConfig datapipe_config() const;
};

// The published key set with descriptions; load_config rejects anything else.
const std::map<std::string, std::string>& config_schema();

RunConfig default_config();
RunConfig load_config(const std::filesystem::path& path);
// Applies overrides ("key=value") on top; values parse per the schema type.
void apply_override(RunConfig& config, const std::string& key, const std::string& value);
std::string dump_config(const RunConfig& config, int indent = 2);
void write_effective_config(const RunConfig& config, const std::filesystem::path& dir);

}  // namespace a2i
