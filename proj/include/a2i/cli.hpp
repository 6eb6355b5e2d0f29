#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "a2i/config.hpp"

namespace a2i {

// Command implementations behind the CLI. Each writes the effective config
// next to its outputs and never mutates its inputs.

std::filesystem::path cmd_prepare_data(const RunConfig& config);

std::filesystem::path cmd_train(const RunConfig& config);

struct GenerateOutcome {
    std::vector<std::filesystem::path> images;
    std::vector<std::string> failures;  // "path: reason" per unreadable input
};
GenerateOutcome cmd_generate(const RunConfig& config,
                             const std::vector<std::string>& audio_paths);

std::filesystem::path cmd_evaluate(const RunConfig& config);

std::string cmd_inspect_checkpoint(const std::filesystem::path& checkpoint_path);

}  // namespace a2i
