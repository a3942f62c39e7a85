#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "dcvsr/degrade.hpp"
#include "dcvsr/pipeline.hpp"
#include "dcvsr/toy_models.hpp"

namespace dcvsr {

enum class DenoiserKind { toy, analytic };

struct RunConfig {
    PipelineConfig pipeline;
    DegradationConfig degradation;
    DenoiserKind denoiser = DenoiserKind::toy;
    ToyNetSpec toy;
    double analytic_mu = 0.0;
    int codec_factor   = 8;
    int flow_block     = 8;
    int flow_radius    = 4;
};

// Applies one key=value setting; unknown keys and malformed values throw ConfigError.
void apply_setting(RunConfig& cfg, std::string_view key, std::string_view value);

// Plain-text key=value lines; '#' starts a comment; blank lines ignored.
RunConfig parse_run_config(std::string_view text, RunConfig base = {});
RunConfig load_run_config(const std::filesystem::path& path, RunConfig base = {});

// Every key with its resolved value, one "key=value" per line, in a fixed order.
std::string format_run_config(const RunConfig& cfg);
std::vector<std::string> run_config_keys();

void validate(const RunConfig& cfg);

TileDims parse_tile_dims(std::string_view text);

}  // namespace dcvsr
