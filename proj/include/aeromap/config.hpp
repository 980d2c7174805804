#pragma once

#include "aeromap/alignment.hpp"
#include "aeromap/bundle_adjust.hpp"
#include "aeromap/simulation.hpp"
#include "aeromap/submap_builder.hpp"

#include "json.hpp"

#include <string>

namespace aeromap {

enum class ExecutionMode { TwoWorker, Single };
std::string to_string(ExecutionMode m);
ExecutionMode execution_mode_from_string(const std::string& s);

struct VocabularyConfig {
    int k = 10;
    int L = 3;
    std::string path;           ///< empty: train from the dataset being run
    int sample_size = 50000;    ///< descriptors sampled for training
    int document_frames = 10;   ///< frames per IDF training document
    std::uint64_t seed = 0;
};

struct PipelineConfig {
    BuilderConfig builder;
    BAOptions ba;
    AlignmentOptions alignment;
    VocabularyConfig vocabulary;
    bool loop_closure = true;
    ExecutionMode mode = ExecutionMode::TwoWorker;
    int channel_capacity = 4;
    std::uint64_t seed = 0;
    std::string output_dir = "out";

    /// Propagates the top-level seed into every sub-config.
    void apply_seed(std::uint64_t s);
    void validate() const;
};

/// Unknown keys and wrong types raise ConfigError with the YAML line number.
PipelineConfig load_pipeline_config(const std::string& path);
PipelineConfig parse_pipeline_config(const std::string& yaml_text, const std::string& origin = "<string>");
ScenarioConfig load_scenario_config(const std::string& path);
ScenarioConfig parse_scenario_config(const std::string& yaml_text, const std::string& origin = "<string>");

/// Every field, defaults included.
nlohmann::json to_json(const PipelineConfig& c);
nlohmann::json to_json(const ScenarioConfig& c);

}  // namespace aeromap
