#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "json.hpp"

#include "sclmetric/dataset.hpp"
#include "sclmetric/evaluation.hpp"
#include "sclmetric/training.hpp"

namespace sclmetric::cli {

inline constexpr int kConfigVersion = 1;

enum ExitCode : int { kOk = 0, kInternal = 1, kConfigFailure = 2, kDataFailure = 3, kNumericFailure = 4 };

/// Everything a command needs. The global seed is copied into the synth, split
/// and train sections by `resolve`.
struct RunConfig {
    std::uint64_t seed = 42;
    std::string synth_preset = "custom";  // custom | easy | hard
    SynthConfig synth;
    SplitSpec split;
    std::string train_regime = "finetune";  // finetune | synthetic
    TrainConfig train;
    EvalOptions eval;
    int distractors = 0;           // synthetic distractor subjects
    std::string extended_gallery;  // distractor CSV; wins over `distractors`
    bool svg = false;
    std::string data;        // embedding CSV; synthesized from `synth` when empty
    std::string checkpoint;  // eval: evaluate this model instead of training
    std::filesystem::path out = ".";
    std::optional<int> repetition;  // train/eval a single split

    void resolve();   // propagates the seed
    void validate() const;  // throws ConfigError
};

/// Parses a config document. Unknown keys, wrong types and a missing or
/// unsupported "version" raise ConfigError.
RunConfig parse_run_config(const nlohmann::json& doc);
RunConfig load_run_config(const std::filesystem::path& path);

/// Resolved config as a loadable document (the output directory is omitted).
nlohmann::json to_json(const RunConfig& cfg);

void cmd_synth(const RunConfig& cfg);
void cmd_train(const RunConfig& cfg);
void cmd_eval(const RunConfig& cfg);
void cmd_compare(const RunConfig& cfg);

/// Full command line entry point; returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace sclmetric::cli
