#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace multidx::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kDataError = 2, kInternal = 3 };

struct TrainArgs {
    std::string experiment;
    std::filesystem::path data;
    std::filesystem::path out;
    std::uint64_t seed = 0;
    std::size_t folds = 5;
    bool leaky_smote = false;
    std::vector<std::size_t> resolutions;  // image experiments
    std::optional<std::size_t> epochs;     // image experiments
    std::optional<std::filesystem::path> schema;
};

/// Trains, prints the metrics table and writes the artifact. A resolution
/// sweep writes <stem>-<res>.mdx per resolution, and image experiments also
/// write the training history next to each model as <stem>.history.csv.
int cmd_train(const TrainArgs& args, std::ostream& out, std::ostream& err);

/// Input by extension: .wav, .png, or .json holding a service request body
/// (or just its "inputs" object). Prints the prediction as JSON.
int cmd_predict(const std::filesystem::path& model, const std::filesystem::path& input, std::ostream& out,
                std::ostream& err);

/// Serves every *.mdx in `model_dir` until SIGTERM or SIGINT. The port falls
/// back to MULTIDX_PORT, then 8080.
int cmd_serve(const std::filesystem::path& model_dir, std::optional<int> port, std::ostream& out, std::ostream& err);

/// Full command line: multidx train|predict|serve [flags].
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace multidx::cli
