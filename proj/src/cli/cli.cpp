#include <pthread.h>
#include <signal.h>

#include <chrono>
#include <fstream>
#include <thread>

#include "CLI11.hpp"
#include "multidx/cli.hpp"
#include "multidx/pipeline.hpp"
#include "multidx/service.hpp"

namespace multidx::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Runs `body`, mapping failures to exit codes.
template <typename Body>
int guarded(std::ostream& err, Body body) {
    try {
        return body();
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const service::RequestError& e) {
        err << "error: " << e.what() << "\n";
        return e.status() >= 500 ? kInternal : kDataError;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return e.code() == ErrorCode::Internal ? kInternal : kDataError;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << "\n";
        return kInternal;
    }
}

std::string lower_extension(const fs::path& path) {
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext;
}

fs::path model_path(const fs::path& out, std::optional<std::size_t> resolution, bool sweep) {
    if (!sweep || !resolution) return out;
    const std::string ext = out.has_extension() ? out.extension().string() : ".mdx";
    return out.parent_path() / (out.stem().string() + "-" + std::to_string(*resolution) + ext);
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(file), ErrorCode::Io, "cannot open '" + path.string() + "' for writing");
    file << text;
    require(static_cast<bool>(file), ErrorCode::Io, "write to '" + path.string() + "' failed");
}

pipeline::PredictInput read_input(const modelstore::Artifact& artifact, const fs::path& input) {
    require(fs::exists(input), ErrorCode::Io, "input file '" + input.string() + "' does not exist");
    const std::string ext = lower_extension(input);
    if (ext == ".wav") return audio::read_wav(input);
    if (ext == ".png") return imaging::read_png(input);
    if (ext == ".json") {
        json body;
        try {
            body = json::parse(tabular::read_text_file(input));
        } catch (const json::exception& e) {
            fail(ErrorCode::Data, "invalid JSON in '" + input.string() + "': " + e.what());
        }
        if (body.is_object() && !body.contains("inputs")) body = json{{"inputs", body}};
        return service::parse_inputs(artifact, body);
    }
    fail(ErrorCode::Data, "unsupported input '" + input.string() + "': expected .wav, .png or .json");
}

}  // namespace

int cmd_train(const TrainArgs& args, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const auto ids = pipeline::experiment_ids();
        if (std::find(ids.begin(), ids.end(), args.experiment) == ids.end())
            throw UsageError("unknown experiment '" + args.experiment + "'");
        const auto& experiment = pipeline::experiment(args.experiment);
        const bool image = modelstore::input_kind(experiment.mode) == modelstore::InputKind::Image;
        if (!image && (!args.resolutions.empty() || args.epochs))
            throw UsageError("--resolution and --epochs apply to image experiments only");
        if (args.folds < 2) throw UsageError("--folds must be at least 2");
        require(fs::exists(args.data), ErrorCode::Io, "data path '" + args.data.string() + "' does not exist");

        pipeline::TrainOptions options;
        options.seed = args.seed;
        options.folds = args.folds;
        options.leaky_smote = args.leaky_smote;
        options.resolutions = args.resolutions;
        options.epochs = args.epochs;
        std::optional<tabular::FeatureSchema> schema;
        if (args.schema) schema = tabular::read_schema_json(*args.schema);

        const auto outcome = pipeline::train_experiment(experiment, args.data, options, schema);

        out << "experiment " << experiment.id << " (" << modelstore::to_string(experiment.mode) << "), seed "
            << args.seed << (args.leaky_smote ? ", leaky SMOTE" : "") << "\n";
        out << pipeline::format_metrics_table(outcome.rows);
        const bool sweep = outcome.artifacts.size() > 1;
        for (const auto& trained : outcome.artifacts) {
            const auto path = model_path(args.out, trained.resolution, sweep);
            modelstore::save(trained.artifact, path);
            out << "wrote " << path.string() << "\n";
            if (image) {
                auto history = path;
                history.replace_extension(".history.csv");
                write_text(history, cnn::history_csv(trained.history));
            }
        }
        return int{kOk};
    });
}

int cmd_predict(const fs::path& model, const fs::path& input, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const auto start = std::chrono::steady_clock::now();
        const auto artifact = modelstore::load(model);
        const auto prediction = pipeline::predict(artifact, read_input(artifact, input));
        service::PredictionResult result;
        result.mode = artifact.mode;
        result.probability_positive = prediction.probability_positive;
        result.label = prediction.label;
        result.model_version = artifact.model_version;
        result.latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
        out << service::to_json(result).dump() << "\n";
        return int{kOk};
    });
}

int cmd_serve(const fs::path& model_dir, std::optional<int> port, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const auto registry = service::Registry::load_directory(model_dir);
        auto options = service::ServerOptions::from_environment();
        if (port) options.port = *port;

        // Block the stop signals before any thread exists so only sigwait sees them.
        sigset_t signals, previous;
        sigemptyset(&signals);
        sigaddset(&signals, SIGTERM);
        sigaddset(&signals, SIGINT);
        pthread_sigmask(SIG_BLOCK, &signals, &previous);

        service::Server server(registry, options);
        int bound = 0;
        try {
            bound = server.bind();
        } catch (...) {
            pthread_sigmask(SIG_SETMASK, &previous, nullptr);
            throw;
        }
        out << "serving " << registry.artifacts().size() << " model(s) on port " << bound
            << (registry.empty() ? " (degraded: no models)" : "") << std::endl;

        std::thread waiter([&] {
            int received = 0;
            sigwait(&signals, &received);
            server.stop();
        });
        server.listen();
        // Wakes the waiter if listen ended for another reason; harmless otherwise.
        pthread_kill(waiter.native_handle(), SIGTERM);
        waiter.join();
        pthread_sigmask(SIG_SETMASK, &previous, nullptr);
        out << "stopped" << std::endl;
        return int{kOk};
    });
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Multimodal COVID-19 diagnostic models: train, predict, serve", "multidx"};
    app.require_subcommand(1);

    TrainArgs train;
    std::string data, output, schema;
    auto* train_cmd = app.add_subcommand("train", "Run an experiment preset and write its model");
    train_cmd->add_option("--experiment", train.experiment, "Preset id")
        ->required()
        ->check(CLI::IsMember(std::vector<std::string>{"exp1", "exp2", "exp31", "exp32", "exp4", "exp5", "exp61", "exp62"}));
    train_cmd->add_option("--data", data, "CSV file or class directory")->required();
    train_cmd->add_option("--out", output, "Model file (.mdx)")->required();
    train_cmd->add_option("--seed", train.seed, "Random seed");
    train_cmd->add_option("--folds", train.folds, "Stacking folds")->check(CLI::Range(2, 100));
    train_cmd->add_flag("--leaky-smote", train.leaky_smote, "Oversample before the split");
    train_cmd->add_option("--resolution", train.resolutions, "Image side length(s)")->delimiter(',')->check(CLI::Range(16, 4096));
    std::size_t epochs = 0;
    auto* epochs_opt = train_cmd->add_option("--epochs", epochs, "CNN epochs")->check(CLI::PositiveNumber);
    train_cmd->add_option("--schema", schema, "Schema JSON (label column, classes, kinds)");

    std::string model, input;
    auto* predict_cmd = app.add_subcommand("predict", "Predict one input with a model file");
    predict_cmd->add_option("--model", model, "Model file")->required();
    predict_cmd->add_option("--input", input, "Input file (.json, .wav or .png)")->required();

    std::string model_dir;
    int port = 0;
    auto* serve_cmd = app.add_subcommand("serve", "Serve a directory of models over HTTP");
    serve_cmd->add_option("--model-dir", model_dir, "Directory of .mdx files (default MULTIDX_MODEL_DIR)");
    auto* port_opt = serve_cmd->add_option("--port", port, "Port (default MULTIDX_PORT or 8080)")->check(CLI::Range(0, 65535));

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n" << "run 'multidx --help' for usage\n";
        return kUsage;
    }

    if (train_cmd->parsed()) {
        train.data = data;
        train.out = output;
        if (*epochs_opt) train.epochs = epochs;
        if (!schema.empty()) train.schema = fs::path(schema);
        return cmd_train(train, out, err);
    }
    if (predict_cmd->parsed()) return cmd_predict(model, input, out, err);

    if (model_dir.empty()) {
        const char* env = std::getenv("MULTIDX_MODEL_DIR");
        if (env == nullptr || *env == '\0') {
            err << "error: --model-dir or MULTIDX_MODEL_DIR is required\n";
            return kUsage;
        }
        model_dir = env;
    }
    return cmd_serve(model_dir, *port_opt ? std::optional<int>(port) : std::nullopt, out, err);
}

}  // namespace multidx::cli
