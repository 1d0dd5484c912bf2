#include <algorithm>
#include <cmath>
#include <cstdio>

#include "multidx/pipeline.hpp"
#include "multidx/random.hpp"

namespace multidx::pipeline {

namespace {

namespace fs = std::filesystem;
using tabular::FeatureFrame;
using tabular::FeatureKind;
using tabular::FeatureSchema;

constexpr std::uint64_t kSplitStream = 0x5711;
constexpr std::uint64_t kSmoteStream = 0x5307;

const std::vector<std::string> kSymptoms{"Headache", "Fever", "Cough", "Sore throat", "Shortness of breath"};

const std::vector<std::string> kBlood25{
    "Age",     "Hemoglobin", "RBC",        "HCT",         "MCV",        "MCH",       "MCHC",
    "RDW",     "TWBC",       "Neutrophils", "Eosinophils", "Basophils",  "Lymphocytes", "Monocytes",
    "Platelets", "MPV",      "Albumin",    "Sodium",      "Potassium",  "Alanine transaminase",
    "Aspartate transaminase", "Hs-CRP",    "Creatinine",  "Urea",       "PT"};

const std::vector<std::string> kBlood5{"Age", "TWBC", "Eosinophils", "Monocytes", "Platelets"};

const std::vector<std::string> kMortality7{"Neutrophils", "Lymphocytes", "Monocytes", "Platelets",
                                           "Albumin",     "Hs-CRP",      "PT"};

const std::vector<std::string> kMortality9{"Age", "MCHC", "RDW", "TWBC", "BE", "PT", "PTT", "RR", "SpO2"};

const std::vector<Experiment>& experiments() {
    static const std::vector<Experiment> table{
        {"exp1", Mode::Symptoms, kSymptoms, FeatureKind::Binary, 0.7, 0.0, {}},
        {"exp2", Mode::Cough, audio::AudioFeatures::feature_names(), FeatureKind::Numeric, 0.7, 0.0, {}},
        {"exp31", Mode::Blood25, kBlood25, FeatureKind::Numeric, 0.7, 0.0, {}},
        {"exp32", Mode::Blood5, kBlood5, FeatureKind::Numeric, 0.7, 0.0, {}},
        {"exp4", Mode::Raman, {}, FeatureKind::Numeric, 0.7, 0.2, {32, 64, 128, 256, 512, 800}},
        {"exp5", Mode::Ecg, {}, FeatureKind::Numeric, 0.7, 0.2, {imaging::kEcgSize}},
        {"exp61", Mode::Mortality7, kMortality7, FeatureKind::Numeric, 0.8, 0.0, {}},
        {"exp62", Mode::Mortality9, kMortality9, FeatureKind::Numeric, 0.8, 0.0, {}},
    };
    return table;
}

std::string version_tag(const Experiment& experiment, std::uint64_t seed, std::optional<std::size_t> resolution) {
    std::string tag = experiment.id + "-seed" + std::to_string(seed);
    if (resolution) tag += "-" + std::to_string(*resolution) + "px";
    return tag;
}

metrics::MetricsReport score(std::span<const int> truth, std::span<const int> predicted) {
    return metrics::compute_metrics(metrics::confusion(truth, predicted, 1));
}

std::vector<fs::path> files_with_extension(const fs::path& directory, std::string_view extension) {
    require(fs::is_directory(directory), ErrorCode::Data, "missing class directory '" + directory.string() + "'");
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(directory)) {
        if (!entry.is_regular_file()) continue;
        std::string ext = entry.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
        if (ext == extension) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    return files;
}

constexpr std::array<std::string_view, 2> kClassDirectories{"negative", "positive"};

/// Keeps the experiment's features (in preset order) from a user schema.
FeatureSchema restrict_schema(const Experiment& experiment, const FeatureSchema& schema) {
    FeatureSchema out;
    out.label_name = schema.label_name;
    out.class_names = schema.class_names;
    const bool has_categories = !schema.categories.empty();
    for (const auto& name : experiment.features) {
        const auto index = schema.index_of(name);
        require(index.has_value(), ErrorCode::Data, "schema mismatch: schema has no feature '" + name + "'");
        out.feature_names.push_back(name);
        out.feature_kinds.push_back(schema.feature_kinds[*index]);
        if (has_categories) out.categories.push_back(schema.categories[*index]);
    }
    out.validate();
    return out;
}

tabular::SplitSpec split_spec(const Experiment& experiment, std::uint64_t seed) {
    tabular::SplitSpec spec;
    spec.train_fraction = experiment.train_fraction;
    spec.validation_fraction = experiment.validation_fraction;
    spec.seed = derive_seed(seed, kSplitStream);
    spec.stratified = true;
    return spec;
}

std::size_t class_count(std::span<const int> labels) {
    int top = 1;
    for (int label : labels) {
        require(label >= 0, ErrorCode::Data, "negative class label");
        top = std::max(top, label);
    }
    return static_cast<std::size_t>(top) + 1;
}

cnn::LabeledTensors gather(const std::vector<cnn::Tensor>& tensors, std::span<const int> labels,
                           std::span<const std::size_t> indices) {
    cnn::LabeledTensors out;
    for (std::size_t i : indices) {
        out.inputs.push_back(tensors[i]);
        out.labels.push_back(labels[i]);
    }
    return out;
}

/// Shared by the Raman and ECG experiments: split, train per resolution, score.
template <typename MakeTensor>
TrainOutcome train_images(const Experiment& experiment, std::size_t count, std::span<const int> labels,
                          const TrainOptions& options, modelstore::ImageKind kind, MakeTensor make_tensor) {
    require(count == labels.size(), ErrorCode::InvalidArgument, "image count does not match label count");
    require(count >= 2, ErrorCode::Data, "need at least two samples");
    const std::size_t classes = class_count(labels);
    const auto indices = tabular::split_indices(labels, classes, split_spec(experiment, options.seed));
    const auto resolutions = options.resolutions.empty() ? experiment.default_resolutions : options.resolutions;

    TrainOutcome outcome;
    for (std::size_t resolution : resolutions) {
        std::vector<cnn::Tensor> tensors;
        tensors.reserve(count);
        for (std::size_t i = 0; i < count; ++i) tensors.push_back(make_tensor(i, resolution));

        cnn::TrainConfig config;
        config.seed = options.seed;
        if (options.epochs) config.epochs = *options.epochs;
        auto layers = options.architecture ? *options.architecture : cnn::default_architecture(classes);
        const auto initial = cnn::build_model({resolution, resolution, 1}, std::move(layers), classes, config);

        const auto training = gather(tensors, labels, indices.train);
        std::optional<cnn::LabeledTensors> validation;
        if (!indices.validation.empty()) validation = gather(tensors, labels, indices.validation);
        auto result = cnn::train(initial, training, validation);

        const auto test = gather(tensors, labels, indices.test);
        std::vector<int> predicted;
        for (const auto& input : test.inputs) predicted.push_back(cnn::predict_label(result.model, input));
        const std::string size = std::to_string(resolution);
        outcome.rows.push_back({"CNN " + size + "x" + size, score(test.labels, predicted)});

        Artifact artifact;
        artifact.mode = experiment.mode;
        artifact.model_version = version_tag(experiment, options.seed, resolution);
        artifact.image = modelstore::ImageDescriptor{kind, resolution};
        artifact.model = std::move(result.model);
        outcome.artifacts.push_back({std::move(artifact), resolution, std::move(result.history)});
    }
    return outcome;
}

std::string percent(const std::optional<double>& value) {
    if (!value) return "-";
    char buffer[32];
    std::snprintf(buffer, sizeof(buffer), "%.2f", 100.0 * *value);
    return buffer;
}

}  // namespace

const Experiment& experiment(std::string_view id) {
    for (const auto& e : experiments())
        if (e.id == id) return e;
    fail(ErrorCode::InvalidArgument, "unknown experiment '" + std::string(id) + "'");
}

std::vector<std::string_view> experiment_ids() {
    std::vector<std::string_view> ids;
    for (const auto& e : experiments()) ids.push_back(e.id);
    return ids;
}

FeatureSchema default_schema(const Experiment& experiment) {
    require(!experiment.features.empty(), ErrorCode::InvalidArgument,
            "experiment '" + experiment.id + "' has no tabular features");
    FeatureSchema schema = FeatureSchema::numeric(experiment.features);
    schema.feature_kinds.assign(experiment.features.size(), experiment.feature_kind);
    return schema;
}

// --- training ----------------------------------------------------------------

TrainOutcome train_tabular(const Experiment& experiment, const FeatureFrame& frame, const TrainOptions& options) {
    require(modelstore::input_kind(experiment.mode) != modelstore::InputKind::Image, ErrorCode::InvalidArgument,
            "experiment '" + experiment.id + "' is not tabular");
    frame.validate();
    require(frame.labeled(), ErrorCode::Data, "training data has no labels");
    require(frame.schema.feature_names == experiment.features, ErrorCode::Data,
            "schema mismatch: features differ from experiment '" + experiment.id + "'");

    const auto encoder = tabular::OneHotEncoder::fit(frame);
    const FeatureFrame encoded = encoder.transform(frame);
    const FeatureFrame imputed = tabular::impute_knn(encoded, options.imputer_k);

    const tabular::SmoteOptions smote{options.smote_k, derive_seed(options.seed, kSmoteStream)};
    const auto split = split_spec(experiment, options.seed);
    FeatureFrame train, test;
    if (options.leaky_smote) {
        auto parts = tabular::split(tabular::smote_balance(imputed, smote), split);
        train = std::move(parts.train);
        test = std::move(parts.test);
    } else {
        auto parts = tabular::split(imputed, split);
        train = tabular::smote_balance(parts.train, smote);
        test = std::move(parts.test);
    }
    const std::vector<FeatureFrame> others{test};
    auto scaled = tabular::scale_standard(train, others);

    stacking::StackSpec spec = options.stack ? *options.stack : stacking::preset(experiment.id, options.seed);
    spec.folds = options.folds;
    spec.seed = options.seed;
    auto model = stacking::fit_stack(spec, scaled.train);

    TrainOutcome outcome;
    const FeatureFrame& scored = scaled.others[0];
    const std::vector<int> empty;
    const std::span<const int> truth = scored.labels ? std::span<const int>(*scored.labels) : std::span<const int>(empty);
    for (const auto& base : model.bases) {
        const auto predicted = learners::predict_label(base, scored.values);
        outcome.rows.push_back({std::string(learners::short_name(base.spec.kind())), score(truth, predicted)});
    }
    const auto stacked = stacking::predict_stack(model, scored.values);
    outcome.rows.push_back({"Stacked (" + std::string(learners::short_name(model.meta.spec.kind())) + ")",
                            score(truth, stacked.labels)});

    Artifact artifact;
    artifact.mode = experiment.mode;
    artifact.model_version = version_tag(experiment, options.seed, std::nullopt);
    artifact.tabular = modelstore::TabularPreprocessing{frame.schema, encoder, encoded.values, options.imputer_k,
                                                        std::move(scaled.scaler)};
    artifact.model = std::move(model);
    outcome.artifacts.push_back({std::move(artifact), std::nullopt, {}});
    return outcome;
}

TrainOutcome train_raman(const Experiment& experiment, const SpectraSet& data, const TrainOptions& options) {
    require(experiment.mode == Mode::Raman, ErrorCode::InvalidArgument,
            "experiment '" + experiment.id + "' is not a Raman experiment");
    return train_images(experiment, data.spectra.rows(), data.labels, options, modelstore::ImageKind::RamanTrace,
                        [&](std::size_t i, std::size_t resolution) {
                            return cnn::image_to_tensor(imaging::rasterize_spectrum(data.spectra.row(i), resolution));
                        });
}

TrainOutcome train_ecg(const Experiment& experiment, const ImageSet& data, const TrainOptions& options) {
    require(experiment.mode == Mode::Ecg, ErrorCode::InvalidArgument,
            "experiment '" + experiment.id + "' is not an ECG experiment");
    return train_images(experiment, data.images.size(), data.labels, options, modelstore::ImageKind::EcgReport,
                        [&](std::size_t i, std::size_t resolution) {
                            return cnn::image_to_tensor(imaging::preprocess_ecg(data.images[i], resolution));
                        });
}

// --- loading -----------------------------------------------------------------

FeatureFrame load_tabular(const Experiment& experiment, const fs::path& csv, const std::optional<FeatureSchema>& schema) {
    const FeatureSchema keep = schema ? restrict_schema(experiment, *schema) : default_schema(experiment);
    return tabular::read_csv(csv, keep);
}

FeatureFrame load_cough(const Experiment& experiment, const fs::path& data, const std::optional<FeatureSchema>& schema) {
    if (!fs::is_directory(data)) return load_tabular(experiment, data, schema);
    FeatureFrame frame;
    frame.schema = schema ? restrict_schema(experiment, *schema) : default_schema(experiment);
    require(frame.schema.class_names.size() == 2, ErrorCode::Data, "audio folders hold exactly two classes");
    std::vector<int> labels;
    for (std::size_t cls = 0; cls < kClassDirectories.size(); ++cls) {
        for (const auto& path : files_with_extension(data / kClassDirectories[cls], ".wav")) {
            frame.values.append_row(audio::extract_features(audio::read_wav(path)).values());
            labels.push_back(static_cast<int>(cls));
        }
    }
    require(!labels.empty(), ErrorCode::Data, "no .wav files under '" + data.string() + "'");
    frame.labels = std::move(labels);
    return frame;
}

SpectraSet load_spectra(const fs::path& csv, const std::optional<FeatureSchema>& schema) {
    const auto table = tabular::parse_csv_table(tabular::read_text_file(csv));
    const std::string label_name = schema ? schema->label_name : "label";
    std::vector<std::string> columns;
    for (const auto& name : table.header)
        if (name != label_name) columns.push_back(name);
    require(columns.size() >= 2, ErrorCode::Data, "spectra need at least two intensity columns");
    auto frame_schema = FeatureSchema::numeric(columns, label_name);
    if (schema) frame_schema.class_names = schema->class_names;
    const auto frame = tabular::frame_from_table(table, frame_schema);
    for (std::size_t r = 0; r < frame.rows(); ++r)
        for (std::size_t c = 0; c < frame.cols(); ++c)
            require(!frame.is_missing(r, c), ErrorCode::Data,
                    "spectrum at row " + std::to_string(r + 1) + " has a missing intensity");
    return SpectraSet{frame.values, *frame.labels};
}

ImageSet load_images(const fs::path& directory) {
    ImageSet set;
    for (std::size_t cls = 0; cls < kClassDirectories.size(); ++cls) {
        for (const auto& path : files_with_extension(directory / kClassDirectories[cls], ".png")) {
            set.images.push_back(imaging::read_png(path));
            set.labels.push_back(static_cast<int>(cls));
        }
    }
    require(!set.images.empty(), ErrorCode::Data, "no .png files under '" + directory.string() + "'");
    return set;
}

TrainOutcome train_experiment(const Experiment& experiment, const fs::path& data, const TrainOptions& options,
                              const std::optional<FeatureSchema>& schema) {
    switch (experiment.mode) {
        case Mode::Raman: return train_raman(experiment, load_spectra(data, schema), options);
        case Mode::Ecg: return train_ecg(experiment, load_images(data), options);
        case Mode::Cough: return train_tabular(experiment, load_cough(experiment, data, schema), options);
        default: return train_tabular(experiment, load_tabular(experiment, data, schema), options);
    }
}

std::string format_metrics_table(const std::vector<MetricsRow>& rows) {
    std::size_t width = 5;
    for (const auto& row : rows) width = std::max(width, row.model.size());
    char line[256];
    const int w = static_cast<int>(width);
    std::string out;
    std::snprintf(line, sizeof(line), "%-*s  %9s  %9s  %9s  %9s\n", w, "model", "accuracy", "precision", "recall", "f1");
    out += line;
    for (const auto& row : rows) {
        std::snprintf(line, sizeof(line), "%-*s  %9s  %9s  %9s  %9s\n", w, row.model.c_str(),
                      percent(row.report.accuracy).c_str(), percent(row.report.precision).c_str(),
                      percent(row.report.recall).c_str(), percent(row.report.f1).c_str());
        out += line;
    }
    return out;
}

// --- prediction --------------------------------------------------------------

std::string_view positive_label(Mode mode) noexcept {
    return modelstore::is_mortality(mode) ? "high-risk" : "covid-positive";
}

std::string_view negative_label(Mode mode) noexcept {
    return modelstore::is_mortality(mode) ? "low-risk" : "covid-negative";
}

std::vector<double> prepare_tabular(const modelstore::TabularPreprocessing& prep, std::span<const double> raw) {
    require(raw.size() == prep.input_schema.width(), ErrorCode::Data,
            "expected " + std::to_string(prep.input_schema.width()) + " features, got " + std::to_string(raw.size()));
    auto row = prep.encoder.transform_row(raw);
    if (std::any_of(row.begin(), row.end(), [](double v) { return std::isnan(v); })) {
        const Matrix target(1, row.size(), row);
        row = tabular::impute_against(target, prep.imputer_donors, prep.imputer_k, false).data();
    }
    prep.scaler.transform_row(row);
    return row;
}

cnn::Tensor prepare_image(const modelstore::ImageDescriptor& descriptor, const imaging::GrayImage& image) {
    image.validate();
    if (descriptor.kind == modelstore::ImageKind::EcgReport)
        return cnn::image_to_tensor(imaging::preprocess_ecg(image, descriptor.size));
    return cnn::image_to_tensor(imaging::resize(image, descriptor.size, descriptor.size));
}

Prediction predict(const Artifact& artifact, const PredictInput& input) {
    using modelstore::InputKind;
    const InputKind expected = modelstore::input_kind(artifact.mode);
    const InputKind given = std::holds_alternative<FeatureInput>(input)      ? InputKind::Tabular
                            : std::holds_alternative<audio::AudioClip>(input) ? InputKind::Audio
                                                                              : InputKind::Image;
    static constexpr std::array<std::string_view, 3> kKindNames{"feature values", "audio", "an image"};
    require(expected == given, ErrorCode::InvalidArgument,
            "input kind mismatch: mode " + std::string(modelstore::to_string(artifact.mode)) + " expects " +
                std::string(kKindNames[static_cast<std::size_t>(expected)]) + ", got " +
                std::string(kKindNames[static_cast<std::size_t>(given)]));

    Prediction out;
    if (expected == InputKind::Image) {
        const auto& net = std::get<cnn::CnnModel>(artifact.model);
        out.probabilities = cnn::predict_proba(net, prepare_image(*artifact.image, std::get<imaging::GrayImage>(input)));
    } else {
        const std::vector<double> raw = expected == InputKind::Audio
                                            ? audio::extract_features(std::get<audio::AudioClip>(input)).values()
                                            : std::get<FeatureInput>(input).values;
        const auto row = prepare_tabular(*artifact.tabular, raw);
        const auto& stack = std::get<stacking::StackedModel>(artifact.model);
        const auto result = stacking::predict_stack(stack, Matrix(1, row.size(), row));
        const auto probabilities = result.probabilities.row(0);
        out.probabilities.assign(probabilities.begin(), probabilities.end());
    }
    out.probability_positive =
        out.probabilities.size() == 2 ? out.probabilities[1] : 1.0 - out.probabilities[0];
    out.label = std::string(out.probability_positive >= 0.5 ? positive_label(artifact.mode) : negative_label(artifact.mode));
    return out;
}

}  // namespace multidx::pipeline
