#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "multidx/audio.hpp"
#include "multidx/cnn.hpp"
#include "multidx/imaging.hpp"
#include "multidx/metrics.hpp"
#include "multidx/modelstore.hpp"
#include "multidx/stacking.hpp"
#include "multidx/tabular.hpp"

namespace multidx::pipeline {

using modelstore::Artifact;
using modelstore::Mode;

/// One row of the experiment table.
struct Experiment {
    std::string id;
    Mode mode = Mode::Symptoms;
    std::vector<std::string> features;  // empty for image experiments
    tabular::FeatureKind feature_kind = tabular::FeatureKind::Numeric;
    double train_fraction = 0.7;
    double validation_fraction = 0.0;
    std::vector<std::size_t> default_resolutions;  // image experiments only
};

/// exp1, exp2, exp31, exp32, exp4, exp5, exp61, exp62.
const Experiment& experiment(std::string_view id);
std::vector<std::string_view> experiment_ids();

/// Default schema for a tabular experiment: its features, label column
/// "label", classes negative/positive.
tabular::FeatureSchema default_schema(const Experiment& experiment);

// --- training ----------------------------------------------------------------

struct TrainOptions {
    std::uint64_t seed = 0;
    std::size_t folds = 5;
    /// Oversample before splitting, as the original study did.
    bool leaky_smote = false;
    std::size_t smote_k = 5;
    std::size_t imputer_k = 5;
    /// Replaces the preset's learners (the fold count and seed still come from here).
    std::optional<stacking::StackSpec> stack;
    /// Image experiments: one artifact per resolution; empty means the preset default.
    std::vector<std::size_t> resolutions;
    std::optional<std::size_t> epochs;
    std::optional<std::vector<cnn::LayerSpec>> architecture;  // default_architecture when empty
};

struct MetricsRow {
    std::string model;
    metrics::MetricsReport report;
};

struct TrainedArtifact {
    Artifact artifact;
    std::optional<std::size_t> resolution;
    std::vector<cnn::EpochRecord> history;
};

struct TrainOutcome {
    std::vector<TrainedArtifact> artifacts;  // one, or one per resolution
    std::vector<MetricsRow> rows;
};

/// Raw (unencoded, possibly incomplete) frame whose schema holds the
/// experiment's features in preset order. Order: one-hot, KNN impute, split,
/// SMOTE on the training part, scale, stack.
TrainOutcome train_tabular(const Experiment& experiment, const tabular::FeatureFrame& frame,
                           const TrainOptions& options);

/// One spectrum per row, rasterized at every resolution.
struct SpectraSet {
    Matrix spectra;
    std::vector<int> labels;
};

/// Class-labeled images (0 negative, 1 positive).
struct ImageSet {
    std::vector<imaging::GrayImage> images;
    std::vector<int> labels;
};

TrainOutcome train_raman(const Experiment& experiment, const SpectraSet& data, const TrainOptions& options);
TrainOutcome train_ecg(const Experiment& experiment, const ImageSet& data, const TrainOptions& options);

/// Selects the experiment's features from a CSV (named missing columns are an
/// error); `schema` supplies the label column, classes and feature kinds.
tabular::FeatureFrame load_tabular(const Experiment& experiment, const std::filesystem::path& csv,
                                   const std::optional<tabular::FeatureSchema>& schema);
/// Audio features of every WAV under negative/ and positive/, or a CSV of
/// precomputed features.
tabular::FeatureFrame load_cough(const Experiment& experiment, const std::filesystem::path& data,
                                 const std::optional<tabular::FeatureSchema>& schema);
/// CSV with a label column and one column per Raman shift.
SpectraSet load_spectra(const std::filesystem::path& csv, const std::optional<tabular::FeatureSchema>& schema);
/// PNGs under negative/ and positive/.
ImageSet load_images(const std::filesystem::path& directory);

/// Dispatches on the experiment's mode and reads `data` accordingly.
TrainOutcome train_experiment(const Experiment& experiment, const std::filesystem::path& data,
                              const TrainOptions& options,
                              const std::optional<tabular::FeatureSchema>& schema = std::nullopt);

/// Fixed-width text table: model, accuracy, precision, recall, F1 (percent).
std::string format_metrics_table(const std::vector<MetricsRow>& rows);

// --- prediction --------------------------------------------------------------

/// Raw feature row in input_schema order; NaN marks a missing value.
struct FeatureInput {
    std::vector<double> values;
};

using PredictInput = std::variant<FeatureInput, audio::AudioClip, imaging::GrayImage>;

struct Prediction {
    std::vector<double> probabilities;
    double probability_positive = 0.0;
    std::string label;
};

/// covid-positive / covid-negative, or high-risk / low-risk for mortality modes.
std::string_view positive_label(Mode mode) noexcept;
std::string_view negative_label(Mode mode) noexcept;

/// Probability of class 1 for binary models, 1 - P(class 0) otherwise; the
/// label is positive iff that probability is at least 0.5.
Prediction predict(const Artifact& artifact, const PredictInput& input);

/// Each stage of the per-mode path, exposed for tests.
std::vector<double> prepare_tabular(const modelstore::TabularPreprocessing& prep, std::span<const double> raw);
cnn::Tensor prepare_image(const modelstore::ImageDescriptor& descriptor, const imaging::GrayImage& image);

}  // namespace multidx::pipeline
