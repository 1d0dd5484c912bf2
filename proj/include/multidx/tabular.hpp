#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "multidx/matrix.hpp"

namespace multidx::tabular {

enum class FeatureKind { Numeric, Categorical, Binary };

std::string_view to_string(FeatureKind kind) noexcept;
FeatureKind feature_kind_from_string(std::string_view text);

/// Missing cells are stored as quiet NaN.
inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

struct FeatureSchema {
    std::vector<std::string> feature_names;
    std::vector<FeatureKind> feature_kinds;
    std::string label_name;
    std::vector<std::string> class_names;
    /// Level names of categorical features, indexed by category code. May be
    /// empty (codes are then their own names) and is empty for other kinds.
    std::vector<std::vector<std::string>> categories;

    std::size_t width() const noexcept { return feature_names.size(); }
    std::optional<std::size_t> index_of(std::string_view name) const noexcept;

    /// Throws on duplicate names, label among features, or fewer than 2 classes.
    void validate() const;

    /// All-numeric schema with the given names.
    static FeatureSchema numeric(std::vector<std::string> names, std::string label_name = "label",
                                 std::vector<std::string> class_names = {"negative", "positive"});

    friend bool operator==(const FeatureSchema&, const FeatureSchema&) = default;
};

struct FeatureFrame {
    FeatureSchema schema;
    Matrix values;
    std::optional<std::vector<int>> labels;

    std::size_t rows() const noexcept { return values.rows(); }
    std::size_t cols() const noexcept { return values.cols(); }
    bool labeled() const noexcept { return labels.has_value(); }

    bool is_missing(std::size_t r, std::size_t c) const noexcept;
    std::optional<double> at(std::size_t r, std::size_t c) const noexcept;
    bool has_missing() const noexcept;

    /// Throws if the shape or labels disagree with the schema.
    void validate() const;

    /// Rows picked by index (labels follow).
    FeatureFrame select_rows(std::span<const std::size_t> indices) const;

    /// Label counts per class; throws if unlabeled.
    std::vector<std::size_t> class_counts() const;

    friend bool operator==(const FeatureFrame& a, const FeatureFrame& b);
};

struct SplitSpec {
    double train_fraction = 0.7;
    double validation_fraction = 0.0;
    std::uint64_t seed = 0;
    bool stratified = true;

    void validate() const;
};

struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> validation;
    std::vector<std::size_t> test;
};

struct SplitFrames {
    FeatureFrame train;
    std::optional<FeatureFrame> validation;
    FeatureFrame test;
};

// --- one-hot encoding ------------------------------------------------------

struct OneHotColumn {
    std::size_t source = 0;
    std::optional<double> level;  // empty: column passes through unchanged

    friend bool operator==(const OneHotColumn&, const OneHotColumn&) = default;
};

class OneHotEncoder {
public:
    OneHotEncoder() = default;
    OneHotEncoder(FeatureSchema input_schema, FeatureSchema output_schema, std::vector<OneHotColumn> columns);

    /// Levels of each categorical column in first-appearance order.
    static OneHotEncoder fit(const FeatureFrame& frame);

    /// Unseen levels encode as all zeros; missing cells stay missing in every
    /// derived column.
    FeatureFrame transform(const FeatureFrame& frame) const;
    std::vector<double> transform_row(std::span<const double> raw) const;

    const FeatureSchema& input_schema() const noexcept { return input_schema_; }
    const FeatureSchema& output_schema() const noexcept { return output_schema_; }
    const std::vector<OneHotColumn>& columns() const noexcept { return columns_; }

private:
    FeatureSchema input_schema_;
    FeatureSchema output_schema_;
    std::vector<OneHotColumn> columns_;
};

FeatureFrame encode_one_hot(const FeatureFrame& frame);

// --- KNN imputation --------------------------------------------------------

/// Euclidean distance over mutually observed coordinates, scaled by
/// sqrt(width / observed). Empty when no coordinate is observed in both rows.
std::optional<double> nan_euclidean(std::span<const double> a, std::span<const double> b);

/// Fills missing cells of `target` from the k nearest rows of `donors`. When
/// `target_is_donors` is set, a row is never its own neighbor.
Matrix impute_against(const Matrix& target, const Matrix& donors, std::size_t k, bool target_is_donors);

FeatureFrame impute_knn(const FeatureFrame& frame, std::size_t k = 5);

// --- SMOTE -----------------------------------------------------------------

struct SmoteOptions {
    std::size_t k = 5;
    std::uint64_t seed = 0;
};

/// Oversamples every non-majority class up to the majority count. Original rows
/// come first, unchanged; synthetic rows follow grouped by class.
FeatureFrame smote_balance(const FeatureFrame& frame, const SmoteOptions& options);

// --- scaling ---------------------------------------------------------------

class StandardScaler {
public:
    StandardScaler() = default;
    StandardScaler(std::vector<double> mean, std::vector<double> std_dev);

    static StandardScaler fit(const FeatureFrame& train);

    FeatureFrame transform(const FeatureFrame& frame) const;
    FeatureFrame inverse_transform(const FeatureFrame& frame) const;
    void transform_row(std::span<double> row) const;

    const std::vector<double>& mean() const noexcept { return mean_; }
    /// Population standard deviation; 0 for constant columns.
    const std::vector<double>& std_dev() const noexcept { return std_dev_; }

    friend bool operator==(const StandardScaler&, const StandardScaler&) = default;

private:
    double divisor(std::size_t c) const noexcept { return std_dev_[c] > 0.0 ? std_dev_[c] : 1.0; }

    std::vector<double> mean_;
    std::vector<double> std_dev_;
};

struct ScaledFrames {
    FeatureFrame train;
    std::vector<FeatureFrame> others;
    StandardScaler scaler;
};

/// Statistics from `train` only, applied to every frame.
ScaledFrames scale_standard(const FeatureFrame& train, std::span<const FeatureFrame> others = {});

// --- analysis and selection ------------------------------------------------

/// Pearson correlations over the features plus, when labeled, the label as a
/// final column. Constant columns correlate 0 with everything but themselves.
Matrix pearson_matrix(const FeatureFrame& frame);

FeatureFrame select_features(const FeatureFrame& frame, std::span<const std::string> keep);

// --- splitting -------------------------------------------------------------

/// Partition sizes use largest-remainder rounding so the totals match
/// round(n * fraction) exactly and each class stays within one row of its share.
SplitIndices split_indices(std::span<const int> labels, std::size_t class_count, const SplitSpec& spec);

SplitFrames split(const FeatureFrame& frame, const SplitSpec& spec);

// --- I/O -------------------------------------------------------------------

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

/// RFC 4180-style parsing (quoted fields, doubled quotes); header row required.
CsvTable parse_csv_table(std::string_view text, char delimiter = ',');

std::string read_text_file(const std::filesystem::path& path);

struct CsvOptions {
    char delimiter = ',';
    /// When false a missing label column yields an unlabeled frame.
    bool require_labels = true;
};

/// Columns are matched by header name; extra columns are ignored. Empty cells
/// are missing. Labels may be class names or class indices.
FeatureFrame frame_from_table(const CsvTable& table, const FeatureSchema& schema, const CsvOptions& options = {});
FeatureFrame read_csv(const std::filesystem::path& path, const FeatureSchema& schema, const CsvOptions& options = {});

FeatureSchema schema_from_json(const nlohmann::json& json);
nlohmann::json schema_to_json(const FeatureSchema& schema);
FeatureSchema read_schema_json(const std::filesystem::path& path);

}  // namespace multidx::tabular
