#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <variant>
#include <vector>

#include "multidx/matrix.hpp"
#include "multidx/tabular.hpp"

namespace multidx::learners {

enum class LearnerKind {
    LogisticRegression,
    KNearestNeighbors,
    SvmRbf,
    GaussianNaiveBayes,
    DecisionTree,
    RandomForest,
    GradientBoostedTrees,
};

std::string_view to_string(LearnerKind kind) noexcept;
/// Accepts the long names above and the short tags used in reports (LR, KNN, SVM, NB, DT, RFC, XGBoost).
LearnerKind learner_kind_from_string(std::string_view text);
/// Short tag for report columns.
std::string_view short_name(LearnerKind kind) noexcept;

enum class SplitCriterion { Gini, Entropy };

struct LogisticRegressionParams {
    double l2 = 1.0;
    std::size_t max_iterations = 10000;
    double gradient_tolerance = 1e-6;
};

struct KnnParams {
    std::size_t neighbors = 5;
    double minkowski_p = 2.0;
};

struct SvmParams {
    double c = 1.0;
    std::optional<double> gamma;  // empty: 1 / (features * variance of X)
    double tolerance = 1e-3;
    std::size_t cache_megabytes = 256;
};

struct NaiveBayesParams {
    double variance_floor = 1e-9;
};

struct DecisionTreeParams {
    SplitCriterion criterion = SplitCriterion::Entropy;
    std::size_t max_leaf_nodes = 300;
};

struct RandomForestParams {
    std::size_t trees = 1500;
    SplitCriterion criterion = SplitCriterion::Gini;
    std::optional<std::size_t> max_features;  // empty: floor(sqrt(features))
};

struct BoostingParams {
    std::size_t rounds = 25;
    std::size_t max_depth = 15;
    double subsample = 0.7;
    double learning_rate = 0.3;
    double lambda = 1.0;
    double gamma = 0.0;
    double min_child_weight = 1.0;
};

using Hyperparameters = std::variant<LogisticRegressionParams, KnnParams, SvmParams, NaiveBayesParams,
                                     DecisionTreeParams, RandomForestParams, BoostingParams>;

struct LearnerSpec {
    Hyperparameters params;
    std::uint64_t seed = 0;

    LearnerKind kind() const noexcept { return static_cast<LearnerKind>(params.index()); }

    /// Hyperparameters as used for the published experiments.
    static LearnerSpec defaults(LearnerKind kind, std::uint64_t seed = 0);
};

// --- fitted state -------------------------------------------------------------

/// Binary decision tree in flat arrays. Internal nodes send x[feature] <= threshold
/// left. Leaves carry `value_width` values: a class distribution for
/// classification trees, one weight for boosting trees.
struct Tree {
    static constexpr std::int32_t kLeaf = -1;

    std::vector<std::int32_t> feature;
    std::vector<double> threshold;
    std::vector<std::uint32_t> left;
    std::vector<std::uint32_t> right;
    std::size_t value_width = 0;
    std::vector<double> values;  // node_count * value_width

    std::size_t node_count() const noexcept { return feature.size(); }
    std::size_t leaf_count() const noexcept;
    std::size_t depth() const;
    std::size_t leaf_of(std::span<const double> row) const noexcept;
    std::span<const double> value(std::size_t node) const noexcept {
        return {values.data() + node * value_width, value_width};
    }

    friend bool operator==(const Tree&, const Tree&) = default;
};

/// One binary logistic model per output (one output for two classes,
/// one-vs-rest otherwise).
struct LogisticModel {
    Matrix weights;  // outputs x features
    std::vector<double> bias;
    std::vector<std::size_t> iterations;

    friend bool operator==(const LogisticModel&, const LogisticModel&) = default;
};

struct KnnModel {
    Matrix points;
    std::vector<int> labels;

    friend bool operator==(const KnnModel&, const KnnModel&) = default;
};

/// Decision function sum(coef_i * K(sv_i, x)) + bias, with coef_i = alpha_i * y_i,
/// calibrated as P(positive) = 1 / (1 + exp(platt_a * f + platt_b)).
struct SvmMachine {
    Matrix support_vectors;
    std::vector<double> coefficients;
    double bias = 0.0;
    double platt_a = 0.0;
    double platt_b = 0.0;

    friend bool operator==(const SvmMachine&, const SvmMachine&) = default;
};

struct SvmModel {
    double gamma = 1.0;
    std::vector<SvmMachine> machines;  // one for binary, one-vs-rest otherwise

    friend bool operator==(const SvmModel&, const SvmModel&) = default;
};

struct NaiveBayesModel {
    Matrix means;      // classes x features
    Matrix variances;  // classes x features
    std::vector<double> log_priors;

    friend bool operator==(const NaiveBayesModel&, const NaiveBayesModel&) = default;
};

struct TreeModel {
    Tree tree;

    friend bool operator==(const TreeModel&, const TreeModel&) = default;
};

struct ForestModel {
    std::vector<Tree> trees;

    friend bool operator==(const ForestModel&, const ForestModel&) = default;
};

/// Margins start at `base_margin` and add one tree per output per round; a
/// single output is the positive-class log-odds, several are softmax logits.
struct BoostedModel {
    std::vector<double> base_margin;
    std::vector<std::vector<Tree>> rounds;

    friend bool operator==(const BoostedModel&, const BoostedModel&) = default;
};

using FittedState =
    std::variant<LogisticModel, KnnModel, SvmModel, NaiveBayesModel, TreeModel, ForestModel, BoostedModel>;

/// Immutable once returned by fit.
struct TrainedLearner {
    LearnerSpec spec;
    std::size_t classes = 0;
    std::size_t width = 0;
    FittedState state;
};

TrainedLearner fit(const LearnerSpec& spec, const tabular::FeatureFrame& train);

Matrix predict_proba(const TrainedLearner& model, const Matrix& rows);
Matrix predict_proba(const TrainedLearner& model, const tabular::FeatureFrame& rows);

std::vector<int> predict_label(const TrainedLearner& model, const Matrix& rows);
std::vector<int> predict_label(const TrainedLearner& model, const tabular::FeatureFrame& rows);

/// Row-wise argmax, ties to the lower index.
std::vector<int> argmax_rows(const Matrix& probabilities);

/// Log-loss on `frame` after each boosting round (entry 0 is the base margin).
std::vector<double> staged_log_loss(const TrainedLearner& model, const tabular::FeatureFrame& frame);

// --- building blocks (exposed for tests) --------------------------------------

struct SmoResult {
    std::vector<double> alpha;
    double bias = 0.0;
    std::size_t iterations = 0;
};

/// Dual SVM over labels y in {-1,+1} with an RBF kernel.
SmoResult solve_smo(const Matrix& x, std::span<const int> y, double c, double gamma, double tolerance,
                    std::size_t cache_megabytes = 256);

struct PlattParameters {
    double a = 0.0;
    double b = 0.0;
};

PlattParameters fit_platt(std::span<const double> decision_values, std::span<const int> y);

}  // namespace multidx::learners
