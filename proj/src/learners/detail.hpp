#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "multidx/learners.hpp"
#include "multidx/random.hpp"

namespace multidx::learners::detail {

struct ClassificationTreeOptions {
    SplitCriterion criterion = SplitCriterion::Gini;
    std::size_t max_features = 0;    // 0: every feature at every node
    std::size_t max_leaf_nodes = 0;  // 0: grow until pure
};

/// CART on the rows listed in `samples` (duplicates act as weights). Nodes are
/// expanded best-first by weighted impurity decrease so a leaf budget keeps the
/// most useful splits. `rng` is required when max_features subsamples.
Tree grow_classification_tree(const Matrix& x, std::span<const int> y, std::size_t classes,
                              std::vector<std::size_t> samples, const ClassificationTreeOptions& options, Rng* rng);

struct BoostingTreeOptions {
    std::size_t max_depth = 15;
    double lambda = 1.0;
    double gamma = 0.0;
    double min_child_weight = 1.0;
    double learning_rate = 0.3;
};

/// Second-order regression tree: split gain from gradient/hessian sums, leaf
/// weight -G/(H+lambda) scaled by the learning rate.
Tree grow_boosting_tree(const Matrix& x, std::span<const double> gradient, std::span<const double> hessian,
                        std::vector<std::size_t> samples, const BoostingTreeOptions& options);

LogisticModel fit_logistic(const Matrix& x, std::span<const int> y, std::size_t classes,
                           const LogisticRegressionParams& params);
Matrix logistic_proba(const LogisticModel& model, const Matrix& rows);

KnnModel fit_knn(const Matrix& x, std::span<const int> y);
Matrix knn_proba(const KnnModel& model, const KnnParams& params, std::size_t classes, const Matrix& rows);

SvmModel fit_svm(const Matrix& x, std::span<const int> y, std::size_t classes, const SvmParams& params);
Matrix svm_proba(const SvmModel& model, std::size_t classes, const Matrix& rows);
double svm_decision(const SvmMachine& machine, double gamma, std::span<const double> row);

NaiveBayesModel fit_naive_bayes(const Matrix& x, std::span<const int> y, std::size_t classes,
                                const NaiveBayesParams& params);
Matrix naive_bayes_proba(const NaiveBayesModel& model, const Matrix& rows);

ForestModel fit_forest(const Matrix& x, std::span<const int> y, std::size_t classes, const RandomForestParams& params,
                       std::uint64_t seed);
Matrix tree_proba(const Tree& tree, const Matrix& rows);
Matrix forest_proba(const ForestModel& model, std::size_t classes, const Matrix& rows);

BoostedModel fit_boosting(const Matrix& x, std::span<const int> y, std::size_t classes, const BoostingParams& params,
                          std::uint64_t seed);
Matrix boosting_margins(const BoostedModel& model, const Matrix& rows, std::size_t round_limit);
Matrix margins_to_proba(const Matrix& margins, std::size_t classes);

}  // namespace multidx::learners::detail
