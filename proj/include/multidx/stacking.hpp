#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "multidx/learners.hpp"
#include "multidx/tabular.hpp"

namespace multidx::stacking {

struct StackSpec {
    std::vector<learners::LearnerSpec> base_specs;
    learners::LearnerSpec meta_spec;
    std::size_t folds = 5;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Two-layer stack. Meta features are, per base in order, the probabilities of
/// classes 1..K-1 (just the positive class for binary tasks).
struct StackedModel {
    std::vector<learners::TrainedLearner> bases;
    learners::TrainedLearner meta;
    std::size_t classes = 0;
    std::size_t width = 0;
    std::size_t meta_feature_width = 0;
};

struct StackPrediction {
    Matrix probabilities;
    std::vector<int> labels;
};

/// Stratified, seeded fold assignment: entry i is the fold of row i.
std::vector<std::size_t> stratified_folds(std::span<const int> labels, std::size_t class_count, std::size_t folds,
                                          std::uint64_t seed);

/// Meta-training matrix: each row holds base predictions from models that
/// never saw that row.
Matrix out_of_fold_features(const StackSpec& spec, const tabular::FeatureFrame& train);

StackedModel fit_stack(const StackSpec& spec, const tabular::FeatureFrame& train);

/// Base probabilities arranged as meta features.
Matrix meta_features(const StackedModel& model, const Matrix& rows);

StackPrediction predict_stack(const StackedModel& model, const Matrix& rows);
StackPrediction predict_stack(const StackedModel& model, const tabular::FeatureFrame& rows);

/// Table-4 stack configurations: exp1, exp2, exp31, exp32, exp61, exp62.
StackSpec preset(std::string_view id, std::uint64_t seed = 0);
std::vector<std::string_view> preset_ids();

}  // namespace multidx::stacking
