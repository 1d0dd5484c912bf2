#include "multidx/stacking.hpp"

#include <algorithm>
#include <string>

#include "multidx/random.hpp"

namespace multidx::stacking {

using learners::LearnerKind;
using learners::LearnerSpec;
using learners::TrainedLearner;

namespace {

std::size_t columns_per_base(std::size_t classes) { return classes - 1; }

void append_meta_columns(Matrix& meta, std::size_t base, const Matrix& proba, std::span<const std::size_t> rows) {
    const std::size_t per_base = proba.cols() - 1;
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t k = 1; k < proba.cols(); ++k) meta(rows[i], base * per_base + k - 1) = proba(i, k);
}

TrainedLearner fit_base(const StackSpec& spec, std::size_t index, const tabular::FeatureFrame& frame) {
    try {
        return learners::fit(spec.base_specs[index], frame);
    } catch (const Error& e) {
        fail(e.code(), "base learner " + std::to_string(index) + " (" +
                           std::string(learners::short_name(spec.base_specs[index].kind())) + "): " + e.what());
    }
}

tabular::FeatureFrame meta_frame(const tabular::FeatureFrame& train, Matrix features) {
    std::vector<std::string> names;
    for (std::size_t c = 0; c < features.cols(); ++c) names.push_back("meta" + std::to_string(c));
    return tabular::FeatureFrame{tabular::FeatureSchema::numeric(names, train.schema.label_name, train.schema.class_names),
                                 std::move(features), train.labels};
}

}  // namespace

void StackSpec::validate() const {
    require(base_specs.size() >= 2, ErrorCode::InvalidArgument, "stack: at least two base learners required");
    require(folds >= 2, ErrorCode::InvalidArgument, "stack: at least two folds required");
}

std::vector<std::size_t> stratified_folds(std::span<const int> labels, std::size_t class_count, std::size_t folds,
                                          std::uint64_t seed) {
    require(folds >= 2, ErrorCode::InvalidArgument, "stack: at least two folds required");
    require(labels.size() >= folds, ErrorCode::InvalidArgument,
            "stack: " + std::to_string(folds) + " folds need at least as many rows");
    // Dealing class-sorted shuffled rows round-robin keeps every fold stratified.
    std::vector<std::size_t> fold_of(labels.size());
    std::size_t position = 0;
    for (std::size_t cls = 0; cls < class_count; ++cls) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (static_cast<std::size_t>(labels[i]) == cls) members.push_back(i);
        Rng rng(derive_seed(seed, 0xf01d5, cls));
        rng.shuffle(members);
        for (std::size_t i : members) fold_of[i] = position++ % folds;
    }
    return fold_of;
}

Matrix out_of_fold_features(const StackSpec& spec, const tabular::FeatureFrame& train) {
    spec.validate();
    require(train.labeled(), ErrorCode::InvalidArgument, "stack: training frame has no labels");
    const std::size_t classes = train.schema.class_names.size();
    const auto fold_of = stratified_folds(*train.labels, classes, spec.folds, spec.seed);

    Matrix meta(train.rows(), spec.base_specs.size() * columns_per_base(classes), 0.0);
    for (std::size_t fold = 0; fold < spec.folds; ++fold) {
        std::vector<std::size_t> fit_rows, held_rows;
        for (std::size_t i = 0; i < train.rows(); ++i) (fold_of[i] == fold ? held_rows : fit_rows).push_back(i);
        const auto fit_frame = train.select_rows(fit_rows);
        const Matrix held = train.values.select_rows(held_rows);
        for (std::size_t b = 0; b < spec.base_specs.size(); ++b) {
            const auto model = fit_base(spec, b, fit_frame);
            append_meta_columns(meta, b, learners::predict_proba(model, held), held_rows);
        }
    }
    return meta;
}

StackedModel fit_stack(const StackSpec& spec, const tabular::FeatureFrame& train) {
    const Matrix oof = out_of_fold_features(spec, train);

    StackedModel model;
    model.classes = train.schema.class_names.size();
    model.width = train.cols();
    model.meta_feature_width = oof.cols();
    model.meta = learners::fit(spec.meta_spec, meta_frame(train, oof));
    for (std::size_t b = 0; b < spec.base_specs.size(); ++b) model.bases.push_back(fit_base(spec, b, train));
    return model;
}

Matrix meta_features(const StackedModel& model, const Matrix& rows) {
    require(rows.cols() == model.width, ErrorCode::InvalidArgument,
            "stack: expected " + std::to_string(model.width) + " features, got " + std::to_string(rows.cols()));
    Matrix meta(rows.rows(), model.meta_feature_width, 0.0);
    std::vector<std::size_t> all(rows.rows());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    for (std::size_t b = 0; b < model.bases.size(); ++b)
        append_meta_columns(meta, b, learners::predict_proba(model.bases[b], rows), all);
    return meta;
}

StackPrediction predict_stack(const StackedModel& model, const Matrix& rows) {
    StackPrediction out;
    out.probabilities = learners::predict_proba(model.meta, meta_features(model, rows));
    out.labels = learners::argmax_rows(out.probabilities);
    return out;
}

StackPrediction predict_stack(const StackedModel& model, const tabular::FeatureFrame& rows) {
    return predict_stack(model, rows.values);
}

namespace {

struct PresetRow {
    std::string_view id;
    LearnerKind bases[3];
    LearnerKind meta;
};

constexpr PresetRow kPresets[] = {
    {"exp1", {LearnerKind::RandomForest, LearnerKind::GradientBoostedTrees, LearnerKind::SvmRbf}, LearnerKind::GaussianNaiveBayes},
    {"exp2", {LearnerKind::RandomForest, LearnerKind::GradientBoostedTrees, LearnerKind::DecisionTree}, LearnerKind::LogisticRegression},
    {"exp31", {LearnerKind::RandomForest, LearnerKind::GradientBoostedTrees, LearnerKind::SvmRbf}, LearnerKind::GaussianNaiveBayes},
    {"exp32", {LearnerKind::RandomForest, LearnerKind::GradientBoostedTrees, LearnerKind::KNearestNeighbors}, LearnerKind::GaussianNaiveBayes},
    {"exp61", {LearnerKind::RandomForest, LearnerKind::GradientBoostedTrees, LearnerKind::SvmRbf}, LearnerKind::RandomForest},
    {"exp62", {LearnerKind::RandomForest, LearnerKind::GradientBoostedTrees, LearnerKind::SvmRbf}, LearnerKind::RandomForest},
};

}  // namespace

StackSpec preset(std::string_view id, std::uint64_t seed) {
    for (const auto& row : kPresets) {
        if (row.id != id) continue;
        StackSpec spec;
        spec.seed = seed;
        for (std::size_t b = 0; b < 3; ++b) spec.base_specs.push_back(LearnerSpec::defaults(row.bases[b], derive_seed(seed, 0xba5e, b)));
        spec.meta_spec = LearnerSpec::defaults(row.meta, derive_seed(seed, 0x3e7a));
        return spec;
    }
    fail(ErrorCode::InvalidArgument, "unknown stack preset '" + std::string(id) + "'");
}

std::vector<std::string_view> preset_ids() {
    std::vector<std::string_view> ids;
    for (const auto& row : kPresets) ids.push_back(row.id);
    return ids;
}

}  // namespace multidx::stacking
