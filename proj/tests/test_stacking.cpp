#include <cmath>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "multidx/random.hpp"
#include "multidx/stacking.hpp"

using namespace multidx;
using namespace multidx::learners;
using namespace multidx::stacking;
using tabular::FeatureFrame;
using tabular::FeatureSchema;

namespace {

FeatureFrame gaussians(std::uint64_t seed, std::size_t n, double separation) {
    Rng rng(seed);
    FeatureFrame frame{FeatureSchema::numeric({"a", "b", "c"}), Matrix(0, 3), std::vector<int>{}};
    for (std::size_t i = 0; i < n; ++i) {
        const int cls = static_cast<int>(i % 2);
        const double shift = cls ? separation : -separation;
        frame.values.append_row(std::vector<double>{rng.normal() + shift, rng.normal() - shift, rng.normal()});
        frame.labels->push_back(cls);
    }
    return frame;
}

LearnerSpec small(LearnerKind kind, std::uint64_t seed = 0) {
    auto spec = LearnerSpec::defaults(kind, seed);
    if (auto* rf = std::get_if<RandomForestParams>(&spec.params)) rf->trees = 50;
    return spec;
}

StackSpec small_stack(std::uint64_t seed = 0) {
    StackSpec spec;
    spec.base_specs = {small(LearnerKind::RandomForest, 1), small(LearnerKind::GradientBoostedTrees, 2),
                       small(LearnerKind::SvmRbf, 3)};
    spec.meta_spec = small(LearnerKind::GaussianNaiveBayes);
    spec.seed = seed;
    return spec;
}

}  // namespace

TEST_CASE("presets encode the published stacks") {
    const auto exp31 = preset("exp31");
    REQUIRE(exp31.base_specs.size() == 3);
    CHECK(exp31.base_specs[0].kind() == LearnerKind::RandomForest);
    CHECK(exp31.base_specs[1].kind() == LearnerKind::GradientBoostedTrees);
    CHECK(exp31.base_specs[2].kind() == LearnerKind::SvmRbf);
    CHECK(exp31.meta_spec.kind() == LearnerKind::GaussianNaiveBayes);
    CHECK(preset("exp2").base_specs[2].kind() == LearnerKind::DecisionTree);
    CHECK(preset("exp2").meta_spec.kind() == LearnerKind::LogisticRegression);
    CHECK(preset("exp32").base_specs[2].kind() == LearnerKind::KNearestNeighbors);
    CHECK(preset("exp61").meta_spec.kind() == LearnerKind::RandomForest);
    CHECK(preset_ids().size() == 6);
    CHECK_THROWS(preset("exp9"));
}

TEST_CASE("three binary bases give three meta columns") {
    const auto frame = gaussians(1, 80, 1.0);
    const auto model = fit_stack(small_stack(), frame);
    CHECK(model.meta_feature_width == 3);
    CHECK(model.bases.size() == 3);
    CHECK(out_of_fold_features(small_stack(), frame).cols() == 3);
}

TEST_CASE("out-of-fold predictions come from models that never saw the row") {
    const auto frame = gaussians(2, 60, 0.8);
    const auto spec = small_stack(4);
    const Matrix oof = out_of_fold_features(spec, frame);
    REQUIRE(oof.rows() == frame.rows());
    const auto fold_of = stratified_folds(*frame.labels, 2, spec.folds, spec.seed);
    for (std::size_t fold = 0; fold < spec.folds; ++fold) {
        std::vector<std::size_t> fit_rows;
        for (std::size_t i = 0; i < frame.rows(); ++i)
            if (fold_of[i] != fold) fit_rows.push_back(i);
        CHECK(fit_rows.size() < frame.rows());
        const auto base = fit(spec.base_specs[2], frame.select_rows(fit_rows));
        for (std::size_t i = 0; i < frame.rows(); ++i) {
            if (fold_of[i] != fold) continue;
            CHECK(oof(i, 2) == predict_proba(base, frame.values.select_rows(std::vector<std::size_t>{i}))(0, 1));
        }
    }
    // Folds are stratified: each holds an equal share of each class here.
    std::vector<std::size_t> per_fold(spec.folds, 0);
    for (std::size_t i = 0; i < frame.rows(); ++i) per_fold[fold_of[i]] += (*frame.labels)[i];
    for (auto count : per_fold) CHECK(count == 6);
}

TEST_CASE("identical bases give identical meta columns") {
    const auto frame = gaussians(3, 80, 0.5);
    StackSpec spec;
    spec.base_specs.assign(3, small(LearnerKind::GradientBoostedTrees, 9));
    spec.meta_spec = small(LearnerKind::LogisticRegression);
    const Matrix oof = out_of_fold_features(spec, frame);
    for (std::size_t r = 0; r < oof.rows(); ++r) {
        CHECK(oof(r, 0) == oof(r, 1));
        CHECK(oof(r, 1) == oof(r, 2));
    }
    const auto model = fit_stack(spec, frame);
    const auto single = fit(spec.base_specs[0], frame);
    const auto probe = gaussians(30, 40, 0.5);
    CHECK(predict_stack(model, probe).labels == predict_label(single, probe));
}

TEST_CASE("end to end on separable data") {
    const auto frame = gaussians(5, 60, 4.0);
    const auto model = fit_stack(small_stack(), frame);
    const auto test = gaussians(6, 40, 4.0);
    CHECK(predict_stack(model, test).labels == *test.labels);

    const auto one = predict_stack(model, Matrix(1, 3, 0.1));
    REQUIRE(one.probabilities.rows() == 1);
    CHECK(std::abs(one.probabilities(0, 0) + one.probabilities(0, 1) - 1.0) < 1e-9);
    CHECK(predict_stack(model, test).probabilities == predict_stack(model, test).probabilities);
    CHECK_THROWS(predict_stack(model, Matrix(1, 2, 0.0)));
}

TEST_CASE("multiclass meta width") {
    Rng rng(3);
    FeatureFrame frame{FeatureSchema::numeric({"a", "b"}, "y", {"x", "y", "z"}), Matrix(0, 2), std::vector<int>{}};
    for (int i = 0; i < 90; ++i) {
        const int cls = i % 3;
        frame.values.append_row(std::vector<double>{2.0 * cls + rng.normal() * 0.3, rng.normal()});
        frame.labels->push_back(cls);
    }
    const auto model = fit_stack(small_stack(), frame);
    CHECK(model.meta_feature_width == 6);
    CHECK(predict_stack(model, frame).probabilities.cols() == 3);
}

TEST_CASE("base errors carry the base index") {
    auto frame = gaussians(7, 40, 1.0);
    auto spec = small_stack();
    spec.base_specs[1].params = KnnParams{0, 2.0};
    CHECK_THROWS_WITH(fit_stack(spec, frame), doctest::Contains("base learner 1"));
    spec = small_stack();
    spec.folds = 1;
    CHECK_THROWS(fit_stack(spec, frame));
}

TEST_CASE("stacking is competitive with its best base") {
    double stacked = 0.0, best = 0.0;
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        const auto train = gaussians(100 + seed, 200, 0.6);
        const auto test = gaussians(200 + seed, 200, 0.6);
        const auto spec = small_stack(seed);
        const auto model = fit_stack(spec, train);
        auto acc = [&](const std::vector<int>& p) {
            double hit = 0.0;
            for (std::size_t i = 0; i < p.size(); ++i) hit += p[i] == (*test.labels)[i];
            return hit / double(p.size());
        };
        stacked += acc(predict_stack(model, test).labels);
        double best_base = 0.0;
        for (const auto& base : model.bases) best_base = std::max(best_base, acc(predict_label(base, test)));
        best += best_base;
    }
    CHECK(stacked / 3.0 >= best / 3.0 - 0.02);
}
