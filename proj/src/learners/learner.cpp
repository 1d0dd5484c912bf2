#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <string>

#include "detail.hpp"

namespace multidx::learners {

namespace {

struct KindNames {
    LearnerKind kind;
    std::string_view long_name;
    std::string_view short_name;
};

constexpr std::array<KindNames, 7> kKindNames{{
    {LearnerKind::LogisticRegression, "logistic_regression", "LR"},
    {LearnerKind::KNearestNeighbors, "knn", "KNN"},
    {LearnerKind::SvmRbf, "svm_rbf", "SVM"},
    {LearnerKind::GaussianNaiveBayes, "gaussian_nb", "NB"},
    {LearnerKind::DecisionTree, "decision_tree", "DT"},
    {LearnerKind::RandomForest, "random_forest", "RFC"},
    {LearnerKind::GradientBoostedTrees, "gradient_boosting", "XGBoost"},
}};

std::string lower(std::string_view text) {
    std::string out(text);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char ch) { return std::tolower(ch); });
    return out;
}

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

}  // namespace

std::string_view to_string(LearnerKind kind) noexcept { return kKindNames[static_cast<std::size_t>(kind)].long_name; }

std::string_view short_name(LearnerKind kind) noexcept { return kKindNames[static_cast<std::size_t>(kind)].short_name; }

LearnerKind learner_kind_from_string(std::string_view text) {
    const std::string key = lower(text);
    for (const auto& names : kKindNames)
        if (key == names.long_name || key == lower(names.short_name)) return names.kind;
    fail(ErrorCode::InvalidArgument, "unknown learner '" + std::string(text) + "'");
}

LearnerSpec LearnerSpec::defaults(LearnerKind kind, std::uint64_t seed) {
    LearnerSpec spec;
    spec.seed = seed;
    switch (kind) {
        case LearnerKind::LogisticRegression: spec.params = LogisticRegressionParams{}; break;
        case LearnerKind::KNearestNeighbors: spec.params = KnnParams{}; break;
        case LearnerKind::SvmRbf: spec.params = SvmParams{}; break;
        case LearnerKind::GaussianNaiveBayes: spec.params = NaiveBayesParams{}; break;
        case LearnerKind::DecisionTree: spec.params = DecisionTreeParams{}; break;
        case LearnerKind::RandomForest: spec.params = RandomForestParams{}; break;
        case LearnerKind::GradientBoostedTrees: spec.params = BoostingParams{}; break;
    }
    return spec;
}

TrainedLearner fit(const LearnerSpec& spec, const tabular::FeatureFrame& train) {
    require(train.labeled(), ErrorCode::InvalidArgument, "fit: training frame has no labels");
    require(train.rows() > 0, ErrorCode::InvalidArgument, "fit: empty training frame");
    require(train.cols() > 0, ErrorCode::InvalidArgument, "fit: training frame has no features");
    require(!train.has_missing(), ErrorCode::Data, "fit: training frame has missing values");
    train.validate();

    const std::size_t classes = train.schema.class_names.size();
    const auto counts = train.class_counts();
    const auto present = std::count_if(counts.begin(), counts.end(), [](std::size_t c) { return c > 0; });
    require(present >= 2, ErrorCode::Data, "degenerate labels: fewer than two classes present");

    const Matrix& x = train.values;
    const std::span<const int> y(*train.labels);

    TrainedLearner model{spec, classes, train.cols(), {}};
    std::visit(Overloaded{
                   [&](const LogisticRegressionParams& p) { model.state = detail::fit_logistic(x, y, classes, p); },
                   [&](const KnnParams& p) {
                       require(p.neighbors >= 1, ErrorCode::InvalidArgument, "knn: k must be positive");
                       require(p.minkowski_p >= 1.0, ErrorCode::InvalidArgument, "knn: p must be at least 1");
                       model.state = detail::fit_knn(x, y);
                   },
                   [&](const SvmParams& p) { model.state = detail::fit_svm(x, y, classes, p); },
                   [&](const NaiveBayesParams& p) { model.state = detail::fit_naive_bayes(x, y, classes, p); },
                   [&](const DecisionTreeParams& p) {
                       detail::ClassificationTreeOptions options;
                       options.criterion = p.criterion;
                       options.max_leaf_nodes = p.max_leaf_nodes;
                       std::vector<std::size_t> samples(x.rows());
                       std::iota(samples.begin(), samples.end(), 0);
                       model.state = TreeModel{detail::grow_classification_tree(x, y, classes, std::move(samples),
                                                                                options, nullptr)};
                   },
                   [&](const RandomForestParams& p) { model.state = detail::fit_forest(x, y, classes, p, spec.seed); },
                   [&](const BoostingParams& p) { model.state = detail::fit_boosting(x, y, classes, p, spec.seed); },
               },
               spec.params);
    return model;
}

Matrix predict_proba(const TrainedLearner& model, const Matrix& rows) {
    require(rows.cols() == model.width, ErrorCode::InvalidArgument,
            "predict: expected " + std::to_string(model.width) + " features, got " + std::to_string(rows.cols()));
    for (double v : rows.data()) require(!std::isnan(v), ErrorCode::Data, "predict: rows have missing values");
    const std::size_t classes = model.classes;
    return std::visit(
        Overloaded{
            [&](const LogisticModel& m) { return detail::logistic_proba(m, rows); },
            [&](const KnnModel& m) {
                return detail::knn_proba(m, std::get<KnnParams>(model.spec.params), classes, rows);
            },
            [&](const SvmModel& m) { return detail::svm_proba(m, classes, rows); },
            [&](const NaiveBayesModel& m) { return detail::naive_bayes_proba(m, rows); },
            [&](const TreeModel& m) { return detail::tree_proba(m.tree, rows); },
            [&](const ForestModel& m) { return detail::forest_proba(m, classes, rows); },
            [&](const BoostedModel& m) {
                return detail::margins_to_proba(detail::boosting_margins(m, rows, m.rounds.size()), classes);
            },
        },
        model.state);
}

Matrix predict_proba(const TrainedLearner& model, const tabular::FeatureFrame& rows) {
    return predict_proba(model, rows.values);
}

std::vector<int> argmax_rows(const Matrix& probabilities) {
    std::vector<int> out(probabilities.rows());
    for (std::size_t r = 0; r < probabilities.rows(); ++r) {
        const auto row = probabilities.row(r);
        out[r] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
    }
    return out;
}

std::vector<int> predict_label(const TrainedLearner& model, const Matrix& rows) {
    return argmax_rows(predict_proba(model, rows));
}

std::vector<int> predict_label(const TrainedLearner& model, const tabular::FeatureFrame& rows) {
    return predict_label(model, rows.values);
}

std::vector<double> staged_log_loss(const TrainedLearner& model, const tabular::FeatureFrame& frame) {
    const auto* boosted = std::get_if<BoostedModel>(&model.state);
    require(boosted != nullptr, ErrorCode::InvalidArgument, "staged_log_loss: model is not boosted");
    require(frame.labeled(), ErrorCode::InvalidArgument, "staged_log_loss: frame has no labels");
    require(frame.cols() == model.width, ErrorCode::InvalidArgument, "staged_log_loss: feature width mismatch");
    const auto& labels = *frame.labels;
    constexpr double kEps = 1e-15;
    std::vector<double> losses;
    for (std::size_t round = 0; round <= boosted->rounds.size(); ++round) {
        const Matrix p = detail::margins_to_proba(detail::boosting_margins(*boosted, frame.values, round), model.classes);
        double total = 0.0;
        for (std::size_t r = 0; r < p.rows(); ++r)
            total -= std::log(std::clamp(p(r, static_cast<std::size_t>(labels[r])), kEps, 1.0));
        losses.push_back(total / static_cast<double>(p.rows()));
    }
    return losses;
}

}  // namespace multidx::learners
