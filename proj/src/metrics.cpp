#include "multidx/metrics.hpp"

#include "multidx/error.hpp"

namespace multidx::metrics {

ConfusionMatrix confusion(std::span<const int> labels_true, std::span<const int> labels_pred, int positive_class) {
    require(labels_true.size() == labels_pred.size(), ErrorCode::InvalidArgument,
            "confusion: label sequences differ in length");
    require(!labels_true.empty(), ErrorCode::InvalidArgument, "confusion: no labels");

    ConfusionMatrix cm;
    for (std::size_t i = 0; i < labels_true.size(); ++i) {
        const bool actual = labels_true[i] == positive_class;
        const bool predicted = labels_pred[i] == positive_class;
        if (actual && predicted) ++cm.tp;
        else if (actual) ++cm.fn;
        else if (predicted) ++cm.fp;
        else ++cm.tn;
    }
    return cm;
}

MetricsReport compute_metrics(const ConfusionMatrix& cm) {
    require(cm.total() >= 1, ErrorCode::InvalidArgument, "compute_metrics: empty confusion matrix");

    auto ratio = [](std::size_t num, std::size_t den) -> std::optional<double> {
        if (den == 0) return std::nullopt;
        return static_cast<double>(num) / static_cast<double>(den);
    };

    MetricsReport report;
    report.accuracy = ratio(cm.tp + cm.tn, cm.total());
    report.precision = ratio(cm.tp, cm.tp + cm.fp);
    report.recall = ratio(cm.tp, cm.tp + cm.fn);
    if (report.precision && report.recall && (*report.precision + *report.recall) > 0.0) {
        const double p = *report.precision;
        const double r = *report.recall;
        report.f1 = 2.0 * p * r / (p + r);
    }
    return report;
}

nlohmann::json to_json(const MetricsReport& report) {
    auto value = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
    return nlohmann::json{{"accuracy", value(report.accuracy)},
                          {"precision", value(report.precision)},
                          {"recall", value(report.recall)},
                          {"f1", value(report.f1)}};
}

}  // namespace multidx::metrics
