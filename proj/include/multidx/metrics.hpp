#pragma once

#include <cstddef>
#include <optional>
#include <span>

#include "json.hpp"

namespace multidx::metrics {

struct ConfusionMatrix {
    std::size_t tp = 0;
    std::size_t tn = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;

    std::size_t total() const noexcept { return tp + tn + fp + fn; }
    friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

/// Each metric is empty when its denominator is zero.
struct MetricsReport {
    std::optional<double> accuracy;
    std::optional<double> precision;
    std::optional<double> recall;
    std::optional<double> f1;
};

/// Binary tally against `positive_class`; every other class counts as negative.
ConfusionMatrix confusion(std::span<const int> labels_true, std::span<const int> labels_pred, int positive_class);

MetricsReport compute_metrics(const ConfusionMatrix& cm);

/// {"accuracy","precision","recall","f1"}; undefined metrics serialize as null.
nlohmann::json to_json(const MetricsReport& report);

}  // namespace multidx::metrics
