#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>

#include "multidx/random.hpp"
#include "multidx/simd/kernels.hpp"
#include "multidx/tabular.hpp"

namespace multidx::tabular {

namespace {

std::string format_level(double value) {
    char buffer[64];
    const auto result = std::to_chars(buffer, buffer + sizeof(buffer), value);
    return std::string(buffer, result.ptr);
}

void require_complete(const FeatureFrame& frame, const char* operation) {
    require(!frame.has_missing(), ErrorCode::InvalidArgument, std::string(operation) + ": frame has missing cells");
}

}  // namespace

// --- one-hot ----------------------------------------------------------------

OneHotEncoder::OneHotEncoder(FeatureSchema input_schema, FeatureSchema output_schema, std::vector<OneHotColumn> columns)
    : input_schema_(std::move(input_schema)), output_schema_(std::move(output_schema)), columns_(std::move(columns)) {}

OneHotEncoder OneHotEncoder::fit(const FeatureFrame& frame) {
    require(frame.rows() > 0, ErrorCode::InvalidArgument, "empty dataset");
    const FeatureSchema& in = frame.schema;

    FeatureSchema out;
    out.label_name = in.label_name;
    out.class_names = in.class_names;
    std::vector<OneHotColumn> columns;

    for (std::size_t c = 0; c < in.width(); ++c) {
        if (in.feature_kinds[c] != FeatureKind::Categorical) {
            columns.push_back({c, std::nullopt});
            out.feature_names.push_back(in.feature_names[c]);
            out.feature_kinds.push_back(in.feature_kinds[c]);
            continue;
        }
        std::vector<double> levels;
        for (std::size_t r = 0; r < frame.rows(); ++r) {
            if (frame.is_missing(r, c)) continue;
            const double v = frame.values(r, c);
            if (std::find(levels.begin(), levels.end(), v) == levels.end()) levels.push_back(v);
        }
        for (double level : levels) {
            std::string level_name = format_level(level);
            if (!in.categories.empty() && level >= 0 && std::floor(level) == level &&
                static_cast<std::size_t>(level) < in.categories[c].size())
                level_name = in.categories[c][static_cast<std::size_t>(level)];
            columns.push_back({c, level});
            out.feature_names.push_back(in.feature_names[c] + "=" + level_name);
            out.feature_kinds.push_back(FeatureKind::Binary);
        }
    }
    return OneHotEncoder(in, std::move(out), std::move(columns));
}

std::vector<double> OneHotEncoder::transform_row(std::span<const double> raw) const {
    require(raw.size() == input_schema_.width(), ErrorCode::InvalidArgument, "one-hot: row width mismatch");
    std::vector<double> out;
    out.reserve(columns_.size());
    for (const auto& column : columns_) {
        const double v = raw[column.source];
        if (!column.level || std::isnan(v)) out.push_back(v);
        else out.push_back(v == *column.level ? 1.0 : 0.0);
    }
    return out;
}

FeatureFrame OneHotEncoder::transform(const FeatureFrame& frame) const {
    require(frame.schema.feature_names == input_schema_.feature_names, ErrorCode::InvalidArgument,
            "one-hot: frame columns differ from the fitted schema");
    FeatureFrame out{output_schema_, Matrix(0, columns_.size()), frame.labels};
    for (std::size_t r = 0; r < frame.rows(); ++r) out.values.append_row(transform_row(frame.values.row(r)));
    return out;
}

FeatureFrame encode_one_hot(const FeatureFrame& frame) { return OneHotEncoder::fit(frame).transform(frame); }

// --- KNN imputation -----------------------------------------------------------

std::optional<double> nan_euclidean(std::span<const double> a, std::span<const double> b) {
    double sum = 0.0;
    std::size_t observed = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (std::isnan(a[i]) || std::isnan(b[i])) continue;
        const double d = a[i] - b[i];
        sum += d * d;
        ++observed;
    }
    if (observed == 0) return std::nullopt;
    return std::sqrt(static_cast<double>(a.size()) / static_cast<double>(observed) * sum);
}

Matrix impute_against(const Matrix& target, const Matrix& donors, std::size_t k, bool target_is_donors) {
    require(k >= 1, ErrorCode::InvalidArgument, "impute: k must be at least 1");
    require(target.cols() == donors.cols() || target.rows() == 0, ErrorCode::InvalidArgument,
            "impute: target and donor widths differ");
    const std::size_t width = target.cols();

    // Fallback for a cell with no usable neighbor.
    std::vector<double> column_mean(width, 0.0);
    for (std::size_t c = 0; c < width; ++c) {
        double sum = 0.0;
        std::size_t count = 0;
        for (std::size_t j = 0; j < donors.rows(); ++j) {
            if (std::isnan(donors(j, c))) continue;
            sum += donors(j, c);
            ++count;
        }
        require(count > 0, ErrorCode::Data, "impute: column " + std::to_string(c) + " has no observed values");
        column_mean[c] = sum / static_cast<double>(count);
    }

    Matrix out = target;
    std::vector<std::optional<double>> distance(donors.rows());
    std::vector<std::size_t> candidates;
    candidates.reserve(donors.rows());

    for (std::size_t r = 0; r < target.rows(); ++r) {
        const auto row = target.row(r);
        const auto missing = static_cast<std::size_t>(std::count_if(row.begin(), row.end(), [](double v) { return std::isnan(v); }));
        if (missing == 0) continue;
        require(missing < width, ErrorCode::Data, "row unimputable: row " + std::to_string(r) + " has no observed cells");

        for (std::size_t j = 0; j < donors.rows(); ++j)
            distance[j] = (target_is_donors && j == r) ? std::nullopt : nan_euclidean(row, donors.row(j));

        for (std::size_t c = 0; c < width; ++c) {
            if (!std::isnan(row[c])) continue;
            candidates.clear();
            for (std::size_t j = 0; j < donors.rows(); ++j)
                if (distance[j] && !std::isnan(donors(j, c))) candidates.push_back(j);
            if (candidates.empty()) {
                out(r, c) = column_mean[c];
                continue;
            }
            const std::size_t take = std::min(k, candidates.size());
            std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(take), candidates.end(),
                              [&](std::size_t a, std::size_t b) {
                                  if (*distance[a] != *distance[b]) return *distance[a] < *distance[b];
                                  return a < b;
                              });
            double sum = 0.0;
            for (std::size_t i = 0; i < take; ++i) sum += donors(candidates[i], c);
            out(r, c) = sum / static_cast<double>(take);
        }
    }
    return out;
}

FeatureFrame impute_knn(const FeatureFrame& frame, std::size_t k) {
    for (std::size_t c = 0; c < frame.cols(); ++c) {
        bool observed = false;
        for (std::size_t r = 0; r < frame.rows() && !observed; ++r) observed = !frame.is_missing(r, c);
        require(observed || frame.rows() == 0, ErrorCode::Data,
                "impute: column '" + frame.schema.feature_names[c] + "' has no observed values");
    }
    if (!frame.has_missing()) return frame;
    FeatureFrame out = frame;
    out.values = impute_against(frame.values, frame.values, k, true);
    return out;
}

// --- SMOTE ------------------------------------------------------------------

FeatureFrame smote_balance(const FeatureFrame& frame, const SmoteOptions& options) {
    require(frame.labeled(), ErrorCode::InvalidArgument, "smote: frame is unlabeled");
    require_complete(frame, "smote");
    require(options.k >= 1, ErrorCode::InvalidArgument, "smote: k must be at least 1");

    const auto counts = frame.class_counts();
    const std::size_t target = *std::max_element(counts.begin(), counts.end());
    FeatureFrame out = frame;

    for (std::size_t cls = 0; cls < counts.size(); ++cls) {
        if (counts[cls] == 0 || counts[cls] == target) continue;
        require(counts[cls] >= 2, ErrorCode::Data,
                "insufficient minority samples: class '" + frame.schema.class_names[cls] + "' has 1 row");

        std::vector<std::size_t> members;
        for (std::size_t r = 0; r < frame.rows(); ++r)
            if (static_cast<std::size_t>((*frame.labels)[r]) == cls) members.push_back(r);
        const std::size_t k = std::min(options.k, members.size() - 1);

        std::vector<std::vector<std::size_t>> neighbors(members.size());
        std::vector<std::pair<double, std::size_t>> scored;
        for (std::size_t i = 0; i < members.size(); ++i) {
            scored.clear();
            for (std::size_t j = 0; j < members.size(); ++j) {
                if (j == i) continue;
                scored.emplace_back(simd::squared_distance(frame.values.row(members[i]), frame.values.row(members[j])), j);
            }
            std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(k), scored.end());
            for (std::size_t n = 0; n < k; ++n) neighbors[i].push_back(members[scored[n].second]);
        }

        Rng rng(derive_seed(options.seed, 0x5307e, cls));
        std::vector<double> synthetic(frame.cols());
        for (std::size_t s = counts[cls]; s < target; ++s) {
            const std::size_t i = rng.below(members.size());
            const std::size_t neighbor = neighbors[i][rng.below(k)];
            const double u = rng.uniform();
            const auto base = frame.values.row(members[i]);
            const auto toward = frame.values.row(neighbor);
            for (std::size_t c = 0; c < synthetic.size(); ++c) synthetic[c] = base[c] + u * (toward[c] - base[c]);
            out.values.append_row(synthetic);
            out.labels->push_back(static_cast<int>(cls));
        }
    }
    return out;
}

// --- scaling ------------------------------------------------------------------

StandardScaler::StandardScaler(std::vector<double> mean, std::vector<double> std_dev)
    : mean_(std::move(mean)), std_dev_(std::move(std_dev)) {
    require(mean_.size() == std_dev_.size(), ErrorCode::InvalidArgument, "scaler: mean/std length mismatch");
}

StandardScaler StandardScaler::fit(const FeatureFrame& train) {
    require_complete(train, "scale_standard");
    require(train.rows() > 0, ErrorCode::InvalidArgument, "scale_standard: empty training frame");
    const std::size_t n = train.rows();
    std::vector<double> mean(train.cols(), 0.0);
    std::vector<double> std_dev(train.cols(), 0.0);
    for (std::size_t c = 0; c < train.cols(); ++c) {
        double sum = 0.0;
        double lo = train.values(0, c);
        double hi = lo;
        for (std::size_t r = 0; r < n; ++r) {
            const double v = train.values(r, c);
            sum += v;
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        mean[c] = sum / static_cast<double>(n);
        if (lo == hi) {
            mean[c] = lo;
            continue;
        }
        double ss = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
            const double d = train.values(r, c) - mean[c];
            ss += d * d;
        }
        std_dev[c] = std::sqrt(ss / static_cast<double>(n));
    }
    return StandardScaler(std::move(mean), std::move(std_dev));
}

void StandardScaler::transform_row(std::span<double> row) const {
    require(row.size() == mean_.size(), ErrorCode::InvalidArgument, "scaler: row width mismatch");
    for (std::size_t c = 0; c < row.size(); ++c) row[c] = (row[c] - mean_[c]) / divisor(c);
}

FeatureFrame StandardScaler::transform(const FeatureFrame& frame) const {
    FeatureFrame out = frame;
    for (std::size_t r = 0; r < out.rows(); ++r) transform_row(out.values.row(r));
    return out;
}

FeatureFrame StandardScaler::inverse_transform(const FeatureFrame& frame) const {
    require(frame.cols() == mean_.size(), ErrorCode::InvalidArgument, "scaler: frame width mismatch");
    FeatureFrame out = frame;
    for (std::size_t r = 0; r < out.rows(); ++r) {
        auto row = out.values.row(r);
        for (std::size_t c = 0; c < row.size(); ++c) row[c] = row[c] * divisor(c) + mean_[c];
    }
    return out;
}

ScaledFrames scale_standard(const FeatureFrame& train, std::span<const FeatureFrame> others) {
    ScaledFrames result;
    result.scaler = StandardScaler::fit(train);
    result.train = result.scaler.transform(train);
    for (const auto& frame : others) {
        require_complete(frame, "scale_standard");
        result.others.push_back(result.scaler.transform(frame));
    }
    return result;
}

}  // namespace multidx::tabular
