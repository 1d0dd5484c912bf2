#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "multidx/random.hpp"
#include "multidx/tabular.hpp"

namespace multidx::tabular {

Matrix pearson_matrix(const FeatureFrame& frame) {
    require(!frame.has_missing(), ErrorCode::InvalidArgument, "pearson: frame has missing cells");
    require(frame.rows() >= 2, ErrorCode::InvalidArgument, "undefined correlation: fewer than 2 rows");
    const std::size_t n = frame.rows();
    const std::size_t width = frame.cols() + (frame.labeled() ? 1 : 0);

    // Centered columns; the label (if any) is the last one.
    std::vector<std::vector<double>> centered(width, std::vector<double>(n));
    for (std::size_t c = 0; c < width; ++c) {
        for (std::size_t r = 0; r < n; ++r)
            centered[c][r] = c < frame.cols() ? frame.values(r, c) : static_cast<double>((*frame.labels)[r]);
        const double mean = std::accumulate(centered[c].begin(), centered[c].end(), 0.0) / static_cast<double>(n);
        const bool constant = std::all_of(centered[c].begin(), centered[c].end(), [&](double v) { return v == centered[c][0]; });
        for (double& v : centered[c]) v = constant ? 0.0 : v - mean;
    }
    std::vector<double> norm(width);
    for (std::size_t c = 0; c < width; ++c)
        norm[c] = std::sqrt(std::inner_product(centered[c].begin(), centered[c].end(), centered[c].begin(), 0.0));

    Matrix r(width, width, 0.0);
    for (std::size_t i = 0; i < width; ++i) {
        r(i, i) = 1.0;
        for (std::size_t j = i + 1; j < width; ++j) {
            double value = 0.0;
            if (norm[i] > 0.0 && norm[j] > 0.0) {
                value = std::inner_product(centered[i].begin(), centered[i].end(), centered[j].begin(), 0.0) / (norm[i] * norm[j]);
                value = std::clamp(value, -1.0, 1.0);
            }
            r(i, j) = value;
            r(j, i) = value;
        }
    }
    return r;
}

FeatureFrame select_features(const FeatureFrame& frame, std::span<const std::string> keep) {
    std::vector<std::size_t> indices;
    std::vector<std::string> unknown;
    std::set<std::string_view> seen;
    for (const auto& name : keep) {
        require(seen.insert(name).second, ErrorCode::InvalidArgument, "select_features: duplicate name '" + name + "'");
        if (auto idx = frame.schema.index_of(name)) indices.push_back(*idx);
        else unknown.push_back(name);
    }
    if (!unknown.empty()) {
        std::string list;
        for (const auto& name : unknown) list += (list.empty() ? "'" : ", '") + name + "'";
        fail(ErrorCode::Data, "select_features: unknown feature " + list);
    }

    FeatureFrame out;
    out.schema.label_name = frame.schema.label_name;
    out.schema.class_names = frame.schema.class_names;
    for (std::size_t idx : indices) {
        out.schema.feature_names.push_back(frame.schema.feature_names[idx]);
        out.schema.feature_kinds.push_back(frame.schema.feature_kinds[idx]);
        if (!frame.schema.categories.empty()) out.schema.categories.push_back(frame.schema.categories[idx]);
    }
    out.values = Matrix(frame.rows(), indices.size());
    for (std::size_t r = 0; r < frame.rows(); ++r)
        for (std::size_t c = 0; c < indices.size(); ++c) out.values(r, c) = frame.values(r, indices[c]);
    out.labels = frame.labels;
    return out;
}

void SplitSpec::validate() const {
    require(train_fraction > 0.0 && train_fraction < 1.0, ErrorCode::InvalidArgument, "split: train fraction must be in (0,1)");
    require(validation_fraction >= 0.0 && validation_fraction < 1.0, ErrorCode::InvalidArgument,
            "split: validation fraction must be in [0,1)");
    require(train_fraction + validation_fraction < 1.0, ErrorCode::InvalidArgument,
            "split: train + validation fractions must leave a test partition");
}

namespace {

std::size_t round_count(std::size_t n, double fraction) {
    return static_cast<std::size_t>(std::llround(static_cast<double>(n) * fraction));
}

/// Splits `total` over classes proportionally to `fraction * available`, never
/// exceeding a class's available rows. Remainders go to the largest fractional
/// parts, ties to the lower class index.
std::vector<std::size_t> apportion(std::span<const std::size_t> class_sizes, std::span<const std::size_t> available,
                                   double fraction, std::size_t total) {
    const std::size_t classes = class_sizes.size();
    std::vector<std::size_t> quota(classes);
    std::vector<double> remainder(classes);
    std::size_t assigned = 0;
    for (std::size_t c = 0; c < classes; ++c) {
        const double exact = static_cast<double>(class_sizes[c]) * fraction;
        quota[c] = std::min(available[c], static_cast<std::size_t>(std::floor(exact + 1e-9)));
        remainder[c] = exact - static_cast<double>(quota[c]);
        assigned += quota[c];
    }
    std::vector<std::size_t> order(classes);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
    while (assigned < total) {
        bool progressed = false;
        for (std::size_t c : order) {
            if (assigned == total) break;
            if (quota[c] < available[c]) {
                ++quota[c];
                ++assigned;
                progressed = true;
            }
        }
        if (!progressed) break;
    }
    return quota;
}

}  // namespace

SplitIndices split_indices(std::span<const int> labels, std::size_t class_count, const SplitSpec& spec) {
    spec.validate();
    const std::size_t n = labels.size();
    const std::size_t n_train = round_count(n, spec.train_fraction);
    const std::size_t n_validation = round_count(n, spec.validation_fraction);
    require(n_train > 0, ErrorCode::InvalidArgument, "split: empty training partition");
    require(spec.validation_fraction == 0.0 || n_validation > 0, ErrorCode::InvalidArgument,
            "split: empty validation partition");
    require(n_train + n_validation < n, ErrorCode::InvalidArgument, "split: empty test partition");

    Rng rng(derive_seed(spec.seed, 0x5911));
    SplitIndices out;

    if (!spec.stratified) {
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        rng.shuffle(order);
        out.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
        out.validation.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
                              order.begin() + static_cast<std::ptrdiff_t>(n_train + n_validation));
        out.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train + n_validation), order.end());
    } else {
        std::vector<std::vector<std::size_t>> members(class_count);
        for (std::size_t i = 0; i < n; ++i) {
            require(labels[i] >= 0 && static_cast<std::size_t>(labels[i]) < class_count, ErrorCode::InvalidArgument,
                    "split: label out of range");
            members[static_cast<std::size_t>(labels[i])].push_back(i);
        }
        std::vector<std::size_t> sizes(class_count);
        for (std::size_t c = 0; c < class_count; ++c) {
            rng.shuffle(members[c]);
            sizes[c] = members[c].size();
        }
        const auto train_quota = apportion(sizes, sizes, spec.train_fraction, n_train);
        std::vector<std::size_t> left(class_count);
        for (std::size_t c = 0; c < class_count; ++c) left[c] = sizes[c] - train_quota[c];
        const auto validation_quota = apportion(sizes, left, spec.validation_fraction, n_validation);
        for (std::size_t c = 0; c < class_count; ++c) {
            const auto& m = members[c];
            const std::size_t a = train_quota[c];
            const std::size_t b = a + validation_quota[c];
            out.train.insert(out.train.end(), m.begin(), m.begin() + static_cast<std::ptrdiff_t>(a));
            out.validation.insert(out.validation.end(), m.begin() + static_cast<std::ptrdiff_t>(a),
                                  m.begin() + static_cast<std::ptrdiff_t>(b));
            out.test.insert(out.test.end(), m.begin() + static_cast<std::ptrdiff_t>(b), m.end());
        }
    }
    std::sort(out.train.begin(), out.train.end());
    std::sort(out.validation.begin(), out.validation.end());
    std::sort(out.test.begin(), out.test.end());
    require(!out.test.empty(), ErrorCode::InvalidArgument, "split: empty test partition");
    return out;
}

SplitFrames split(const FeatureFrame& frame, const SplitSpec& spec) {
    require(frame.labeled(), ErrorCode::InvalidArgument, "split: frame is unlabeled");
    const auto indices = split_indices(*frame.labels, frame.schema.class_names.size(), spec);
    SplitFrames out{frame.select_rows(indices.train), std::nullopt, frame.select_rows(indices.test)};
    if (spec.validation_fraction > 0.0) out.validation = frame.select_rows(indices.validation);
    return out;
}

}  // namespace multidx::tabular
