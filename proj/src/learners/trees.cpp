#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>

#include "detail.hpp"
#include "multidx/parallel.hpp"

namespace multidx::learners {

std::size_t Tree::leaf_count() const noexcept {
    return static_cast<std::size_t>(std::count(feature.begin(), feature.end(), kLeaf));
}

std::size_t Tree::depth() const {
    if (feature.empty()) return 0;
    std::size_t deepest = 0;
    std::vector<std::pair<std::uint32_t, std::size_t>> stack{{0u, 0u}};
    while (!stack.empty()) {
        auto [node, d] = stack.back();
        stack.pop_back();
        deepest = std::max(deepest, d);
        if (feature[node] != kLeaf) {
            stack.emplace_back(left[node], d + 1);
            stack.emplace_back(right[node], d + 1);
        }
    }
    return deepest;
}

std::size_t Tree::leaf_of(std::span<const double> row) const noexcept {
    std::size_t node = 0;
    while (feature[node] != kLeaf)
        node = row[static_cast<std::size_t>(feature[node])] <= threshold[node] ? left[node] : right[node];
    return node;
}

namespace detail {

namespace {

std::size_t add_node(Tree& tree, std::span<const double> value) {
    tree.feature.push_back(Tree::kLeaf);
    tree.threshold.push_back(0.0);
    tree.left.push_back(0);
    tree.right.push_back(0);
    tree.values.insert(tree.values.end(), value.begin(), value.end());
    return tree.feature.size() - 1;
}

double impurity(SplitCriterion criterion, std::span<const double> counts, double total) {
    double result = criterion == SplitCriterion::Gini ? 1.0 : 0.0;
    for (double count : counts) {
        if (count <= 0.0) continue;
        const double p = count / total;
        if (criterion == SplitCriterion::Gini) result -= p * p;
        else result -= p * std::log2(p);
    }
    return result;
}

struct SplitChoice {
    double improvement = -std::numeric_limits<double>::infinity();
    std::int32_t feature = Tree::kLeaf;
    double threshold = 0.0;

    bool valid() const noexcept { return feature != Tree::kLeaf; }

    /// Ties go to the lower feature index, then the lower threshold.
    bool improves_on(const SplitChoice& other) const noexcept {
        if (improvement != other.improvement) return improvement > other.improvement;
        if (feature != other.feature) return feature < other.feature;
        return threshold < other.threshold;
    }
};

struct SortedColumn {
    std::vector<std::pair<double, std::size_t>> entries;

    void load(const Matrix& x, std::span<const std::size_t> samples, std::size_t f) {
        entries.resize(samples.size());
        for (std::size_t i = 0; i < samples.size(); ++i) entries[i] = {x(samples[i], f), samples[i]};
        std::sort(entries.begin(), entries.end());
    }
    bool constant() const noexcept { return entries.front().first == entries.back().first; }
};

struct ClassNode {
    std::size_t id;
    std::vector<std::size_t> samples;
    SplitChoice split;
    double priority;  // impurity decrease weighted by the node's share of the root
};

struct ByPriority {
    bool operator()(const ClassNode& a, const ClassNode& b) const noexcept {
        if (a.priority != b.priority) return a.priority < b.priority;
        return a.id > b.id;
    }
};

}  // namespace

Tree grow_classification_tree(const Matrix& x, std::span<const int> y, std::size_t classes,
                              std::vector<std::size_t> samples, const ClassificationTreeOptions& options, Rng* rng) {
    const std::size_t features = x.cols();
    const double root_total = static_cast<double>(samples.size());
    Tree tree;
    tree.value_width = classes;

    std::vector<std::size_t> feature_order(features);
    std::vector<double> counts(classes), left_counts(classes), right_counts(classes);
    SortedColumn column;

    auto class_counts = [&](std::span<const std::size_t> rows) {
        std::fill(counts.begin(), counts.end(), 0.0);
        for (std::size_t r : rows) counts[static_cast<std::size_t>(y[r])] += 1.0;
    };

    auto best_split = [&](std::span<const std::size_t> rows) {
        SplitChoice best;
        class_counts(rows);
        const double total = static_cast<double>(rows.size());
        const double parent = impurity(options.criterion, counts, total);
        if (rows.size() < 2 || parent <= 0.0) return best;

        std::iota(feature_order.begin(), feature_order.end(), 0);
        const bool subsample = options.max_features > 0 && options.max_features < features;
        if (subsample) rng->shuffle(feature_order);

        std::size_t evaluated = 0;
        for (std::size_t f : feature_order) {
            if (subsample && evaluated >= options.max_features) break;
            column.load(x, rows, f);
            if (column.constant()) continue;
            ++evaluated;

            std::fill(left_counts.begin(), left_counts.end(), 0.0);
            right_counts = counts;
            for (std::size_t i = 0; i + 1 < column.entries.size(); ++i) {
                const auto cls = static_cast<std::size_t>(y[column.entries[i].second]);
                left_counts[cls] += 1.0;
                right_counts[cls] -= 1.0;
                const double v = column.entries[i].first;
                const double next = column.entries[i + 1].first;
                if (v == next) continue;
                const double n_left = static_cast<double>(i + 1);
                const double n_right = total - n_left;
                const double child = (n_left / total) * impurity(options.criterion, left_counts, n_left) +
                                     (n_right / total) * impurity(options.criterion, right_counts, n_right);
                SplitChoice candidate{parent - child, static_cast<std::int32_t>(f), v + (next - v) / 2.0};
                if (candidate.threshold >= next) candidate.threshold = v;
                if (candidate.improves_on(best)) best = candidate;
            }
        }
        return best;
    };

    auto make_node = [&](std::vector<std::size_t> rows) {
        class_counts(rows);
        std::vector<double> distribution(classes);
        for (std::size_t c = 0; c < classes; ++c) distribution[c] = counts[c] / static_cast<double>(rows.size());
        const std::size_t id = add_node(tree, distribution);
        SplitChoice split = best_split(rows);
        const double priority = split.valid() ? split.improvement * static_cast<double>(rows.size()) / root_total : 0.0;
        return ClassNode{id, std::move(rows), split, priority};
    };

    std::priority_queue<ClassNode, std::vector<ClassNode>, ByPriority> frontier;
    ClassNode root = make_node(std::move(samples));
    if (root.split.valid()) frontier.push(std::move(root));
    std::size_t leaves = 1;

    while (!frontier.empty() && (options.max_leaf_nodes == 0 || leaves < options.max_leaf_nodes)) {
        ClassNode node = frontier.top();
        frontier.pop();
        const auto f = static_cast<std::size_t>(node.split.feature);
        std::vector<std::size_t> left_rows, right_rows;
        for (std::size_t r : node.samples) (x(r, f) <= node.split.threshold ? left_rows : right_rows).push_back(r);

        ClassNode left = make_node(std::move(left_rows));
        ClassNode right = make_node(std::move(right_rows));
        tree.feature[node.id] = node.split.feature;
        tree.threshold[node.id] = node.split.threshold;
        tree.left[node.id] = static_cast<std::uint32_t>(left.id);
        tree.right[node.id] = static_cast<std::uint32_t>(right.id);
        ++leaves;
        if (left.split.valid()) frontier.push(std::move(left));
        if (right.split.valid()) frontier.push(std::move(right));
    }
    return tree;
}

Tree grow_boosting_tree(const Matrix& x, std::span<const double> gradient, std::span<const double> hessian,
                        std::vector<std::size_t> samples, const BoostingTreeOptions& options) {
    Tree tree;
    tree.value_width = 1;
    SortedColumn column;

    auto score = [&](double g, double h) { return g * g / (h + options.lambda); };

    struct Pending {
        std::size_t id;
        std::vector<std::size_t> rows;
        std::size_t depth;
        double g;
        double h;
    };

    auto leaf_weight = [&](double g, double h) { return -g / (h + options.lambda) * options.learning_rate; };

    double g0 = 0.0, h0 = 0.0;
    for (std::size_t r : samples) {
        g0 += gradient[r];
        h0 += hessian[r];
    }
    const double root_weight = leaf_weight(g0, h0);
    std::vector<Pending> stack;
    stack.push_back({add_node(tree, std::span<const double>(&root_weight, 1)), std::move(samples), 0, g0, h0});

    while (!stack.empty()) {
        Pending node = std::move(stack.back());
        stack.pop_back();
        if (node.depth >= options.max_depth || node.rows.size() < 2) continue;

        SplitChoice best;
        double best_gl = 0.0, best_hl = 0.0;
        const double parent = score(node.g, node.h);
        for (std::size_t f = 0; f < x.cols(); ++f) {
            column.load(x, node.rows, f);
            if (column.constant()) continue;
            double gl = 0.0, hl = 0.0;
            for (std::size_t i = 0; i + 1 < column.entries.size(); ++i) {
                gl += gradient[column.entries[i].second];
                hl += hessian[column.entries[i].second];
                const double v = column.entries[i].first;
                const double next = column.entries[i + 1].first;
                if (v == next) continue;
                const double gr = node.g - gl;
                const double hr = node.h - hl;
                if (hl < options.min_child_weight || hr < options.min_child_weight) continue;
                const double gain = 0.5 * (score(gl, hl) + score(gr, hr) - parent) - options.gamma;
                SplitChoice candidate{gain, static_cast<std::int32_t>(f), v + (next - v) / 2.0};
                if (candidate.threshold >= next) candidate.threshold = v;
                if (candidate.improves_on(best)) {
                    best = candidate;
                    best_gl = gl;
                    best_hl = hl;
                }
            }
        }
        if (!best.valid() || best.improvement <= 0.0) continue;

        const auto f = static_cast<std::size_t>(best.feature);
        std::vector<std::size_t> left_rows, right_rows;
        for (std::size_t r : node.rows) (x(r, f) <= best.threshold ? left_rows : right_rows).push_back(r);
        const double gr = node.g - best_gl;
        const double hr = node.h - best_hl;
        const double wl = leaf_weight(best_gl, best_hl);
        const double wr = leaf_weight(gr, hr);
        const std::size_t left_id = add_node(tree, std::span<const double>(&wl, 1));
        const std::size_t right_id = add_node(tree, std::span<const double>(&wr, 1));
        tree.feature[node.id] = best.feature;
        tree.threshold[node.id] = best.threshold;
        tree.left[node.id] = static_cast<std::uint32_t>(left_id);
        tree.right[node.id] = static_cast<std::uint32_t>(right_id);
        stack.push_back({right_id, std::move(right_rows), node.depth + 1, gr, hr});
        stack.push_back({left_id, std::move(left_rows), node.depth + 1, best_gl, best_hl});
    }
    return tree;
}

// --- forests --------------------------------------------------------------------

ForestModel fit_forest(const Matrix& x, std::span<const int> y, std::size_t classes, const RandomForestParams& params,
                       std::uint64_t seed) {
    require(params.trees >= 1, ErrorCode::InvalidArgument, "random forest: at least one tree required");
    ClassificationTreeOptions options;
    options.criterion = params.criterion;
    options.max_features = params.max_features.value_or(
        std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(x.cols()))))));

    ForestModel model;
    model.trees.resize(params.trees);
    const std::size_t n = x.rows();
    parallel_for(params.trees, [&](std::size_t t) {
        Rng rng(derive_seed(seed, 0xf0e57, t));
        std::vector<std::size_t> bootstrap(n);
        for (auto& row : bootstrap) row = rng.below(n);
        std::sort(bootstrap.begin(), bootstrap.end());
        model.trees[t] = grow_classification_tree(x, y, classes, std::move(bootstrap), options, &rng);
    });
    return model;
}

Matrix tree_proba(const Tree& tree, const Matrix& rows) {
    Matrix out(rows.rows(), tree.value_width);
    for (std::size_t r = 0; r < rows.rows(); ++r) {
        const auto value = tree.value(tree.leaf_of(rows.row(r)));
        std::copy(value.begin(), value.end(), out.row(r).begin());
    }
    return out;
}

Matrix forest_proba(const ForestModel& model, std::size_t classes, const Matrix& rows) {
    Matrix out(rows.rows(), classes, 0.0);
    for (std::size_t r = 0; r < rows.rows(); ++r) {
        auto acc = out.row(r);
        for (const auto& tree : model.trees) {
            const auto value = tree.value(tree.leaf_of(rows.row(r)));
            for (std::size_t c = 0; c < classes; ++c) acc[c] += value[c];
        }
        for (double& v : acc) v /= static_cast<double>(model.trees.size());
    }
    return out;
}

// --- boosting -------------------------------------------------------------------

namespace {

double sigmoid(double z) noexcept {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

void softmax_in_place(std::span<double> values) noexcept {
    const double peak = *std::max_element(values.begin(), values.end());
    double total = 0.0;
    for (double& v : values) {
        v = std::exp(v - peak);
        total += v;
    }
    for (double& v : values) v /= total;
}

}  // namespace

Matrix margins_to_proba(const Matrix& margins, std::size_t classes) {
    Matrix out(margins.rows(), classes);
    for (std::size_t r = 0; r < margins.rows(); ++r) {
        if (margins.cols() == 1) {
            const double p = sigmoid(margins(r, 0));
            out(r, 0) = 1.0 - p;
            out(r, 1) = p;
        } else {
            auto row = out.row(r);
            std::copy(margins.row(r).begin(), margins.row(r).end(), row.begin());
            softmax_in_place(row);
        }
    }
    return out;
}

Matrix boosting_margins(const BoostedModel& model, const Matrix& rows, std::size_t round_limit) {
    const std::size_t outputs = model.base_margin.size();
    Matrix margins(rows.rows(), outputs);
    const std::size_t rounds = std::min(round_limit, model.rounds.size());
    for (std::size_t r = 0; r < rows.rows(); ++r) {
        auto m = margins.row(r);
        std::copy(model.base_margin.begin(), model.base_margin.end(), m.begin());
        for (std::size_t t = 0; t < rounds; ++t)
            for (std::size_t k = 0; k < outputs; ++k) {
                const Tree& tree = model.rounds[t][k];
                m[k] += tree.value(tree.leaf_of(rows.row(r)))[0];
            }
    }
    return margins;
}

BoostedModel fit_boosting(const Matrix& x, std::span<const int> y, std::size_t classes, const BoostingParams& params,
                          std::uint64_t seed) {
    require(params.subsample > 0.0 && params.subsample <= 1.0, ErrorCode::InvalidArgument,
            "boosting: subsample must be in (0,1]");
    const std::size_t n = x.rows();
    const std::size_t outputs = classes == 2 ? 1 : classes;

    std::vector<double> prior(classes, 0.0);
    for (int label : y) prior[static_cast<std::size_t>(label)] += 1.0;
    for (double& p : prior) p = std::clamp(p / static_cast<double>(n), 1e-6, 1.0 - 1e-6);

    BoostedModel model;
    if (outputs == 1) model.base_margin = {std::log(prior[1] / prior[0])};
    else
        for (double p : prior) model.base_margin.push_back(std::log(p));

    BoostingTreeOptions options{params.max_depth, params.lambda, params.gamma, params.min_child_weight,
                                params.learning_rate};
    Matrix margins(n, outputs);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t k = 0; k < outputs; ++k) margins(r, k) = model.base_margin[k];

    std::vector<double> gradient(n), hessian(n);
    for (std::size_t round = 0; round < params.rounds; ++round) {
        Rng rng(derive_seed(seed, 0xb0057, round));
        std::vector<std::size_t> rows;
        for (std::size_t r = 0; r < n; ++r)
            if (params.subsample >= 1.0 || rng.uniform() < params.subsample) rows.push_back(r);
        if (rows.empty()) rows.push_back(rng.below(n));

        const Matrix proba = margins_to_proba(margins, classes);
        std::vector<Tree> trees;
        for (std::size_t k = 0; k < outputs; ++k) {
            const std::size_t cls = outputs == 1 ? 1 : k;
            for (std::size_t r = 0; r < n; ++r) {
                const double p = proba(r, cls);
                const double target = static_cast<std::size_t>(y[r]) == cls ? 1.0 : 0.0;
                gradient[r] = p - target;
                hessian[r] = std::max(p * (1.0 - p), 1e-16);
            }
            trees.push_back(grow_boosting_tree(x, gradient, hessian, rows, options));
        }
        for (std::size_t r = 0; r < n; ++r)
            for (std::size_t k = 0; k < outputs; ++k) margins(r, k) += trees[k].value(trees[k].leaf_of(x.row(r)))[0];
        model.rounds.push_back(std::move(trees));
    }
    return model;
}

}  // namespace detail
}  // namespace multidx::learners
