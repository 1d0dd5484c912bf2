#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>

#include <zlib.h>

#include "multidx/modelstore.hpp"

namespace multidx::modelstore {

namespace {

using learners::LearnerKind;

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

[[noreturn]] void malformed(const std::string& what) { fail(ErrorCode::Format, "malformed: " + what); }

void check(bool condition, const std::string& what) {
    if (!condition) malformed(what);
}

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
    uLong crc = crc32(0L, Z_NULL, 0);
    // zlib takes uInt lengths; feed large payloads in pieces.
    std::size_t offset = 0;
    while (offset < bytes.size()) {
        const auto chunk = static_cast<uInt>(std::min<std::size_t>(bytes.size() - offset, 1u << 30));
        crc = crc32(crc, bytes.data() + offset, chunk);
        offset += chunk;
    }
    return static_cast<std::uint32_t>(crc);
}

// --- primitive codec ---------------------------------------------------------

class Writer {
public:
    void u8(std::uint8_t v) { bytes_.push_back(v); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void size(std::size_t v) { u64(static_cast<std::uint64_t>(v)); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void boolean(bool v) { u8(v ? 1 : 0); }
    void str(std::string_view s) {
        size(s.size());
        bytes_.insert(bytes_.end(), s.begin(), s.end());
    }
    void doubles(std::span<const double> values) {
        size(values.size());
        for (double v : values) f64(v);
    }
    void sizes(std::span<const std::size_t> values) {
        size(values.size());
        for (auto v : values) size(v);
    }
    void optional_f64(const std::optional<double>& v) {
        boolean(v.has_value());
        if (v) f64(*v);
    }
    void optional_size(const std::optional<std::size_t>& v) {
        boolean(v.has_value());
        if (v) size(*v);
    }
    void matrix(const Matrix& m) {
        size(m.rows());
        size(m.cols());
        for (double v : m.data()) f64(v);
    }

    std::vector<std::uint8_t> take() { return std::move(bytes_); }

private:
    std::vector<std::uint8_t> bytes_;
};

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    std::uint8_t u8() { return need(1)[0]; }
    std::uint32_t u32() {
        const auto b = need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        const auto b = need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
    bool boolean() {
        const auto v = u8();
        check(v <= 1, "bad boolean");
        return v == 1;
    }
    /// A count of elements at least `element_bytes` wide each, bounded by what is left.
    std::size_t count(std::size_t element_bytes = 1) {
        const std::uint64_t v = u64();
        check(v <= remaining() / std::max<std::size_t>(element_bytes, 1), "truncated payload");
        return static_cast<std::size_t>(v);
    }
    std::size_t size() {
        const std::uint64_t v = u64();
        check(v <= (std::uint64_t{1} << 40), "implausible size");
        return static_cast<std::size_t>(v);
    }
    std::string str() {
        const std::size_t n = count();
        const auto b = need(n);
        return std::string(b.begin(), b.end());
    }
    std::vector<double> doubles() {
        std::vector<double> out(count(8));
        for (double& v : out) v = f64();
        return out;
    }
    std::vector<std::size_t> sizes() {
        std::vector<std::size_t> out(count(8));
        for (auto& v : out) v = size();
        return out;
    }
    std::optional<double> optional_f64() {
        if (!boolean()) return std::nullopt;
        return f64();
    }
    std::optional<std::size_t> optional_size() {
        if (!boolean()) return std::nullopt;
        return size();
    }
    Matrix matrix() {
        const std::size_t rows = size();
        const std::size_t cols = size();
        check(cols == 0 || rows <= remaining() / 8 / cols, "truncated payload");
        std::vector<double> data(rows * cols);
        for (double& v : data) v = f64();
        Matrix m(rows, cols, std::move(data));
        return m;
    }

    std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

private:
    std::span<const std::uint8_t> need(std::size_t n) {
        check(n <= remaining(), "truncated payload");
        const auto out = bytes_.subspan(pos_, n);
        pos_ += n;
        return out;
    }

    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

// --- tabular ---------------------------------------------------------------

void write_schema(Writer& w, const tabular::FeatureSchema& schema) { w.str(tabular::schema_to_json(schema).dump()); }

tabular::FeatureSchema read_schema(Reader& r) {
    const std::string text = r.str();
    try {
        return tabular::schema_from_json(nlohmann::json::parse(text));
    } catch (const nlohmann::json::exception& e) {
        malformed(std::string("schema: ") + e.what());
    }
}

void write_preprocessing(Writer& w, const TabularPreprocessing& p) {
    write_schema(w, p.input_schema);
    write_schema(w, p.encoder.input_schema());
    write_schema(w, p.encoder.output_schema());
    w.size(p.encoder.columns().size());
    for (const auto& column : p.encoder.columns()) {
        w.size(column.source);
        w.optional_f64(column.level);
    }
    w.matrix(p.imputer_donors);
    w.size(p.imputer_k);
    w.doubles(p.scaler.mean());
    w.doubles(p.scaler.std_dev());
}

TabularPreprocessing read_preprocessing(Reader& r) {
    TabularPreprocessing p;
    p.input_schema = read_schema(r);
    auto encoder_in = read_schema(r);
    auto encoder_out = read_schema(r);
    std::vector<tabular::OneHotColumn> columns(r.count(9));
    for (auto& column : columns) {
        column.source = r.size();
        column.level = r.optional_f64();
        check(column.source < encoder_in.width(), "one-hot column source out of range");
    }
    check(columns.size() == encoder_out.width(), "one-hot plan width mismatch");
    p.encoder = tabular::OneHotEncoder(std::move(encoder_in), std::move(encoder_out), std::move(columns));
    p.imputer_donors = r.matrix();
    p.imputer_k = r.size();
    auto mean = r.doubles();
    auto std_dev = r.doubles();
    check(mean.size() == std_dev.size(), "scaler size mismatch");
    p.scaler = tabular::StandardScaler(std::move(mean), std::move(std_dev));
    return p;
}

// --- learners ----------------------------------------------------------------

void write_tree(Writer& w, const learners::Tree& tree) {
    w.size(tree.node_count());
    w.size(tree.value_width);
    for (std::size_t i = 0; i < tree.node_count(); ++i) {
        w.u32(static_cast<std::uint32_t>(tree.feature[i]));
        w.f64(tree.threshold[i]);
        w.u32(tree.left[i]);
        w.u32(tree.right[i]);
    }
    for (double v : tree.values) w.f64(v);
}

learners::Tree read_tree(Reader& r, std::size_t width, std::size_t value_width) {
    learners::Tree tree;
    const std::size_t nodes = r.count(20);
    tree.value_width = r.size();
    check(nodes >= 1, "empty tree");
    check(tree.value_width == value_width, "tree value width mismatch");
    tree.feature.resize(nodes);
    tree.threshold.resize(nodes);
    tree.left.resize(nodes);
    tree.right.resize(nodes);
    for (std::size_t i = 0; i < nodes; ++i) {
        tree.feature[i] = static_cast<std::int32_t>(r.u32());
        tree.threshold[i] = r.f64();
        tree.left[i] = r.u32();
        tree.right[i] = r.u32();
        if (tree.feature[i] == learners::Tree::kLeaf) continue;
        // Children are stored after their parent, which also rules out cycles.
        check(tree.feature[i] >= 0 && static_cast<std::size_t>(tree.feature[i]) < width, "tree feature out of range");
        check(tree.left[i] > i && tree.left[i] < nodes && tree.right[i] > i && tree.right[i] < nodes,
              "tree child out of range");
    }
    check(nodes <= r.remaining() / 8 / std::max<std::size_t>(value_width, 1), "truncated payload");
    tree.values.resize(nodes * value_width);
    for (double& v : tree.values) v = r.f64();
    return tree;
}

void write_spec(Writer& w, const learners::LearnerSpec& spec) {
    w.u32(static_cast<std::uint32_t>(spec.params.index()));
    w.u64(spec.seed);
    std::visit(Overloaded{
                   [&](const learners::LogisticRegressionParams& p) {
                       w.f64(p.l2);
                       w.size(p.max_iterations);
                       w.f64(p.gradient_tolerance);
                   },
                   [&](const learners::KnnParams& p) {
                       w.size(p.neighbors);
                       w.f64(p.minkowski_p);
                   },
                   [&](const learners::SvmParams& p) {
                       w.f64(p.c);
                       w.optional_f64(p.gamma);
                       w.f64(p.tolerance);
                       w.size(p.cache_megabytes);
                   },
                   [&](const learners::NaiveBayesParams& p) { w.f64(p.variance_floor); },
                   [&](const learners::DecisionTreeParams& p) {
                       w.u32(static_cast<std::uint32_t>(p.criterion));
                       w.size(p.max_leaf_nodes);
                   },
                   [&](const learners::RandomForestParams& p) {
                       w.size(p.trees);
                       w.u32(static_cast<std::uint32_t>(p.criterion));
                       w.optional_size(p.max_features);
                   },
                   [&](const learners::BoostingParams& p) {
                       w.size(p.rounds);
                       w.size(p.max_depth);
                       w.f64(p.subsample);
                       w.f64(p.learning_rate);
                       w.f64(p.lambda);
                       w.f64(p.gamma);
                       w.f64(p.min_child_weight);
                   },
               },
               spec.params);
}

learners::SplitCriterion read_criterion(Reader& r) {
    const auto v = r.u32();
    check(v <= 1, "bad split criterion");
    return static_cast<learners::SplitCriterion>(v);
}

learners::LearnerSpec read_spec(Reader& r) {
    learners::LearnerSpec spec;
    const auto kind = r.u32();
    spec.seed = r.u64();
    switch (static_cast<LearnerKind>(kind)) {
        case LearnerKind::LogisticRegression: {
            learners::LogisticRegressionParams p;
            p.l2 = r.f64();
            p.max_iterations = r.size();
            p.gradient_tolerance = r.f64();
            spec.params = p;
            break;
        }
        case LearnerKind::KNearestNeighbors: {
            learners::KnnParams p;
            p.neighbors = r.size();
            p.minkowski_p = r.f64();
            check(p.neighbors >= 1 && p.minkowski_p >= 1.0, "bad knn parameters");
            spec.params = p;
            break;
        }
        case LearnerKind::SvmRbf: {
            learners::SvmParams p;
            p.c = r.f64();
            p.gamma = r.optional_f64();
            p.tolerance = r.f64();
            p.cache_megabytes = r.size();
            spec.params = p;
            break;
        }
        case LearnerKind::GaussianNaiveBayes: spec.params = learners::NaiveBayesParams{r.f64()}; break;
        case LearnerKind::DecisionTree: {
            learners::DecisionTreeParams p;
            p.criterion = read_criterion(r);
            p.max_leaf_nodes = r.size();
            spec.params = p;
            break;
        }
        case LearnerKind::RandomForest: {
            learners::RandomForestParams p;
            p.trees = r.size();
            p.criterion = read_criterion(r);
            p.max_features = r.optional_size();
            spec.params = p;
            break;
        }
        case LearnerKind::GradientBoostedTrees: {
            learners::BoostingParams p;
            p.rounds = r.size();
            p.max_depth = r.size();
            p.subsample = r.f64();
            p.learning_rate = r.f64();
            p.lambda = r.f64();
            p.gamma = r.f64();
            p.min_child_weight = r.f64();
            spec.params = p;
            break;
        }
        default: malformed("unknown learner kind " + std::to_string(kind));
    }
    return spec;
}

void write_learner(Writer& w, const learners::TrainedLearner& model) {
    write_spec(w, model.spec);
    w.size(model.classes);
    w.size(model.width);
    w.u32(static_cast<std::uint32_t>(model.state.index()));
    std::visit(Overloaded{
                   [&](const learners::LogisticModel& m) {
                       w.matrix(m.weights);
                       w.doubles(m.bias);
                       w.sizes(m.iterations);
                   },
                   [&](const learners::KnnModel& m) {
                       w.matrix(m.points);
                       w.size(m.labels.size());
                       for (int label : m.labels) w.u32(static_cast<std::uint32_t>(label));
                   },
                   [&](const learners::SvmModel& m) {
                       w.f64(m.gamma);
                       w.size(m.machines.size());
                       for (const auto& machine : m.machines) {
                           w.matrix(machine.support_vectors);
                           w.doubles(machine.coefficients);
                           w.f64(machine.bias);
                           w.f64(machine.platt_a);
                           w.f64(machine.platt_b);
                       }
                   },
                   [&](const learners::NaiveBayesModel& m) {
                       w.matrix(m.means);
                       w.matrix(m.variances);
                       w.doubles(m.log_priors);
                   },
                   [&](const learners::TreeModel& m) { write_tree(w, m.tree); },
                   [&](const learners::ForestModel& m) {
                       w.size(m.trees.size());
                       for (const auto& tree : m.trees) write_tree(w, tree);
                   },
                   [&](const learners::BoostedModel& m) {
                       w.doubles(m.base_margin);
                       w.size(m.rounds.size());
                       for (const auto& round : m.rounds) {
                           w.size(round.size());
                           for (const auto& tree : round) write_tree(w, tree);
                       }
                   },
               },
               model.state);
}

void check_matrix(const Matrix& m, std::size_t rows, std::size_t cols, const char* what) {
    check(m.rows() == rows && m.cols() == cols, std::string(what) + " shape mismatch");
}

learners::TrainedLearner read_learner(Reader& r) {
    learners::TrainedLearner model;
    model.spec = read_spec(r);
    model.classes = r.size();
    model.width = r.size();
    check(model.classes >= 2 && model.width >= 1, "bad learner dimensions");
    const std::size_t classes = model.classes;
    const std::size_t width = model.width;
    const std::size_t outputs = classes == 2 ? 1 : classes;
    const auto state = r.u32();
    check(state == model.spec.params.index(), "learner state does not match its kind");

    switch (static_cast<LearnerKind>(state)) {
        case LearnerKind::LogisticRegression: {
            learners::LogisticModel m;
            m.weights = r.matrix();
            m.bias = r.doubles();
            m.iterations = r.sizes();
            check_matrix(m.weights, outputs, width, "logistic weights");
            check(m.bias.size() == outputs, "logistic bias size mismatch");
            model.state = std::move(m);
            break;
        }
        case LearnerKind::KNearestNeighbors: {
            learners::KnnModel m;
            m.points = r.matrix();
            m.labels.resize(r.count(4));
            for (int& label : m.labels) {
                label = static_cast<int>(r.u32());
                check(label >= 0 && static_cast<std::size_t>(label) < classes, "knn label out of range");
            }
            check(m.points.cols() == width && m.points.rows() == m.labels.size() && !m.labels.empty(),
                  "knn points shape mismatch");
            model.state = std::move(m);
            break;
        }
        case LearnerKind::SvmRbf: {
            learners::SvmModel m;
            m.gamma = r.f64();
            m.machines.resize(r.count(32));
            check(m.machines.size() == outputs, "svm machine count mismatch");
            for (auto& machine : m.machines) {
                machine.support_vectors = r.matrix();
                machine.coefficients = r.doubles();
                machine.bias = r.f64();
                machine.platt_a = r.f64();
                machine.platt_b = r.f64();
                check((machine.support_vectors.cols() == width || machine.support_vectors.rows() == 0) &&
                          machine.coefficients.size() == machine.support_vectors.rows(),
                      "svm support vector shape mismatch");
            }
            model.state = std::move(m);
            break;
        }
        case LearnerKind::GaussianNaiveBayes: {
            learners::NaiveBayesModel m;
            m.means = r.matrix();
            m.variances = r.matrix();
            m.log_priors = r.doubles();
            check_matrix(m.means, classes, width, "naive bayes means");
            check_matrix(m.variances, classes, width, "naive bayes variances");
            check(m.log_priors.size() == classes, "naive bayes prior size mismatch");
            model.state = std::move(m);
            break;
        }
        case LearnerKind::DecisionTree: model.state = learners::TreeModel{read_tree(r, width, classes)}; break;
        case LearnerKind::RandomForest: {
            learners::ForestModel m;
            m.trees.resize(r.count(36));
            check(!m.trees.empty(), "empty forest");
            for (auto& tree : m.trees) tree = read_tree(r, width, classes);
            model.state = std::move(m);
            break;
        }
        case LearnerKind::GradientBoostedTrees: {
            learners::BoostedModel m;
            m.base_margin = r.doubles();
            check(m.base_margin.size() == outputs, "boosting margin size mismatch");
            m.rounds.resize(r.count(8));
            for (auto& round : m.rounds) {
                round.resize(r.count(36));
                check(round.size() == outputs, "boosting round width mismatch");
                for (auto& tree : round) tree = read_tree(r, width, 1);
            }
            model.state = std::move(m);
            break;
        }
    }
    return model;
}

void write_stack(Writer& w, const stacking::StackedModel& model) {
    w.size(model.classes);
    w.size(model.width);
    w.size(model.meta_feature_width);
    w.size(model.bases.size());
    for (const auto& base : model.bases) write_learner(w, base);
    write_learner(w, model.meta);
}

stacking::StackedModel read_stack(Reader& r) {
    stacking::StackedModel model;
    model.classes = r.size();
    model.width = r.size();
    model.meta_feature_width = r.size();
    model.bases.resize(r.count(16));
    check(!model.bases.empty(), "stack has no base learners");
    for (auto& base : model.bases) {
        base = read_learner(r);
        check(base.classes == model.classes && base.width == model.width, "base learner dimensions mismatch");
    }
    model.meta = read_learner(r);
    check(model.meta.classes == model.classes, "meta learner class count mismatch");
    check(model.meta_feature_width == model.bases.size() * (model.classes - 1) &&
              model.meta.width == model.meta_feature_width,
          "meta feature width mismatch");
    return model;
}

// --- cnn -----------------------------------------------------------------

enum class LayerTag : std::uint32_t { Conv2D = 0, ReLU = 1, MaxPool = 2, Flatten = 3, Dense = 4, Softmax = 5 };

void write_cnn(Writer& w, const cnn::CnnModel& model) {
    w.sizes(model.input_shape);
    w.size(model.class_count);
    w.size(model.layers.size());
    for (const auto& layer : model.layers) {
        w.u32(static_cast<std::uint32_t>(layer.index()));
        if (const auto* conv = std::get_if<cnn::Conv2D>(&layer)) w.size(conv->filters);
        if (const auto* dense = std::get_if<cnn::Dense>(&layer)) w.size(dense->units);
    }
    for (const auto& params : model.params) {
        w.sizes(params.weights.shape);
        w.doubles(params.weights.data);
        w.doubles(params.bias);
    }
    const auto& c = model.config;
    w.f64(c.learning_rate);
    w.f64(c.beta1);
    w.f64(c.beta2);
    w.f64(c.epsilon);
    w.size(c.epochs);
    w.size(c.batch_size);
    w.u64(c.seed);
}

cnn::CnnModel read_cnn(Reader& r) {
    cnn::CnnModel model;
    model.input_shape = r.sizes();
    model.class_count = r.size();
    model.layers.resize(r.count(4));
    for (auto& layer : model.layers) {
        switch (static_cast<LayerTag>(r.u32())) {
            case LayerTag::Conv2D: layer = cnn::Conv2D{r.size()}; break;
            case LayerTag::ReLU: layer = cnn::ReLU{}; break;
            case LayerTag::MaxPool: layer = cnn::MaxPool{}; break;
            case LayerTag::Flatten: layer = cnn::Flatten{}; break;
            case LayerTag::Dense: layer = cnn::Dense{r.size()}; break;
            case LayerTag::Softmax: layer = cnn::Softmax{}; break;
            default: malformed("unknown layer tag");
        }
    }
    check(model.input_shape.size() == 3, "cnn input must be H x W x C");
    std::vector<std::vector<std::size_t>> shapes;
    try {
        shapes = cnn::infer_shapes(model.input_shape, model.layers);
    } catch (const Error& e) {
        malformed(std::string("cnn layers: ") + e.what());
    }
    check(!model.layers.empty() && std::holds_alternative<cnn::Softmax>(model.layers.back()) &&
              shapes.back() == std::vector<std::size_t>{model.class_count} && model.class_count >= 2,
          "cnn output does not match class count");

    model.params.resize(model.layers.size());
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        auto& params = model.params[l];
        params.weights.shape = r.sizes();
        params.weights.data = r.doubles();
        params.bias = r.doubles();

        const auto& in = l == 0 ? model.input_shape : shapes[l - 1];
        std::vector<std::size_t> expected_shape;
        std::size_t expected_bias = 0;
        if (const auto* conv = std::get_if<cnn::Conv2D>(&model.layers[l])) {
            expected_shape = {3, 3, in[2], conv->filters};
            expected_bias = conv->filters;
        } else if (const auto* dense = std::get_if<cnn::Dense>(&model.layers[l])) {
            expected_shape = {in[0], dense->units};
            expected_bias = dense->units;
        }
        const bool empty = expected_shape.empty();
        check((empty ? params.weights.shape.empty() : params.weights.shape == expected_shape) &&
                  params.weights.data.size() == (empty ? 0 : cnn::element_count(expected_shape)) &&
                  params.bias.size() == expected_bias,
              "cnn parameters of layer " + std::to_string(l) + " have the wrong shape");
    }
    auto& c = model.config;
    c.learning_rate = r.f64();
    c.beta1 = r.f64();
    c.beta2 = r.f64();
    c.epsilon = r.f64();
    c.epochs = r.size();
    c.batch_size = r.size();
    c.seed = r.u64();
    return model;
}

// --- artifact ------------------------------------------------------------

std::vector<std::uint8_t> encode_payload(const Artifact& a) {
    Writer w;
    w.str(a.model_version);
    w.boolean(a.tabular.has_value());
    if (a.tabular) write_preprocessing(w, *a.tabular);
    w.boolean(a.image.has_value());
    if (a.image) {
        w.u32(static_cast<std::uint32_t>(a.image->kind));
        w.size(a.image->size);
    }
    w.u32(static_cast<std::uint32_t>(a.model.index()));
    std::visit(Overloaded{[&](const stacking::StackedModel& m) { write_stack(w, m); },
                          [&](const cnn::CnnModel& m) { write_cnn(w, m); }},
               a.model);
    return w.take();
}

Artifact decode_payload(Mode mode, std::span<const std::uint8_t> payload) {
    Reader r(payload);
    Artifact a;
    a.mode = mode;
    a.model_version = r.str();
    if (r.boolean()) a.tabular = read_preprocessing(r);
    if (r.boolean()) {
        const auto kind = r.u32();
        check(kind <= 1, "unknown image kind");
        a.image = ImageDescriptor{static_cast<ImageKind>(kind), r.size()};
    }
    switch (r.u32()) {
        case 0: a.model = read_stack(r); break;
        case 1: a.model = read_cnn(r); break;
        default: malformed("unknown payload kind");
    }
    check(r.remaining() == 0, "trailing bytes after payload");
    return a;
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get_le(std::span<const std::uint8_t> bytes, std::size_t offset, int width) {
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(bytes[offset + i]) << (8 * i);
    return v;
}

}  // namespace

std::string_view to_string(Mode mode) noexcept {
    switch (mode) {
        case Mode::Symptoms: return "symptoms";
        case Mode::Cough: return "cough";
        case Mode::Blood25: return "blood25";
        case Mode::Blood5: return "blood5";
        case Mode::Raman: return "raman";
        case Mode::Ecg: return "ecg";
        case Mode::Mortality7: return "mortality7";
        case Mode::Mortality9: return "mortality9";
    }
    return "unknown";
}

std::optional<Mode> mode_from_string(std::string_view text) noexcept {
    for (Mode mode : kAllModes)
        if (to_string(mode) == text) return mode;
    return std::nullopt;
}

InputKind input_kind(Mode mode) noexcept {
    switch (mode) {
        case Mode::Cough: return InputKind::Audio;
        case Mode::Raman:
        case Mode::Ecg: return InputKind::Image;
        default: return InputKind::Tabular;
    }
}

bool is_mortality(Mode mode) noexcept { return mode == Mode::Mortality7 || mode == Mode::Mortality9; }

void Artifact::validate() const {
    const std::string name(to_string(mode));
    if (input_kind(mode) == InputKind::Image) {
        check(image && !tabular, "mode " + name + " needs an image descriptor and no tabular state");
        const auto* net = std::get_if<cnn::CnnModel>(&model);
        check(net != nullptr, "mode " + name + " needs a CNN payload");
        check(image->kind == (mode == Mode::Raman ? ImageKind::RamanTrace : ImageKind::EcgReport),
              "image kind does not match mode " + name);
        check(image->size >= 1 && net->input_shape == std::vector<std::size_t>{image->size, image->size, 1},
              "image size does not match the CNN input");
        return;
    }
    check(tabular && !image, "mode " + name + " needs tabular preprocessing and no image descriptor");
    const auto* stack = std::get_if<stacking::StackedModel>(&model);
    check(stack != nullptr, "mode " + name + " needs a stacked-model payload");
    const auto& p = *tabular;
    check(p.input_schema == p.encoder.input_schema(), "keep-list does not match the encoder input");
    const std::size_t width = p.encoder.output_schema().width();
    check(width == stack->width, "encoded width does not match the model");
    check(p.encoder.columns().size() == width, "one-hot plan width mismatch");
    check(p.imputer_donors.cols() == width && p.imputer_donors.rows() >= 1, "imputer matrix width mismatch");
    check(p.imputer_k >= 1, "imputer k must be positive");
    check(p.scaler.mean().size() == width, "scaler width mismatch");
    check(stack->classes == p.input_schema.class_names.size(), "class count does not match the schema");
}

std::vector<std::uint8_t> serialize(const Artifact& artifact) {
    artifact.validate();
    const auto payload = encode_payload(artifact);
    std::vector<std::uint8_t> out(kMagic.begin(), kMagic.end());
    out.reserve(kHeaderSize + payload.size());
    put_u32(out, kFormatVersion);
    put_u32(out, static_cast<std::uint32_t>(artifact.mode));
    put_u64(out, payload.size());
    put_u32(out, crc32_of(payload));
    out.insert(out.end(), payload.begin(), payload.end());
    return out;
}

Artifact deserialize(std::span<const std::uint8_t> bytes) {
    check(!bytes.empty(), "empty file");
    const std::size_t prefix = std::min(bytes.size(), kMagic.size());
    require(std::equal(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(prefix), kMagic.begin()),
            ErrorCode::Format, "not a model file");
    check(bytes.size() >= kHeaderSize, "truncated header");

    const auto version = static_cast<std::uint32_t>(get_le(bytes, 8, 4));
    require(version >= 1 && version <= kFormatVersion, ErrorCode::Format,
            "unsupported version " + std::to_string(version) + " (this build reads up to " +
                std::to_string(kFormatVersion) + ")");
    const auto mode_code = static_cast<std::uint32_t>(get_le(bytes, 12, 4));
    check(mode_code < kAllModes.size(), "unknown mode " + std::to_string(mode_code));
    const std::uint64_t length = get_le(bytes, 16, 8);
    const auto crc = static_cast<std::uint32_t>(get_le(bytes, 24, 4));
    check(length == bytes.size() - kHeaderSize, length > bytes.size() - kHeaderSize ? "truncated payload"
                                                                                      : "trailing bytes after payload");

    const auto payload = bytes.subspan(kHeaderSize);
    require(crc32_of(payload) == crc, ErrorCode::Format, "checksum mismatch");

    Artifact artifact;
    try {
        artifact = decode_payload(static_cast<Mode>(mode_code), payload);
    } catch (const Error& e) {
        if (e.code() == ErrorCode::Format) throw;
        malformed(e.what());
    }
    artifact.validate();
    return artifact;
}

void save(const Artifact& artifact, const std::filesystem::path& path) {
    const auto bytes = serialize(artifact);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), ErrorCode::Io, "cannot open '" + path.string() + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    out.close();
    require(static_cast<bool>(out), ErrorCode::Io, "write to '" + path.string() + "' failed");
}

Artifact load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), ErrorCode::Io, "cannot open '" + path.string() + "'");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    require(!in.bad(), ErrorCode::Io, "read from '" + path.string() + "' failed");
    try {
        return deserialize(bytes);
    } catch (const Error& e) {
        fail(e.code(), path.filename().string() + ": " + e.what());
    }
}

}  // namespace multidx::modelstore
