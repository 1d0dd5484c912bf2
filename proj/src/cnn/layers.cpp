#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "multidx/cnn.hpp"
#include "multidx/error.hpp"
#include "multidx/random.hpp"
#include "multidx/simd/kernels.hpp"

namespace multidx::cnn {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::string shape_text(const std::vector<std::size_t>& shape) {
    std::string s;
    for (std::size_t i = 0; i < shape.size(); ++i) s += (i ? "x" : "") + std::to_string(shape[i]);
    return s;
}

}  // namespace

std::size_t element_count(std::span<const std::size_t> shape) noexcept {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

Tensor::Tensor(std::vector<std::size_t> dims, double fill) : shape(std::move(dims)), data(element_count(shape), fill) {}

Tensor::Tensor(std::vector<std::size_t> dims, std::vector<double> values) : shape(std::move(dims)), data(std::move(values)) {
    validate();
}

void Tensor::validate() const {
    require(element_count(shape) == data.size(), ErrorCode::InvalidArgument,
            "tensor: shape " + shape_text(shape) + " does not match " + std::to_string(data.size()) + " values");
}

std::string describe(const LayerSpec& layer) {
    return std::visit(Overloaded{
                          [](const Conv2D& c) { return "Conv2D(" + std::to_string(c.filters) + ")"; },
                          [](const ReLU&) { return std::string("ReLU"); },
                          [](const MaxPool&) { return std::string("MaxPool"); },
                          [](const Flatten&) { return std::string("Flatten"); },
                          [](const Dense& d) { return "Dense(" + std::to_string(d.units) + ")"; },
                          [](const Softmax&) { return std::string("Softmax"); },
                      },
                      layer);
}

std::vector<std::vector<std::size_t>> infer_shapes(const std::vector<std::size_t>& input_shape,
                                                   const std::vector<LayerSpec>& layers) {
    require(input_shape.size() == 3 && element_count(input_shape) > 0, ErrorCode::InvalidArgument,
            "cnn: input shape must be H x W x C with positive sizes");
    std::vector<std::vector<std::size_t>> shapes;
    std::vector<std::size_t> shape = input_shape;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto where = "cnn layer " + std::to_string(l) + " " + describe(layers[l]) + ": ";
        std::visit(Overloaded{
                       [&](const Conv2D& c) {
                           require(shape.size() == 3, ErrorCode::InvalidArgument, where + "needs an H x W x C input");
                           require(c.filters > 0, ErrorCode::InvalidArgument, where + "needs at least one filter");
                           shape[2] = c.filters;
                       },
                       [&](const ReLU&) {},
                       [&](const MaxPool&) {
                           require(shape.size() == 3, ErrorCode::InvalidArgument, where + "needs an H x W x C input");
                           shape[0] = (shape[0] + 1) / 2;
                           shape[1] = (shape[1] + 1) / 2;
                       },
                       [&](const Flatten&) { shape = {element_count(shape)}; },
                       [&](const Dense& d) {
                           require(shape.size() == 1, ErrorCode::InvalidArgument, where + "needs a flattened input");
                           require(d.units > 0, ErrorCode::InvalidArgument, where + "needs at least one unit");
                           shape = {d.units};
                       },
                       [&](const Softmax&) {
                           require(shape.size() == 1, ErrorCode::InvalidArgument, where + "needs a flattened input");
                           require(l + 1 == layers.size(), ErrorCode::InvalidArgument, where + "must be the last layer");
                       },
                   },
                   layers[l]);
        shapes.push_back(shape);
    }
    return shapes;
}

std::vector<LayerSpec> default_architecture(std::size_t classes) {
    return {Conv2D{16}, ReLU{}, MaxPool{}, Conv2D{32}, ReLU{}, MaxPool{}, Conv2D{64}, ReLU{}, MaxPool{},
            Flatten{},  Dense{128}, ReLU{}, Dense{classes}, Softmax{}};
}

std::vector<LayerSpec> vgg16_architecture(std::size_t classes) {
    std::vector<LayerSpec> layers;
    const std::size_t blocks[5][2] = {{64, 2}, {128, 2}, {256, 3}, {512, 3}, {512, 3}};
    for (const auto& block : blocks) {
        for (std::size_t i = 0; i < block[1]; ++i) {
            layers.emplace_back(Conv2D{block[0]});
            layers.emplace_back(ReLU{});
        }
        layers.emplace_back(MaxPool{});
    }
    for (LayerSpec layer : {LayerSpec{Flatten{}}, LayerSpec{Dense{4096}}, LayerSpec{ReLU{}}, LayerSpec{Dense{4096}},
                            LayerSpec{ReLU{}}, LayerSpec{Dense{classes}}, LayerSpec{Softmax{}}})
        layers.push_back(layer);
    return layers;
}

CnnModel build_model(std::vector<std::size_t> input_shape, std::vector<LayerSpec> layers, std::size_t classes,
                     const TrainConfig& config) {
    require(classes >= 2, ErrorCode::InvalidArgument, "cnn: at least two classes required");
    require(!layers.empty() && std::holds_alternative<Softmax>(layers.back()), ErrorCode::InvalidArgument,
            "cnn: the last layer must be Softmax");
    const auto shapes = infer_shapes(input_shape, layers);
    require(shapes.back() == std::vector<std::size_t>{classes}, ErrorCode::InvalidArgument,
            "cnn: softmax width " + shape_text(shapes.back()) + " does not match " + std::to_string(classes) + " classes");

    CnnModel model{std::move(input_shape), std::move(layers), {}, classes, config};
    model.params.resize(model.layers.size());
    std::vector<std::size_t> in_shape = model.input_shape;
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        Rng rng(derive_seed(config.seed, 0xc0de, l));
        auto& p = model.params[l];
        if (const auto* conv = std::get_if<Conv2D>(&model.layers[l])) {
            const std::size_t cin = in_shape[2];
            p.weights = Tensor({3, 3, cin, conv->filters});
            const double scale = std::sqrt(2.0 / static_cast<double>(9 * cin));
            for (double& w : p.weights.data) w = scale * rng.normal();
            p.bias.assign(conv->filters, 0.0);
        } else if (const auto* dense = std::get_if<Dense>(&model.layers[l])) {
            const std::size_t fan_in = in_shape[0];
            p.weights = Tensor({fan_in, dense->units});
            const double scale = std::sqrt(2.0 / static_cast<double>(fan_in));
            for (double& w : p.weights.data) w = scale * rng.normal();
            p.bias.assign(dense->units, 0.0);
        }
        in_shape = shapes[l];
    }
    return model;
}

std::size_t parameter_count(const CnnModel& model) noexcept {
    std::size_t n = 0;
    for (const auto& p : model.params) n += p.weights.size() + p.bias.size();
    return n;
}

Tensor conv2d_forward(const Tensor& input, const Tensor& kernels, std::span<const double> bias) {
    require(input.shape.size() == 3, ErrorCode::InvalidArgument, "conv2d: input must be H x W x C");
    require(kernels.shape.size() == 4 && kernels.shape[0] == 3 && kernels.shape[1] == 3, ErrorCode::InvalidArgument,
            "conv2d: kernels must be 3 x 3 x Cin x Cout");
    require(kernels.shape[2] == input.shape[2], ErrorCode::InvalidArgument,
            "conv2d: channel mismatch (input " + std::to_string(input.shape[2]) + ", kernel " +
                std::to_string(kernels.shape[2]) + ")");
    const std::size_t h = input.shape[0], w = input.shape[1], cin = input.shape[2], cout = kernels.shape[3];
    require(bias.size() == cout, ErrorCode::InvalidArgument, "conv2d: bias length must equal the filter count");

    Tensor out({h, w, cout});
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            double* o = out.data.data() + (y * w + x) * cout;
            std::copy(bias.begin(), bias.end(), o);
            for (std::size_t m = 0; m < 3; ++m) {
                if (y + m < 1 || y + m - 1 >= h) continue;
                for (std::size_t n = 0; n < 3; ++n) {
                    if (x + n < 1 || x + n - 1 >= w) continue;
                    const double* in = input.data.data() + ((y + m - 1) * w + (x + n - 1)) * cin;
                    const double* k = kernels.data.data() + (m * 3 + n) * cin * cout;
                    for (std::size_t c = 0; c < cin; ++c) {
                        if (in[c] == 0.0) continue;
                        simd::axpy(in[c], {k + c * cout, cout}, {o, cout});
                    }
                }
            }
        }
    }
    return out;
}

Tensor relu(const Tensor& t) {
    Tensor out = t;
    for (double& v : out.data) v = v > 0.0 ? v : 0.0;
    return out;
}

PoolResult maxpool(const Tensor& t) {
    require(t.shape.size() == 3, ErrorCode::InvalidArgument, "maxpool: input must be H x W x C");
    const std::size_t h = t.shape[0], w = t.shape[1], c = t.shape[2];
    const std::size_t oh = (h + 1) / 2, ow = (w + 1) / 2;
    PoolResult result{Tensor({oh, ow, c}), std::vector<std::size_t>(oh * ow * c)};
    for (std::size_t y = 0; y < oh; ++y)
        for (std::size_t x = 0; x < ow; ++x)
            for (std::size_t ch = 0; ch < c; ++ch) {
                double best = -std::numeric_limits<double>::infinity();
                std::size_t best_index = 0;
                bool first = true;
                for (std::size_t dy = 0; dy < 2; ++dy)
                    for (std::size_t dx = 0; dx < 2; ++dx) {
                        const std::size_t iy = 2 * y + dy, ix = 2 * x + dx;
                        if (iy >= h || ix >= w) continue;
                        const std::size_t index = (iy * w + ix) * c + ch;
                        if (first || t.data[index] > best) {
                            best = t.data[index];
                            best_index = index;
                            first = false;
                        }
                    }
                const std::size_t o = (y * ow + x) * c + ch;
                result.output.data[o] = best;
                result.argmax[o] = best_index;
            }
    return result;
}

std::vector<double> softmax(std::span<const double> z) {
    require(!z.empty(), ErrorCode::InvalidArgument, "softmax: empty input");
    const double peak = *std::max_element(z.begin(), z.end());
    std::vector<double> out(z.size());
    double total = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) total += out[i] = std::exp(z[i] - peak);
    for (double& v : out) v /= total;
    return out;
}

double cross_entropy(std::span<const double> probs, std::size_t true_class) {
    require(true_class < probs.size(), ErrorCode::InvalidArgument, "cross_entropy: class index out of range");
    return -std::log(std::max(probs[true_class], 1e-12));
}

Tensor image_to_tensor(const imaging::GrayImage& image) {
    image.validate();
    Tensor t({image.height, image.width, 1});
    for (std::size_t i = 0; i < image.pixels.size(); ++i) t.data[i] = 1.0 - image.pixels[i];
    return t;
}

}  // namespace multidx::cnn
