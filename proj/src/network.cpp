#include "faceqan/network.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"

#include "faceqan/error.hpp"

namespace faceqan {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

Shape output_shape(const Layer& layer, const Shape& in) {
    return std::visit(
        Overloaded{
            [&](const Conv2d& c) {
                if (c.in_channels != in.channels) {
                    throw Error("conv layer expects " + std::to_string(c.in_channels) + " input channels, got " +
                                std::to_string(in.channels));
                }
                if (c.kernel % 2 == 0 || c.kernel == 0) {
                    throw Error("conv kernel size must be odd");
                }
                if (c.weights.size() != c.out_channels * c.in_channels * c.kernel * c.kernel ||
                    c.bias.size() != c.out_channels) {
                    throw Error("conv layer parameter count does not match its declared shape");
                }
                return Shape{c.out_channels, in.height, in.width};
            },
            [&](const Tanh&) { return in; },
            [&](const AvgPool& p) {
                if (p.size == 0 || in.height < p.size || in.width < p.size) {
                    throw Error("pooling window larger than its input");
                }
                return Shape{in.channels, in.height / p.size, in.width / p.size};
            },
            [&](const Linear& l) {
                if (l.in_features != in.size()) {
                    throw Error("linear layer expects " + std::to_string(l.in_features) + " inputs, got " +
                                std::to_string(in.size()));
                }
                if (l.weights.size() != l.in_features * l.out_features ||
                    (!l.bias.empty() && l.bias.size() != l.out_features)) {
                    throw Error("linear layer parameter count does not match its declared shape");
                }
                return Shape{l.out_features, 1, 1};
            },
        },
        layer);
}

void conv_forward(const Conv2d& c, const Shape& s, const double* in, double* out) {
    const std::size_t h = s.height, w = s.width, k = c.kernel;
    const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(k / 2);
    for (std::size_t o = 0; o < c.out_channels; ++o) {
        double* plane = out + o * h * w;
        for (std::size_t i = 0; i < h * w; ++i) {
            plane[i] = c.bias[o];
        }
        for (std::size_t ci = 0; ci < c.in_channels; ++ci) {
            const double* src = in + ci * h * w;
            const double* kern = c.weights.data() + (o * c.in_channels + ci) * k * k;
            for (std::size_t ky = 0; ky < k; ++ky) {
                const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(ky) - pad;
                for (std::size_t kx = 0; kx < k; ++kx) {
                    const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx) - pad;
                    const double wv = kern[ky * k + kx];
                    const std::size_t y0 = dy < 0 ? static_cast<std::size_t>(-dy) : 0;
                    const std::size_t y1 = dy > 0 ? h - static_cast<std::size_t>(dy) : h;
                    const std::size_t x0 = dx < 0 ? static_cast<std::size_t>(-dx) : 0;
                    const std::size_t x1 = dx > 0 ? w - static_cast<std::size_t>(dx) : w;
                    for (std::size_t y = y0; y < y1; ++y) {
                        const double* row = src + (y + dy) * w + dx;
                        double* dst = plane + y * w;
                        for (std::size_t x = x0; x < x1; ++x) {
                            dst[x] += wv * row[x];
                        }
                    }
                }
            }
        }
    }
}

void conv_backward(const Conv2d& c, const Shape& s, const double* grad_out, double* grad_in) {
    const std::size_t h = s.height, w = s.width, k = c.kernel;
    const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(k / 2);
    for (std::size_t o = 0; o < c.out_channels; ++o) {
        const double* g = grad_out + o * h * w;
        for (std::size_t ci = 0; ci < c.in_channels; ++ci) {
            double* dst = grad_in + ci * h * w;
            const double* kern = c.weights.data() + (o * c.in_channels + ci) * k * k;
            for (std::size_t ky = 0; ky < k; ++ky) {
                const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(ky) - pad;
                for (std::size_t kx = 0; kx < k; ++kx) {
                    const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx) - pad;
                    const double wv = kern[ky * k + kx];
                    const std::size_t y0 = dy < 0 ? static_cast<std::size_t>(-dy) : 0;
                    const std::size_t y1 = dy > 0 ? h - static_cast<std::size_t>(dy) : h;
                    const std::size_t x0 = dx < 0 ? static_cast<std::size_t>(-dx) : 0;
                    const std::size_t x1 = dx > 0 ? w - static_cast<std::size_t>(dx) : w;
                    for (std::size_t y = y0; y < y1; ++y) {
                        double* row = dst + (y + dy) * w + dx;
                        const double* gr = g + y * w;
                        for (std::size_t x = x0; x < x1; ++x) {
                            row[x] += wv * gr[x];
                        }
                    }
                }
            }
        }
    }
}

void layer_forward(const Layer& layer, const Shape& in_shape, const Shape& out_shape, std::span<const double> in,
                   std::vector<double>& out) {
    out.assign(out_shape.size(), 0.0);
    std::visit(Overloaded{
                   [&](const Conv2d& c) { conv_forward(c, in_shape, in.data(), out.data()); },
                   [&](const Tanh&) {
                       for (std::size_t i = 0; i < in.size(); ++i) {
                           out[i] = std::tanh(in[i]);
                       }
                   },
                   [&](const AvgPool& p) {
                       const double scale = 1.0 / static_cast<double>(p.size * p.size);
                       for (std::size_t c = 0; c < out_shape.channels; ++c) {
                           for (std::size_t y = 0; y < out_shape.height; ++y) {
                               for (std::size_t x = 0; x < out_shape.width; ++x) {
                                   double sum = 0.0;
                                   for (std::size_t py = 0; py < p.size; ++py) {
                                       const double* row =
                                           in.data() + (c * in_shape.height + y * p.size + py) * in_shape.width;
                                       for (std::size_t px = 0; px < p.size; ++px) {
                                           sum += row[x * p.size + px];
                                       }
                                   }
                                   out[(c * out_shape.height + y) * out_shape.width + x] = sum * scale;
                               }
                           }
                       }
                   },
                   [&](const Linear& l) {
                       for (std::size_t o = 0; o < l.out_features; ++o) {
                           const double* row = l.weights.data() + o * l.in_features;
                           double sum = l.bias.empty() ? 0.0 : l.bias[o];
                           for (std::size_t i = 0; i < l.in_features; ++i) {
                               sum += row[i] * in[i];
                           }
                           out[o] = sum;
                       }
                   },
               },
               layer);
}

void layer_backward(const Layer& layer, const Shape& in_shape, const Shape& out_shape,
                    std::span<const double> layer_out, std::span<const double> grad_out, std::vector<double>& grad_in) {
    grad_in.assign(in_shape.size(), 0.0);
    std::visit(Overloaded{
                   [&](const Conv2d& c) { conv_backward(c, in_shape, grad_out.data(), grad_in.data()); },
                   [&](const Tanh&) {
                       for (std::size_t i = 0; i < grad_out.size(); ++i) {
                           grad_in[i] = grad_out[i] * (1.0 - layer_out[i] * layer_out[i]);
                       }
                   },
                   [&](const AvgPool& p) {
                       const double scale = 1.0 / static_cast<double>(p.size * p.size);
                       for (std::size_t c = 0; c < out_shape.channels; ++c) {
                           for (std::size_t y = 0; y < out_shape.height; ++y) {
                               for (std::size_t x = 0; x < out_shape.width; ++x) {
                                   const double g =
                                       grad_out[(c * out_shape.height + y) * out_shape.width + x] * scale;
                                   for (std::size_t py = 0; py < p.size; ++py) {
                                       double* row =
                                           grad_in.data() + (c * in_shape.height + y * p.size + py) * in_shape.width;
                                       for (std::size_t px = 0; px < p.size; ++px) {
                                           row[x * p.size + px] += g;
                                       }
                                   }
                               }
                           }
                       }
                   },
                   [&](const Linear& l) {
                       for (std::size_t o = 0; o < l.out_features; ++o) {
                           const double* row = l.weights.data() + o * l.in_features;
                           const double g = grad_out[o];
                           for (std::size_t i = 0; i < l.in_features; ++i) {
                               grad_in[i] += row[i] * g;
                           }
                       }
                   },
               },
               layer);
}

}  // namespace

Network::Network(std::size_t input_width, std::size_t input_height, std::vector<Layer> layers)
    : input_width_(input_width), input_height_(input_height), layers_(std::move(layers)) {
    if (input_width == 0 || input_height == 0) {
        throw Error("network input geometry must be positive");
    }
    if (layers_.empty()) {
        throw Error("network has no layers");
    }
    shapes_.reserve(layers_.size() + 1);
    shapes_.push_back(Shape{3, input_height, input_width});
    for (const Layer& layer : layers_) {
        shapes_.push_back(output_shape(layer, shapes_.back()));
    }
    const Shape& out = shapes_.back();
    if (out.height != 1 || out.width != 1) {
        throw Error("network must end in a flat vector (final layer linear)");
    }
}

std::vector<double> Network::forward(std::span<const double> input) const {
    ForwardTrace trace;
    return forward(input, trace);
}

std::vector<double> Network::forward(std::span<const double> input, ForwardTrace& trace) const {
    if (input.size() != shapes_.front().size()) {
        throw Error("network input has " + std::to_string(input.size()) + " values, expected " +
                    std::to_string(shapes_.front().size()));
    }
    trace.activations.resize(layers_.size() + 1);
    trace.activations[0].assign(input.begin(), input.end());
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        layer_forward(layers_[i], shapes_[i], shapes_[i + 1], trace.activations[i], trace.activations[i + 1]);
    }
    return trace.activations.back();
}

std::vector<double> Network::backward(const ForwardTrace& trace, std::span<const double> output_grad) const {
    if (trace.activations.size() != layers_.size() + 1 || output_grad.size() != output_dim()) {
        throw Error("backward pass does not match the recorded forward pass");
    }
    std::vector<double> grad(output_grad.begin(), output_grad.end());
    std::vector<double> next;
    for (std::size_t i = layers_.size(); i-- > 0;) {
        layer_backward(layers_[i], shapes_[i], shapes_[i + 1], trace.activations[i + 1], grad, next);
        grad.swap(next);
    }
    return grad;
}

std::vector<double> Network::features(std::span<const double> input) const {
    ForwardTrace trace;
    forward(input, trace);
    return trace.activations[layers_.size() - 1];
}

Network Network::with_last_layer(Layer layer) const {
    std::vector<Layer> layers = layers_;
    layers.back() = std::move(layer);
    return Network(input_width_, input_height_, std::move(layers));
}

// Weights file ---------------------------------------------------------------

namespace {

constexpr const char* kFormatTag = "faceqan-weights";
constexpr int kFormatVersion = 1;

nlohmann::json layer_to_json(const Layer& layer) {
    return std::visit(Overloaded{
                          [](const Conv2d& c) {
                              return nlohmann::json{{"type", "conv2d"},       {"in_channels", c.in_channels},
                                                    {"out_channels", c.out_channels}, {"kernel", c.kernel},
                                                    {"weights", c.weights},   {"bias", c.bias}};
                          },
                          [](const Tanh&) { return nlohmann::json{{"type", "tanh"}}; },
                          [](const AvgPool& p) { return nlohmann::json{{"type", "avgpool"}, {"size", p.size}}; },
                          [](const Linear& l) {
                              return nlohmann::json{{"type", "linear"},         {"in_features", l.in_features},
                                                    {"out_features", l.out_features}, {"weights", l.weights},
                                                    {"bias", l.bias}};
                          },
                      },
                      layer);
}

Layer layer_from_json(const nlohmann::json& j) {
    const std::string type = j.at("type").get<std::string>();
    if (type == "conv2d") {
        Conv2d c;
        c.in_channels = j.at("in_channels").get<std::size_t>();
        c.out_channels = j.at("out_channels").get<std::size_t>();
        c.kernel = j.at("kernel").get<std::size_t>();
        c.weights = j.at("weights").get<std::vector<double>>();
        c.bias = j.at("bias").get<std::vector<double>>();
        return c;
    }
    if (type == "tanh") {
        return Tanh{};
    }
    if (type == "avgpool") {
        return AvgPool{j.at("size").get<std::size_t>()};
    }
    if (type == "linear") {
        Linear l;
        l.in_features = j.at("in_features").get<std::size_t>();
        l.out_features = j.at("out_features").get<std::size_t>();
        l.weights = j.at("weights").get<std::vector<double>>();
        if (j.contains("bias")) {
            l.bias = j.at("bias").get<std::vector<double>>();
        }
        return l;
    }
    throw Error("unknown layer type '" + type + "'");
}

}  // namespace

void save_network(const Network& network, const std::filesystem::path& path) {
    nlohmann::json layers = nlohmann::json::array();
    for (const Layer& layer : network.layers()) {
        layers.push_back(layer_to_json(layer));
    }
    nlohmann::json doc{{"format", kFormatTag},
                       {"version", kFormatVersion},
                       {"input_width", network.input_width()},
                       {"input_height", network.input_height()},
                       {"embedding_dim", network.output_dim()},
                       {"layers", std::move(layers)}};
    std::ofstream out(path);
    if (!out) {
        throw Error("cannot write weights file " + path.string());
    }
    out << doc.dump();
    if (!out) {
        throw Error("failed writing weights file " + path.string());
    }
}

Network load_network(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error("weights not found: " + path.string());
    }
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw Error("corrupt weights file " + path.string() + ": " + e.what());
    }
    try {
        if (doc.at("format").get<std::string>() != kFormatTag) {
            throw Error("corrupt weights file " + path.string() + ": unexpected format tag");
        }
        if (doc.at("version").get<int>() != kFormatVersion) {
            throw Error("unsupported weights version in " + path.string());
        }
        std::vector<Layer> layers;
        for (const auto& j : doc.at("layers")) {
            layers.push_back(layer_from_json(j));
        }
        Network net(doc.at("input_width").get<std::size_t>(), doc.at("input_height").get<std::size_t>(),
                    std::move(layers));
        if (doc.contains("embedding_dim") && doc.at("embedding_dim").get<std::size_t>() != net.output_dim()) {
            throw Error("weights file " + path.string() + " declares embedding_dim " +
                        std::to_string(doc.at("embedding_dim").get<std::size_t>()) + " but its layers produce " +
                        std::to_string(net.output_dim()));
        }
        return net;
    } catch (const nlohmann::json::exception& e) {
        throw Error("corrupt weights file " + path.string() + ": " + e.what());
    } catch (const Error& e) {
        const std::string msg = e.what();
        if (msg.find(path.string()) != std::string::npos) {
            throw;
        }
        throw Error("corrupt weights file " + path.string() + ": " + msg);
    }
}

}  // namespace faceqan
