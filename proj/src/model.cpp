#include "faceqan/model.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "faceqan/error.hpp"
#include "faceqan/random.hpp"

namespace faceqan {
namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::size_t parse_size(const std::string& value, const std::string& source, std::size_t line) {
    std::size_t pos = 0;
    unsigned long long v = 0;
    try {
        v = std::stoull(value, &pos);
    } catch (const std::exception&) {
        throw ParseError(source, line, "expected a positive integer, got '" + value + "'");
    }
    if (pos != value.size() || v == 0 || value.front() == '-') {
        throw ParseError(source, line, "expected a positive integer, got '" + value + "'");
    }
    return static_cast<std::size_t>(v);
}

bool parse_bool(const std::string& value, const std::string& source, std::size_t line) {
    if (value == "true" || value == "1" || value == "yes" || value == "on") {
        return true;
    }
    if (value == "false" || value == "0" || value == "no" || value == "off") {
        return false;
    }
    throw ParseError(source, line, "expected a boolean, got '" + value + "'");
}

// Normal(0, std) weights from one seeded stream, drawn layer by layer in a fixed order.
std::vector<double> draw_normal(Rng& rng, std::size_t n, double stddev) {
    std::vector<double> v(n);
    for (double& x : v) {
        x = rng.normal() * stddev;
    }
    return v;
}

}  // namespace

ModelConfig parse_model_config_text(const std::string& text, const std::filesystem::path& base_dir,
                                    const std::string& source) {
    ModelConfig cfg;
    std::istringstream in(text);
    std::string raw;
    std::size_t line_no = 0;
    bool saw_kind = false;
    while (std::getline(in, raw)) {
        ++line_no;
        const auto hash = raw.find('#');
        const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ParseError(source, line_no, "expected key=value");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key == "kind") {
            if (value == "toy") {
                cfg.kind = ModelKind::toy;
            } else if (value == "external") {
                cfg.kind = ModelKind::external;
            } else {
                throw ParseError(source, line_no, "kind must be 'toy' or 'external', got '" + value + "'");
            }
            saw_kind = true;
        } else if (key == "arch") {
            if (value == "cnn") {
                cfg.arch = ToyArch::cnn;
            } else if (value == "linear") {
                cfg.arch = ToyArch::linear;
            } else {
                throw ParseError(source, line_no, "arch must be 'cnn' or 'linear', got '" + value + "'");
            }
        } else if (key == "seed") {
            try {
                std::size_t pos = 0;
                cfg.seed = std::stoull(value, &pos);
                if (pos != value.size() || value.front() == '-') {
                    throw std::invalid_argument(value);
                }
            } catch (const std::exception&) {
                throw ParseError(source, line_no, "seed must be a non-negative integer, got '" + value + "'");
            }
        } else if (key == "weights_path") {
            std::filesystem::path p(value);
            cfg.weights_path = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
        } else if (key == "input_size") {
            const auto x = value.find('x');
            if (x == std::string::npos) {
                cfg.input_width = cfg.input_height = parse_size(value, source, line_no);
            } else {
                cfg.input_width = parse_size(trim(value.substr(0, x)), source, line_no);
                cfg.input_height = parse_size(trim(value.substr(x + 1)), source, line_no);
            }
        } else if (key == "embedding_dim") {
            cfg.embedding_dim = parse_size(value, source, line_no);
        } else if (key == "flip_invariant") {
            cfg.flip_invariant = parse_bool(value, source, line_no);
        } else {
            throw ParseError(source, line_no, "unknown key '" + key + "'");
        }
    }
    if (!saw_kind) {
        throw ParseError(source, line_no, "missing required key 'kind'");
    }
    if (cfg.kind == ModelKind::external && cfg.weights_path.empty()) {
        throw ParseError(source, line_no, "external model requires weights_path");
    }
    return cfg;
}

ModelConfig parse_model_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error("cannot open model config " + path.string());
    }
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_model_config_text(buf.str(), path.parent_path(), path.string());
}

Network make_toy_network(ToyArch arch, std::uint64_t seed, std::size_t width, std::size_t height,
                         std::size_t embedding_dim) {
    Rng rng(mix64(seed ^ 0x746f796d6f64656cULL));
    std::vector<Layer> layers;
    if (arch == ToyArch::linear) {
        const std::size_t in = 3 * width * height;
        Linear head{in, embedding_dim, draw_normal(rng, in * embedding_dim, 1.0 / std::sqrt(double(in))), {}};
        layers.emplace_back(std::move(head));
        return Network(width, height, std::move(layers));
    }
    constexpr std::size_t c1 = 8, c2 = 16, k = 3;
    if (width < 4 || height < 4) {
        throw Error("toy cnn needs inputs of at least 4x4 pixels");
    }
    Conv2d conv1{3, c1, k, draw_normal(rng, c1 * 3 * k * k, 1.0 / std::sqrt(3.0 * k * k)), draw_normal(rng, c1, 0.1)};
    Conv2d conv2{c1, c2, k, draw_normal(rng, c2 * c1 * k * k, 1.0 / std::sqrt(double(c1 * k * k))),
                 draw_normal(rng, c2, 0.1)};
    const std::size_t flat = c2 * (height / 4) * (width / 4);
    Linear head{flat, embedding_dim, draw_normal(rng, flat * embedding_dim, 1.0 / std::sqrt(double(flat))),
                std::vector<double>(embedding_dim, 0.0)};
    layers.emplace_back(std::move(conv1));
    layers.emplace_back(Tanh{});
    layers.emplace_back(AvgPool{2});
    layers.emplace_back(std::move(conv2));
    layers.emplace_back(Tanh{});
    layers.emplace_back(AvgPool{2});
    layers.emplace_back(std::move(head));
    return Network(width, height, std::move(layers));
}

ModelHandle::ModelHandle(Network network, std::string descriptor, bool flip_invariant)
    : network_(std::make_shared<const Network>(std::move(network))),
      descriptor_(std::move(descriptor)),
      flip_invariant_(flip_invariant) {}

void ModelHandle::check_geometry(const FaceImage& image) const {
    if (image.width() != input_width() || image.height() != input_height()) {
        throw Error("image '" + image.id() + "' is " + std::to_string(image.width()) + "x" +
                    std::to_string(image.height()) + " but the model expects " + std::to_string(input_width()) + "x" +
                    std::to_string(input_height()));
    }
}

std::vector<double> ModelHandle::raw_forward(const FaceImage& image) const {
    check_geometry(image);
    std::vector<double> out = network_->forward(image.pixels());
    if (flip_invariant_) {
        const PixelArray mirrored = flip_horizontally(image.pixels(), image.width(), image.height());
        const std::vector<double> other = network_->forward(mirrored);
        for (std::size_t i = 0; i < out.size(); ++i) {
            out[i] = 0.5 * (out[i] + other[i]);
        }
    }
    return out;
}

Embedding ModelHandle::embed(const FaceImage& image) const {
    return Embedding(raw_forward(image));
}

LossGradient ModelHandle::loss_input_gradient(const FaceImage& image, const Embedding& target) const {
    check_geometry(image);
    if (target.dim() != embedding_dim()) {
        throw Error("target embedding has dimension " + std::to_string(target.dim()) + ", model produces " +
                    std::to_string(embedding_dim()));
    }
    ForwardTrace trace;
    ForwardTrace mirror_trace;
    PixelArray mirrored;
    std::vector<double> z = network_->forward(image.pixels(), trace);
    if (flip_invariant_) {
        mirrored = flip_horizontally(image.pixels(), image.width(), image.height());
        const std::vector<double> other = network_->forward(mirrored, mirror_trace);
        for (std::size_t i = 0; i < z.size(); ++i) {
            z[i] = 0.5 * (z[i] + other[i]);
        }
    }
    const Embedding pred(z);  // validates finiteness and norm

    // d/dz [1 - z.t / (|z||t|)] = -(t - (z.t / z.z) z) / (|z||t|).
    // Written so that z == t (bitwise) yields an exactly zero gradient.
    const auto t = target.values();
    const double zz = dot(z, z);
    const double zt = dot(z, t);
    const double inv = 1.0 / (std::sqrt(zz) * target.norm());
    const double ratio = zt / zz;
    std::vector<double> dz(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) {
        dz[i] = -(t[i] - ratio * z[i]) * inv;
    }

    LossGradient result;
    result.loss = dissimilarity_loss(pred, target);
    if (flip_invariant_) {
        for (double& g : dz) {
            g *= 0.5;
        }
        result.grad = network_->backward(trace, dz);
        const PixelArray back = flip_horizontally(network_->backward(mirror_trace, dz), image.width(), image.height());
        for (std::size_t i = 0; i < result.grad.size(); ++i) {
            result.grad[i] += back[i];
        }
    } else {
        result.grad = network_->backward(trace, dz);
    }
    if (!std::all_of(result.grad.begin(), result.grad.end(), [](double g) { return std::isfinite(g); })) {
        throw Error("non-finite input gradient for image '" + image.id() + "'");
    }
    return result;
}

ModelHandle load_model(const ModelConfig& config) {
    if (config.kind == ModelKind::toy) {
        const std::size_t w = config.input_width.value_or(kDefaultToyInputSize);
        const std::size_t h = config.input_height.value_or(w);
        const std::size_t d = config.embedding_dim.value_or(kDefaultEmbeddingDim);
        std::ostringstream desc;
        desc << "toy:" << (config.arch == ToyArch::cnn ? "cnn" : "linear") << ":seed=" << config.seed << ":" << w
             << "x" << h << ":d=" << d << (config.flip_invariant ? ":flip-invariant" : "");
        return ModelHandle(make_toy_network(config.arch, config.seed, w, h, d), desc.str(), config.flip_invariant);
    }
    if (!std::filesystem::exists(config.weights_path)) {
        throw Error("weights not found: " + config.weights_path.string());
    }
    Network net = load_network(config.weights_path);
    if ((config.input_width && *config.input_width != net.input_width()) ||
        (config.input_height && *config.input_height != net.input_height())) {
        throw Error("dimension mismatch: config declares input " + std::to_string(config.input_width.value_or(0)) +
                    "x" + std::to_string(config.input_height.value_or(0)) + " but weights expect " +
                    std::to_string(net.input_width()) + "x" + std::to_string(net.input_height()));
    }
    if (config.embedding_dim && *config.embedding_dim != net.output_dim()) {
        throw Error("dimension mismatch: config declares embedding_dim " + std::to_string(*config.embedding_dim) +
                    " but weights produce " + std::to_string(net.output_dim()));
    }
    return ModelHandle(std::move(net), "external:" + config.weights_path.filename().string(), config.flip_invariant);
}

}  // namespace faceqan
