#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <variant>
#include <vector>

namespace faceqan {

/// Shape of an activation tensor, stored planar (channel-major).
struct Shape {
    std::size_t channels = 0;
    std::size_t height = 0;
    std::size_t width = 0;

    std::size_t size() const noexcept { return channels * height * width; }
    friend bool operator==(const Shape&, const Shape&) = default;
};

/// Stride-1 convolution with zero "same" padding. Kernel size must be odd.
struct Conv2d {
    std::size_t in_channels = 0;
    std::size_t out_channels = 0;
    std::size_t kernel = 3;
    std::vector<double> weights;  // [out][in][ky][kx]
    std::vector<double> bias;     // [out]
};

struct Tanh {};

/// Non-overlapping average pooling; trailing rows/columns that do not fill a window are dropped.
struct AvgPool {
    std::size_t size = 2;
};

/// Dense layer over the flattened input.
struct Linear {
    std::size_t in_features = 0;
    std::size_t out_features = 0;
    std::vector<double> weights;  // [out][in]
    std::vector<double> bias;     // [out], may be empty for a bias-free layer
};

using Layer = std::variant<Conv2d, Tanh, AvgPool, Linear>;

/// Saved activations of one forward pass, consumed by Network::backward.
struct ForwardTrace {
    std::vector<std::vector<double>> activations;  // input of every layer, then the output
};

/// Sequential feed-forward network over a 3-channel image.
///
/// Supports inference and exact reverse-mode differentiation with respect to
/// the input. Immutable after construction; all member functions are safe to
/// call concurrently.
class Network {
public:
    /// Throws faceqan::Error if the layer stack is inconsistent with the input geometry
    /// or does not end in a flat vector.
    Network(std::size_t input_width, std::size_t input_height, std::vector<Layer> layers);

    std::size_t input_width() const noexcept { return input_width_; }
    std::size_t input_height() const noexcept { return input_height_; }
    std::size_t output_dim() const noexcept { return shapes_.back().size(); }
    std::span<const Layer> layers() const noexcept { return layers_; }
    std::span<const Shape> shapes() const noexcept { return shapes_; }

    std::vector<double> forward(std::span<const double> input) const;
    std::vector<double> forward(std::span<const double> input, ForwardTrace& trace) const;

    /// Gradient of a scalar with respect to the input, given its gradient with respect to the output.
    std::vector<double> backward(const ForwardTrace& trace, std::span<const double> output_grad) const;

    /// Activations entering the final layer (the penultimate representation).
    std::vector<double> features(std::span<const double> input) const;

    /// Copy with the final layer swapped out. The replacement must accept the same input shape.
    Network with_last_layer(Layer layer) const;

private:
    std::size_t input_width_;
    std::size_t input_height_;
    std::vector<Layer> layers_;
    std::vector<Shape> shapes_;  // shapes_[i] is the input shape of layers_[i]; back() is the output
};

/// Writes the portable JSON weights format (see docs/formats.md).
void save_network(const Network& network, const std::filesystem::path& path);

/// Reads the portable JSON weights format. Throws faceqan::Error on missing or corrupt files.
Network load_network(const std::filesystem::path& path);

}  // namespace faceqan
