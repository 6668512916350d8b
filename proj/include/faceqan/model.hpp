#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "faceqan/embedding.hpp"
#include "faceqan/image.hpp"
#include "faceqan/network.hpp"

namespace faceqan {

enum class ModelKind { toy, external };

enum class ToyArch {
    cnn,     // conv-tanh-pool x2 followed by a linear head
    linear,  // bias-free M(I) = W * vec(I)
};

/// Model descriptor record, usually read from a key=value config file.
struct ModelConfig {
    ModelKind kind = ModelKind::toy;
    ToyArch arch = ToyArch::cnn;
    std::uint64_t seed = 0;
    std::filesystem::path weights_path;
    std::optional<std::size_t> input_width;
    std::optional<std::size_t> input_height;
    std::optional<std::size_t> embedding_dim;
    bool flip_invariant = false;
};

inline constexpr std::size_t kDefaultToyInputSize = 32;
inline constexpr std::size_t kDefaultEmbeddingDim = 64;

/// Parses a key=value model config. Relative weights paths resolve against the file's directory.
ModelConfig parse_model_config(const std::filesystem::path& path);
ModelConfig parse_model_config_text(const std::string& text, const std::filesystem::path& base_dir = {},
                                    const std::string& source = "<model config>");

/// Seeded toy network. Weights are a pure function of (seed, geometry, dim, arch).
Network make_toy_network(ToyArch arch, std::uint64_t seed, std::size_t width, std::size_t height,
                         std::size_t embedding_dim);

/// Result of loss_input_gradient.
struct LossGradient {
    double loss = 0.0;
    PixelArray grad;  // same planar layout as FaceImage
};

/// Immutable, shareable handle to a differentiable embedding model.
class ModelHandle {
public:
    ModelHandle(Network network, std::string descriptor, bool flip_invariant = false);

    std::size_t input_width() const noexcept { return network_->input_width(); }
    std::size_t input_height() const noexcept { return network_->input_height(); }
    std::size_t embedding_dim() const noexcept { return network_->output_dim(); }
    const std::string& descriptor() const noexcept { return descriptor_; }
    bool flip_invariant() const noexcept { return flip_invariant_; }
    const Network& network() const noexcept { return *network_; }

    /// Forward pass. Throws faceqan::Error on geometry mismatch or an invalid (non-finite/zero) output.
    Embedding embed(const FaceImage& image) const;

    /// Loss 1 - cos(M(image), target) and its exact gradient with respect to every pixel.
    LossGradient loss_input_gradient(const FaceImage& image, const Embedding& target) const;

private:
    void check_geometry(const FaceImage& image) const;
    std::vector<double> raw_forward(const FaceImage& image) const;

    std::shared_ptr<const Network> network_;
    std::string descriptor_;
    bool flip_invariant_;
};

ModelHandle load_model(const ModelConfig& config);

}  // namespace faceqan
