#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace faceqan {

/// An aligned face crop with pixel values normalized to [-1, 1].
///
/// Storage is planar (channel-major): the value of channel c at column x,
/// row y lives at index (c * height + y) * width + x. This is also the
/// flattening order used by the embedding network input.
class FaceImage {
public:
    static constexpr std::size_t kChannels = 3;

    FaceImage() = default;

    /// Zero-filled image. Throws faceqan::Error on empty geometry.
    FaceImage(std::size_t width, std::size_t height, std::string id = {});

    /// Takes ownership of planar pixel data. Validates size and range.
    FaceImage(std::size_t width, std::size_t height, std::vector<double> pixels, std::string id = {});

    std::size_t width() const noexcept { return width_; }
    std::size_t height() const noexcept { return height_; }
    std::size_t size() const noexcept { return pixels_.size(); }
    bool empty() const noexcept { return pixels_.empty(); }

    const std::string& id() const noexcept { return id_; }
    void set_id(std::string id) { id_ = std::move(id); }

    double& at(std::size_t x, std::size_t y, std::size_t c) { return pixels_[(c * height_ + y) * width_ + x]; }
    double at(std::size_t x, std::size_t y, std::size_t c) const { return pixels_[(c * height_ + y) * width_ + x]; }

    std::span<double> pixels() noexcept { return pixels_; }
    std::span<const double> pixels() const noexcept { return pixels_; }

    bool same_geometry(const FaceImage& other) const noexcept {
        return width_ == other.width_ && height_ == other.height_;
    }

    /// True when every pixel lies in [-1, 1] and is finite.
    bool in_range() const noexcept;

    /// Clamps every pixel into [-1, 1] in place.
    void clip() noexcept;

    /// Mirror image about the vertical axis.
    FaceImage flipped_horizontally() const;

    friend bool operator==(const FaceImage& a, const FaceImage& b) noexcept {
        return a.width_ == b.width_ && a.height_ == b.height_ && a.pixels_ == b.pixels_;
    }

private:
    std::size_t width_ = 0;
    std::size_t height_ = 0;
    std::vector<double> pixels_;
    std::string id_;
};

/// Same-geometry array of per-pixel values (gradients, perturbations).
using PixelArray = std::vector<double>;

/// Largest absolute per-pixel difference. Geometry must match.
double max_abs_difference(const FaceImage& a, const FaceImage& b);

/// Mirrors a planar pixel array of the given geometry about the vertical axis.
PixelArray flip_horizontally(std::span<const double> pixels, std::size_t width, std::size_t height);

}  // namespace faceqan
