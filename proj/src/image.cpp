#include "faceqan/image.hpp"

#include <algorithm>
#include <cmath>

#include "faceqan/error.hpp"

namespace faceqan {

FaceImage::FaceImage(std::size_t width, std::size_t height, std::string id)
    : width_(width), height_(height), id_(std::move(id)) {
    if (width == 0 || height == 0) {
        throw Error("face image must have positive width and height");
    }
    pixels_.assign(width * height * kChannels, 0.0);
}

FaceImage::FaceImage(std::size_t width, std::size_t height, std::vector<double> pixels, std::string id)
    : width_(width), height_(height), pixels_(std::move(pixels)), id_(std::move(id)) {
    if (width == 0 || height == 0) {
        throw Error("face image must have positive width and height");
    }
    if (pixels_.size() != width * height * kChannels) {
        throw Error("face image pixel buffer does not match " + std::to_string(width) + "x" +
                    std::to_string(height) + "x3");
    }
    if (!in_range()) {
        throw Error("face image pixels must lie in [-1, 1]");
    }
}

bool FaceImage::in_range() const noexcept {
    return std::all_of(pixels_.begin(), pixels_.end(),
                       [](double v) { return std::isfinite(v) && v >= -1.0 && v <= 1.0; });
}

void FaceImage::clip() noexcept {
    for (double& v : pixels_) {
        v = std::clamp(v, -1.0, 1.0);
    }
}

FaceImage FaceImage::flipped_horizontally() const {
    FaceImage out = *this;
    out.pixels_ = flip_horizontally(pixels_, width_, height_);
    return out;
}

double max_abs_difference(const FaceImage& a, const FaceImage& b) {
    if (!a.same_geometry(b)) {
        throw Error("image geometry mismatch");
    }
    double m = 0.0;
    auto pa = a.pixels();
    auto pb = b.pixels();
    for (std::size_t i = 0; i < pa.size(); ++i) {
        m = std::max(m, std::abs(pa[i] - pb[i]));
    }
    return m;
}

PixelArray flip_horizontally(std::span<const double> pixels, std::size_t width, std::size_t height) {
    const std::size_t rows = FaceImage::kChannels * height;
    if (pixels.size() != rows * width) {
        throw Error("pixel array does not match image geometry");
    }
    PixelArray out(pixels.size());
    for (std::size_t r = 0; r < rows; ++r) {
        const double* src = pixels.data() + r * width;
        double* dst = out.data() + r * width;
        for (std::size_t x = 0; x < width; ++x) {
            dst[x] = src[width - 1 - x];
        }
    }
    return out;
}

}  // namespace faceqan
