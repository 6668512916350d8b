#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "faceqan/image.hpp"
#include "faceqan/random.hpp"

namespace faceqan::test {

inline FaceImage random_image(std::size_t w, std::size_t h, std::uint64_t seed, double amplitude = 0.9,
                              std::string id = "img") {
    Rng rng(seed);
    std::vector<double> px(w * h * 3);
    for (double& v : px) {
        v = rng.uniform(-amplitude, amplitude);
    }
    return FaceImage(w, h, std::move(px), std::move(id));
}

/// Image equal to its own horizontal mirror.
inline FaceImage symmetric_image(std::size_t w, std::size_t h, std::uint64_t seed) {
    FaceImage img = random_image(w, h, seed);
    for (std::size_t c = 0; c < 3; ++c) {
        for (std::size_t y = 0; y < h; ++y) {
            for (std::size_t x = 0; x < w / 2; ++x) {
                img.at(w - 1 - x, y, c) = img.at(x, y, c);
            }
        }
    }
    return img;
}

inline std::vector<double> random_vector(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> v(n);
    for (double& x : v) {
        x = rng.normal();
    }
    return v;
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("faceqan_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace faceqan::test
