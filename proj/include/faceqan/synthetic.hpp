#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "faceqan/evaluation.hpp"
#include "faceqan/image.hpp"

namespace faceqan::synthetic {

/// Appearance parameters of one synthetic identity.
struct Identity {
    double skin[3];
    double hair[3];
    double background[3];
    double eye_color[3];
    double face_rx, face_ry;
    double eye_sep, eye_y, eye_r;
    double brow_y, brow_len;
    double nose_len, nose_w;
    double mouth_y, mouth_w, mouth_h;
    double hair_line;
};

Identity make_identity(std::uint64_t seed, std::size_t index);

/// Nuisance factors applied on top of an identity.
struct Variation {
    double brightness = 0.0;  // additive offset in normalized units
    double mouth_scale = 1.0;
    double yaw = 0.0;  // horizontal feature shift, fraction of the face half-width; 0 renders an exactly symmetric face
};

/// Renders a face; with yaw == 0 the result is mirror-symmetric bit for bit.
FaceImage render(const Identity& identity, const Variation& variation, std::size_t width, std::size_t height,
                 std::string id = {});

/// Gaussian blur (sigma in pixels) followed by additive Gaussian noise (std in normalized units), clipped to [-1, 1].
FaceImage degrade(const FaceImage& image, double blur_sigma, double noise_std, std::uint64_t noise_seed);

struct Sample {
    FaceImage image;
    std::size_t identity = 0;
    double blur_sigma = 0.0;
    double noise_std = 0.0;
    double yaw = 0.0;
};

struct DatasetOptions {
    std::size_t identities = 20;
    std::size_t images_per_identity = 4;
    std::size_t width = 32;
    std::size_t height = 32;
    std::uint64_t seed = 0;
    double blur_max = 1.5;
    double noise_max = 0.15;
    double yaw_max = 0.5;
    bool clean = false;  // no degradation, no yaw
};

/// Ids are "<identity>/<index>.png" with zero-padded numbers.
std::vector<Sample> make_dataset(const DatasetOptions& options);

/// All within-identity pairs as mated; non-mated pairs drawn without replacement
/// across identities, at most `max_nonmated` of them (0 = all).
std::vector<VerificationPair> make_protocol(const std::vector<Sample>& samples, std::size_t max_nonmated,
                                            std::uint64_t seed);

}  // namespace faceqan::synthetic
