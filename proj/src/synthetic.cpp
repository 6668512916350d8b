#include "faceqan/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <opencv2/imgproc.hpp>

#include "faceqan/error.hpp"
#include "faceqan/random.hpp"

namespace faceqan::synthetic {
namespace {

constexpr int kSuper = 4;  // supersampling factor per axis

struct Rgb {
    double r, g, b;
};

Rgb to_rgb(const double (&c)[3]) {
    return {c[0], c[1], c[2]};
}

bool in_ellipse(double u, double v, double cu, double cv, double ru, double rv) {
    const double du = (u - cu) / ru;
    const double dv = (v - cv) / rv;
    return du * du + dv * dv <= 1.0;
}

// Colour of the face at normalized coordinates (u, v) in [-1, 1]^2.
Rgb shade(const Identity& id, const Variation& var, double u, double v) {
    const double shift = var.yaw * id.face_rx * 0.5;
    const double face_cv = 0.05;
    if (!in_ellipse(u, v, 0.0, face_cv, id.face_rx, id.face_ry)) {
        return to_rgb(id.background);
    }
    if (v < id.hair_line) {
        return to_rgb(id.hair);
    }
    for (double side : {-1.0, 1.0}) {
        const double eu = side * id.eye_sep + shift;
        if (in_ellipse(u, v, eu, id.eye_y, id.eye_r * 0.45, id.eye_r * 0.45)) {
            return to_rgb(id.eye_color);
        }
        if (in_ellipse(u, v, eu, id.eye_y, id.eye_r * 1.3, id.eye_r)) {
            return {0.85, 0.85, 0.8};
        }
        if (std::abs(u - eu) <= id.brow_len && std::abs(v - id.brow_y) <= 0.03) {
            return to_rgb(id.hair);
        }
    }
    if (in_ellipse(u, v, shift, id.mouth_y, id.mouth_w * var.mouth_scale, id.mouth_h)) {
        return {0.55, -0.45, -0.4};
    }
    Rgb skin = to_rgb(id.skin);
    if (std::abs(u - shift) <= id.nose_w && v >= id.eye_y && v <= id.eye_y + id.nose_len) {
        skin = {skin.r - 0.25, skin.g - 0.25, skin.b - 0.25};
    }
    return skin;
}

void jitter(double (&c)[3], Rng& rng, double base_r, double base_g, double base_b, double amount) {
    c[0] = std::clamp(base_r + rng.uniform(-amount, amount), -1.0, 1.0);
    c[1] = std::clamp(base_g + rng.uniform(-amount, amount), -1.0, 1.0);
    c[2] = std::clamp(base_b + rng.uniform(-amount, amount), -1.0, 1.0);
}

}  // namespace

Identity make_identity(std::uint64_t seed, std::size_t index) {
    Rng rng(stream_seed(seed, "synthetic-identity", index));
    Identity id{};
    const double tone = rng.uniform(-0.2, 0.6);
    jitter(id.skin, rng, tone + 0.15, tone, tone - 0.15, 0.05);
    const double hair = rng.uniform(-0.9, -0.2);
    jitter(id.hair, rng, hair, hair, hair, 0.15);
    jitter(id.background, rng, 0.0, 0.0, 0.0, 0.6);
    const double eye = rng.uniform(-0.9, -0.3);
    jitter(id.eye_color, rng, eye, eye, eye, 0.2);
    id.face_rx = rng.uniform(0.55, 0.75);
    id.face_ry = rng.uniform(0.7, 0.9);
    id.eye_sep = rng.uniform(0.2, 0.36);
    id.eye_y = rng.uniform(-0.3, -0.1);
    id.eye_r = rng.uniform(0.07, 0.12);
    id.brow_y = id.eye_y - rng.uniform(0.13, 0.2);
    id.brow_len = rng.uniform(0.08, 0.18);
    id.nose_len = rng.uniform(0.2, 0.35);
    id.nose_w = rng.uniform(0.04, 0.09);
    id.mouth_y = rng.uniform(0.35, 0.55);
    id.mouth_w = rng.uniform(0.15, 0.3);
    id.mouth_h = rng.uniform(0.04, 0.09);
    id.hair_line = rng.uniform(-0.75, -0.45);
    return id;
}

FaceImage render(const Identity& identity, const Variation& variation, std::size_t width, std::size_t height,
                 std::string id) {
    FaceImage img(width, height, std::move(id));
    const double hw = static_cast<double>(width) / 2.0;
    const double hh = static_cast<double>(height) / 2.0;
    for (std::size_t y = 0; y < height; ++y) {
        for (std::size_t x = 0; x < width; ++x) {
            double acc[3] = {0.0, 0.0, 0.0};
            for (int sy = 0; sy < kSuper; ++sy) {
                for (int sx = 0; sx < kSuper; ++sx) {
                    const double px = static_cast<double>(x) + (sx + 0.5) / kSuper;
                    const double py = static_cast<double>(y) + (sy + 0.5) / kSuper;
                    const Rgb c = shade(identity, variation, (px - hw) / hw, (py - hh) / hh);
                    acc[0] += c.r;
                    acc[1] += c.g;
                    acc[2] += c.b;
                }
            }
            for (std::size_t c = 0; c < 3; ++c) {
                img.at(x, y, c) = acc[c] / (kSuper * kSuper) + variation.brightness;
            }
        }
    }
    if (variation.yaw == 0.0) {
        for (std::size_t c = 0; c < 3; ++c) {
            for (std::size_t y = 0; y < height; ++y) {
                for (std::size_t x = 0; x < width / 2; ++x) {
                    img.at(width - 1 - x, y, c) = img.at(x, y, c);
                }
            }
        }
    }
    img.clip();
    return img;
}

FaceImage degrade(const FaceImage& image, double blur_sigma, double noise_std, std::uint64_t noise_seed) {
    if (blur_sigma < 0.0 || noise_std < 0.0) {
        throw Error("degradation strengths must be non-negative");
    }
    FaceImage out = image;
    const int w = static_cast<int>(image.width());
    const int h = static_cast<int>(image.height());
    if (blur_sigma > 0.0) {
        for (std::size_t c = 0; c < 3; ++c) {
            double* plane = out.pixels().data() + c * image.width() * image.height();
            cv::Mat m(h, w, CV_64F, plane);
            cv::Mat blurred;
            cv::GaussianBlur(m, blurred, cv::Size(0, 0), blur_sigma, blur_sigma, cv::BORDER_REFLECT_101);
            blurred.copyTo(m);
        }
    }
    if (noise_std > 0.0) {
        Rng rng(noise_seed);
        for (double& v : out.pixels()) {
            v += noise_std * rng.normal();
        }
    }
    out.clip();
    return out;
}

std::vector<Sample> make_dataset(const DatasetOptions& options) {
    if (options.identities == 0 || options.images_per_identity == 0) {
        throw Error("synthetic dataset needs at least one identity and one image per identity");
    }
    std::vector<Sample> out;
    out.reserve(options.identities * options.images_per_identity);
    for (std::size_t i = 0; i < options.identities; ++i) {
        const Identity identity = make_identity(options.seed, i);
        for (std::size_t j = 0; j < options.images_per_identity; ++j) {
            char name[64];
            std::snprintf(name, sizeof(name), "id%03zu/%03zu.png", i, j);
            Rng rng(stream_seed(options.seed, name, 0));
            Variation var;
            var.brightness = rng.uniform(-0.1, 0.1);
            var.mouth_scale = rng.uniform(0.85, 1.15);
            Sample s;
            s.identity = i;
            if (!options.clean) {
                s.blur_sigma = rng.uniform(0.0, options.blur_max);
                s.noise_std = rng.uniform(0.0, options.noise_max);
                s.yaw = rng.uniform(-options.yaw_max, options.yaw_max);
            }
            var.yaw = s.yaw;
            FaceImage clean = render(identity, var, options.width, options.height, name);
            s.image = degrade(clean, s.blur_sigma, s.noise_std, rng.next());
            s.image.set_id(name);
            out.push_back(std::move(s));
        }
    }
    return out;
}

std::vector<VerificationPair> make_protocol(const std::vector<Sample>& samples, std::size_t max_nonmated,
                                            std::uint64_t seed) {
    std::vector<VerificationPair> mated, nonmated;
    for (std::size_t a = 0; a < samples.size(); ++a) {
        for (std::size_t b = a + 1; b < samples.size(); ++b) {
            VerificationPair p{samples[a].image.id(), samples[b].image.id(),
                               samples[a].identity == samples[b].identity};
            (p.mated ? mated : nonmated).push_back(std::move(p));
        }
    }
    if (max_nonmated > 0 && nonmated.size() > max_nonmated) {
        Rng rng(mix64(seed ^ 0x70616972ULL));
        for (std::size_t i = nonmated.size() - 1; i > 0; --i) {
            std::swap(nonmated[i], nonmated[rng.below(i + 1)]);
        }
        nonmated.resize(max_nonmated);
        std::sort(nonmated.begin(), nonmated.end(),
                  [](const auto& x, const auto& y) { return std::tie(x.id_a, x.id_b) < std::tie(y.id_a, y.id_b); });
    }
    mated.insert(mated.end(), std::make_move_iterator(nonmated.begin()), std::make_move_iterator(nonmated.end()));
    return mated;
}

}  // namespace faceqan::synthetic
