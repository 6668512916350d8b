#include "faceqan/quality.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "faceqan/error.hpp"

namespace faceqan {

double symmetry_score(const FaceImage& image, const ModelHandle& model) {
    return symmetry_score(image, model.embed(image), model);
}

double symmetry_score(const FaceImage& image, const Embedding& clean, const ModelHandle& model) {
    return cosine_similarity(clean, model.embed(image.flipped_horizontally()));
}

SimilarityStats similarity_stats(const Embedding& clean, std::span<const Embedding> adversarial, double s_f) {
    if (adversarial.empty()) {
        throw Error("similarity statistics need at least one adversarial embedding");
    }
    if (!std::isfinite(s_f) || s_f < -1.0 || s_f > 1.0) {
        throw Error("flip similarity must lie in [-1, 1]");
    }
    std::vector<double> sims;
    sims.reserve(adversarial.size());
    for (const Embedding& e : adversarial) {
        sims.push_back(cosine_similarity(clean, e));
    }
    const double n = static_cast<double>(sims.size());
    double mean = 0.0;
    for (double s : sims) {
        mean += s;
    }
    mean /= n;
    double var = 0.0;
    for (double s : sims) {
        var += (s - mean) * (s - mean);
    }
    var /= n;
    return SimilarityStats{std::clamp(mean, -1.0, 1.0), std::sqrt(var), s_f};
}

QualityScore aggregate_quality(const SimilarityStats& stats, double p) {
    if (!(p > 0.0) || !std::isfinite(p)) {
        throw Error("power-law exponent p must be positive");
    }
    if (!std::isfinite(stats.mu) || !std::isfinite(stats.sigma) || !std::isfinite(stats.s_f) || stats.mu < -1.0 ||
        stats.mu > 1.0 || stats.sigma < 0.0 || stats.s_f < -1.0 || stats.s_f > 1.0) {
        throw Error("similarity statistics out of range");
    }
    const double q_adv = (stats.mu + 1.0) / 2.0 * std::clamp(1.0 - stats.sigma, 0.0, 1.0);
    const double q = std::pow(q_adv * std::clamp(stats.s_f, 0.0, 1.0), p);
    return QualityScore{std::clamp(q, 0.0, 1.0)};
}

ScoreRecord score_image(const FaceImage& image, const ModelHandle& model, const AttackParams& params,
                        bool use_symmetry, std::size_t jobs) {
    const Embedding clean = model.embed(image);
    const AdversarialBatch batch = generate_adversarial_batch(image, clean, model, params, jobs);
    const double s_f = use_symmetry ? symmetry_score(image, clean, model) : 1.0;
    ScoreRecord rec;
    rec.id = image.id();
    rec.stats = similarity_stats(clean, batch.adv_embeddings, s_f);
    rec.quality = aggregate_quality(rec.stats, params.exponent);
    return rec;
}

}  // namespace faceqan
