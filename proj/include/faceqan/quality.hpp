#pragma once

#include <span>
#include <string>

#include "faceqan/attack.hpp"
#include "faceqan/embedding.hpp"
#include "faceqan/image.hpp"
#include "faceqan/model.hpp"

namespace faceqan {

/// Statistics of the adversarial similarities S_i = cos(y, y+_i) plus the flip similarity.
struct SimilarityStats {
    double mu = 1.0;     // mean of S_i
    double sigma = 0.0;  // population standard deviation of S_i
    double s_f = 1.0;    // cos(M(I), M(flip(I)))
};

/// Final quality value in [0, 1]; higher is better.
struct QualityScore {
    double value = 0.0;
};

/// Per-image scoring output: the quality and the statistics it was aggregated from.
struct ScoreRecord {
    std::string id;
    QualityScore quality;
    SimilarityStats stats;
};

/// Cosine similarity between the embeddings of an image and its horizontal mirror.
double symmetry_score(const FaceImage& image, const ModelHandle& model);

/// Overload reusing a precomputed clean embedding.
double symmetry_score(const FaceImage& image, const Embedding& clean, const ModelHandle& model);

/// Throws faceqan::Error on an empty adversarial set.
SimilarityStats similarity_stats(const Embedding& clean, std::span<const Embedding> adversarial, double s_f);

/// q_adv = (mu + 1) / 2 * clip(1 - sigma, 0, 1);  Q = (q_adv * clip(s_f, 0, 1))^p.
QualityScore aggregate_quality(const SimilarityStats& stats, double p);

/// Runs the whole pipeline for one image. With use_symmetry off the flip embedding is
/// not computed and s_f is set to 1, both in the aggregate and in the returned stats.
ScoreRecord score_image(const FaceImage& image, const ModelHandle& model, const AttackParams& params,
                        bool use_symmetry = true, std::size_t jobs = 1);

inline QualityScore faceqan_score(const FaceImage& image, const ModelHandle& model, const AttackParams& params,
                                  bool use_symmetry = true, std::size_t jobs = 1) {
    return score_image(image, model, params, use_symmetry, jobs).quality;
}

}  // namespace faceqan
