#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "faceqan/embedding.hpp"

namespace faceqan {

struct VerificationPair {
    std::string id_a;
    std::string id_b;
    bool mated = false;
};

/// A scored mated comparison together with the qualities of both images.
struct MatedComparison {
    VerificationPair pair;
    double score = 0.0;
    double quality_a = 0.0;
    double quality_b = 0.0;
};

struct ErcPoint {
    double drop_fraction = 0.0;
    double fnmr = 0.0;
};

/// FNMR at a fixed threshold as the lowest-quality mated pairs are rejected.
struct ErcCurve {
    double fmr_target = 0.001;
    double threshold = 0.0;
    std::vector<ErcPoint> points;  // drop fractions strictly increasing from 0
};

enum class DropGrid {
    exact,    // one point per rejected pair: r / n for r = 0 .. n-1
    uniform,  // j / points for j = 0 .. points-1
};

/// Cosine comparison score in [-1, 1].
double verification_score(const Embedding& a, const Embedding& b);

/// Fraction of scores at or above the threshold (the match rule is score >= t).
double match_rate(std::span<const double> scores, double threshold);

/// Smallest candidate threshold t (a score value, or the float just above the maximum)
/// with match_rate(nonmated, t) <= fmr_target.
double threshold_at_fmr(std::span<const double> nonmated_scores, double fmr_target);

/// Error-versus-reject curve. Pairs are ranked by min(quality_a, quality_b), ties broken by
/// (id_a, id_b). The threshold is held fixed for every drop fraction.
ErcCurve erc_curve(std::span<const MatedComparison> mated, double threshold, DropGrid grid = DropGrid::exact,
                   std::size_t uniform_points = 100);

/// Trapezoidal area under the curve over [0, max_drop]; the curve is linearly
/// interpolated when max_drop falls between grid points.
double pauc(const ErcCurve& curve, double max_drop);

/// Quality scores supplied by one method, keyed by image id.
struct MethodScores {
    std::string name;
    std::map<std::string, double> quality;
    bool negate = false;  // set for methods whose scores are lower-is-better
};

struct MethodResult {
    std::string name;
    ErcCurve curve;
    std::vector<double> auc_e3;  // pAUC x 10^3 at each requested drop
};

struct ComparisonReport {
    double fmr_target = 0.001;
    double threshold = 0.0;
    std::size_t mated = 0;
    std::size_t nonmated = 0;
    std::vector<double> drops;
    std::vector<MethodResult> rows;
};

/// Scores every pair of the protocol with the given embeddings, fixes the threshold on the
/// non-mated set and evaluates each method's ERC. Throws faceqan::Error when an image
/// referenced by the protocol has no embedding or no quality for some method.
ComparisonReport compare_methods(std::span<const MethodScores> methods, std::span<const VerificationPair> pairs,
                                 const std::map<std::string, Embedding>& embeddings, double fmr_target,
                                 std::span<const double> drops);

}  // namespace faceqan
