#include "faceqan/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <tuple>

#include "faceqan/error.hpp"

namespace faceqan {

double verification_score(const Embedding& a, const Embedding& b) {
    return cosine_similarity(a, b);
}

double match_rate(std::span<const double> scores, double threshold) {
    if (scores.empty()) {
        throw Error("match rate of an empty score list");
    }
    const auto n = std::count_if(scores.begin(), scores.end(), [&](double s) { return s >= threshold; });
    return static_cast<double>(n) / static_cast<double>(scores.size());
}

double threshold_at_fmr(std::span<const double> nonmated_scores, double fmr_target) {
    if (nonmated_scores.empty()) {
        throw Error("threshold_at_fmr requires at least one non-mated score");
    }
    if (!(fmr_target >= 0.0 && fmr_target <= 1.0)) {
        throw Error("fmr_target must lie in [0, 1]");
    }
    std::vector<double> sorted(nonmated_scores.begin(), nonmated_scores.end());
    if (std::any_of(sorted.begin(), sorted.end(), [](double s) { return !std::isfinite(s); })) {
        throw Error("non-finite comparison score");
    }
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    const double n = static_cast<double>(sorted.size());
    double best = std::nextafter(sorted.front(), std::numeric_limits<double>::infinity());
    // Walk distinct values from the top; the count at or above each one grows monotonically.
    for (std::size_t i = 0; i < sorted.size();) {
        const double v = sorted[i];
        std::size_t j = i;
        while (j < sorted.size() && sorted[j] == v) {
            ++j;
        }
        if (static_cast<double>(j) / n <= fmr_target) {
            best = v;
        } else {
            break;
        }
        i = j;
    }
    return best;
}

ErcCurve erc_curve(std::span<const MatedComparison> mated, double threshold, DropGrid grid,
                   std::size_t uniform_points) {
    if (mated.empty()) {
        throw Error("ERC curve requires at least one mated comparison");
    }
    const std::size_t n = mated.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const double qa = std::min(mated[a].quality_a, mated[a].quality_b);
        const double qb = std::min(mated[b].quality_a, mated[b].quality_b);
        if (qa != qb) {
            return qa < qb;
        }
        return std::tie(mated[a].pair.id_a, mated[a].pair.id_b) < std::tie(mated[b].pair.id_a, mated[b].pair.id_b);
    });

    // rejected_below[r] = number of false non-matches among the r lowest-quality pairs.
    std::vector<std::size_t> rejected_below(n + 1, 0);
    for (std::size_t r = 0; r < n; ++r) {
        rejected_below[r + 1] = rejected_below[r] + (mated[order[r]].score < threshold ? 1 : 0);
    }
    const std::size_t total_fnm = rejected_below[n];

    auto fnmr_after_drop = [&](std::size_t dropped) {
        const std::size_t retained = n - dropped;
        return static_cast<double>(total_fnm - rejected_below[dropped]) / static_cast<double>(retained);
    };

    ErcCurve curve;
    curve.threshold = threshold;
    if (grid == DropGrid::exact) {
        curve.points.reserve(n);
        for (std::size_t r = 0; r < n; ++r) {
            curve.points.push_back({static_cast<double>(r) / static_cast<double>(n), fnmr_after_drop(r)});
        }
    } else {
        if (uniform_points < 1) {
            throw Error("uniform drop grid needs at least one point");
        }
        curve.points.reserve(uniform_points);
        for (std::size_t j = 0; j < uniform_points; ++j) {
            const std::size_t dropped = (j * n) / uniform_points;
            curve.points.push_back(
                {static_cast<double>(j) / static_cast<double>(uniform_points), fnmr_after_drop(dropped)});
        }
    }
    return curve;
}

double pauc(const ErcCurve& curve, double max_drop) {
    const auto& pts = curve.points;
    if (pts.empty()) {
        throw Error("pAUC of an empty curve");
    }
    if (!(max_drop > 0.0) || max_drop > pts.back().drop_fraction) {
        throw Error("max_drop " + std::to_string(max_drop) + " outside the curve grid [0, " +
                    std::to_string(pts.back().drop_fraction) + "]");
    }
    double area = 0.0;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
        const ErcPoint& a = pts[i];
        const ErcPoint& b = pts[i + 1];
        if (a.drop_fraction >= max_drop) {
            break;
        }
        if (b.drop_fraction <= max_drop) {
            area += 0.5 * (a.fnmr + b.fnmr) * (b.drop_fraction - a.drop_fraction);
        } else {
            const double t = (max_drop - a.drop_fraction) / (b.drop_fraction - a.drop_fraction);
            const double end = a.fnmr + t * (b.fnmr - a.fnmr);
            area += 0.5 * (a.fnmr + end) * (max_drop - a.drop_fraction);
            break;
        }
    }
    return area;
}

ComparisonReport compare_methods(std::span<const MethodScores> methods, std::span<const VerificationPair> pairs,
                                 const std::map<std::string, Embedding>& embeddings, double fmr_target,
                                 std::span<const double> drops) {
    auto lookup = [&](const std::string& id) -> const Embedding& {
        auto it = embeddings.find(id);
        if (it == embeddings.end()) {
            throw Error("no embedding for protocol image '" + id + "'");
        }
        return it->second;
    };

    std::vector<double> nonmated;
    std::vector<MatedComparison> mated;
    for (const VerificationPair& p : pairs) {
        const double s = verification_score(lookup(p.id_a), lookup(p.id_b));
        if (p.mated) {
            mated.push_back({p, s, 0.0, 0.0});
        } else {
            nonmated.push_back(s);
        }
    }
    if (mated.empty() || nonmated.empty()) {
        throw Error("evaluation needs at least one mated and one non-mated pair");
    }

    ComparisonReport report;
    report.fmr_target = fmr_target;
    report.threshold = threshold_at_fmr(nonmated, fmr_target);
    report.mated = mated.size();
    report.nonmated = nonmated.size();
    report.drops.assign(drops.begin(), drops.end());

    for (const MethodScores& method : methods) {
        auto quality = [&](const std::string& id) {
            auto it = method.quality.find(id);
            if (it == method.quality.end()) {
                throw Error("method '" + method.name + "' has no quality for image '" + id + "'");
            }
            return method.negate ? -it->second : it->second;
        };
        for (MatedComparison& m : mated) {
            m.quality_a = quality(m.pair.id_a);
            m.quality_b = quality(m.pair.id_b);
        }
        for (const VerificationPair& p : pairs) {
            if (!p.mated) {
                quality(p.id_a);
                quality(p.id_b);
            }
        }
        MethodResult row;
        row.name = method.name;
        row.curve = erc_curve(mated, report.threshold);
        row.curve.fmr_target = fmr_target;
        for (double d : drops) {
            row.auc_e3.push_back(pauc(row.curve, d) * 1e3);
        }
        report.rows.push_back(std::move(row));
    }
    return report;
}

}  // namespace faceqan
