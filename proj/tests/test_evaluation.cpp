#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "faceqan/error.hpp"
#include "faceqan/evaluation.hpp"
#include "support.hpp"

using namespace faceqan;

namespace {

// Exhaustive search: smallest candidate threshold whose match rate is within target.
double brute_force_threshold(const std::vector<double>& scores, double fmr) {
    std::vector<double> candidates = scores;
    candidates.push_back(std::nextafter(*std::max_element(scores.begin(), scores.end()),
                                        std::numeric_limits<double>::infinity()));
    double best = std::numeric_limits<double>::infinity();
    for (double t : candidates) {
        std::size_t n = 0;
        for (double s : scores) {
            n += s >= t;
        }
        if (static_cast<double>(n) / static_cast<double>(scores.size()) <= fmr) {
            best = std::min(best, t);
        }
    }
    return best;
}

double linear_at(const ErcCurve& c, double x) {
    for (std::size_t i = 0; i + 1 < c.points.size(); ++i) {
        const auto& a = c.points[i];
        const auto& b = c.points[i + 1];
        if (x <= b.drop_fraction) {
            return a.fnmr + (x - a.drop_fraction) / (b.drop_fraction - a.drop_fraction) * (b.fnmr - a.fnmr);
        }
    }
    return c.points.back().fnmr;
}

double midpoint_sum(const ErcCurve& c, double max_drop, std::size_t n) {
    const double h = max_drop / static_cast<double>(n);
    double s = 0;
    for (std::size_t i = 0; i < n; ++i) {
        s += linear_at(c, (static_cast<double>(i) + 0.5) * h);
    }
    return s * h;
}

MatedComparison mated(std::string a, std::string b, double score, double qa, double qb) {
    return {{std::move(a), std::move(b), true}, score, qa, qb};
}

}  // namespace

TEST_CASE("verification score") {
    const Embedding a({1.0, 2.0, 3.0});
    CHECK(verification_score(a, a) == 1.0);
    CHECK(verification_score(Embedding({1.0, 0.0}), Embedding({0.0, 1.0})) == 0.0);
    const auto x = faceqan::test::random_vector(10, 1), y = faceqan::test::random_vector(10, 2);
    double d = 0, nx = 0, ny = 0;
    for (int i = 0; i < 10; ++i) {
        d += x[i] * y[i];
        nx += x[i] * x[i];
        ny += y[i] * y[i];
    }
    CHECK(verification_score(Embedding(x), Embedding(y)) == doctest::Approx(d / std::sqrt(nx) / std::sqrt(ny)));
}

TEST_CASE("threshold at fmr reference cases") {
    std::vector<double> s;
    for (int i = 1; i <= 10; ++i) {
        s.push_back(i / 10.0);
    }
    CHECK(threshold_at_fmr(s, 0.2) == 0.9);
    CHECK(match_rate(s, 0.9) == 0.2);
    CHECK(threshold_at_fmr(s, 1.0) == 0.1);
    const double t0 = threshold_at_fmr(s, 0.0);
    CHECK(t0 > 1.0);
    CHECK(match_rate(s, t0) == 0.0);
    CHECK_THROWS_AS(threshold_at_fmr(std::vector<double>{}, 0.1), Error);
    CHECK_THROWS_AS(threshold_at_fmr(s, 1.5), Error);
}

TEST_CASE("threshold matches exhaustive search and is tight") {
    faceqan::Rng rng(3);
    for (int t = 0; t < 30; ++t) {
        const std::size_t n = 1 + rng.below(300);
        std::vector<double> s(n);
        for (double& v : s) {
            v = std::round(rng.uniform(-1, 1) * 20) / 20;  // plenty of ties
        }
        const double fmr = rng.uniform01() < 0.2 ? 0.0 : rng.uniform(0, 0.3);
        const double th = threshold_at_fmr(s, fmr);
        CHECK(th == brute_force_threshold(s, fmr));
        CHECK(match_rate(s, th) <= fmr);
        // the next lower candidate violates the target
        double lower = -std::numeric_limits<double>::infinity();
        for (double v : s) {
            if (v < th) {
                lower = std::max(lower, v);
            }
        }
        if (std::isfinite(lower)) {
            CHECK(match_rate(s, lower) > fmr);
        }
    }
}

TEST_CASE("erc baseline and trivial curves") {
    const std::vector<MatedComparison> m{mated("a", "b", 0.2, 0.1, 0.9), mated("c", "d", 0.8, 0.5, 0.6),
                                         mated("e", "f", 0.4, 0.7, 0.8), mated("g", "h", 0.9, 0.2, 0.3)};
    const ErcCurve c = erc_curve(m, 0.5);
    REQUIRE(c.points.size() == 4);
    CHECK(c.points[0].drop_fraction == 0.0);
    CHECK(c.points[0].fnmr == 0.5);
    // order by min quality: ab(0.1), gh(0.2), cd(0.5), ef(0.7)
    CHECK(c.points[1].fnmr == doctest::Approx(1.0 / 3));
    CHECK(c.points[2].fnmr == doctest::Approx(0.5));
    CHECK(c.points[3].fnmr == 1.0);
    for (std::size_t i = 1; i < c.points.size(); ++i) {
        CHECK(c.points[i].drop_fraction > c.points[i - 1].drop_fraction);
    }
    for (const auto& p : erc_curve(m, 0.1).points) {
        CHECK(p.fnmr == 0.0);
    }
    CHECK_THROWS_AS(erc_curve(std::vector<MatedComparison>{}, 0.5), Error);
}

TEST_CASE("erc ties are broken by image id") {
    const std::vector<MatedComparison> m{mated("b", "x", 0.9, 0.5, 0.5), mated("a", "x", 0.1, 0.5, 0.5)};
    std::vector<MatedComparison> rev(m.rbegin(), m.rend());
    const ErcCurve c1 = erc_curve(m, 0.5), c2 = erc_curve(rev, 0.5);
    CHECK(c1.points[1].fnmr == 0.0);  // "a" dropped first
    CHECK(c2.points[1].fnmr == 0.0);
}

TEST_CASE("oracle quality gives a non-increasing erc") {
    faceqan::Rng rng(11);
    for (int t = 0; t < 20; ++t) {
        std::vector<MatedComparison> m;
        const std::size_t n = 2 + rng.below(400);
        for (std::size_t i = 0; i < n; ++i) {
            const double s = rng.uniform(-0.2, 1);
            m.push_back(mated("a" + std::to_string(i), "b" + std::to_string(i), s, s, s + 1));
        }
        const ErcCurve c = erc_curve(m, rng.uniform(0, 0.8));
        for (std::size_t i = 1; i < c.points.size(); ++i) {
            CHECK(c.points[i].fnmr <= c.points[i - 1].fnmr);
        }
    }
}

TEST_CASE("uniform drop grid") {
    std::vector<MatedComparison> m;
    for (int i = 0; i < 50; ++i) {
        m.push_back(mated("a" + std::to_string(i), "b", i / 50.0, i, i));
    }
    const ErcCurve u = erc_curve(m, 0.5, DropGrid::uniform, 100);
    REQUIRE(u.points.size() == 100);
    CHECK(u.points.front().drop_fraction == 0.0);
    CHECK(u.points.back().drop_fraction == doctest::Approx(0.99));
    const ErcCurve e = erc_curve(m, 0.5);
    CHECK(u.points[20].fnmr == e.points[10].fnmr);
}

TEST_CASE("pauc reference values") {
    ErcCurve flat;
    flat.points = {{0, 0.05}, {0.2, 0.05}, {0.4, 0.05}, {0.5, 0.05}};
    CHECK(pauc(flat, 0.4) == doctest::Approx(0.02).epsilon(1e-12));
    ErcCurve zero;
    zero.points = {{0, 0}, {0.5, 0}, {0.9, 0}};
    CHECK(pauc(zero, 0.1) == 0.0);
    CHECK(pauc(zero, 0.8) == 0.0);
    ErcCurve pl;
    pl.points = {{0, 0.1}, {0.1, 0.05}, {0.2, 0.05}};
    CHECK(pauc(pl, 0.2) == doctest::Approx(0.0125).epsilon(1e-12));
    CHECK(std::abs(midpoint_sum(pl, 0.2, 100000) - 0.0125) < 1e-9);
    // interpolated endpoint
    CHECK(pauc(pl, 0.05) == doctest::Approx(0.05 * (0.1 + 0.075) / 2).epsilon(1e-12));
    CHECK_THROWS_AS(pauc(pl, 0.3), Error);
    CHECK_THROWS_AS(pauc(pl, 0.0), Error);
}

TEST_CASE("pauc agrees with a fine Riemann sum") {
    faceqan::Rng rng(21);
    for (int t = 0; t < 10; ++t) {
        ErcCurve c;
        double x = 0;
        for (int i = 0; i < 12; ++i) {
            c.points.push_back({x, rng.uniform01()});
            x += rng.uniform(0.02, 0.12);
        }
        const double max_drop = c.points.back().drop_fraction * rng.uniform(0.3, 1.0);
        CHECK(std::abs(pauc(c, max_drop) - midpoint_sum(c, max_drop, 100000)) < 1e-9);
    }
}

TEST_CASE("compare_methods composition") {
    std::map<std::string, Embedding> emb;
    faceqan::Rng rng(2);
    std::vector<VerificationPair> pairs;
    for (int id = 0; id < 6; ++id) {
        const auto base = faceqan::test::random_vector(8, 50 + id);
        for (int j = 0; j < 3; ++j) {
            auto v = base;
            for (double& x : v) {
                x += rng.normal() * 0.6;
            }
            emb.emplace("p" + std::to_string(id) + "_" + std::to_string(j), Embedding(v));
        }
    }
    for (auto a = emb.begin(); a != emb.end(); ++a) {
        for (auto b = std::next(a); b != emb.end(); ++b) {
            pairs.push_back({a->first, b->first, a->first.substr(0, 2) == b->first.substr(0, 2)});
        }
    }
    MethodScores m1{"one", {}, false};
    for (const auto& [id, e] : emb) {
        m1.quality[id] = rng.uniform01();
    }
    MethodScores m2 = m1;
    m2.name = "two";
    const std::vector<double> drops{0.1, 0.2, 0.4};
    const std::vector<MethodScores> methods{m1, m2};
    const auto report = compare_methods(methods, pairs, emb, 0.01, drops);
    REQUIRE(report.rows.size() == 2);
    CHECK(report.rows[0].auc_e3 == report.rows[1].auc_e3);

    std::vector<double> nonmated;
    std::vector<MatedComparison> mated_pairs;
    for (const auto& p : pairs) {
        const double s = verification_score(emb.at(p.id_a), emb.at(p.id_b));
        if (p.mated) {
            mated_pairs.push_back({p, s, m1.quality[p.id_a], m1.quality[p.id_b]});
        } else {
            nonmated.push_back(s);
        }
    }
    const double th = threshold_at_fmr(nonmated, 0.01);
    CHECK(report.threshold == th);
    const ErcCurve c = erc_curve(mated_pairs, th);
    for (std::size_t i = 0; i < drops.size(); ++i) {
        CHECK(report.rows[0].auc_e3[i] == doctest::Approx(pauc(c, drops[i]) * 1e3));
    }

    MethodScores negated = m1;
    negated.negate = true;
    for (auto& [id, q] : negated.quality) {
        q = -q;
    }
    const std::vector<MethodScores> neg{negated};
    CHECK(compare_methods(neg, pairs, emb, 0.01, drops).rows[0].auc_e3 == report.rows[0].auc_e3);

    MethodScores missing = m1;
    missing.quality.erase(missing.quality.begin());
    const std::vector<MethodScores> bad{missing};
    CHECK_THROWS_WITH_AS(compare_methods(bad, pairs, emb, 0.01, drops), doctest::Contains("no quality"), Error);
}

TEST_CASE("oracle quality beats random quality") {
    faceqan::Rng rng(8);
    std::vector<MatedComparison> m;
    for (int i = 0; i < 500; ++i) {
        const double s = rng.uniform(0, 1);
        m.push_back(mated("a" + std::to_string(i), "b", s, s, s));
    }
    const ErcCurve oracle = erc_curve(m, 0.3);
    for (auto& c : m) {
        c.quality_a = c.quality_b = rng.uniform01();
    }
    const ErcCurve random = erc_curve(m, 0.3);
    for (double d : {0.1, 0.2, 0.4, 0.8}) {
        CHECK(pauc(oracle, d) < pauc(random, d));
    }
}

TEST_CASE("random quality leaves the erc flat") {
    // mean |FNMR(drop) - FNMR(0)| over 100 resamplings stays within 3 standard errors of zero drift
    faceqan::Rng rng(13);
    constexpr int n = 400, reps = 100;
    std::vector<MatedComparison> m;
    for (int i = 0; i < n; ++i) {
        m.push_back(mated("a" + std::to_string(i), "b", rng.uniform01(), 0, 0));
    }
    const double threshold = 0.3;
    for (double drop : {0.1, 0.2, 0.4, 0.8}) {
        const auto dropped = static_cast<std::size_t>(drop * n);
        std::vector<double> diffs;
        for (int r = 0; r < reps; ++r) {
            for (auto& c : m) {
                c.quality_a = c.quality_b = rng.uniform01();
            }
            const ErcCurve c = erc_curve(m, threshold);
            diffs.push_back(c.points[dropped].fnmr - c.points[0].fnmr);
        }
        double mean = 0;
        for (double d : diffs) {
            mean += d;
        }
        mean /= reps;
        double var = 0;
        for (double d : diffs) {
            var += (d - mean) * (d - mean);
        }
        const double se = std::sqrt(var / (reps - 1)) / std::sqrt(double(reps));
        CHECK(std::abs(mean) < 3 * se + 1e-12);
    }
}
