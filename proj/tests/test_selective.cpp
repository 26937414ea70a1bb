#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "oracles.hpp"
#include "selectrade/metrics.hpp"
#include "selectrade/selective.hpp"

using namespace selectrade;
using namespace selectrade::selective;

namespace {

struct Instance {
    ScoredSet set;
    std::vector<double> kappa;
    std::vector<int> loss;
};

// Confidences on a coarse grid so ties occur; errors get likelier as κ drops.
Instance random_instance(std::mt19937_64& rng, std::size_t m) {
    Instance in;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::size_t i = 0; i < m; ++i) {
        const double k = 0.5 + std::round(u(rng) * 50.0) / 100.0;
        const bool wrong = u(rng) < 1.2 * (1.0 - k);
        const int truth = rng() % 2 ? 1 : -1;
        in.set.push_back({k, wrong ? -truth : truth, truth});
        in.kappa.push_back(k);
        in.loss.push_back(wrong ? 1 : 0);
    }
    return in;
}

ScoredSet planted(std::size_t m, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.5, 1.0);
    ScoredSet s;
    for (std::size_t i = 0; i < m; ++i) {
        const double k = u(rng);
        const int truth = rng() % 2 ? 1 : -1;
        // P(correct) = κ: confident rows really are more accurate.
        const bool right = std::uniform_real_distribution<double>(0, 1)(rng) < k;
        s.push_back({k, right ? truth : -truth, truth});
    }
    return s;
}

}  // namespace

TEST_CASE("binomial tail examples") {
    CHECK(binomial_tail(10, 10, 0.3) == 1.0);
    CHECK(binomial_tail(7, 7, 0.0) == 1.0);
    CHECK(binomial_tail(20, 0, 0.1) == doctest::Approx(std::pow(0.9, 20)).epsilon(1e-13));
    CHECK(binomial_tail(4, 2, 0.5) == doctest::Approx(11.0 / 16.0).epsilon(1e-14));
    CHECK(binomial_tail(5, 2, 0.0) == 1.0);
    CHECK(binomial_tail(5, 2, 1.0) == 0.0);
    CHECK_THROWS_AS(binomial_tail(5, 2, 1.5), Error);
    CHECK_THROWS_AS(binomial_tail(5, 6, 0.5), Error);
}

TEST_CASE("binomial tail agrees with the incomplete beta function") {
    std::mt19937_64 rng(10);
    for (int i = 0; i < 300; ++i) {
        const std::int64_t m = 1 + static_cast<std::int64_t>(rng() % (i < 250 ? 2000 : 1000000));
        const std::int64_t k = static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(m + 1));
        const double b = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
        const double ref = oracle::binomial_cdf(m, k, b);
        const double got = binomial_tail(m, k, b);
        // lgamma terms near 1e7 cost a few ulps of log precision at large m.
        const double rel = m <= 2000 ? 1e-9 : 1e-7;
        CHECK(std::abs(got - ref) <= 1e-12 + rel * ref);
    }
}

TEST_CASE("bound with no losses has a closed form") {
    CHECK(std::abs(bstar(0.0, 0.001, 1000) - (1.0 - std::pow(0.001, 1.0 / 1000))) < 1e-6);
    for (std::int64_t m : {1, 7, 100, 5000}) {
        CHECK(std::abs(bstar(0.0, 0.05, m) - (1.0 - std::pow(0.05, 1.0 / static_cast<double>(m)))) < 1e-8);
    }
    CHECK(bstar(1.0, 0.01, 40) == 1.0);
}

TEST_CASE("bound matches a fine grid search") {
    std::mt19937_64 rng(1234);
    for (int i = 0; i < 20; ++i) {
        const std::int64_t m = 1 + static_cast<std::int64_t>(rng() % 500);
        const std::int64_t losses = static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(m + 1));
        const double r_hat = static_cast<double>(losses) / static_cast<double>(m);
        const double b = bstar(r_hat, 0.001, m);
        CHECK(std::abs(b - oracle::bstar_grid(losses, 0.001, m)) < 2e-6);
        CHECK(b >= r_hat);
    }
}

TEST_CASE("bound grows with the empirical risk") {
    for (std::int64_t m : {10, 64, 333}) {
        double prev = 0.0;
        for (std::int64_t k = 0; k <= m; ++k) {
            const double b = bstar(static_cast<double>(k) / static_cast<double>(m), 0.001, m);
            CHECK(b >= prev);
            prev = b;
        }
    }
    CHECK_THROWS_AS(bstar_count(3, 0.0, 10), Error);
    CHECK_THROWS_AS(bstar_count(11, 0.1, 10), Error);
}

TEST_CASE("guaranteed-risk search equals a step-by-step replay") {
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> u(0.01, 0.6);
    for (int i = 0; i < 50; ++i) {
        const std::size_t m = 1 + rng() % 256;
        const auto in = random_instance(rng, m);
        const double rstar = u(rng);
        const auto got = sgr(in.set, {0.001, rstar});
        const auto ref = oracle::sgr_replay(in.kappa, in.loss, 0.001, rstar);
        CHECK_FALSE(ref.ambiguous);
        CHECK(got.theta == ref.theta);
        CHECK(std::abs(got.bound - ref.bound) < 1e-8);
    }
}

TEST_CASE("hand-sized search over eight samples") {
    // κ ascending with losses at the three least confident samples.
    const std::vector<double> kappa{0.51, 0.55, 0.58, 0.62, 0.7, 0.8, 0.9, 0.95};
    const std::vector<int> loss{1, 1, 1, 0, 0, 0, 0, 0};
    ScoredSet s;
    for (std::size_t i = 0; i < 8; ++i) s.push_back({kappa[i], loss[i] ? -1 : 1, 1});
    for (const double rstar : {0.3, 0.6, 0.9, 0.99}) {
        const auto ref = oracle::sgr_replay(kappa, loss, 0.1, rstar);
        CHECK(sgr(s, {0.1, rstar}).theta == ref.theta);
    }
    // Lax target: every bound passes and the search stops at the second sample.
    const auto lax = sgr(s, {0.1, 2.0});
    CHECK(lax.theta == 0.55);
    CHECK(lax.coverage == 7.0 / 8.0);
}

TEST_CASE("search edge cases") {
    std::mt19937_64 rng(3);
    std::vector<double> k;
    ScoredSet s;
    for (int i = 0; i < 1024; ++i) {
        k.push_back(0.5 + 0.5 * (i + 1) / 1025.0);
        s.push_back({k.back(), 1, 1});
    }
    std::shuffle(s.begin(), s.end(), rng);
    // All correct: the bound at the widest probed projection (1023 samples) is
    // below r*, so the search ends one sample short of full coverage.
    const auto r = sgr(s, {0.001, 0.02});
    CHECK(r.coverage == 1023.0 / 1024.0);
    CHECK(r.bound == doctest::Approx(1.0 - std::pow(0.001 / 10, 1.0 / 1023)).epsilon(1e-6));
    CHECK(r.bound < 0.02);
    CHECK(*r.risk == 0.0);

    const ScoredSet one{{0.7, 1, -1}};
    const auto single = sgr(one, {0.001, 0.5});
    CHECK(single.theta == 0.7);
    CHECK(single.coverage == 1.0);
    CHECK(single.bound == 1.0);
    CHECK_THROWS_AS(sgr(ScoredSet{}, {0.001, 0.5}), Error);
    CHECK_THROWS_AS(sgr(one, {0.0, 0.5}), Error);
}

TEST_CASE("search invariants on random instances") {
    std::mt19937_64 rng(99);
    for (int i = 0; i < 100; ++i) {
        const auto in = random_instance(rng, 2 + rng() % 300);
        const double rstar = 0.02 + 0.5 * (rng() % 100) / 100.0;
        const auto r = sgr(in.set, {0.001, rstar});
        CHECK(std::find(in.kappa.begin(), in.kappa.end(), r.theta) != in.kappa.end());
        REQUIRE(r.risk.has_value());
        CHECK(r.bound >= *r.risk);
        std::size_t acc = 0;
        for (std::size_t j = 0; j < in.kappa.size(); ++j) {
            CHECK(r.accepted[j] == (in.kappa[j] >= r.theta));
            acc += r.accepted[j];
        }
        CHECK(r.coverage == static_cast<double>(acc) / static_cast<double>(in.kappa.size()));
    }
}

TEST_CASE("risk and coverage at a threshold") {
    const ScoredSet s{{0.9, 1, 1}, {0.6, 1, -1}};
    auto rc = selective_risk_and_coverage(s, 0.7);
    CHECK(rc.coverage == 0.5);
    CHECK(*rc.risk == 0.0);
    rc = selective_risk_and_coverage(s, 0.0);
    CHECK(rc.coverage == 1.0);
    CHECK(*rc.risk == 0.5);
    rc = selective_risk_and_coverage(s, std::nextafter(0.9, 1.0));
    CHECK(rc.coverage == 0.0);
    CHECK_FALSE(rc.risk.has_value());
}

TEST_CASE("coverage falls as the threshold rises and complements flip risk") {
    std::mt19937_64 rng(5);
    const auto in = random_instance(rng, 400);
    ScoredSet flipped = in.set;
    for (auto& s : flipped) s.predicted = s.loss() ? s.truth : -s.truth;
    std::set<double> thetas(in.kappa.begin(), in.kappa.end());
    double prev_cov = 2.0;
    for (const double t : thetas) {
        const auto a = selective_risk_and_coverage(in.set, t);
        const auto b = selective_risk_and_coverage(flipped, t);
        CHECK(a.coverage <= prev_cov);
        prev_cov = a.coverage;
        CHECK(*b.risk == doctest::Approx(1.0 - *a.risk).epsilon(1e-14));
    }
}

TEST_CASE("threshold choice maximizes accepted mcc and prefers coverage on ties") {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 30; ++trial) {
        const auto in = random_instance(rng, 50 + rng() % 400);
        const auto grid = default_rstar_grid();
        const auto choice = select_threshold_by_mcc(in.set, grid, std::vector<int>{-1, 1}, 0.001);
        double best = -2, best_cov = -1, best_theta = 0;
        bool any = false;
        for (const double r : grid) {
            const auto res = sgr(in.set, {0.001, r});
            metrics::ConfusionMatrix cm({-1, 1});
            std::set<int> truths;
            for (std::size_t j = 0; j < in.set.size(); ++j) {
                if (in.set[j].kappa >= res.theta) {
                    cm.add(in.set[j].truth, in.set[j].predicted);
                    truths.insert(in.set[j].truth);
                }
            }
            if (truths.size() < 2) continue;
            const double v = metrics::mcc(cm);
            if (!any || v > best || (v == best && res.coverage > best_cov)) {
                best = v;
                best_cov = res.coverage;
                best_theta = res.theta;
                any = true;
            }
        }
        REQUIRE(any);
        CHECK_FALSE(choice.fallback);
        CHECK(choice.theta == best_theta);
        CHECK(choice.mcc == best);
        CHECK(choice.coverage == best_cov);
    }
}

TEST_CASE("threshold choice special cases") {
    const auto s = planted(2000, 4);
    const std::vector<double> one{0.2};
    const auto c = select_threshold_by_mcc(s, one, std::vector<int>{-1, 1}, 0.001);
    CHECK(c.theta == sgr(s, {0.001, 0.2}).theta);
    CHECK(c.rstar == 0.2);

    const auto grid = default_rstar_grid();
    CHECK(grid.size() == 19);
    CHECK(grid.front() == doctest::Approx(0.05));
    CHECK(grid.back() == doctest::Approx(0.95));
    const auto planted_choice = select_threshold_by_mcc(s, grid, std::vector<int>{-1, 1}, 0.001);
    CHECK(planted_choice.coverage < 1.0);

    ScoredSet single_class;
    for (int i = 0; i < 50; ++i) single_class.push_back({0.5 + i / 100.0, 1, 1});
    const auto fb = select_threshold_by_mcc(single_class, grid, std::vector<int>{-1, 1}, 0.001);
    CHECK(fb.fallback);
    CHECK(fb.theta == 0.0);
    CHECK(fb.coverage == 1.0);
}

TEST_CASE("multiplier choice") {
    const std::vector<MultiplierResult> one{{0.9, -0.2}};
    CHECK(select_multiplier(one) == 0.9);
    const std::vector<MultiplierResult> peak{{0.3, 0.0}, {0.6, 0.3}, {0.9, 0.0}, {1.2, 0.0}};
    CHECK(select_multiplier(peak) == 0.6);
    const std::vector<MultiplierResult> flat{{1.2, 0.1}, {0.6, 0.1}, {0.3, 0.1}, {0.9, 0.1}};
    CHECK(select_multiplier(flat) == 0.3);
    CHECK_THROWS_AS(select_multiplier(std::vector<MultiplierResult>{}), Error);
}

TEST_CASE("accuracy-coverage curve") {
    std::mt19937_64 rng(31);
    const auto in = random_instance(rng, 500);
    const auto curve = accuracy_coverage_curve(in.set);
    const std::set<double> distinct(in.kappa.begin(), in.kappa.end());
    REQUIRE(curve.size() == distinct.size());
    std::size_t correct = 0;
    for (const auto& s : in.set) correct += s.loss() == 0;
    CHECK(curve.front().coverage == 1.0);
    CHECK(curve.front().accuracy == static_cast<double>(correct) / 500.0);
    for (std::size_t i = 0; i < curve.size(); ++i) {
        const auto rc = selective_risk_and_coverage(in.set, curve[i].theta);
        CHECK(curve[i].coverage == rc.coverage);
        CHECK(curve[i].accuracy == doctest::Approx(1.0 - *rc.risk).epsilon(1e-14));
        if (i > 0) CHECK(curve[i].coverage < curve[i - 1].coverage);
    }
    std::ostringstream out;
    write_curve_csv(out, curve);
    CHECK(out.str().rfind("coverage,accuracy,theta,rstar,bstar\n", 0) == 0);
}

TEST_CASE("scoring picks the most probable class") {
    Matrix p(3, 3);
    p << 0.2, 0.5, 0.3, 0.6, 0.3, 0.1, 1.0 / 3, 1.0 / 3, 1.0 / 3;
    const std::vector<int> cls{-1, 0, 1};
    const std::vector<int> truth{0, 1, 1};
    const auto s = score(p, cls, truth);
    CHECK(s[0].predicted == 0);
    CHECK(s[0].kappa == 0.5);
    CHECK(s[0].loss() == 0);
    CHECK(s[1].predicted == -1);
    CHECK(s[1].loss() == 1);
    CHECK(s[2].predicted == -1);
    CHECK(s[2].kappa >= 1.0 / 3);
}
