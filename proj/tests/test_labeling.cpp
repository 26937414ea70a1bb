#include <doctest.h>

#include <cmath>
#include <random>

#include "selectrade/labeling.hpp"

using namespace selectrade;
using namespace selectrade::labeling;

namespace {

std::vector<market_data::Bar> closes_to_bars(const std::vector<double>& closes) {
    std::vector<market_data::Bar> bars;
    for (std::size_t i = 0; i < closes.size(); ++i) {
        market_data::Bar b;
        b.open_time = static_cast<TimeMs>(i) * 30 * kMinuteMs;
        b.open = b.high = b.low = b.close = closes[i];
        bars.push_back(b);
    }
    return bars;
}

std::vector<double> random_walk(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, 0.002);
    std::vector<double> c{1000.0};
    for (std::size_t i = 1; i < n; ++i) {
        // Some exact repeats so zero returns occur.
        c.push_back(rng() % 7 == 0 ? c.back() : c.back() * (1.0 + nd(rng)));
    }
    return c;
}

LabelConfig ternary(double m, std::size_t window) {
    LabelConfig c;
    c.mode = LabelMode::ternary;
    c.multiplier = m;
    c.vol_window = window;
    return c;
}

}  // namespace

TEST_CASE("binary label rule") {
    CHECK(binary_label(-0.001) == -1);
    CHECK(binary_label(0.0) == -1);
    CHECK(binary_label(0.002) == 1);
}

TEST_CASE("ternary label rule") {
    CHECK(ternary_label(0.001, 0.003, 1.0) == 0);
    CHECK(ternary_label(-0.004, 0.003, 1.0) == -1);
    CHECK(ternary_label(0.004, 0.003, 1.0) == 1);
    CHECK(ternary_label(0.003, 0.003, 1.0) == 0);
    CHECK(ternary_label(-0.003, 0.003, 1.0) == 0);
}

TEST_CASE("rolling volatility") {
    const std::vector<double> constant(10, 0.01);
    const auto c = rolling_volatility(constant, 4);
    CHECK(std::isnan(c[2]));
    CHECK(c[3] == 0.0);
    std::vector<double> alt;
    for (int i = 0; i < 12; ++i) alt.push_back(i % 2 ? -0.02 : 0.02);
    const auto a = rolling_volatility(alt, 6);
    for (std::size_t t = 5; t < alt.size(); ++t) CHECK(a[t] == doctest::Approx(0.02).epsilon(1e-12));

    std::mt19937_64 rng(1);
    std::normal_distribution<double> nd(0.0, 1.0);
    std::vector<double> r(200);
    for (auto& v : r) v = nd(rng);
    const auto v = rolling_volatility(r, 17);
    for (std::size_t t = 16; t < r.size(); ++t) {
        double m = 0, s = 0;
        for (std::size_t j = t - 16; j <= t; ++j) m += r[j] / 17;
        for (std::size_t j = t - 16; j <= t; ++j) s += (r[j] - m) * (r[j] - m) / 17;
        CHECK(v[t] >= 0.0);
        CHECK(v[t] == doctest::Approx(std::sqrt(s)).epsilon(1e-10));
    }
    CHECK_THROWS_AS(rolling_volatility(r, 1), Error);
}

TEST_CASE("class weights") {
    const std::vector<int> even{-1, 1, -1, 1};
    const auto w = class_weights(even);
    CHECK(w.at(-1) == 1.0);
    CHECK(w.at(1) == 1.0);
    std::vector<int> skew(10, -1);
    skew.insert(skew.end(), 30, 1);
    const auto s = class_weights(skew);
    CHECK(s.at(-1) == doctest::Approx(40.0 / (2 * 10)));
    CHECK(s.at(1) == doctest::Approx(40.0 / (2 * 30)));
    CHECK(s.at(1) == doctest::Approx(0.6667).epsilon(1e-4));
    const std::vector<int> one{1, 1, 1};
    CHECK_THROWS_AS(class_weights(one), Error);
    CHECK_THROWS_AS(class_weights(std::vector<int>{}), Error);
}

TEST_CASE("labels target the next bar") {
    const auto bars = closes_to_bars({10, 11, 11, 9, 10});
    LabelConfig bin;
    const auto l = make_labels(bars, bin);
    CHECK(l.label == std::vector<int>{1, -1, -1, 1, 0});
    CHECK(l.valid == std::vector<bool>{true, true, true, true, false});
    CHECK(l.valid_from == 0);
    CHECK(classes_for(LabelMode::binary) == std::vector<int>{-1, 1});
    CHECK(classes_for(LabelMode::ternary) == std::vector<int>{-1, 0, 1});
}

TEST_CASE("ternary labels wait for the volatility window") {
    const auto bars = closes_to_bars(random_walk(100, 3));
    const auto l = make_labels(bars, ternary(0.5, 20));
    CHECK(l.valid_from == 20);
    CHECK_FALSE(l.valid[19]);
    CHECK(l.valid[20]);
    CHECK_FALSE(l.valid.back());
}

TEST_CASE("label config validation") {
    LabelConfig c;
    c.multiplier = 0.3;
    CHECK_THROWS_AS(c.validate(), Error);
    CHECK_THROWS_AS(ternary(0.0, 10).validate(), Error);
    CHECK_THROWS_AS(ternary(0.3, 1).validate(), Error);
    CHECK_NOTHROW(ternary(0.3, 10).validate());
}

TEST_CASE("raising the multiplier only moves labels to zero") {
    const auto bars = closes_to_bars(random_walk(800, 9));
    std::vector<int> prev;
    std::size_t zeros_prev = 0;
    for (const double m : {0.1, 0.3, 0.6, 0.9, 1.2, 2.0}) {
        const auto l = make_labels(bars, ternary(m, 50));
        std::size_t zeros = 0;
        for (std::size_t t = 0; t < bars.size(); ++t) zeros += l.valid[t] && l.label[t] == 0;
        if (!prev.empty()) {
            CHECK(zeros >= zeros_prev);
            for (std::size_t t = 0; t < bars.size(); ++t) {
                if (l.valid[t] && l.label[t] != 0) CHECK(l.label[t] == prev[t]);
            }
        }
        prev = l.label;
        zeros_prev = zeros;
    }
}

TEST_CASE("a vanishing multiplier reproduces binary labels except at zero returns") {
    const auto bars = closes_to_bars(random_walk(500, 12));
    const auto t3 = make_labels(bars, ternary(1e-300, 30));
    const auto b = make_labels(bars, LabelConfig{});
    std::size_t zero_returns = 0;
    for (std::size_t t = 0; t < bars.size(); ++t) {
        if (!t3.valid[t]) continue;
        if (bars[t + 1].close == bars[t].close) {
            CHECK(t3.label[t] == 0);
            CHECK(b.label[t] == -1);
            ++zero_returns;
        } else {
            CHECK(t3.label[t] == b.label[t]);
        }
    }
    CHECK(zero_returns > 0);
}

TEST_CASE("labels only see the next close") {
    const auto closes = random_walk(300, 21);
    const auto bars = closes_to_bars(closes);
    const auto full = make_labels(bars, ternary(0.6, 40));
    std::mt19937_64 rng(2);
    for (int i = 0; i < 20; ++i) {
        const std::size_t t = 40 + rng() % 250;
        const auto part = make_labels(std::span(bars).first(t + 2), ternary(0.6, 40));
        CHECK(part.valid[t] == full.valid[t]);
        CHECK(part.label[t] == full.label[t]);
    }
}
