#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "selectrade/market_data.hpp"

using namespace selectrade;
using namespace selectrade::market_data;

namespace {

std::vector<Tick> ticks_at(const std::vector<double>& prices, TimeMs start = 0, TimeMs step = 1000) {
    std::vector<Tick> out;
    for (std::size_t i = 0; i < prices.size(); ++i) out.push_back({start + static_cast<TimeMs>(i) * step, prices[i], 1});
    return out;
}

std::vector<int> bar_signs(const std::vector<Bar>& bars) {
    std::vector<int> s;
    for (std::size_t i = 1; i < bars.size(); ++i) {
        if (bars[i].close != bars[i - 1].close) s.push_back(bars[i].close > bars[i - 1].close ? 1 : -1);
    }
    return s;
}

// Wald-Wolfowitz runs test z statistic.
double runs_z(const std::vector<int>& s) {
    double n1 = 0, n2 = 0, runs = 1;
    for (std::size_t i = 0; i < s.size(); ++i) {
        (s[i] > 0 ? n1 : n2) += 1;
        if (i > 0 && s[i] != s[i - 1]) runs += 1;
    }
    const double n = n1 + n2;
    const double mean = 2 * n1 * n2 / n + 1;
    const double var = 2 * n1 * n2 * (2 * n1 * n2 - n) / (n * n * (n - 1));
    return (runs - mean) / std::sqrt(var);
}

SyntheticConfig small_synth(double strength) {
    SyntheticConfig c;
    c.start_date = "2015-01-01";
    c.end_date = "2015-03-01";
    c.signal_strength = strength;
    return c;
}

}  // namespace

TEST_CASE("tick row maps onto fields") {
    std::istringstream in("timestamp,price,size\n2011-02-14T00:00:01.500Z,1360.25,3\n");
    const auto t = parse_ticks(in);
    REQUIRE(t.size() == 1);
    CHECK(t[0].timestamp == parse_iso8601("2011-02-14T00:00:01.500Z"));
    CHECK(t[0].price == 1360.25);
    CHECK(t[0].size == 3);
}

TEST_CASE("empty tick input gives no ticks") {
    std::istringstream a("");
    CHECK(parse_ticks(a).empty());
    std::istringstream b("timestamp,price,size\n");
    CHECK(parse_ticks(b).empty());
}

TEST_CASE("tick parse errors carry line numbers") {
    std::istringstream zero("timestamp,price,size\n2011-02-14T00:00:01Z,10,0\n");
    CHECK_THROWS_WITH_AS(parse_ticks(zero), doctest::Contains("non-positive size"), Error);
    std::istringstream back("timestamp,price,size\n2011-02-14T00:00:02Z,10,1\n2011-02-14T00:00:01Z,10,1\n");
    CHECK_THROWS_WITH_AS(parse_ticks(back), doctest::Contains("line 3"), Error);
    std::istringstream junk("timestamp,price,size\n2011-02-14T00:00:01Z,abc,1\n");
    CHECK_THROWS_WITH_AS(parse_ticks(junk), doctest::Contains("line 2"), Error);
}

TEST_CASE("aggressive iff the price changed") {
    const auto c = classify_ticks(ticks_at({10, 10, 11}));
    CHECK_FALSE(c[0].aggressive);
    CHECK_FALSE(c[1].aggressive);
    CHECK(c[2].aggressive);
}

TEST_CASE("tick rule with carry and default") {
    const auto c = classify_ticks(ticks_at({10, 11, 11, 10}));
    CHECK(c[0].direction == Direction::buy);
    CHECK(c[1].direction == Direction::buy);
    CHECK(c[2].direction == Direction::buy);
    CHECK(c[3].direction == Direction::sell);

    const auto one = classify_ticks(ticks_at({5}));
    REQUIRE(one.size() == 1);
    CHECK_FALSE(one[0].aggressive);
    CHECK(one[0].direction == Direction::buy);
}

TEST_CASE("single interval aggregation") {
    const auto bars = build_bars(classify_ticks(ticks_at({10, 12, 9})));
    REQUIRE(bars.size() == 1);
    CHECK(bars[0].open == 10);
    CHECK(bars[0].high == 12);
    CHECK(bars[0].low == 9);
    CHECK(bars[0].close == 9);
    CHECK(bars[0].volume == 3);
    CHECK(bars[0].open_time == 0);
}

TEST_CASE("ticks in two intervals make two bars and empty intervals vanish") {
    std::vector<Tick> t{{10 * kMinuteMs, 10, 1}, {29 * kMinuteMs, 11, 2}, {95 * kMinuteMs, 12, 4}};
    const auto bars = build_bars(classify_ticks(t));
    REQUIRE(bars.size() == 2);
    CHECK(bars[0].open_time == 0);
    CHECK(bars[0].volume == 3);
    CHECK(bars[1].open_time == 90 * kMinuteMs);
    CHECK(bars[1].volume == 4);
    CHECK(bars[1].open == 12);
}

TEST_CASE("all-buy ticks leave no sell volume") {
    const auto bars = build_bars(classify_ticks(ticks_at({10, 11, 12, 13})));
    REQUIRE(bars.size() == 1);
    CHECK(bars[0].sell_volume == 0);
    CHECK(bars[0].buy_volume == bars[0].volume);
}

TEST_CASE("bar invariants hold on random tick streams") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<Tick> ticks;
        TimeMs t = static_cast<TimeMs>(rng() % 1000000);
        std::int64_t price = 1000;
        const int n = 1 + static_cast<int>(rng() % 400);
        std::int64_t total = 0;
        for (int i = 0; i < n; ++i) {
            t += static_cast<TimeMs>(rng() % (20 * kMinuteMs));
            price = std::max<std::int64_t>(1, price + static_cast<std::int64_t>(rng() % 5) - 2);
            const auto size = 1 + static_cast<std::int64_t>(rng() % 30);
            total += size;
            ticks.push_back({t, static_cast<double>(price) * 0.25, size});
        }
        const auto classified = classify_ticks(ticks);
        for (std::size_t i = 1; i < classified.size(); ++i) {
            CHECK(classified[i].aggressive == (ticks[i].price != ticks[i - 1].price));
        }
        const auto bars = build_bars(classified);
        std::int64_t sum = 0;
        std::size_t k = 0;
        for (const auto& b : bars) {
            CHECK_NOTHROW(validate_bar(b));
            CHECK(b.open_time % (30 * kMinuteMs) == 0);
            double hi = -1e300, lo = 1e300;
            for (; k < ticks.size() && ticks[k].timestamp < b.open_time + 30 * kMinuteMs; ++k) {
                hi = std::max(hi, ticks[k].price);
                lo = std::min(lo, ticks[k].price);
            }
            CHECK(b.high == hi);
            CHECK(b.low == lo);
            sum += b.volume;
        }
        CHECK(sum == total);
    }
}

TEST_CASE("bar csv round trip") {
    const auto bars = build_bars(classify_ticks(generate_synthetic_ticks(small_synth(0.3), 5)));
    std::ostringstream out;
    write_bars(out, bars);
    std::istringstream in(out.str());
    CHECK(parse_bars(in) == bars);
}

TEST_CASE("synthetic generator is deterministic and on the tick grid") {
    const auto cfg = small_synth(0.5);
    const auto a = generate_synthetic_ticks(cfg, 99);
    const auto b = generate_synthetic_ticks(cfg, 99);
    REQUIRE(a.size() == b.size());
    bool same = true;
    for (std::size_t i = 0; i < a.size(); ++i) same &= a[i].timestamp == b[i].timestamp && a[i].price == b[i].price && a[i].size == b[i].size;
    CHECK(same);
    const auto c = generate_synthetic_ticks(cfg, 100);
    CHECK((c.size() != a.size() || c[5].price != a[5].price || c[7].size != a[7].size));
    for (const auto& t : a) {
        const double k = t.price / cfg.tick_size;
        CHECK(std::abs(k - std::round(k)) < 1e-6);
    }
    std::ostringstream out;
    write_ticks(out, a);
    std::istringstream in(out.str());
    const auto back = parse_ticks(in);
    REQUIRE(back.size() == a.size());
    CHECK(back[123].price == a[123].price);
}

TEST_CASE("synthetic generator rejects an empty date range") {
    auto cfg = small_synth(0.0);
    cfg.end_date = cfg.start_date;
    CHECK_THROWS_AS(generate_synthetic_ticks(cfg, 1), Error);
}

TEST_CASE("no signal means independent bar directions") {
    const auto bars = build_bars(classify_ticks(generate_synthetic_ticks(small_synth(0.0), 2024)));
    const auto s = bar_signs(bars);
    REQUIRE(s.size() > 2000);
    CHECK(std::abs(runs_z(s)) < 1.96);
}

TEST_CASE("full signal means directions follow the latent chain") {
    auto cfg = small_synth(1.0);
    const auto bars = build_bars(classify_ticks(generate_synthetic_ticks(cfg, 2024)));
    const auto s = bar_signs(bars);
    std::size_t changes = 0;
    for (std::size_t i = 1; i < s.size(); ++i) changes += s[i] != s[i - 1];
    // Direction changes only when the chain flips (rate 0.02 away from the bounds).
    CHECK(static_cast<double>(changes) / static_cast<double>(s.size()) < 0.06);
    CHECK(runs_z(s) < -10.0);
}
