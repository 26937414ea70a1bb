#include "selectrade/market_data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

namespace selectrade::market_data {

namespace {

std::string line_tag(std::size_t line_no) { return "line " + std::to_string(line_no) + ": "; }

double parse_double_field(std::string_view field, std::size_t line_no, const char* name) {
    double v = 0.0;
    const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
    if (res.ec != std::errc{} || res.ptr != field.data() + field.size()) {
        throw Error("parse", line_tag(line_no) + "cannot parse " + name + " '" + std::string(field) + "'");
    }
    return v;
}

std::int64_t parse_int_field(std::string_view field, std::size_t line_no, const char* name) {
    std::int64_t v = 0;
    const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
    if (res.ec != std::errc{} || res.ptr != field.data() + field.size()) {
        throw Error("parse", line_tag(line_no) + "cannot parse " + name + " '" + std::string(field) + "'");
    }
    return v;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) {
        s.remove_suffix(1);
    }
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
        s.remove_prefix(1);
    }
    return s;
}

TimeMs floor_div(TimeMs a, TimeMs b) {
    TimeMs q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) {
        --q;
    }
    return q;
}

}  // namespace

void Instrument::validate() const {
    if (!(tick_size > 0.0)) {
        throw Error("config", "instrument '" + symbol + "': tick_size must be positive");
    }
    if (!(point_value > 0.0)) {
        throw Error("config", "instrument '" + symbol + "': point_value must be positive");
    }
}

std::vector<Tick> parse_ticks(std::istream& in) {
    std::vector<Tick> ticks;
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const auto line = trim(raw);
        if (line.empty()) {
            continue;
        }
        if (ticks.empty() && line.rfind("timestamp", 0) == 0) {
            continue;
        }
        const auto fields = split_csv(line);
        if (fields.size() != 3) {
            throw Error("parse", line_tag(line_no) + "expected 3 fields, got " + std::to_string(fields.size()));
        }
        Tick t;
        try {
            t.timestamp = parse_iso8601(trim(fields[0]));
        } catch (const Error& e) {
            throw Error("parse", line_tag(line_no) + e.what());
        }
        t.price = parse_double_field(trim(fields[1]), line_no, "price");
        t.size = parse_int_field(trim(fields[2]), line_no, "size");
        if (!(t.price > 0.0) || !std::isfinite(t.price)) {
            throw Error("parse", line_tag(line_no) + "non-positive price");
        }
        if (t.size <= 0) {
            throw Error("parse", line_tag(line_no) + "non-positive size");
        }
        if (!ticks.empty() && t.timestamp < ticks.back().timestamp) {
            throw Error("parse", line_tag(line_no) + "non-monotonic timestamp");
        }
        ticks.push_back(t);
    }
    return ticks;
}

std::vector<Tick> read_ticks_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error("io", "cannot open tick file '" + path + "'");
    }
    try {
        return parse_ticks(in);
    } catch (const Error& e) {
        throw Error(e.code(), path + ": " + e.what());
    }
}

void write_ticks(std::ostream& out, std::span<const Tick> ticks) {
    out << "timestamp,price,size\n";
    for (const auto& t : ticks) {
        out << format_iso8601(t.timestamp) << ',' << format_double(t.price) << ',' << t.size << '\n';
    }
}

std::vector<ClassifiedTick> classify_ticks(std::span<const Tick> ticks) {
    std::vector<ClassifiedTick> out;
    out.reserve(ticks.size());
    Direction carried = Direction::buy;
    for (std::size_t i = 0; i < ticks.size(); ++i) {
        ClassifiedTick ct{ticks[i], carried, false};
        if (i > 0) {
            const double prev = ticks[i - 1].price;
            ct.aggressive = ticks[i].price != prev;
            if (ticks[i].price > prev) {
                ct.direction = Direction::buy;
            } else if (ticks[i].price < prev) {
                ct.direction = Direction::sell;
            }
        }
        carried = ct.direction;
        out.push_back(ct);
    }
    return out;
}

std::vector<Bar> build_bars(std::span<const ClassifiedTick> ticks, TimeMs interval) {
    if (interval <= 0) {
        throw Error("invalid_argument", "bar interval must be positive");
    }
    std::vector<Bar> bars;
    TimeMs current = 0;
    for (const auto& ct : ticks) {
        const auto& t = ct.tick;
        const TimeMs start = floor_div(t.timestamp, interval) * interval;
        if (bars.empty() || start != current) {
            current = start;
            Bar b;
            b.open_time = start;
            b.open = b.high = b.low = t.price;
            bars.push_back(b);
        }
        Bar& b = bars.back();
        b.high = std::max(b.high, t.price);
        b.low = std::min(b.low, t.price);
        b.close = t.price;
        b.volume += t.size;
        b.trade_count += 1;
        const bool buy = ct.direction == Direction::buy;
        (buy ? b.buy_count : b.sell_count) += 1;
        (buy ? b.buy_volume : b.sell_volume) += t.size;
        if (!ct.aggressive) {
            b.nonaggr_volume += t.size;
            b.nonaggr_count += 1;
            (buy ? b.nonaggr_buy_count : b.nonaggr_sell_count) += 1;
            (buy ? b.nonaggr_buy_volume : b.nonaggr_sell_volume) += t.size;
        }
    }
    return bars;
}

void validate_bar(const Bar& b) {
    auto fail = [&](const std::string& what) {
        throw Error("invariant", "bar at " + format_iso8601(b.open_time) + ": " + what);
    };
    if (!(b.low > 0.0)) fail("non-positive price");
    if (b.low > std::min(b.open, b.close) || std::max(b.open, b.close) > b.high) fail("OHLC ordering violated");
    if (b.volume < 0 || b.trade_count < 0) fail("negative totals");
    if (b.buy_count + b.sell_count != b.trade_count) fail("buy_count + sell_count != trade_count");
    if (b.buy_volume + b.sell_volume != b.volume) fail("buy_volume + sell_volume != volume");
    if (b.nonaggr_volume > b.volume || b.nonaggr_count > b.trade_count) fail("non-aggressive totals exceed totals");
    if (b.nonaggr_buy_count > b.buy_count || b.nonaggr_sell_count > b.sell_count) fail("non-aggressive counts exceed side counts");
    if (b.nonaggr_buy_volume > b.buy_volume || b.nonaggr_sell_volume > b.sell_volume) fail("non-aggressive volume exceeds side volume");
}

const char* const kBarCsvHeader =
    "open_time,open,high,low,close,volume,trade_count,buy_count,sell_count,buy_volume,sell_volume,"
    "nonaggr_volume,nonaggr_count,nonaggr_buy_count,nonaggr_sell_count,nonaggr_buy_volume,nonaggr_sell_volume";

void write_bars(std::ostream& out, std::span<const Bar> bars) {
    out << kBarCsvHeader << '\n';
    for (const auto& b : bars) {
        out << format_iso8601(b.open_time) << ',' << format_double(b.open) << ',' << format_double(b.high) << ','
            << format_double(b.low) << ',' << format_double(b.close) << ',' << b.volume << ',' << b.trade_count << ','
            << b.buy_count << ',' << b.sell_count << ',' << b.buy_volume << ',' << b.sell_volume << ','
            << b.nonaggr_volume << ',' << b.nonaggr_count << ',' << b.nonaggr_buy_count << ','
            << b.nonaggr_sell_count << ',' << b.nonaggr_buy_volume << ',' << b.nonaggr_sell_volume << '\n';
    }
}

std::vector<Bar> parse_bars(std::istream& in) {
    std::vector<Bar> bars;
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const auto line = trim(raw);
        if (line.empty()) {
            continue;
        }
        if (bars.empty() && line.rfind("open_time", 0) == 0) {
            continue;
        }
        const auto f = split_csv(line);
        if (f.size() != 17) {
            throw Error("parse", line_tag(line_no) + "expected 17 fields, got " + std::to_string(f.size()));
        }
        Bar b;
        try {
            b.open_time = parse_iso8601(f[0]);
        } catch (const Error& e) {
            throw Error("parse", line_tag(line_no) + e.what());
        }
        b.open = parse_double_field(f[1], line_no, "open");
        b.high = parse_double_field(f[2], line_no, "high");
        b.low = parse_double_field(f[3], line_no, "low");
        b.close = parse_double_field(f[4], line_no, "close");
        std::int64_t* ints[] = {&b.volume,         &b.trade_count,       &b.buy_count,          &b.sell_count,
                                &b.buy_volume,     &b.sell_volume,       &b.nonaggr_volume,     &b.nonaggr_count,
                                &b.nonaggr_buy_count, &b.nonaggr_sell_count, &b.nonaggr_buy_volume, &b.nonaggr_sell_volume};
        for (std::size_t i = 0; i < 12; ++i) {
            *ints[i] = parse_int_field(f[5 + i], line_no, "count");
        }
        if (!bars.empty() && b.open_time <= bars.back().open_time) {
            throw Error("parse", line_tag(line_no) + "non-monotonic bar time");
        }
        try {
            validate_bar(b);
        } catch (const Error& e) {
            throw Error("parse", line_tag(line_no) + e.what());
        }
        bars.push_back(b);
    }
    return bars;
}

std::vector<Bar> read_bars_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error("io", "cannot open bar file '" + path + "'");
    }
    try {
        return parse_bars(in);
    } catch (const Error& e) {
        throw Error(e.code(), path + ": " + e.what());
    }
}

std::vector<Tick> generate_synthetic_ticks(const SyntheticConfig& cfg, std::uint64_t seed) {
    const TimeMs start = parse_iso8601(cfg.start_date);
    const TimeMs end = parse_iso8601(cfg.end_date);
    if (end <= start) {
        throw Error("invalid_argument", "synthetic date range is empty: " + cfg.start_date + " .. " + cfg.end_date);
    }
    if (!(cfg.base_price > 0.0) || !(cfg.tick_size > 0.0) || !(cfg.volatility > 0.0)) {
        throw Error("invalid_argument", "synthetic base_price, tick_size and volatility must be positive");
    }
    if (cfg.signal_strength < 0.0 || cfg.signal_strength > 1.0) {
        throw Error("invalid_argument", "signal_strength must lie in [0, 1]");
    }
    if (!(cfg.volume_exponent > 0.0) || cfg.mean_trades_per_bar < 2.0 || cfg.max_trade_size < 1) {
        throw Error("invalid_argument", "invalid synthetic volume parameters");
    }
    const TimeMs interval = cfg.bar_interval;
    const TimeMs first_bar = floor_div(start + interval - 1, interval) * interval;
    const auto n_bars = static_cast<std::size_t>(std::max<TimeMs>(0, (end - first_bar) / interval));

    // Prices are generated in integer ticks; when 1/tick_size is integral the
    // division keeps printed prices on clean decimals.
    const double inv_tick = 1.0 / cfg.tick_size;
    const bool integral_inverse = std::abs(inv_tick - std::round(inv_tick)) < 1e-9;
    auto to_price = [&](std::int64_t ticks) {
        return integral_inverse ? static_cast<double>(ticks) / std::round(inv_tick)
                                : static_cast<double>(ticks) * cfg.tick_size;
    };

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::poisson_distribution<int> extra_trades(cfg.mean_trades_per_bar - 2.0);
    std::uniform_int_distribution<TimeMs> offset(0, interval - 1);

    std::vector<Tick> ticks;
    ticks.reserve(n_bars * static_cast<std::size_t>(cfg.mean_trades_per_bar + 1));
    std::int64_t close_ticks = std::max<std::int64_t>(1, std::llround(cfg.base_price * inv_tick));
    int latent = unif(rng) < 0.5 ? 1 : -1;
    std::vector<TimeMs> stamps;

    const double base_ticks = static_cast<double>(close_ticks);
    for (std::size_t b = 0; b < n_bars; ++b) {
        // Momentum runs would otherwise compound without bound; a latent
        // state pushing the price further from its base switches faster.
        const double level = static_cast<double>(close_ticks) / base_ticks;
        double p_switch = cfg.latent_switch_prob;
        if ((latent > 0 && level > 1.25) || (latent < 0 && level < 0.8)) {
            p_switch = std::max(p_switch, 0.25);
        }
        if (b > 0 && unif(rng) < p_switch) {
            latent = -latent;
        }
        const bool follows = unif(rng) < cfg.signal_strength;
        int dir = follows ? latent : (unif(rng) < 0.5 ? 1 : -1);
        const double scale = cfg.volatility * base_ticks * (follows ? 1.0 + cfg.signal_move_boost : 1.0);
        const auto move = std::max<std::int64_t>(1, std::llround(std::abs(normal(rng)) * scale));
        if (close_ticks - move < 1) {
            dir = 1;
        }
        const std::int64_t open_ticks = close_ticks;
        const std::int64_t target = open_ticks + dir * move;

        const int n = 2 + extra_trades(rng);
        stamps.resize(static_cast<std::size_t>(n));
        for (auto& s : stamps) {
            s = offset(rng);
        }
        std::sort(stamps.begin(), stamps.end());
        const TimeMs bar_start = first_bar + static_cast<TimeMs>(b) * interval;
        const double wiggle = std::max(1.0, 0.35 * static_cast<double>(move));
        for (int j = 0; j < n; ++j) {
            std::int64_t p;
            if (j == 0) {
                p = open_ticks;
            } else if (j == n - 1) {
                p = target;
            } else {
                const double frac = static_cast<double>(j) / static_cast<double>(n - 1);
                p = std::llround(static_cast<double>(open_ticks) + frac * static_cast<double>(target - open_ticks) +
                                 wiggle * normal(rng));
                p = std::max<std::int64_t>(1, p);
            }
            const double u = std::max(unif(rng), 1e-12);
            const auto size = std::min<std::int64_t>(
                cfg.max_trade_size, static_cast<std::int64_t>(std::floor(std::pow(u, -1.0 / cfg.volume_exponent))));
            ticks.push_back(Tick{bar_start + stamps[static_cast<std::size_t>(j)], to_price(p), std::max<std::int64_t>(1, size)});
        }
        close_ticks = target;
    }
    return ticks;
}

}  // namespace selectrade::market_data
