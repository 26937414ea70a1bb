#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "selectrade/common.hpp"

namespace selectrade::market_data {

struct Tick {
    TimeMs timestamp = 0;
    double price = 0.0;
    std::int64_t size = 0;

    bool operator==(const Tick&) const = default;
};

enum class Direction : std::uint8_t { buy, sell };

struct ClassifiedTick {
    Tick tick;
    Direction direction = Direction::buy;
    bool aggressive = false;
};

/// One time bar. Every count/volume field is split by initiator side and by
/// aggressiveness so the order-flow features can be rebuilt from bars alone.
struct Bar {
    TimeMs open_time = 0;
    double open = 0.0;
    double high = 0.0;
    double low = 0.0;
    double close = 0.0;
    std::int64_t volume = 0;
    std::int64_t trade_count = 0;
    std::int64_t buy_count = 0;
    std::int64_t sell_count = 0;
    std::int64_t buy_volume = 0;
    std::int64_t sell_volume = 0;
    std::int64_t nonaggr_volume = 0;
    std::int64_t nonaggr_count = 0;
    std::int64_t nonaggr_buy_count = 0;
    std::int64_t nonaggr_sell_count = 0;
    std::int64_t nonaggr_buy_volume = 0;
    std::int64_t nonaggr_sell_volume = 0;

    bool operator==(const Bar&) const = default;
};

struct Instrument {
    std::string symbol;
    double tick_size = 0.0;
    double point_value = 0.0;  ///< dollars per full price point per contract

    /// Dollar value of a one-tick move for one contract.
    double tick_value() const { return tick_size * point_value; }
    void validate() const;
};

inline constexpr TimeMs kDefaultBarInterval = 30 * kMinuteMs;

/// Reads the `timestamp,price,size` CSV format. The header line is optional;
/// an empty stream yields no ticks. Errors carry the 1-based line number.
std::vector<Tick> parse_ticks(std::istream& in);
std::vector<Tick> read_ticks_file(const std::string& path);
void write_ticks(std::ostream& out, std::span<const Tick> ticks);

/// Price-change aggressiveness plus tick-rule direction with carry-forward.
std::vector<ClassifiedTick> classify_ticks(std::span<const Tick> ticks);

/// Calendar-aligned bars; intervals without ticks are omitted.
std::vector<Bar> build_bars(std::span<const ClassifiedTick> ticks, TimeMs interval = kDefaultBarInterval);

/// Checks the Bar invariants; throws Error("invariant") naming the bar.
void validate_bar(const Bar& bar);

extern const char* const kBarCsvHeader;
void write_bars(std::ostream& out, std::span<const Bar> bars);
std::vector<Bar> parse_bars(std::istream& in);
std::vector<Bar> read_bars_file(const std::string& path);

/// Parameters of the planted-signal tick generator.
///
/// Each bar draws a direction: with probability `signal_strength` it follows a
/// latent momentum state (a two-state Markov chain that flips with
/// probability `latent_switch_prob` per bar); otherwise it is a fair coin.
/// Bars that follow the latent state move `signal_move_boost` times further
/// on average, so move size carries information about which kind of bar it
/// was. Per-tick sizes are discrete Pareto with tail exponent
/// `volume_exponent`, which gives heavy-tailed bar volumes.
struct SyntheticConfig {
    std::string start_date = "2015-01-01";  ///< inclusive, UTC midnight
    std::string end_date = "2016-01-01";    ///< exclusive
    double base_price = 1000.0;
    double tick_size = 0.1;
    double volatility = 0.0015;  ///< per-bar relative move scale
    double signal_strength = 0.0;
    double latent_switch_prob = 0.02;
    double signal_move_boost = 1.0;
    double volume_exponent = 1.5;
    double mean_trades_per_bar = 12.0;
    std::int64_t max_trade_size = 500;
    TimeMs bar_interval = kDefaultBarInterval;
};

std::vector<Tick> generate_synthetic_ticks(const SyntheticConfig& config, std::uint64_t seed);

}  // namespace selectrade::market_data
