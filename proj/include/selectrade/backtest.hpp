#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "selectrade/common.hpp"
#include "selectrade/market_data.hpp"

namespace selectrade::backtest {

enum class StrategyMode { binary_nonselective, binary_selective, ternary_nonselective, ternary_selective };

std::string to_string(StrategyMode mode);
StrategyMode parse_mode(std::string_view text);
bool is_selective(StrategyMode mode);
bool is_ternary(StrategyMode mode);

int desired_sign(int prediction, bool accepted, StrategyMode mode);

inline constexpr std::size_t kSizingWindow = 5 * 48;
inline constexpr double kDefaultRiskBudget = 1000.0;
inline constexpr double kPeriodsPerYear = 48.0 * 252.0;

/// Slippage multiples 0, 0.1, ..., 0.5 of the tick size.
std::vector<double> default_slippage_grid();

/// Dollar moving average of |close_t - close_{t-1}| over the `window` moves
/// ending at t; NaN until t >= window.
std::vector<double> dollar_move_ma(std::span<const double> closes, double point_value,
                                   std::size_t window = kSizingWindow);

/// max(1, floor(budget / ma_dollar)).
std::int64_t position_size(double ma_dollar, double risk_budget);

/// Signed contract counts. Size is fixed when the sign changes and held
/// while it stays the same; bars whose sizing window is not warm are flat.
std::vector<std::int64_t> build_positions(std::span<const int> signs, std::span<const double> ma_dollar,
                                          double risk_budget);

struct Trade {
    std::size_t bar = 0;
    TimeMs time = 0;
    std::int64_t contracts = 0;  ///< absolute contracts traded
    double slippage = 0.0;
};

/// Money is tracked in integer micro-dollars so conservation and the
/// slippage model are exact; the dollar vectors are derived from it.
struct BacktestReport {
    std::vector<TimeMs> times;
    std::vector<std::int64_t> positions;  ///< held after the decision at each bar
    std::vector<std::int64_t> pnl_micro;
    std::vector<double> pnl;
    std::vector<double> equity;
    std::vector<Trade> trades;
    std::int64_t contracts_traded = 0;
    std::int64_t slippage_micro = 0;
    double total_slippage = 0.0;
    std::int64_t total_pnl_micro = 0;
    double total_pnl = 0.0;
    std::optional<double> sharpe;
};

/// Integer price in ticks; throws when the price is off the tick grid.
std::int64_t to_ticks(double price, double tick_size);

/// Micro-dollar value of one tick move on one contract.
std::int64_t tick_value_micro(const market_data::Instrument& instrument);

/// Micro-dollar slippage per contract at multiple `s` of the tick size.
std::int64_t slippage_micro_per_contract(const market_data::Instrument& instrument, double s);

/// The position decided at bar t is entered at bar t's close and earns
/// close_{t+1} - close_t on bar t+1. The last bar closes everything out.
BacktestReport simulate(std::span<const std::int64_t> positions, std::span<const double> closes,
                        std::span<const TimeMs> times, const market_data::Instrument& instrument,
                        double slippage_mult);

/// mean / population std * sqrt(periods); empty when std is zero.
std::optional<double> sharpe(std::span<const double> pnl, double periods_per_year = kPeriodsPerYear);

/// Outer join on time; bars missing from a report contribute nothing.
BacktestReport aggregate(std::span<const BacktestReport> reports);

void write_equity_csv(std::ostream& out, const BacktestReport& report);

struct SharpeRow {
    std::string model;
    std::string feature_set;
    std::string mode;
    double slippage = 0.0;
    std::optional<double> sharpe;
    double total_pnl = 0.0;
    std::int64_t contracts_traded = 0;
};

void write_sharpe_csv(std::ostream& out, std::span<const SharpeRow> rows);

}  // namespace selectrade::backtest
