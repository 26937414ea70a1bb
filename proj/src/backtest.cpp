#include "selectrade/backtest.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>

namespace selectrade::backtest {

std::string to_string(StrategyMode mode) {
    switch (mode) {
        case StrategyMode::binary_nonselective: return "binary_nonselective";
        case StrategyMode::binary_selective: return "binary_selective";
        case StrategyMode::ternary_nonselective: return "ternary_nonselective";
        case StrategyMode::ternary_selective: return "ternary_selective";
    }
    return "unknown";
}

StrategyMode parse_mode(std::string_view text) {
    for (auto m : {StrategyMode::binary_nonselective, StrategyMode::binary_selective,
                   StrategyMode::ternary_nonselective, StrategyMode::ternary_selective}) {
        if (text == to_string(m)) return m;
    }
    throw Error("invalid_config", "unknown strategy mode '" + std::string(text) + "'");
}

bool is_selective(StrategyMode mode) {
    return mode == StrategyMode::binary_selective || mode == StrategyMode::ternary_selective;
}

bool is_ternary(StrategyMode mode) {
    return mode == StrategyMode::ternary_nonselective || mode == StrategyMode::ternary_selective;
}

int desired_sign(int prediction, bool accepted, StrategyMode mode) {
    if (is_selective(mode) && !accepted) return 0;
    return prediction > 0 ? 1 : (prediction < 0 ? -1 : 0);
}

std::vector<double> default_slippage_grid() {
    std::vector<double> g;
    for (int i = 0; i <= 5; ++i) g.push_back(i / 10.0);
    return g;
}

std::vector<double> dollar_move_ma(std::span<const double> closes, double point_value, std::size_t window) {
    if (window == 0) throw Error("invalid_argument", "sizing window must be positive");
    std::vector<double> out(closes.size(), kNaN);
    for (std::size_t t = window; t < closes.size(); ++t) {
        double s = 0.0;
        for (std::size_t j = t + 1 - window; j <= t; ++j) s += std::abs(closes[j] - closes[j - 1]);
        out[t] = s / static_cast<double>(window) * point_value;
    }
    return out;
}

std::int64_t position_size(double ma_dollar, double risk_budget) {
    if (!(risk_budget > 0.0)) throw Error("invalid_argument", "risk budget must be positive");
    if (!(ma_dollar > 0.0)) return 1;
    const double raw = std::floor(risk_budget / ma_dollar);
    return std::max<std::int64_t>(1, static_cast<std::int64_t>(std::min(raw, 1e12)));
}

std::vector<std::int64_t> build_positions(std::span<const int> signs, std::span<const double> ma_dollar,
                                          double risk_budget) {
    if (signs.size() != ma_dollar.size()) {
        throw Error("invalid_argument", "sign and sizing series differ in length");
    }
    std::vector<std::int64_t> pos(signs.size(), 0);
    int prev_sign = 0;
    std::int64_t size = 0;
    for (std::size_t t = 0; t < signs.size(); ++t) {
        int sign = signs[t];
        if (std::isnan(ma_dollar[t])) sign = 0;
        if (sign != prev_sign) size = sign == 0 ? 0 : position_size(ma_dollar[t], risk_budget);
        pos[t] = sign * size;
        prev_sign = sign;
    }
    return pos;
}

std::int64_t to_ticks(double price, double tick_size) {
    const double q = price / tick_size;
    const double r = std::round(q);
    if (std::abs(q - r) > 1e-6 * std::max(1.0, std::abs(r))) {
        throw Error("off_tick_grid", "price " + format_double(price) + " is not a multiple of tick size " +
                                         format_double(tick_size));
    }
    return static_cast<std::int64_t>(r);
}

std::int64_t tick_value_micro(const market_data::Instrument& instrument) {
    return std::llround(instrument.tick_size * instrument.point_value * 1e6);
}

std::int64_t slippage_micro_per_contract(const market_data::Instrument& instrument, double s) {
    if (!(s >= 0.0)) throw Error("invalid_argument", "slippage multiple must be non-negative");
    return std::llround(s * static_cast<double>(tick_value_micro(instrument)));
}

namespace {

void finish(BacktestReport& r) {
    r.pnl.resize(r.pnl_micro.size());
    r.equity.resize(r.pnl_micro.size());
    std::int64_t cum = 0;
    for (std::size_t t = 0; t < r.pnl_micro.size(); ++t) {
        cum += r.pnl_micro[t];
        r.pnl[t] = static_cast<double>(r.pnl_micro[t]) / 1e6;
        r.equity[t] = static_cast<double>(cum) / 1e6;
    }
    r.total_pnl_micro = cum;
    r.total_pnl = static_cast<double>(cum) / 1e6;
    r.total_slippage = static_cast<double>(r.slippage_micro) / 1e6;
    r.sharpe = r.pnl.size() >= 2 ? sharpe(r.pnl) : std::nullopt;
}

}  // namespace

BacktestReport simulate(std::span<const std::int64_t> positions, std::span<const double> closes,
                        std::span<const TimeMs> times, const market_data::Instrument& instrument,
                        double slippage_mult) {
    if (positions.size() != closes.size() || times.size() != closes.size()) {
        throw Error("invalid_argument", "backtest series differ in length");
    }
    instrument.validate();
    const std::int64_t tvm = tick_value_micro(instrument);
    const std::int64_t slip = slippage_micro_per_contract(instrument, slippage_mult);
    const std::size_t n = closes.size();

    BacktestReport r;
    r.times.assign(times.begin(), times.end());
    r.positions.assign(positions.begin(), positions.end());
    if (n > 0) r.positions[n - 1] = 0;
    r.pnl_micro.assign(n, 0);

    std::int64_t held = 0;
    std::int64_t prev_ticks = 0;
    for (std::size_t t = 0; t < n; ++t) {
        const std::int64_t ticks = to_ticks(closes[t], instrument.tick_size);
        if (t > 0) r.pnl_micro[t] += held * (ticks - prev_ticks) * tvm;
        const std::int64_t target = r.positions[t];
        const std::int64_t traded = std::abs(target - held);
        if (traded > 0) {
            const std::int64_t cost = traded * slip;
            r.pnl_micro[t] -= cost;
            r.slippage_micro += cost;
            r.contracts_traded += traded;
            r.trades.push_back({t, times[t], traded, static_cast<double>(cost) / 1e6});
        }
        held = target;
        prev_ticks = ticks;
    }
    finish(r);
    return r;
}

std::optional<double> sharpe(std::span<const double> pnl, double periods_per_year) {
    if (pnl.size() < 2) throw Error("invalid_argument", "Sharpe ratio needs at least two bars");
    double mean = 0.0;
    for (const double v : pnl) mean += v;
    mean /= static_cast<double>(pnl.size());
    double var = 0.0;
    for (const double v : pnl) var += (v - mean) * (v - mean);
    var /= static_cast<double>(pnl.size());
    const double sd = std::sqrt(var);
    if (!(sd > 0.0)) return std::nullopt;
    return mean / sd * std::sqrt(periods_per_year);
}

BacktestReport aggregate(std::span<const BacktestReport> reports) {
    if (reports.size() == 1) return reports[0];
    std::map<TimeMs, std::int64_t> pnl;
    std::map<TimeMs, std::int64_t> exposure;
    BacktestReport out;
    for (const auto& r : reports) {
        for (std::size_t t = 0; t < r.times.size(); ++t) {
            pnl[r.times[t]] += r.pnl_micro[t];
            exposure[r.times[t]] += std::abs(r.positions[t]);
        }
        for (const auto& tr : r.trades) out.trades.push_back(tr);
        out.contracts_traded += r.contracts_traded;
        out.slippage_micro += r.slippage_micro;
    }
    for (const auto& [time, v] : pnl) {
        out.times.push_back(time);
        out.pnl_micro.push_back(v);
        out.positions.push_back(exposure[time]);
    }
    std::stable_sort(out.trades.begin(), out.trades.end(),
                     [](const Trade& a, const Trade& b) { return a.time < b.time; });
    for (auto& tr : out.trades) {
        tr.bar = static_cast<std::size_t>(std::lower_bound(out.times.begin(), out.times.end(), tr.time) -
                                          out.times.begin());
    }
    finish(out);
    return out;
}

void write_equity_csv(std::ostream& out, const BacktestReport& report) {
    out << "time,cumulative_pnl\n";
    for (std::size_t t = 0; t < report.times.size(); ++t) {
        out << format_iso8601(report.times[t]) << ',' << format_double(report.equity[t]) << '\n';
    }
}

void write_sharpe_csv(std::ostream& out, std::span<const SharpeRow> rows) {
    out << "model,feature_set,mode,slippage,sharpe,total_pnl,contracts_traded\n";
    for (const auto& r : rows) {
        out << r.model << ',' << r.feature_set << ',' << r.mode << ',' << format_double(r.slippage) << ','
            << (r.sharpe ? format_double(*r.sharpe) : std::string{}) << ',' << format_double(r.total_pnl) << ','
            << r.contracts_traded << '\n';
    }
}

}  // namespace selectrade::backtest
