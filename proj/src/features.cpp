#include "selectrade/features.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <ostream>

#include <boost/math/tools/minima.hpp>

namespace selectrade::features {

std::vector<double> log_returns(std::span<const double> series) {
    if (series.size() < 2) {
        throw Error("invalid_argument", "log_returns needs at least 2 values");
    }
    std::vector<double> out(series.size(), kNaN);
    for (std::size_t t = 0; t < series.size(); ++t) {
        if (!(series[t] > 0.0)) {
            throw Error("invalid_argument", "log_returns: non-positive value at index " + std::to_string(t));
        }
        if (t > 0) {
            out[t] = std::log(series[t] / series[t - 1]);
        }
    }
    return out;
}

double boxcox_apply(double x, double lambda) {
    if (!(x > 0.0)) {
        throw Error("invalid_argument", "boxcox_apply: x must be positive");
    }
    if (lambda == 0.0) {
        return std::log(x);
    }
    return std::expm1(lambda * std::log(x)) / lambda;
}

double boxcox_fit(std::span<const double> values) {
    if (values.size() < 30) {
        throw Error("invalid_argument", "boxcox_fit needs at least 30 values");
    }
    std::vector<double> logs(values.size());
    double log_sum = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!(values[i] > 0.0)) {
            throw Error("invalid_argument", "boxcox_fit: non-positive value");
        }
        logs[i] = std::log(values[i]);
        log_sum += logs[i];
    }
    if (std::all_of(values.begin(), values.end(), [&](double v) { return v == values.front(); })) {
        throw Error("invalid_argument", "degenerate for Box-Cox: constant input");
    }
    const double n = static_cast<double>(values.size());
    // Profile log-likelihood with the variance concentrated out.
    auto neg_llf = [&](double lambda) {
        double mean = 0.0;
        std::vector<double> y(logs.size());
        for (std::size_t i = 0; i < logs.size(); ++i) {
            y[i] = lambda == 0.0 ? logs[i] : std::expm1(lambda * logs[i]) / lambda;
            mean += y[i];
        }
        mean /= n;
        double var = 0.0;
        for (const double v : y) {
            var += (v - mean) * (v - mean);
        }
        var /= n;
        return 0.5 * n * std::log(var) - (lambda - 1.0) * log_sum;
    };
    // Coarse scan guards against a non-unimodal likelihood, Brent refines.
    constexpr int kGrid = 40;
    double best = -2.0;
    double best_val = neg_llf(best);
    for (int i = 1; i <= kGrid; ++i) {
        const double lam = -2.0 + 4.0 * i / kGrid;
        const double v = neg_llf(lam);
        if (v < best_val) {
            best_val = v;
            best = lam;
        }
    }
    const double lo = std::max(-2.0, best - 4.0 / kGrid);
    const double hi = std::min(2.0, best + 4.0 / kGrid);
    const auto res = boost::math::tools::brent_find_minima(neg_llf, lo, hi, 40);
    return res.second <= best_val ? res.first : best;
}

std::vector<double> rolling_minmax(std::span<const double> series, std::size_t window) {
    if (window < 2) {
        throw Error("invalid_argument", "rolling_minmax window must be >= 2");
    }
    std::vector<double> out(series.size(), kNaN);
    std::deque<std::size_t> mins;
    std::deque<std::size_t> maxs;
    std::size_t run = 0;  // consecutive non-NaN values ending at t
    for (std::size_t t = 0; t < series.size(); ++t) {
        const double x = series[t];
        if (std::isnan(x)) {
            run = 0;
            mins.clear();
            maxs.clear();
            continue;
        }
        ++run;
        while (!mins.empty() && series[mins.back()] >= x) mins.pop_back();
        while (!maxs.empty() && series[maxs.back()] <= x) maxs.pop_back();
        mins.push_back(t);
        maxs.push_back(t);
        if (run >= window) {
            const std::size_t start = t + 1 - window;
            while (mins.front() < start) mins.pop_front();
            while (maxs.front() < start) maxs.pop_front();
            const double lo = series[mins.front()];
            const double hi = series[maxs.front()];
            out[t] = hi == lo ? 0.5 : (x - lo) / (hi - lo);
        }
    }
    return out;
}

std::vector<double> sma(std::span<const double> series, std::size_t window) {
    if (window < 1) {
        throw Error("invalid_argument", "sma window must be >= 1");
    }
    std::vector<double> out(series.size(), kNaN);
    std::size_t run = 0;
    for (std::size_t t = 0; t < series.size(); ++t) {
        run = std::isnan(series[t]) ? 0 : run + 1;
        if (run >= window) {
            double sum = 0.0;
            for (std::size_t j = t + 1 - window; j <= t; ++j) {
                sum += series[j];
            }
            out[t] = sum / static_cast<double>(window);
        }
    }
    return out;
}

Matrix vap_features(std::span<const market_data::Bar> bars, std::size_t long_window, std::size_t short_window,
                    std::size_t bins) {
    if (short_window < 1 || long_window <= short_window || bins < 1) {
        throw Error("invalid_argument", "vap_features requires long_window > short_window >= 1");
    }
    const std::size_t n = bars.size();
    Matrix out = Matrix::Constant(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(bins), kNaN);
    std::deque<std::size_t> mins;
    std::deque<std::size_t> maxs;
    std::vector<double> hist(bins);
    for (std::size_t t = 0; t < n; ++t) {
        const double c = bars[t].close;
        while (!mins.empty() && bars[mins.back()].close >= c) mins.pop_back();
        while (!maxs.empty() && bars[maxs.back()].close <= c) maxs.pop_back();
        mins.push_back(t);
        maxs.push_back(t);
        if (t + 1 < long_window) {
            continue;
        }
        const std::size_t start = t + 1 - long_window;
        while (mins.front() < start) mins.pop_front();
        while (maxs.front() < start) maxs.pop_front();
        const double lo = bars[mins.front()].close;
        const double hi = bars[maxs.front()].close;

        std::fill(hist.begin(), hist.end(), 0.0);
        double total = 0.0;
        for (std::size_t j = t + 1 - short_window; j <= t; ++j) {
            const double v = static_cast<double>(bars[j].volume);
            if (hi > lo) {
                const double pos = (bars[j].close - lo) / (hi - lo) * static_cast<double>(bins);
                const auto bin = static_cast<std::size_t>(std::clamp(std::floor(pos), 0.0, static_cast<double>(bins - 1)));
                hist[bin] += v;
            }
            total += v;
        }
        const auto row = static_cast<Eigen::Index>(t);
        if (!(hi > lo) || total <= 0.0) {
            out.row(row).setConstant(1.0 / static_cast<double>(bins));
        } else {
            for (std::size_t b = 0; b < bins; ++b) {
                out(row, static_cast<Eigen::Index>(b)) = hist[b] / total;
            }
        }
    }
    return out;
}

Matrix aggressiveness_features(std::span<const market_data::Bar> bars) {
    Matrix out(static_cast<Eigen::Index>(bars.size()), 7);
    for (std::size_t t = 0; t < bars.size(); ++t) {
        const auto& b = bars[t];
        const auto r = static_cast<Eigen::Index>(t);
        out(r, 0) = static_cast<double>(b.trade_count);
        out(r, 1) = static_cast<double>(b.buy_count - b.sell_count);
        out(r, 2) = static_cast<double>(b.buy_volume - b.sell_volume);
        out(r, 3) = static_cast<double>(b.nonaggr_volume);
        out(r, 4) = static_cast<double>(b.nonaggr_count);
        out(r, 5) = static_cast<double>(b.nonaggr_buy_count - b.nonaggr_sell_count);
        out(r, 6) = static_cast<double>(b.nonaggr_buy_volume - b.nonaggr_sell_volume);
    }
    return out;
}

std::string to_string(FeatureSetLevel level) { return "FS" + std::to_string(static_cast<int>(level)); }

FeatureSetLevel parse_level(std::string_view text) {
    if (text == "FS1") return FeatureSetLevel::FS1;
    if (text == "FS2") return FeatureSetLevel::FS2;
    if (text == "FS3") return FeatureSetLevel::FS3;
    if (text == "FS4") return FeatureSetLevel::FS4;
    throw Error("config", "unknown feature set '" + std::string(text) + "'");
}

std::size_t column_count(FeatureSetLevel level) {
    switch (level) {
        case FeatureSetLevel::FS1: return 5;
        case FeatureSetLevel::FS2: return 8;
        case FeatureSetLevel::FS3: return 20;
        case FeatureSetLevel::FS4: return 27;
    }
    return 0;
}

std::vector<std::string> column_names(FeatureSetLevel level) {
    std::vector<std::string> names{"lr_open", "lr_high", "lr_low", "lr_close", "bc_volume"};
    if (level >= FeatureSetLevel::FS2) {
        for (const char* n : {"sma_close_48", "sma_close_240", "sma_close_480"}) names.emplace_back(n);
    }
    if (level >= FeatureSetLevel::FS3) {
        for (std::size_t b = 0; b < kVapBins; ++b) {
            names.push_back((b < 10 ? "vap_0" : "vap_") + std::to_string(b));
        }
    }
    if (level >= FeatureSetLevel::FS4) {
        for (const char* n : {"trade_count", "count_imbalance", "volume_imbalance", "nonaggr_volume", "nonaggr_count",
                              "nonaggr_count_imbalance", "nonaggr_volume_imbalance"}) {
            names.emplace_back(n);
        }
    }
    return names;
}

namespace {

struct Warmup {
    std::size_t rows;
    std::string binding;
};

Warmup warmup(FeatureSetLevel level, const FeatureOptions& o) {
    Warmup w{o.minmax_window, "min-max window of " + std::to_string(o.minmax_window) + " bars"};
    auto consider = [&](std::size_t rows, std::string why) {
        if (rows > w.rows) w = {rows, std::move(why)};
    };
    if (level >= FeatureSetLevel::FS2) {
        for (const auto s : o.sma_windows) {
            consider(o.minmax_window + s - 1, "moving average of " + std::to_string(s) + " bars");
        }
    }
    if (level >= FeatureSetLevel::FS3) {
        consider(o.vap_long_window - 1, "volume-at-price window of " + std::to_string(o.vap_long_window) + " bars");
    }
    return w;
}

}  // namespace

std::size_t warmup_rows(FeatureSetLevel level, const FeatureOptions& options) { return warmup(level, options).rows; }

FeatureMatrix assemble(std::span<const market_data::Bar> bars, FeatureSetLevel level, double boxcox_lambda,
                       const FeatureOptions& options) {
    const Warmup w = warmup(level, options);
    if (bars.size() <= w.rows) {
        throw Error("insufficient_data", "need more than " + std::to_string(w.rows) + " bars (binding: " + w.binding +
                                             "), got " + std::to_string(bars.size()));
    }
    if (level >= FeatureSetLevel::FS2 && options.sma_windows.size() != 3) {
        throw Error("invalid_argument", "exactly three moving-average windows are required");
    }
    const std::size_t n = bars.size();
    FeatureMatrix fm;
    fm.names = column_names(level);
    fm.times.reserve(n);
    for (const auto& b : bars) fm.times.push_back(b.open_time);
    fm.values = Matrix(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(fm.names.size()));

    std::size_t col = 0;
    auto put = [&](const std::vector<double>& column) {
        for (std::size_t t = 0; t < n; ++t) {
            fm.values(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(col)) = column[t];
        }
        ++col;
    };

    std::vector<double> series(n);
    const auto mm = options.minmax_window;
    std::vector<double> close_norm;
    for (int field = 0; field < 4; ++field) {
        for (std::size_t t = 0; t < n; ++t) {
            const auto& b = bars[t];
            series[t] = field == 0 ? b.open : field == 1 ? b.high : field == 2 ? b.low : b.close;
        }
        auto normalized = rolling_minmax(log_returns(series), mm);
        if (field == 3) close_norm = normalized;
        put(normalized);
    }
    for (std::size_t t = 0; t < n; ++t) {
        series[t] = boxcox_apply(std::max<double>(1.0, static_cast<double>(bars[t].volume)), boxcox_lambda);
    }
    put(rolling_minmax(series, mm));

    if (level >= FeatureSetLevel::FS2) {
        for (const auto s : options.sma_windows) put(sma(close_norm, s));
    }
    if (level >= FeatureSetLevel::FS3) {
        const Matrix vap = vap_features(bars, options.vap_long_window, options.vap_short_window, kVapBins);
        fm.values.middleCols(static_cast<Eigen::Index>(col), static_cast<Eigen::Index>(kVapBins)) = vap;
        col += kVapBins;
    }
    if (level >= FeatureSetLevel::FS4) {
        const Matrix raw = aggressiveness_features(bars);
        for (Eigen::Index c = 0; c < raw.cols(); ++c) {
            for (std::size_t t = 0; t < n; ++t) series[t] = raw(static_cast<Eigen::Index>(t), c);
            put(rolling_minmax(series, mm));
        }
    }

    std::size_t valid_from = 0;
    for (std::size_t t = 0; t < n; ++t) {
        if (fm.values.row(static_cast<Eigen::Index>(t)).array().isNaN().any()) valid_from = t + 1;
    }
    fm.valid_from = valid_from;
    return fm;
}

void write_csv(std::ostream& out, const FeatureMatrix& fm, std::span<const int> labels, std::span<const bool> label_valid) {
    out << "time";
    for (const auto& name : fm.names) out << ',' << name;
    const bool with_labels = !labels.empty();
    if (with_labels) out << ",label";
    out << '\n';
    for (std::size_t t = fm.valid_from; t < fm.rows(); ++t) {
        if (with_labels && (t >= labels.size() || (!label_valid.empty() && !label_valid[t]))) continue;
        out << format_iso8601(fm.times[t]);
        for (std::size_t c = 0; c < fm.cols(); ++c) {
            out << ',' << format_double(fm.values(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(c)));
        }
        if (with_labels) out << ',' << labels[t];
        out << '\n';
    }
}

}  // namespace selectrade::features
