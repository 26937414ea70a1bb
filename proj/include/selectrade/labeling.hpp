#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "selectrade/market_data.hpp"

namespace selectrade::labeling {

enum class LabelMode { binary, ternary };

std::string to_string(LabelMode mode);
LabelMode parse_label_mode(std::string_view text);

inline constexpr double kMultipliers[] = {0.3, 0.6, 0.9, 1.2};

struct LabelConfig {
    LabelMode mode = LabelMode::binary;
    double multiplier = 0.0;  ///< ternary only
    std::size_t vol_window = 1440;

    void validate() const;
};

/// -1 when the next bar's close log-return is <= 0, +1 otherwise.
int binary_label(double clrp);

/// Trailing population standard deviation; NaN during warm-up (and wherever
/// the window touches a NaN input).
std::vector<double> rolling_volatility(std::span<const double> simple_returns, std::size_t window);

int ternary_label(double csr, double vol, double multiplier);

/// Inverse-frequency weights m / (K * count(c)).
std::map<int, double> class_weights(std::span<const int> labels);

/// Labels aligned to bars: label[t] describes the move from close[t] to
/// close[t+1]. `valid[t]` is false for the last bar and, in ternary mode,
/// while the volatility window is warming up.
struct LabelSeries {
    std::vector<int> label;
    std::vector<bool> valid;
    std::size_t valid_from = 0;
};

LabelSeries make_labels(std::span<const market_data::Bar> bars, const LabelConfig& config);

/// Class universe in probability-column order.
std::vector<int> classes_for(LabelMode mode);

}  // namespace selectrade::labeling
