#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "selectrade/common.hpp"
#include "selectrade/market_data.hpp"

namespace selectrade::features {

// Rolling transforms mark warm-up rows with NaN. A window "ending at t"
// always includes t itself.

/// ln(x[t] / x[t-1]); element 0 is NaN.
std::vector<double> log_returns(std::span<const double> series);

/// Maximum-likelihood Box-Cox exponent over [-2, 2].
double boxcox_fit(std::span<const double> train_values);
double boxcox_apply(double x, double lambda);

std::vector<double> rolling_minmax(std::span<const double> series, std::size_t window = 480);
std::vector<double> sma(std::span<const double> series, std::size_t window);

inline constexpr std::size_t kVapBins = 12;

/// Volume-at-price distribution: n x 12 row-major, NaN before the long
/// window is full.
Matrix vap_features(std::span<const market_data::Bar> bars, std::size_t long_window = 1440,
                    std::size_t short_window = 12, std::size_t bins = kVapBins);

/// Raw order-flow columns (n x 7): trade count, buy-sell count, buy-sell
/// volume, non-aggressive volume, non-aggressive count, non-aggressive
/// buy-sell count, non-aggressive buy-sell volume.
Matrix aggressiveness_features(std::span<const market_data::Bar> bars);

enum class FeatureSetLevel { FS1 = 1, FS2 = 2, FS3 = 3, FS4 = 4 };

std::string to_string(FeatureSetLevel level);
FeatureSetLevel parse_level(std::string_view text);
std::size_t column_count(FeatureSetLevel level);
std::vector<std::string> column_names(FeatureSetLevel level);

struct FeatureOptions {
    std::size_t minmax_window = 480;
    std::vector<std::size_t> sma_windows{48, 240, 480};
    std::size_t vap_long_window = 1440;
    std::size_t vap_short_window = 12;
};

struct FeatureMatrix {
    std::vector<TimeMs> times;
    std::vector<std::string> names;
    Matrix values;               ///< rows x columns; rows before valid_from contain NaN
    std::size_t valid_from = 0;  ///< first row where every column is warm

    std::size_t rows() const { return static_cast<std::size_t>(values.rows()); }
    std::size_t cols() const { return static_cast<std::size_t>(values.cols()); }
};

/// Number of leading rows a level needs before every column is warm.
std::size_t warmup_rows(FeatureSetLevel level, const FeatureOptions& options = {});

/// Builds the nested feature set. `boxcox_lambda` must come from
/// `boxcox_fit` on training-window volumes only.
FeatureMatrix assemble(std::span<const market_data::Bar> bars, FeatureSetLevel level, double boxcox_lambda,
                       const FeatureOptions& options = {});

/// CSV with a `time` column followed by the named columns; warm-up rows are
/// omitted. When `labels` is non-empty a trailing `label` column is added and
/// rows whose label is unavailable are omitted as well.
void write_csv(std::ostream& out, const FeatureMatrix& fm, std::span<const int> labels = {},
               std::span<const bool> label_valid = {});

}  // namespace selectrade::features
