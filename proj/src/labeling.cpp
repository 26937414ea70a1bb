#include "selectrade/labeling.hpp"

#include <cmath>

namespace selectrade::labeling {

std::string to_string(LabelMode mode) { return mode == LabelMode::binary ? "binary" : "ternary"; }

LabelMode parse_label_mode(std::string_view text) {
    if (text == "binary") return LabelMode::binary;
    if (text == "ternary") return LabelMode::ternary;
    throw Error("config", "unknown label mode '" + std::string(text) + "'");
}

void LabelConfig::validate() const {
    if (vol_window < 2) {
        throw Error("config", "vol_window must be >= 2");
    }
    if (mode == LabelMode::ternary && !(multiplier > 0.0)) {
        throw Error("config", "ternary labels need a positive multiplier");
    }
    if (mode == LabelMode::binary && multiplier != 0.0) {
        throw Error("config", "binary labels take no multiplier");
    }
}

int binary_label(double clrp) { return clrp > 0.0 ? 1 : -1; }

int ternary_label(double csr, double vol, double multiplier) {
    const double threshold = vol * multiplier;
    if (csr > threshold) return 1;
    if (csr < -threshold) return -1;
    return 0;
}

std::vector<double> rolling_volatility(std::span<const double> r, std::size_t window) {
    if (window < 2) {
        throw Error("invalid_argument", "rolling_volatility window must be >= 2");
    }
    std::vector<double> out(r.size(), kNaN);
    std::size_t run = 0;
    const double w = static_cast<double>(window);
    for (std::size_t t = 0; t < r.size(); ++t) {
        run = std::isnan(r[t]) ? 0 : run + 1;
        if (run < window) continue;
        double mean = 0.0;
        for (std::size_t j = t + 1 - window; j <= t; ++j) mean += r[j];
        mean /= w;
        double ss = 0.0;
        for (std::size_t j = t + 1 - window; j <= t; ++j) ss += (r[j] - mean) * (r[j] - mean);
        out[t] = std::sqrt(ss / w);
    }
    return out;
}

std::map<int, double> class_weights(std::span<const int> labels) {
    if (labels.empty()) {
        throw Error("invalid_argument", "class_weights: empty label sequence");
    }
    std::map<int, std::size_t> counts;
    for (const int y : labels) ++counts[y];
    if (counts.size() < 2) {
        throw Error("invalid_argument", "class_weights: only one class present");
    }
    const double m = static_cast<double>(labels.size());
    const double k = static_cast<double>(counts.size());
    std::map<int, double> weights;
    for (const auto& [cls, count] : counts) weights[cls] = m / (k * static_cast<double>(count));
    return weights;
}

LabelSeries make_labels(std::span<const market_data::Bar> bars, const LabelConfig& config) {
    config.validate();
    const std::size_t n = bars.size();
    LabelSeries out;
    out.label.assign(n, 0);
    out.valid.assign(n, false);
    if (n < 2) {
        out.valid_from = n;
        return out;
    }
    std::vector<double> vol;
    if (config.mode == LabelMode::ternary) {
        std::vector<double> simple(n, kNaN);
        for (std::size_t t = 1; t < n; ++t) simple[t] = bars[t].close / bars[t - 1].close - 1.0;
        vol = rolling_volatility(simple, config.vol_window);
    }
    out.valid_from = n;
    for (std::size_t t = 0; t + 1 < n; ++t) {
        const double next = bars[t + 1].close;
        const double cur = bars[t].close;
        if (config.mode == LabelMode::binary) {
            out.label[t] = binary_label(std::log(next / cur));
        } else {
            if (std::isnan(vol[t])) continue;
            out.label[t] = ternary_label(next / cur - 1.0, vol[t], config.multiplier);
        }
        out.valid[t] = true;
        if (out.valid_from == n) out.valid_from = t;
    }
    return out;
}

std::vector<int> classes_for(LabelMode mode) {
    return mode == LabelMode::binary ? std::vector<int>{-1, 1} : std::vector<int>{-1, 0, 1};
}

}  // namespace selectrade::labeling
