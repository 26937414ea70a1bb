#include "selectrade/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "selectrade/common.hpp"

namespace selectrade::metrics {

ConfusionMatrix::ConfusionMatrix(std::vector<int> classes) : classes_(std::move(classes)) {
    if (classes_.empty()) {
        throw Error("invalid_argument", "confusion matrix needs at least one class");
    }
    counts_.assign(classes_.size() * classes_.size(), 0);
}

ConfusionMatrix ConfusionMatrix::from_labels(std::vector<int> classes, std::span<const int> truth,
                                             std::span<const int> predicted, std::span<const bool> mask) {
    if (truth.size() != predicted.size() || (!mask.empty() && mask.size() != truth.size())) {
        throw Error("invalid_argument", "confusion matrix inputs differ in length");
    }
    ConfusionMatrix cm(std::move(classes));
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (mask.empty() || mask[i]) cm.add(truth[i], predicted[i]);
    }
    return cm;
}

std::size_t ConfusionMatrix::index_of(int cls) const {
    const auto it = std::find(classes_.begin(), classes_.end(), cls);
    if (it == classes_.end()) {
        throw Error("invalid_argument", "label " + std::to_string(cls) + " outside the class universe");
    }
    return static_cast<std::size_t>(it - classes_.begin());
}

void ConfusionMatrix::add(int truth, int predicted, std::int64_t count) {
    at(index_of(truth), index_of(predicted)) += count;
}

std::int64_t ConfusionMatrix::total() const {
    std::int64_t s = 0;
    for (const auto c : counts_) s += c;
    return s;
}

std::int64_t ConfusionMatrix::trace() const {
    std::int64_t s = 0;
    for (std::size_t k = 0; k < size(); ++k) s += at(k, k);
    return s;
}

double mcc(const ConfusionMatrix& cm) {
    const std::size_t k = cm.size();
    // Sums are exact in 128-bit integers.
    __int128 s = 0;
    __int128 c = 0;
    std::vector<__int128> t(k, 0);
    std::vector<__int128> p(k, 0);
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
            const __int128 v = cm.at(i, j);
            s += v;
            t[i] += v;
            p[j] += v;
            if (i == j) c += v;
        }
    }
    __int128 pt = 0;
    __int128 pp = 0;
    __int128 tt = 0;
    for (std::size_t i = 0; i < k; ++i) {
        pt += p[i] * t[i];
        pp += p[i] * p[i];
        tt += t[i] * t[i];
    }
    const __int128 num = c * s - pt;
    const __int128 dp = s * s - pp;
    const __int128 dt = s * s - tt;
    if (dp == 0 || dt == 0) {
        return 0.0;
    }
    // For K = 2 the numerator is 2(ad - bc) and the product 4(p1 p2 t1 t2), so
    // scaling by powers of two makes this bit-identical to the binary formula.
    const double value = static_cast<double>(num) / std::sqrt(static_cast<double>(dp) * static_cast<double>(dt));
    return std::clamp(value, -1.0, 1.0);
}

double buy_sell_mcc(const ConfusionMatrix& cm) {
    const std::size_t sell = cm.index_of(-1);
    const std::size_t buy = cm.index_of(1);
    ConfusionMatrix sub({-1, 1});
    sub.at(0, 0) = cm.at(sell, sell);
    sub.at(0, 1) = cm.at(sell, buy);
    sub.at(1, 0) = cm.at(buy, sell);
    sub.at(1, 1) = cm.at(buy, buy);
    if (sub.total() == 0) {
        log::warn("buy/sell MCC: no samples with both true and predicted label in {-1, +1}");
        return 0.0;
    }
    return mcc(sub);
}

double accuracy(const ConfusionMatrix& cm) {
    const auto total = cm.total();
    if (total == 0) return std::numeric_limits<double>::quiet_NaN();
    return static_cast<double>(cm.trace()) / static_cast<double>(total);
}

std::map<std::size_t, std::size_t> abstention_gaps(std::span<const bool> accepted) {
    std::map<std::size_t, std::size_t> hist;
    bool seen = false;
    std::size_t last = 0;
    for (std::size_t i = 0; i < accepted.size(); ++i) {
        if (!accepted[i]) continue;
        if (seen) ++hist[i - last];
        seen = true;
        last = i;
    }
    if (!seen) {
        log::warn("abstention gaps: no accepted samples");
    }
    return hist;
}

LabelDistribution label_distribution_report(std::span<const int> truth, std::span<const bool> accepted,
                                            std::vector<int> classes) {
    if (truth.size() != accepted.size()) {
        throw Error("invalid_argument", "label distribution inputs differ in length");
    }
    LabelDistribution out;
    out.classes = std::move(classes);
    const std::size_t k = out.classes.size();
    std::vector<std::size_t> all(k, 0);
    std::vector<std::size_t> abst(k, 0);
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const auto it = std::find(out.classes.begin(), out.classes.end(), truth[i]);
        if (it == out.classes.end()) {
            throw Error("invalid_argument", "label " + std::to_string(truth[i]) + " outside the class universe");
        }
        const auto idx = static_cast<std::size_t>(it - out.classes.begin());
        ++all[idx];
        ++out.total;
        if (!accepted[i]) {
            ++abst[idx];
            ++out.abstained;
        }
    }
    out.all_pct.assign(k, 0.0);
    out.abstained_pct.assign(k, 0.0);
    for (std::size_t c = 0; c < k; ++c) {
        if (out.total > 0) out.all_pct[c] = 100.0 * static_cast<double>(all[c]) / static_cast<double>(out.total);
        if (out.abstained > 0) out.abstained_pct[c] = 100.0 * static_cast<double>(abst[c]) / static_cast<double>(out.abstained);
    }
    out.abstained_empty = out.abstained == 0;
    return out;
}

}  // namespace selectrade::metrics
