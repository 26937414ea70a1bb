#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

namespace selectrade::metrics {

/// K x K counts, rows = true class, columns = predicted class, in the order
/// of `classes` (ascending, e.g. -1, 0, +1).
class ConfusionMatrix {
public:
    explicit ConfusionMatrix(std::vector<int> classes);

    /// Accumulates (truth, prediction) pairs, optionally restricted to rows
    /// whose `mask` entry is true.
    static ConfusionMatrix from_labels(std::vector<int> classes, std::span<const int> truth,
                                       std::span<const int> predicted, std::span<const bool> mask = {});

    void add(int truth, int predicted, std::int64_t count = 1);

    const std::vector<int>& classes() const { return classes_; }
    std::size_t size() const { return classes_.size(); }
    std::int64_t at(std::size_t true_idx, std::size_t pred_idx) const { return counts_[true_idx * size() + pred_idx]; }
    std::int64_t& at(std::size_t true_idx, std::size_t pred_idx) { return counts_[true_idx * size() + pred_idx]; }
    std::int64_t total() const;
    std::int64_t trace() const;
    std::size_t index_of(int cls) const;

private:
    std::vector<int> classes_;
    std::vector<std::int64_t> counts_;
};

/// K-category correlation (Gorodkin); 0 when the denominator vanishes.
double mcc(const ConfusionMatrix& cm);

/// Binary MCC on the {-1, +1} corner of a (-1, 0, +1) matrix. Returns 0 and
/// logs a warning when the restriction is empty.
double buy_sell_mcc(const ConfusionMatrix& cm);

/// trace / total; NaN for an empty matrix.
double accuracy(const ConfusionMatrix& cm);

/// Histogram of distances (in bars) between consecutive accepted samples.
std::map<std::size_t, std::size_t> abstention_gaps(std::span<const bool> accepted);

struct LabelDistribution {
    std::vector<int> classes;
    std::vector<double> all_pct;        ///< unrounded percentages over all rows
    std::vector<double> abstained_pct;  ///< unrounded percentages over abstained rows
    std::size_t total = 0;
    std::size_t abstained = 0;
    bool abstained_empty = false;
};

LabelDistribution label_distribution_report(std::span<const int> truth, std::span<const bool> accepted,
                                            std::vector<int> classes = {-1, 0, 1});

}  // namespace selectrade::metrics
