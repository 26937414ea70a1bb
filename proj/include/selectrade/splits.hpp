#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <json.hpp>

#include "selectrade/common.hpp"

namespace selectrade::splits {

/// Half-open index interval [begin, end).
struct Range {
    std::size_t begin = 0;
    std::size_t end = 0;

    std::size_t size() const { return end - begin; }
    bool operator==(const Range&) const = default;
};

struct Fold {
    Range train;
    Range validation;
    Range test;
};

struct WalkForwardPlan {
    std::vector<Fold> folds;
};

inline constexpr std::size_t kBarsPerDay = 48;
inline constexpr std::size_t kBarsPerMonth = 30 * kBarsPerDay;

struct PlanOptions {
    std::size_t initial_train = 6 * kBarsPerMonth;
    std::size_t validation = 2 * kBarsPerMonth;
    std::size_t test = 6 * kBarsPerMonth;
};

/// Anchored walk-forward: fold k trains on [0, initial_train + k*test) and
/// the validation and test windows follow immediately.
WalkForwardPlan plan(std::size_t timeline_length, const PlanOptions& options = {});

/// JSON list of folds with index bounds and, when `times` is given, the
/// timestamps of the first bar of each range. `offset` maps plan indices to
/// positions in `times`.
nlohmann::json to_json(const WalkForwardPlan& plan, std::span<const TimeMs> times = {}, std::size_t offset = 0);

}  // namespace selectrade::splits
