#include "selectrade/splits.hpp"

namespace selectrade::splits {

WalkForwardPlan plan(std::size_t timeline_length, const PlanOptions& o) {
    if (o.initial_train == 0 || o.validation == 0 || o.test == 0) {
        throw Error("invalid_argument", "walk-forward window lengths must be positive");
    }
    const std::size_t minimum = o.initial_train + o.validation + o.test;
    if (timeline_length < minimum) {
        throw Error("insufficient_data", "walk-forward plan needs at least " + std::to_string(minimum) +
                                             " rows, got " + std::to_string(timeline_length));
    }
    WalkForwardPlan p;
    for (std::size_t k = 0;; ++k) {
        const std::size_t train_end = o.initial_train + k * o.test;
        const std::size_t val_end = train_end + o.validation;
        const std::size_t test_end = val_end + o.test;
        if (test_end > timeline_length) break;
        p.folds.push_back(Fold{{0, train_end}, {train_end, val_end}, {val_end, test_end}});
    }
    return p;
}

nlohmann::json to_json(const WalkForwardPlan& plan, std::span<const TimeMs> times, std::size_t offset) {
    auto range_json = [&](const Range& r) {
        nlohmann::json j{{"begin", r.begin}, {"end", r.end}};
        if (!times.empty() && offset + r.end <= times.size() && r.end > r.begin) {
            j["begin_time"] = format_iso8601(times[offset + r.begin]);
            j["last_time"] = format_iso8601(times[offset + r.end - 1]);
        }
        return j;
    };
    nlohmann::json folds = nlohmann::json::array();
    for (std::size_t k = 0; k < plan.folds.size(); ++k) {
        const auto& f = plan.folds[k];
        folds.push_back({{"fold", k},
                         {"train", range_json(f.train)},
                         {"validation", range_json(f.validation)},
                         {"test", range_json(f.test)}});
    }
    return folds;
}

}  // namespace selectrade::splits
