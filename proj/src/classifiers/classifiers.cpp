#include "selectrade/classifiers.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <thread>

#include "selectrade/classifiers/feed_forward.hpp"
#include "selectrade/classifiers/logistic.hpp"
#include "selectrade/classifiers/lstm.hpp"
#include "selectrade/classifiers/random_forest.hpp"
#include "selectrade/metrics.hpp"

namespace selectrade::classifiers {

std::string to_string(Family family) {
    switch (family) {
        case Family::logistic: return "logistic";
        case Family::random_forest: return "random_forest";
        case Family::feed_forward: return "feed_forward";
        case Family::lstm: return "lstm";
    }
    return "unknown";
}

Family parse_family(std::string_view text) {
    for (auto f : {Family::logistic, Family::random_forest, Family::feed_forward, Family::lstm}) {
        if (text == to_string(f)) return f;
    }
    throw Error("invalid_config", "unknown classifier family '" + std::string(text) + "'");
}

nlohmann::json TrainingOptions::to_json() const {
    return {{"epochs", epochs},
            {"batch_size", batch_size},
            {"dropout", dropout},
            {"l2", l2},
            {"bn_momentum", bn_momentum},
            {"sequence_length", sequence_length},
            {"rf_max_samples", rf_max_samples},
            {"rf_max_depth", rf_max_depth},
            {"logistic_batch_size", logistic_batch_size}};
}

TrainingOptions TrainingOptions::from_json(const nlohmann::json& j) {
    TrainingOptions o;
    o.epochs = j.value("epochs", o.epochs);
    o.batch_size = j.value("batch_size", o.batch_size);
    o.dropout = j.value("dropout", o.dropout);
    o.l2 = j.value("l2", o.l2);
    o.bn_momentum = j.value("bn_momentum", o.bn_momentum);
    o.sequence_length = j.value("sequence_length", o.sequence_length);
    o.rf_max_samples = j.value("rf_max_samples", o.rf_max_samples);
    o.rf_max_depth = j.value("rf_max_depth", o.rf_max_depth);
    o.logistic_batch_size = j.value("logistic_batch_size", o.logistic_batch_size);
    if (o.epochs < 1 || o.batch_size < 1 || o.logistic_batch_size < 1 || o.sequence_length < 1) {
        throw Error("invalid_config", "epochs, batch sizes and sequence length must be positive");
    }
    if (!(o.dropout >= 0.0 && o.dropout < 1.0)) throw Error("invalid_config", "dropout must lie in [0, 1)");
    if (!(o.l2 >= 0.0)) throw Error("invalid_config", "l2 must be non-negative");
    if (!(o.bn_momentum >= 0.0 && o.bn_momentum < 1.0)) throw Error("invalid_config", "bn_momentum must lie in [0, 1)");
    return o;
}

void Classifier::check_input(const FitInput& in, std::size_t min_rows) {
    const auto n = static_cast<std::size_t>(in.features.rows());
    if (in.labels.size() != n || in.weights.size() != n) {
        throw Error("invalid_argument", "features, labels and weights differ in length");
    }
    if (n < min_rows) {
        throw Error("insufficient_data", "need at least " + std::to_string(min_rows) + " training rows, got " +
                                             std::to_string(n));
    }
    if (in.classes.empty() || !std::is_sorted(in.classes.begin(), in.classes.end())) {
        throw Error("invalid_argument", "class universe must be non-empty and ascending");
    }
    if (!in.features.allFinite()) throw Error("invalid_argument", "training features contain non-finite values");
    for (const double w : in.weights) {
        if (!(w >= 0.0) || !std::isfinite(w)) throw Error("invalid_argument", "sample weights must be finite and non-negative");
    }
    std::vector<bool> seen(in.classes.size(), false);
    for (const int y : in.labels) {
        const auto it = std::find(in.classes.begin(), in.classes.end(), y);
        if (it == in.classes.end()) throw Error("invalid_argument", "label " + std::to_string(y) + " outside the class universe");
        seen[static_cast<std::size_t>(it - in.classes.begin())] = true;
    }
    if (std::count(seen.begin(), seen.end(), true) < 2) {
        throw Error("invalid_argument", "training labels contain fewer than two classes");
    }
    classes_.assign(in.classes.begin(), in.classes.end());
}

std::unique_ptr<Classifier> make_classifier(Family family, const nlohmann::json& hyper, const TrainingOptions& options) {
    switch (family) {
        case Family::logistic: return std::make_unique<Logistic>(hyper, options);
        case Family::random_forest: return std::make_unique<RandomForest>(hyper, options);
        case Family::feed_forward: return std::make_unique<FeedForward>(hyper, options);
        case Family::lstm: return std::make_unique<Lstm>(hyper, options);
    }
    throw Error("invalid_config", "unknown classifier family");
}

std::vector<int> predict_labels(const Matrix& proba, std::span<const int> classes) {
    std::vector<int> out(static_cast<std::size_t>(proba.rows()));
    for (Eigen::Index i = 0; i < proba.rows(); ++i) {
        Eigen::Index best = 0;
        for (Eigen::Index c = 1; c < proba.cols(); ++c) {
            if (proba(i, c) > proba(i, best)) best = c;
        }
        out[static_cast<std::size_t>(i)] = classes[static_cast<std::size_t>(best)];
    }
    return out;
}

std::vector<nlohmann::json> default_grid(Family family, const std::vector<std::vector<int>>& architectures) {
    std::vector<nlohmann::json> grid;
    switch (family) {
        case Family::logistic:
            for (int iters : {250, 500}) {
                for (const char* solver : {"full_batch", "stochastic"}) {
                    for (double c : {0.01, 0.001, 0.0001}) {
                        grid.push_back({{"max_iterations", iters}, {"solver", solver}, {"C", c}});
                    }
                }
            }
            break;
        case Family::random_forest:
            for (int trees : {500, 1000, 2000}) {
                for (const char* criterion : {"gini", "entropy"}) {
                    for (const char* features : {"sqrt", "log2"}) {
                        grid.push_back({{"n_trees", trees}, {"criterion", criterion}, {"max_features", features}});
                    }
                }
            }
            break;
        case Family::feed_forward:
        case Family::lstm: {
            const std::vector<std::vector<int>> defaults{{512}, {256}, {512, 256}, {256, 128}};
            const auto& archs = architectures.empty() ? defaults : architectures;
            if (archs.size() != 4) {
                throw Error("invalid_config", "neural grids take exactly four architectures (4 x 3 learning rates = 12)");
            }
            for (const auto& arch : archs) {
                for (double lr : {0.01, 0.001, 0.0001}) grid.push_back({{"hidden", arch}, {"learning_rate", lr}});
            }
            break;
        }
    }
    return grid;
}

GridResult grid_search(Family family, const std::vector<nlohmann::json>& grid, const FitInput& train,
                       const ValidationInput& validation, std::uint64_t seed, const TrainingOptions& options, int jobs) {
    if (grid.size() != 12) {
        throw Error("invalid_config", "grid search expects exactly 12 combinations, got " + std::to_string(grid.size()));
    }
    const auto nv = static_cast<std::size_t>(validation.features.rows());
    if (validation.labels.size() != nv || (!validation.score_mask.empty() && validation.score_mask.size() != nv)) {
        throw Error("invalid_argument", "validation features, labels and mask differ in length");
    }
    std::vector<std::shared_ptr<Classifier>> models(grid.size());
    GridResult result;
    result.mcc.assign(grid.size(), std::numeric_limits<double>::quiet_NaN());
    result.failures.assign(grid.size(), std::string{});
    const std::vector<int> classes(train.classes.begin(), train.classes.end());

    auto run_one = [&](std::size_t i) {
        try {
            auto model = std::shared_ptr<Classifier>(make_classifier(family, grid[i], options));
            model->fit(train, mix_seed(seed, static_cast<std::uint64_t>(i)));
            const Matrix proba = model->predict_proba(validation.features, validation.stream_starts);
            const auto pred = predict_labels(proba, classes);
            const auto cm = metrics::ConfusionMatrix::from_labels(classes, validation.labels, pred, validation.score_mask);
            result.mcc[i] = metrics::mcc(cm);
            models[i] = std::move(model);
        } catch (const std::exception& e) {
            result.failures[i] = e.what();
        }
    };

    const auto workers = static_cast<std::size_t>(std::clamp(jobs, 1, static_cast<int>(grid.size())));
    if (workers == 1) {
        for (std::size_t i = 0; i < grid.size(); ++i) run_one(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < grid.size(); i = next++) run_one(i);
            });
        }
        for (auto& t : pool) t.join();
    }

    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!models[i]) {
            log::warn(to_string(family) + " combination " + std::to_string(i) + " failed: " + result.failures[i]);
            continue;
        }
        if (!best || result.mcc[i] > result.mcc[*best]) best = i;
    }
    if (!best) {
        std::string causes;
        for (std::size_t i = 0; i < grid.size(); ++i) causes += "\n  [" + std::to_string(i) + "] " + result.failures[i];
        throw Error("training_failed", "all " + std::to_string(grid.size()) + " " + to_string(family) +
                                           " combinations failed:" + causes);
    }
    result.best.family = family;
    result.best.hyperparameters = grid[*best];
    result.best.seed = mix_seed(seed, static_cast<std::uint64_t>(*best));
    result.best.validation_mcc = result.mcc[*best];
    result.best.combination = *best;
    result.best.model = models[*best];
    return result;
}

nlohmann::json save_model(const TrainedModel& m) {
    if (!m.model) throw Error("invalid_argument", "no fitted model to save");
    return {{"format_version", kModelFormatVersion},
            {"family", to_string(m.family)},
            {"hyperparameters", m.hyperparameters},
            {"options", m.model->options().to_json()},
            {"classes", m.model->classes()},
            {"seed", m.seed},
            {"validation_mcc", m.validation_mcc},
            {"combination", m.combination},
            {"parameters", m.model->parameters_to_json()}};
}

TrainedModel load_model(const nlohmann::json& j) {
    try {
        const int version = j.at("format_version").get<int>();
        if (version != kModelFormatVersion) {
            throw Error("parse", "unsupported model format version " + std::to_string(version));
        }
        TrainedModel m;
        m.family = parse_family(j.at("family").get<std::string>());
        m.hyperparameters = j.at("hyperparameters");
        m.seed = j.at("seed").get<std::uint64_t>();
        m.validation_mcc = j.at("validation_mcc").get<double>();
        m.combination = j.at("combination").get<std::size_t>();
        auto model = make_classifier(m.family, m.hyperparameters, TrainingOptions::from_json(j.at("options")));
        model->set_classes(j.at("classes").get<std::vector<int>>());
        model->parameters_from_json(j.at("parameters"));
        m.model = std::move(model);
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw Error("parse", std::string("malformed model file: ") + e.what());
    }
}

}  // namespace selectrade::classifiers
