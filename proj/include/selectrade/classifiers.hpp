#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "selectrade/common.hpp"

namespace selectrade::classifiers {

enum class Family { logistic, random_forest, feed_forward, lstm };

std::string to_string(Family family);
Family parse_family(std::string_view text);

/// Training inputs. `classes` is the full label universe in ascending order;
/// probability columns follow it even if a class is missing from `labels`.
/// `stream_starts` marks rows where a new chronological stream begins (a new
/// instrument); row 0 is always a start. Only the recurrent family uses it.
struct FitInput {
    const Matrix& features;
    std::span<const int> labels;
    std::span<const double> weights;
    std::span<const int> classes;
    std::span<const std::size_t> stream_starts = {};
};

/// Settings shared by every combination of a grid (not searched over).
struct TrainingOptions {
    // neural families
    int epochs = 20;
    int batch_size = 256;
    double dropout = 0.2;
    double l2 = 1e-4;
    double bn_momentum = 0.99;
    int sequence_length = 48;
    // random forest memory guards; 0 means unlimited
    std::size_t rf_max_samples = 0;
    int rf_max_depth = 0;
    // stochastic logistic solver
    int logistic_batch_size = 256;

    nlohmann::json to_json() const;
    static TrainingOptions from_json(const nlohmann::json& j);
};

class Classifier {
public:
    virtual ~Classifier() = default;

    virtual Family family() const = 0;
    virtual void fit(const FitInput& input, std::uint64_t seed) = 0;
    /// Rows of probabilities over classes(); deterministic after fit.
    virtual Matrix predict_proba(const Matrix& features, std::span<const std::size_t> stream_starts = {}) const = 0;
    /// Fitted parameters only; hyperparameters are stored by the caller.
    virtual nlohmann::json parameters_to_json() const = 0;
    virtual void parameters_from_json(const nlohmann::json& j) = 0;

    const std::vector<int>& classes() const { return classes_; }
    const nlohmann::json& hyperparameters() const { return hyper_; }
    const TrainingOptions& options() const { return options_; }
    void set_classes(std::vector<int> classes) { classes_ = std::move(classes); }

protected:
    Classifier(nlohmann::json hyper, TrainingOptions options) : hyper_(std::move(hyper)), options_(options) {}

    /// Checks shapes, finiteness and the class count; fills classes_.
    void check_input(const FitInput& input, std::size_t min_rows = 2);

    std::vector<int> classes_;
    nlohmann::json hyper_;
    TrainingOptions options_;
};

std::unique_ptr<Classifier> make_classifier(Family family, const nlohmann::json& hyperparameters,
                                            const TrainingOptions& options = {});

/// Arg-max labels of a probability matrix (first column wins ties).
std::vector<int> predict_labels(const Matrix& proba, std::span<const int> classes);

/// The 12 combinations searched for a family, in declared order. For the
/// neural families `architectures` may replace the default four layouts.
std::vector<nlohmann::json> default_grid(Family family, const std::vector<std::vector<int>>& architectures = {});

struct TrainedModel {
    Family family = Family::logistic;
    nlohmann::json hyperparameters;
    std::uint64_t seed = 0;
    double validation_mcc = 0.0;
    std::size_t combination = 0;
    std::shared_ptr<const Classifier> model;
};

/// Validation rows. When `score_mask` is given only the marked rows count
/// towards MCC, so a recurrent model can be fed earlier rows as context.
struct ValidationInput {
    const Matrix& features;
    std::span<const int> labels;
    std::span<const std::size_t> stream_starts = {};
    std::span<const bool> score_mask = {};
};

struct GridResult {
    TrainedModel best;
    std::vector<double> mcc;           ///< per combination; NaN on failure
    std::vector<std::string> failures;  ///< per combination; empty on success
};

/// Trains every combination, scores multiclass MCC on the validation rows and
/// keeps the first best. Combination i trains with mix_seed(seed, i).
/// `jobs` > 1 trains combinations on a worker pool.
GridResult grid_search(Family family, const std::vector<nlohmann::json>& grid, const FitInput& train,
                       const ValidationInput& validation, std::uint64_t seed, const TrainingOptions& options = {},
                       int jobs = 1);

/// Versioned JSON dump: family, hyperparameters, options, classes, seed and
/// fitted parameters. Doubles round-trip exactly.
nlohmann::json save_model(const TrainedModel& model);
TrainedModel load_model(const nlohmann::json& j);

inline constexpr int kModelFormatVersion = 1;

}  // namespace selectrade::classifiers
