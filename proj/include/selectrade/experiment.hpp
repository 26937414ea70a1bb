#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "selectrade/backtest.hpp"
#include "selectrade/classifiers.hpp"
#include "selectrade/features.hpp"
#include "selectrade/labeling.hpp"
#include "selectrade/market_data.hpp"
#include "selectrade/selective.hpp"
#include "selectrade/splits.hpp"

namespace selectrade::experiment {

inline constexpr const char* kVersion = "0.3.0";

struct DataSource {
    enum class Kind { ticks, bars, synthetic };
    Kind kind = Kind::synthetic;
    std::string path;  ///< resolved against the config file's directory
    market_data::SyntheticConfig synthetic;
    std::optional<std::uint64_t> seed;  ///< synthetic only; default derives from the root seed
};

struct InstrumentConfig {
    market_data::Instrument instrument;
    DataSource source;
};

/// Parsed experiment configuration. The JSON schema is documented in
/// docs/config.md; `to_json` emits the fully defaulted form that is hashed
/// into the manifest.
struct ExperimentConfig {
    std::uint64_t seed = 0;
    std::string output_dir = "out";
    int jobs = 1;
    TimeMs bar_interval = market_data::kDefaultBarInterval;
    std::vector<InstrumentConfig> instruments;
    std::vector<features::FeatureSetLevel> feature_sets{features::FeatureSetLevel::FS1};
    std::vector<labeling::LabelMode> label_modes{labeling::LabelMode::binary};
    std::vector<classifiers::Family> families{classifiers::Family::logistic};
    std::vector<double> multipliers{0.3, 0.6, 0.9, 1.2};
    std::size_t vol_window = 1440;
    splits::PlanOptions walk_forward;
    std::size_t max_folds = 0;  ///< 0 = every fold the data allows
    double delta = 0.001;
    std::vector<double> rstar_grid;
    std::vector<double> slippage;
    double risk_budget = backtest::kDefaultRiskBudget;
    std::size_t sizing_window = backtest::kSizingWindow;
    features::FeatureOptions feature_options;
    classifiers::TrainingOptions training;
    std::map<classifiers::Family, std::vector<std::vector<int>>> architectures;
    std::string base_dir;  ///< directory of the config file; not part of the hash

    /// Requires "seed" and at least one instrument with tick_size and
    /// point_value. Relative paths resolve against `base_dir`.
    static ExperimentConfig from_json(const nlohmann::json& j, const std::string& base_dir = "");
    nlohmann::json to_json() const;
    /// Structural checks that need no file system access.
    void validate_shape() const;
    /// validate_shape plus a check that every referenced data file exists.
    void validate() const;
    std::string resolve_path(const std::string& path) const;
    /// FNV-1a of the canonical JSON form without output_dir and jobs (which
    /// do not affect results), as 16 hex digits.
    std::string hash() const;
};

ExperimentConfig load_config(const std::string& path, std::optional<std::uint64_t> seed_override = std::nullopt);

struct InstrumentData {
    market_data::Instrument instrument;
    std::vector<market_data::Bar> bars;
};

/// Synthetic ticks for one configured instrument.
std::vector<market_data::Tick> synthesize(const InstrumentConfig& ic, std::uint64_t root_seed);

/// Bars for every instrument (read, ingested from ticks, or generated).
std::vector<InstrumentData> load_data(const ExperimentConfig& config);

/// First bar index where every configured feature set, label mode and the
/// sizing window are warm.
std::size_t first_usable_row(const ExperimentConfig& config);

/// Per-instrument fold ranges in absolute bar indices.
struct Schedule {
    std::vector<std::size_t> row0;
    std::vector<std::vector<splits::Fold>> folds;  ///< [fold][instrument]
};

Schedule make_schedule(const ExperimentConfig& config, const std::vector<InstrumentData>& data);

/// One (family, feature set, label mode, fold) unit of work.
struct Task {
    classifiers::Family family = classifiers::Family::logistic;
    features::FeatureSetLevel feature_set = features::FeatureSetLevel::FS1;
    labeling::LabelMode label_mode = labeling::LabelMode::binary;
    std::size_t fold = 0;

    /// `<family>/<FS>/<mode>`
    std::string group_dir() const;
    /// `<family>/<FS>/<mode>/fold_<k>`
    std::string dir() const;
    std::uint64_t seed(std::uint64_t root) const;
};

/// Everything fitted on training and validation rows for one task.
struct FoldModel {
    classifiers::TrainedModel model;
    double theta = 0.0;
    double rstar = 0.0;
    bool theta_fallback = false;
    std::optional<double> multiplier;
    std::vector<double> lambdas;  ///< Box-Cox exponent per instrument
    nlohmann::json selection;     ///< grid scores, thresholds and multiplier details
};

/// Trains and selects thresholds for one task. Only bars up to the last
/// validation row's successor are read, so removing later bars from `data`
/// leaves the result unchanged. The final validation row is dropped since
/// its label looks at the first test bar.
FoldModel fit_fold(const ExperimentConfig& config, const std::vector<InstrumentData>& data,
                   const std::vector<splits::Fold>& folds, const Task& task);

struct PredictionRow {
    std::string symbol;
    std::size_t row = 0;  ///< bar index within the instrument
    TimeMs time = 0;
    int label = 0;
    int predicted = 0;
    double kappa = 0.0;
    bool accepted = false;
    std::vector<double> proba;
};

/// Applies a fitted task to the test ranges (or validation ranges when
/// `validation` is true).
std::vector<PredictionRow> predict(const ExperimentConfig& config, const std::vector<InstrumentData>& data,
                                   const std::vector<splits::Fold>& folds, const Task& task, const FoldModel& fm,
                                   bool validation = false);

void write_predictions(std::ostream& out, const std::vector<PredictionRow>& rows, const std::vector<int>& classes);
std::vector<PredictionRow> read_predictions(std::istream& in);
std::vector<PredictionRow> read_predictions_file(const std::string& path);

struct TaskOutcome {
    Task task;
    bool ok = false;
    std::string error;
    nlohmann::json selection;
};

/// Fits every task and writes model.json, selection.json and the
/// validation/test prediction files; also writes manifest.json.
std::vector<TaskOutcome> train_stage(const ExperimentConfig& config, const std::vector<InstrumentData>& data);

struct EvaluationRow {
    Task task;
    std::size_t rows = 0;
    double nonselective_accuracy = 0.0;
    double selective_accuracy = 0.0;
    double coverage = 0.0;
    double theta = 0.0;
    double rstar = 0.0;
    std::optional<double> multiplier;
    double nonselective_mcc = 0.0;
    double selective_mcc = 0.0;
    std::optional<double> buy_sell_mcc;
    std::vector<selective::CurvePoint> curve;  ///< test-set θ sweep
};

/// Reads each trained task's predictions and writes classification reports
/// plus the top-level accuracy_coverage.csv.
std::vector<EvaluationRow> evaluate_stage(const ExperimentConfig& config);

struct BacktestOutcome {
    std::vector<backtest::SharpeRow> sharpe;  ///< one row per task group, strategy and slippage
    /// Signed contracts per (task dir, strategy, symbol) over the test bars.
    std::map<std::string, std::vector<std::int64_t>> positions;
};

/// Replays test predictions as trading strategies over every slippage
/// multiple; writes positions, equity curves and Sharpe tables.
BacktestOutcome backtest_stage(const ExperimentConfig& config, const std::vector<InstrumentData>& data);

struct RunResult {
    std::vector<TaskOutcome> tasks;
    std::vector<EvaluationRow> evaluation;
    BacktestOutcome backtest;
};

/// Validates, loads data, then runs train, evaluate and backtest.
RunResult run(const ExperimentConfig& config);

/// Writes summary.md next to the manifest and returns its text.
std::string report(const std::string& manifest_path);

/// Writes the per-instrument feature matrices (λ fitted on the first fold's
/// training bars) and returns the file paths.
std::vector<std::string> features_stage(const ExperimentConfig& config, const std::vector<InstrumentData>& data);

}  // namespace selectrade::experiment
