#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "selectrade/common.hpp"

namespace selectrade::selective {

/// Per-sample confidence (maximum class probability), prediction, truth.
/// The 0/1 loss is derived: 1 iff predicted != truth.
struct ScoredSample {
    double kappa = 0.0;
    int predicted = 0;
    int truth = 0;

    int loss() const { return predicted != truth ? 1 : 0; }
};

using ScoredSet = std::vector<ScoredSample>;

/// Builds scored samples from probability rows whose columns follow
/// `classes`; ties in the arg-max resolve to the first column.
ScoredSet score(const Matrix& proba, std::span<const int> classes, std::span<const int> truth);

struct SgrConfig {
    double delta = 0.001;
    double target_risk = 0.1;  ///< r*

    void validate() const;
};

struct SelectiveResult {
    double theta = 0.0;
    double bound = 1.0;  ///< b* of the final iteration
    std::vector<bool> accepted;
    double coverage = 0.0;
    std::optional<double> risk;  ///< empirical selective risk, empty when nothing is accepted
};

/// P(X <= k) for X ~ Binomial(m, b), summed in log space.
double binomial_tail(std::int64_t m, std::int64_t k, double b);

/// Largest b with binomial_tail(m, k, b) >= delta: the bisection root of
/// binomial_tail(m, k, b) = delta, returned from the conservative side.
double bstar_count(std::int64_t losses, double delta, std::int64_t m);

/// Same bound with the loss count recovered as ceil(m * r_hat).
double bstar(double r_hat, double delta, std::int64_t m);

/// Selection with guaranteed risk: binary search over the
/// ascending-confidence order for the lowest threshold whose risk bound
/// stays under r*.
SelectiveResult sgr(const ScoredSet& scored, const SgrConfig& config);

struct RiskCoverage {
    std::optional<double> risk;
    double coverage = 0.0;
    std::size_t accepted = 0;
};

RiskCoverage selective_risk_and_coverage(const ScoredSet& scored, double theta);

std::vector<bool> accept_flags(const ScoredSet& scored, double theta);

/// Default r* sweep: 0.05, 0.10, ..., 0.95.
std::vector<double> default_rstar_grid();

struct ThresholdChoice {
    double theta = 0.0;
    double rstar = 0.0;
    double coverage = 1.0;
    double mcc = 0.0;
    bool fallback = false;  ///< true when every projection was degenerate
};

/// Runs SGR for every r* and keeps the threshold whose accepted projection has
/// the highest MCC; ties go to larger coverage, then to grid order.
ThresholdChoice select_threshold_by_mcc(const ScoredSet& validation, std::span<const double> rstar_grid,
                                        std::span<const int> classes, double delta = 0.001);

struct MultiplierResult {
    double multiplier = 0.0;
    double buy_sell_mcc = 0.0;
};

/// Arg-max of buy/sell MCC; ties go to the smaller multiplier.
double select_multiplier(std::span<const MultiplierResult> results);

struct CurvePoint {
    double coverage = 0.0;
    double accuracy = 0.0;
    double theta = 0.0;
    std::optional<double> rstar;
    double bstar = 1.0;
};

/// Accuracy/coverage step curve over every distinct confidence value, from
/// full coverage down to the most confident group.
std::vector<CurvePoint> accuracy_coverage_curve(const ScoredSet& scored, double delta = 0.001);

/// One point per r* from running SGR.
std::vector<CurvePoint> sgr_sweep(const ScoredSet& scored, std::span<const double> rstar_grid, double delta = 0.001);

/// CSV `coverage,accuracy,theta,rstar,bstar`; empty rstar for θ-sweep points.
void write_curve_csv(std::ostream& out, std::span<const CurvePoint> points);

}  // namespace selectrade::selective
