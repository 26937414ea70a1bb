#pragma once

#include <vector>

#include "selectrade/classifiers.hpp"

namespace selectrade::classifiers {

/// Class-weighted logistic regression. Two classes use a sigmoid on one
/// coefficient row, more classes a softmax over one row per class. The
/// objective is
///   sum_i w_i CE_i / W + |coef|^2 / (2 C W),   W = sum_i w_i,
/// so integer weights and duplicated rows give the same optimum. Intercepts
/// are not penalised.
///
/// Hyperparameters: max_iterations, solver ("full_batch" = L-BFGS with a
/// backtracking line search, "stochastic" = shuffled mini-batch gradient
/// steps with per-epoch acceptance) and C.
class Logistic final : public Classifier {
public:
    Logistic(nlohmann::json hyper, TrainingOptions options);

    Family family() const override { return Family::logistic; }
    void fit(const FitInput& input, std::uint64_t seed) override;
    Matrix predict_proba(const Matrix& features, std::span<const std::size_t> stream_starts = {}) const override;
    nlohmann::json parameters_to_json() const override;
    void parameters_from_json(const nlohmann::json& j) override;

    /// Objective after each outer iteration (L-BFGS step or epoch).
    const std::vector<double>& loss_history() const { return loss_history_; }
    const Matrix& coefficients() const { return coef_; }
    const Vector& intercepts() const { return intercept_; }

private:
    int max_iterations_;
    std::string solver_;
    double c_;
    Matrix coef_;       // rows: 1 (binary) or K
    Vector intercept_;  // size 1 or K
    std::vector<double> loss_history_;
};

}  // namespace selectrade::classifiers
