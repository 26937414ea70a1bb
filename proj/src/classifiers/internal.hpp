#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include <json.hpp>

#include "selectrade/common.hpp"

namespace selectrade::classifiers::detail {

using Rng = std::mt19937_64;

nlohmann::json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const nlohmann::json& j);
nlohmann::json vector_to_json(const Vector& v);
Vector vector_from_json(const nlohmann::json& j);

/// Column index of each label within `classes`.
std::vector<int> label_columns(std::span<const int> labels, std::span<const int> classes);

/// Row-wise softmax in place.
void softmax_rows(Matrix& z);

/// Glorot-uniform initialisation of a fan_out x fan_in matrix.
Matrix glorot(Eigen::Index fan_out, Eigen::Index fan_in, Rng& rng);

/// Inverted-dropout mask (entries 0 or 1/(1-rate)).
Matrix dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, Rng& rng);

/// Adam with inverse-time learning-rate decay lr / (1 + decay * t).
class Adam {
public:
    Adam(double lr, double decay) : lr_(lr), decay_(decay) {}

    /// Registers a parameter block and returns its slot.
    std::size_t add(Eigen::Index rows, Eigen::Index cols);
    void begin_step() { ++t_; }
    void update(std::size_t slot, Eigen::Ref<Matrix> param, const Matrix& grad);

private:
    double lr_;
    double decay_;
    double beta1_ = 0.9;
    double beta2_ = 0.999;
    double eps_ = 1e-7;
    long t_ = 0;
    std::vector<Matrix> m_;
    std::vector<Matrix> v_;
};

/// Learning-rate decay tied to the base rate.
double adam_decay_for(double learning_rate);

/// Batch normalisation over rows. Running statistics start from the first
/// training batch and then follow an exponential average.
struct BatchNorm {
    Matrix gamma;  // 1 x n
    Matrix beta;
    Matrix running_mean;
    Matrix running_var;
    bool has_stats = false;
    double eps = 1e-3;

    struct Cache {
        Matrix xhat;
        Matrix inv_std;
    };

    explicit BatchNorm(Eigen::Index n = 0);
    Matrix forward_train(const Matrix& z, Cache& cache, double momentum, bool update_stats);
    Matrix forward_infer(const Matrix& z) const;
    /// Returns dL/dz and fills the parameter gradients.
    Matrix backward(const Matrix& dy, const Cache& cache, Matrix& dgamma, Matrix& dbeta) const;

    nlohmann::json to_json() const;
    static BatchNorm from_json(const nlohmann::json& j);
};

/// Weighted cross-entropy sum(w_i * CE_i) / rows and its gradient with
/// respect to the logits (softmax applied to `logits` in place).
double softmax_cross_entropy(Matrix& logits, std::span<const int> cols, std::span<const double> w, Matrix& dlogits);

}  // namespace selectrade::classifiers::detail
