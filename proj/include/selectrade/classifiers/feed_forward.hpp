#pragma once

#include <memory>
#include <vector>

#include "selectrade/classifiers.hpp"

namespace selectrade::classifiers {

/// Multilayer perceptron: each hidden layer is dense -> batch norm -> ReLU ->
/// dropout, followed by a dense softmax output. Loss is the weighted
/// cross-entropy averaged over the batch plus l2 * |W|^2 on hidden kernels.
/// Trained with Adam, learning rate lr / (1 + decay * step).
///
/// Hyperparameters: hidden (list of layer widths), learning_rate.
class FeedForward final : public Classifier {
public:
    FeedForward(nlohmann::json hyper, TrainingOptions options);
    ~FeedForward() override;

    Family family() const override { return Family::feed_forward; }
    void fit(const FitInput& input, std::uint64_t seed) override;
    Matrix predict_proba(const Matrix& features, std::span<const std::size_t> stream_starts = {}) const override;
    nlohmann::json parameters_to_json() const override;
    void parameters_from_json(const nlohmann::json& j) override;

    /// Random initial weights for `inputs` features and the given classes.
    void initialize(Eigen::Index inputs, std::vector<int> classes, std::uint64_t seed);

    /// Trainable parameters flattened layer by layer (kernel, bias, gamma,
    /// beta; then output kernel and bias).
    Vector flat_parameters() const;
    void set_flat_parameters(const Vector& theta);

    /// Training-mode loss (batch statistics, dropout masks drawn from
    /// `dropout_seed`) and its gradient with respect to flat_parameters().
    /// Running statistics are left untouched.
    double loss_and_gradient(const Matrix& x, std::span<const int> labels, std::span<const double> weights,
                             std::uint64_t dropout_seed, Vector& gradient);

    const std::vector<double>& epoch_losses() const { return epoch_losses_; }

private:
    struct Net;
    std::vector<int> hidden_;
    double learning_rate_;
    std::unique_ptr<Net> net_;
    std::vector<double> epoch_losses_;
};

}  // namespace selectrade::classifiers
