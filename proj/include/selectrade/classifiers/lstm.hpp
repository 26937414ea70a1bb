#pragma once

#include <memory>
#include <vector>

#include "selectrade/classifiers.hpp"

namespace selectrade::classifiers {

/// Stateful recurrent classifier: one or two LSTM layers, then batch norm,
/// dropout and a dense softmax giving a prediction at every timestep.
///
/// Training walks each stream in time order. A stream is cut into parallel
/// lanes (batch_size / sequence_length of them) that advance together in
/// sequence_length-step chunks; hidden and cell states pass from one chunk to
/// the next and gradients are truncated at chunk boundaries. States reset at
/// each new stream and each epoch.
///
/// Hyperparameters: hidden (LSTM widths), learning_rate.
class Lstm final : public Classifier {
public:
    Lstm(nlohmann::json hyper, TrainingOptions options);
    ~Lstm() override;

    Family family() const override { return Family::lstm; }
    void fit(const FitInput& input, std::uint64_t seed) override;
    /// Runs every stream from a zeroed state; does not touch the carried state.
    Matrix predict_proba(const Matrix& features, std::span<const std::size_t> stream_starts = {}) const override;
    nlohmann::json parameters_to_json() const override;
    void parameters_from_json(const nlohmann::json& j) override;

    /// Zeroes the carried state used by predict_step.
    void reset_state();
    /// Consumes `rows` in order, continuing from the carried state.
    Matrix predict_step(const Matrix& rows);

    const std::vector<double>& epoch_losses() const { return epoch_losses_; }

private:
    struct Net;
    std::vector<int> hidden_;
    double learning_rate_;
    std::unique_ptr<Net> net_;
    std::vector<Matrix> state_h_;
    std::vector<Matrix> state_c_;
    std::vector<double> epoch_losses_;
};

}  // namespace selectrade::classifiers
