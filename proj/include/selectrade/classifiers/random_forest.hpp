#pragma once

#include <vector>

#include "selectrade/classifiers.hpp"

namespace selectrade::classifiers {

/// Bagged CART trees with weighted gini or entropy impurity, grown until
/// leaves are pure (minimum split size 2). Each split draws a fresh random
/// feature subset of size sqrt(d) or log2(d).
///
/// Hyperparameters: n_trees, criterion ("gini" | "entropy"), max_features
/// ("sqrt" | "log2").
class RandomForest final : public Classifier {
public:
    RandomForest(nlohmann::json hyper, TrainingOptions options);

    Family family() const override { return Family::random_forest; }
    void fit(const FitInput& input, std::uint64_t seed) override;
    Matrix predict_proba(const Matrix& features, std::span<const std::size_t> stream_starts = {}) const override;
    nlohmann::json parameters_to_json() const override;
    void parameters_from_json(const nlohmann::json& j) override;

    struct Node {
        int feature = -1;  // -1 marks a leaf
        double threshold = 0.0;
        int left = -1;
        int right = -1;
        int value = -1;  // offset into the leaf distribution table
    };
    struct Tree {
        std::vector<Node> nodes;
        std::vector<double> values;  // K entries per leaf
    };

    std::size_t tree_count() const { return trees_.size(); }

private:
    int n_trees_;
    bool entropy_;
    bool log2_features_;
    std::vector<Tree> trees_;
};

}  // namespace selectrade::classifiers
