#include "selectrade/classifiers/random_forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "internal.hpp"

namespace selectrade::classifiers {

namespace {

struct Builder {
    const Matrix& x;
    const std::vector<int>& col;
    const std::vector<double>& w;  // bootstrap count times sample weight
    std::size_t k;
    bool entropy;
    std::size_t mtry;
    int max_depth;
    detail::Rng& rng;

    double impurity(const std::vector<double>& sums, double total) const {
        if (total <= 0.0) return 0.0;
        double acc = 0.0;
        for (const double s : sums) {
            const double p = s / total;
            if (entropy) {
                if (p > 0.0) acc -= p * std::log2(p);
            } else {
                acc += p * p;
            }
        }
        return entropy ? acc : 1.0 - acc;
    }

    struct Split {
        int feature = -1;
        double threshold = 0.0;
        double score = -std::numeric_limits<double>::infinity();
    };

    Split best_split(const std::vector<std::size_t>& rows, const std::vector<double>& node_sums, double node_w) {
        const auto d = static_cast<std::size_t>(x.cols());
        std::vector<std::size_t> features(d);
        std::iota(features.begin(), features.end(), 0);
        Split best;
        std::vector<std::pair<double, std::size_t>> vals(rows.size());
        std::vector<double> left(k);
        std::vector<double> right(k);
        // Draw features without replacement; past mtry keep drawing only
        // while no valid split has been found.
        for (std::size_t drawn = 0; drawn < d; ++drawn) {
            if (drawn >= mtry && best.feature >= 0) break;
            std::uniform_int_distribution<std::size_t> pick(drawn, d - 1);
            std::swap(features[drawn], features[pick(rng)]);
            const std::size_t f = features[drawn];
            for (std::size_t r = 0; r < rows.size(); ++r) {
                vals[r] = {x(static_cast<Eigen::Index>(rows[r]), static_cast<Eigen::Index>(f)), rows[r]};
            }
            std::sort(vals.begin(), vals.end());
            if (vals.front().first == vals.back().first) continue;
            std::fill(left.begin(), left.end(), 0.0);
            right = node_sums;
            double wl = 0.0;
            for (std::size_t r = 0; r + 1 < vals.size(); ++r) {
                const std::size_t i = vals[r].second;
                left[static_cast<std::size_t>(col[i])] += w[i];
                right[static_cast<std::size_t>(col[i])] -= w[i];
                wl += w[i];
                if (vals[r].first == vals[r + 1].first) continue;
                const double wr = node_w - wl;
                const double score = -(wl * impurity(left, wl) + wr * impurity(right, wr));
                if (score > best.score) {
                    best.score = score;
                    best.feature = static_cast<int>(f);
                    double mid = 0.5 * (vals[r].first + vals[r + 1].first);
                    if (!(mid < vals[r + 1].first)) mid = vals[r].first;
                    best.threshold = mid;
                }
            }
        }
        return best;
    }

    RandomForest::Tree build(std::vector<std::size_t> root_rows) {
        RandomForest::Tree tree;
        struct Pending {
            std::vector<std::size_t> rows;
            int node;
            int depth;
        };
        std::vector<Pending> stack;
        tree.nodes.emplace_back();
        stack.push_back({std::move(root_rows), 0, 0});
        std::vector<double> sums(k);
        while (!stack.empty()) {
            Pending p = std::move(stack.back());
            stack.pop_back();
            std::fill(sums.begin(), sums.end(), 0.0);
            double total = 0.0;
            for (const auto i : p.rows) {
                sums[static_cast<std::size_t>(col[i])] += w[i];
                total += w[i];
            }
            const auto nonzero = std::count_if(sums.begin(), sums.end(), [](double s) { return s > 0.0; });
            Split split;
            if (nonzero > 1 && p.rows.size() >= 2 && (max_depth <= 0 || p.depth < max_depth)) {
                split = best_split(p.rows, sums, total);
            }
            if (split.feature < 0) {
                auto& node = tree.nodes[static_cast<std::size_t>(p.node)];
                node.value = static_cast<int>(tree.values.size());
                for (const double s : sums) tree.values.push_back(total > 0.0 ? s / total : 1.0 / static_cast<double>(k));
                continue;
            }
            std::vector<std::size_t> lrows;
            std::vector<std::size_t> rrows;
            for (const auto i : p.rows) {
                (x(static_cast<Eigen::Index>(i), split.feature) <= split.threshold ? lrows : rrows).push_back(i);
            }
            const int l = static_cast<int>(tree.nodes.size());
            tree.nodes.emplace_back();
            tree.nodes.emplace_back();
            auto& node = tree.nodes[static_cast<std::size_t>(p.node)];
            node.feature = split.feature;
            node.threshold = split.threshold;
            node.left = l;
            node.right = l + 1;
            stack.push_back({std::move(rrows), l + 1, p.depth + 1});
            stack.push_back({std::move(lrows), l, p.depth + 1});
        }
        return tree;
    }
};

}  // namespace

RandomForest::RandomForest(nlohmann::json hyper, TrainingOptions options) : Classifier(std::move(hyper), options) {
    n_trees_ = hyper_.value("n_trees", 500);
    const auto criterion = hyper_.value("criterion", std::string("gini"));
    const auto features = hyper_.value("max_features", std::string("sqrt"));
    if (n_trees_ < 1) throw Error("invalid_config", "random forest needs at least one tree");
    if (criterion != "gini" && criterion != "entropy") throw Error("invalid_config", "unknown split criterion '" + criterion + "'");
    if (features != "sqrt" && features != "log2") throw Error("invalid_config", "unknown max_features '" + features + "'");
    entropy_ = criterion == "entropy";
    log2_features_ = features == "log2";
}

void RandomForest::fit(const FitInput& input, std::uint64_t seed) {
    check_input(input);
    const auto n = static_cast<std::size_t>(input.features.rows());
    const auto d = static_cast<double>(input.features.cols());
    const auto mtry = static_cast<std::size_t>(std::max(1.0, std::floor(log2_features_ ? std::log2(d) : std::sqrt(d))));
    const std::vector<int> col = detail::label_columns(input.labels, classes_);
    const std::size_t draws = options_.rf_max_samples > 0 ? std::min(n, options_.rf_max_samples) : n;
    trees_.clear();
    trees_.reserve(static_cast<std::size_t>(n_trees_));
    std::vector<double> w(n);
    std::vector<std::size_t> counts(n);
    for (int t = 0; t < n_trees_; ++t) {
        detail::Rng rng(mix_seed(seed, static_cast<std::uint64_t>(t)));
        std::fill(counts.begin(), counts.end(), 0);
        std::uniform_int_distribution<std::size_t> pick(0, n - 1);
        for (std::size_t s = 0; s < draws; ++s) ++counts[pick(rng)];
        std::vector<std::size_t> rows;
        for (std::size_t i = 0; i < n; ++i) {
            w[i] = static_cast<double>(counts[i]) * input.weights[i];
            if (w[i] > 0.0) rows.push_back(i);
        }
        Builder b{input.features, col, w, classes_.size(), entropy_, mtry, options_.rf_max_depth, rng};
        trees_.push_back(b.build(std::move(rows)));
    }
}

Matrix RandomForest::predict_proba(const Matrix& features, std::span<const std::size_t>) const {
    if (trees_.empty()) throw Error("not_fitted", "random forest is not fitted");
    const auto k = static_cast<Eigen::Index>(classes_.size());
    Matrix out = Matrix::Zero(features.rows(), k);
    for (const auto& tree : trees_) {
        for (Eigen::Index i = 0; i < features.rows(); ++i) {
            std::size_t node = 0;
            while (tree.nodes[node].feature >= 0) {
                const auto& nd = tree.nodes[node];
                node = static_cast<std::size_t>(features(i, nd.feature) <= nd.threshold ? nd.left : nd.right);
            }
            const double* v = tree.values.data() + tree.nodes[node].value;
            for (Eigen::Index c = 0; c < k; ++c) out(i, c) += v[c];
        }
    }
    out /= static_cast<double>(trees_.size());
    return out;
}

nlohmann::json RandomForest::parameters_to_json() const {
    nlohmann::json trees = nlohmann::json::array();
    for (const auto& t : trees_) {
        std::vector<int> feature;
        std::vector<double> threshold;
        std::vector<int> left;
        std::vector<int> right;
        std::vector<int> value;
        for (const auto& n : t.nodes) {
            feature.push_back(n.feature);
            threshold.push_back(n.threshold);
            left.push_back(n.left);
            right.push_back(n.right);
            value.push_back(n.value);
        }
        trees.push_back({{"feature", feature},
                         {"threshold", threshold},
                         {"left", left},
                         {"right", right},
                         {"value", value},
                         {"leaf_values", t.values}});
    }
    return {{"trees", std::move(trees)}};
}

void RandomForest::parameters_from_json(const nlohmann::json& j) {
    trees_.clear();
    for (const auto& jt : j.at("trees")) {
        Tree t;
        const auto feature = jt.at("feature").get<std::vector<int>>();
        const auto threshold = jt.at("threshold").get<std::vector<double>>();
        const auto left = jt.at("left").get<std::vector<int>>();
        const auto right = jt.at("right").get<std::vector<int>>();
        const auto value = jt.at("value").get<std::vector<int>>();
        t.values = jt.at("leaf_values").get<std::vector<double>>();
        for (std::size_t i = 0; i < feature.size(); ++i) t.nodes.push_back({feature[i], threshold[i], left[i], right[i], value[i]});
        trees_.push_back(std::move(t));
    }
}

}  // namespace selectrade::classifiers
