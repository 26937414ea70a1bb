#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "selectrade/common.hpp"

namespace testing {

using selectrade::Matrix;

struct Dataset {
    Matrix x;
    std::vector<int> y;
    std::vector<double> w;
};

/// Two Gaussian blobs in `dims` dimensions whose means are `separation`
/// standard deviations apart along the first axis.
inline Dataset two_blobs(std::size_t n, std::size_t dims, double separation, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    Dataset d;
    d.x.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dims));
    for (std::size_t i = 0; i < n; ++i) {
        const int label = i % 2 == 0 ? -1 : 1;
        d.y.push_back(label);
        d.w.push_back(1.0);
        for (std::size_t j = 0; j < dims; ++j) d.x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = nd(rng);
        d.x(static_cast<Eigen::Index>(i), 0) += label * separation / 2.0;
    }
    return d;
}

inline double accuracy(const std::vector<int>& truth, const std::vector<int>& pred) {
    std::size_t ok = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) ok += truth[i] == pred[i];
    return static_cast<double>(ok) / static_cast<double>(truth.size());
}

inline bool rows_on_simplex(const Matrix& p, double tol = 1e-6) {
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
        if ((p.row(i).array() < 0.0).any()) return false;
        if (std::abs(p.row(i).sum() - 1.0) > tol) return false;
    }
    return true;
}

}  // namespace testing
