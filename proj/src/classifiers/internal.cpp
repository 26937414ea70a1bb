#include "internal.hpp"

#include <algorithm>
#include <cmath>

namespace selectrade::classifiers::detail {

nlohmann::json matrix_to_json(const Matrix& m) {
    nlohmann::json data = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.size(); ++i) data.push_back(m.data()[i]);
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

Matrix matrix_from_json(const nlohmann::json& j) {
    const auto rows = j.at("rows").get<Eigen::Index>();
    const auto cols = j.at("cols").get<Eigen::Index>();
    const auto& data = j.at("data");
    if (static_cast<Eigen::Index>(data.size()) != rows * cols) {
        throw Error("parse", "matrix dump has " + std::to_string(data.size()) + " values, expected " +
                                 std::to_string(rows * cols));
    }
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = data[static_cast<std::size_t>(i)].get<double>();
    return m;
}

nlohmann::json vector_to_json(const Vector& v) {
    nlohmann::json data = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) data.push_back(v[i]);
    return data;
}

Vector vector_from_json(const nlohmann::json& j) {
    Vector v(static_cast<Eigen::Index>(j.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = j[static_cast<std::size_t>(i)].get<double>();
    return v;
}

std::vector<int> label_columns(std::span<const int> labels, std::span<const int> classes) {
    std::vector<int> out(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const auto it = std::find(classes.begin(), classes.end(), labels[i]);
        if (it == classes.end()) {
            throw Error("invalid_argument", "label " + std::to_string(labels[i]) + " outside the class universe");
        }
        out[i] = static_cast<int>(it - classes.begin());
    }
    return out;
}

void softmax_rows(Matrix& z) {
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
        auto row = z.row(i);
        const double mx = row.maxCoeff();
        row = (row.array() - mx).exp();
        row /= row.sum();
    }
}

Matrix glorot(Eigen::Index fan_out, Eigen::Index fan_in, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> u(-limit, limit);
    Matrix w(fan_out, fan_in);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = u(rng);
    return w;
}

Matrix dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, Rng& rng) {
    Matrix mask(rows, cols);
    if (rate <= 0.0) {
        mask.setOnes();
        return mask;
    }
    const double keep = 1.0 - rate;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = u(rng) < keep ? 1.0 / keep : 0.0;
    return mask;
}

std::size_t Adam::add(Eigen::Index rows, Eigen::Index cols) {
    m_.push_back(Matrix::Zero(rows, cols));
    v_.push_back(Matrix::Zero(rows, cols));
    return m_.size() - 1;
}

void Adam::update(std::size_t slot, Eigen::Ref<Matrix> param, const Matrix& grad) {
    const double lr = lr_ / (1.0 + decay_ * static_cast<double>(t_ - 1));
    auto& m = m_[slot];
    auto& v = v_[slot];
    m = beta1_ * m + (1.0 - beta1_) * grad;
    v = beta2_ * v + (1.0 - beta2_) * grad.cwiseProduct(grad);
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    const double step = lr * std::sqrt(bc2) / bc1;
    param.array() -= step * m.array() / (v.array().sqrt() + eps_);
}

double adam_decay_for(double learning_rate) {
    return std::abs(learning_rate - 1e-4) < 1e-12 ? 1e-6 : 1e-4;
}

BatchNorm::BatchNorm(Eigen::Index n)
    : gamma(Matrix::Ones(1, n)), beta(Matrix::Zero(1, n)), running_mean(Matrix::Zero(1, n)),
      running_var(Matrix::Ones(1, n)) {}

Matrix BatchNorm::forward_train(const Matrix& z, Cache& cache, double momentum, bool update_stats) {
    const double rows = static_cast<double>(z.rows());
    const Matrix mean = z.colwise().sum() / rows;
    Matrix centered = z.rowwise() - mean.row(0);
    const Matrix var = centered.array().square().colwise().sum() / rows;
    cache.inv_std = (var.array() + eps).rsqrt();
    cache.xhat = centered.array().rowwise() * cache.inv_std.row(0).array();
    if (update_stats) {
        if (!has_stats) {
            running_mean = mean;
            running_var = var;
            has_stats = true;
        } else {
            running_mean = momentum * running_mean + (1.0 - momentum) * mean;
            running_var = momentum * running_var + (1.0 - momentum) * var;
        }
    }
    Matrix y = cache.xhat.array().rowwise() * gamma.row(0).array();
    y.rowwise() += beta.row(0);
    return y;
}

Matrix BatchNorm::forward_infer(const Matrix& z) const {
    const Matrix scale = gamma.array() * (running_var.array() + eps).rsqrt();
    const Matrix shift = beta.array() - running_mean.array() * scale.array();
    Matrix y = z.array().rowwise() * scale.row(0).array();
    y.rowwise() += shift.row(0);
    return y;
}

Matrix BatchNorm::backward(const Matrix& dy, const Cache& cache, Matrix& dgamma, Matrix& dbeta) const {
    const double rows = static_cast<double>(dy.rows());
    dgamma = dy.cwiseProduct(cache.xhat).colwise().sum();
    dbeta = dy.colwise().sum();
    const Matrix dxhat = dy.array().rowwise() * gamma.row(0).array();
    const Matrix sum_dxhat = dxhat.colwise().sum();
    const Matrix sum_dxhat_xhat = dxhat.cwiseProduct(cache.xhat).colwise().sum();
    Matrix dz = rows * dxhat;
    dz.rowwise() -= sum_dxhat.row(0);
    dz -= (cache.xhat.array().rowwise() * sum_dxhat_xhat.row(0).array()).matrix();
    dz = dz.array().rowwise() * (cache.inv_std.row(0).array() / rows);
    return dz;
}

nlohmann::json BatchNorm::to_json() const {
    return {{"gamma", matrix_to_json(gamma)},
            {"beta", matrix_to_json(beta)},
            {"running_mean", matrix_to_json(running_mean)},
            {"running_var", matrix_to_json(running_var)},
            {"eps", eps}};
}

BatchNorm BatchNorm::from_json(const nlohmann::json& j) {
    BatchNorm bn;
    bn.gamma = matrix_from_json(j.at("gamma"));
    bn.beta = matrix_from_json(j.at("beta"));
    bn.running_mean = matrix_from_json(j.at("running_mean"));
    bn.running_var = matrix_from_json(j.at("running_var"));
    bn.eps = j.at("eps").get<double>();
    bn.has_stats = true;
    return bn;
}

double softmax_cross_entropy(Matrix& logits, std::span<const int> cols, std::span<const double> w, Matrix& dlogits) {
    const double rows = static_cast<double>(logits.rows());
    dlogits.resize(logits.rows(), logits.cols());
    double loss = 0.0;
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        auto row = logits.row(i);
        const double mx = row.maxCoeff();
        const double lse = mx + std::log((row.array() - mx).exp().sum());
        const int y = cols[static_cast<std::size_t>(i)];
        const double wi = w[static_cast<std::size_t>(i)];
        loss += wi * (lse - row[y]);
        row = (row.array() - lse).exp();
        dlogits.row(i) = (wi / rows) * row;
        dlogits(i, y) -= wi / rows;
    }
    return loss / rows;
}

}  // namespace selectrade::classifiers::detail
