#include "selectrade/classifiers/logistic.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>

#include "internal.hpp"

namespace selectrade::classifiers {

namespace {

// Parameters packed as [coef row-major | intercepts].
struct Problem {
    const Matrix& x;
    std::vector<int> col;  // class column per row
    Vector w;
    double w_total;
    double c;
    Eigen::Index rows_out;  // 1 for sigmoid, K for softmax

    Eigen::Index n_params() const { return rows_out * (x.cols() + 1); }

    // Objective and gradient over `idx` (all rows when empty); the data term
    // is scaled by w_total / (sum of weights over idx).
    double eval(const Vector& theta, Vector& grad, const std::vector<std::size_t>* idx) const {
        const Eigen::Index d = x.cols();
        Eigen::Map<const Matrix> coef(theta.data(), rows_out, d);
        Eigen::Map<const Vector> bias(theta.data() + rows_out * d, rows_out);
        grad.setZero(n_params());
        Eigen::Map<Matrix> gcoef(grad.data(), rows_out, d);
        Eigen::Map<Vector> gbias(grad.data() + rows_out * d, rows_out);

        Matrix xs;
        const Matrix* xp = &x;
        Vector ws;
        std::vector<int> cs;
        if (idx) {
            xs.resize(static_cast<Eigen::Index>(idx->size()), d);
            ws.resize(static_cast<Eigen::Index>(idx->size()));
            cs.resize(idx->size());
            for (std::size_t r = 0; r < idx->size(); ++r) {
                xs.row(static_cast<Eigen::Index>(r)) = x.row(static_cast<Eigen::Index>((*idx)[r]));
                ws[static_cast<Eigen::Index>(r)] = w[static_cast<Eigen::Index>((*idx)[r])];
                cs[r] = col[(*idx)[r]];
            }
            xp = &xs;
        }
        const Vector& wv = idx ? ws : w;
        const std::vector<int>& cv = idx ? cs : col;
        const double wsub = wv.sum();
        const double scale = 1.0 / wsub;

        Matrix z = (*xp) * coef.transpose();
        z.rowwise() += bias.transpose();
        double data_loss = 0.0;
        Matrix dz(z.rows(), z.cols());
        if (rows_out == 1) {
            for (Eigen::Index i = 0; i < z.rows(); ++i) {
                const double zi = z(i, 0);
                const double y = cv[static_cast<std::size_t>(i)] == 1 ? 1.0 : 0.0;
                const double softplus = zi > 0 ? zi + std::log1p(std::exp(-zi)) : std::log1p(std::exp(zi));
                data_loss += wv[i] * (softplus - y * zi);
                const double p = 1.0 / (1.0 + std::exp(-zi));
                dz(i, 0) = wv[i] * (p - y);
            }
        } else {
            for (Eigen::Index i = 0; i < z.rows(); ++i) {
                auto row = z.row(i);
                const double mx = row.maxCoeff();
                const double lse = mx + std::log((row.array() - mx).exp().sum());
                const int yi = cv[static_cast<std::size_t>(i)];
                data_loss += wv[i] * (lse - row[yi]);
                dz.row(i) = wv[i] * (row.array() - lse).exp();
                dz(i, yi) -= wv[i];
            }
        }
        gcoef = scale * dz.transpose() * (*xp);
        gbias = scale * dz.colwise().sum().transpose();
        const double reg = 1.0 / (c * w_total);
        gcoef += reg * coef;
        return scale * data_loss + 0.5 * reg * coef.squaredNorm();
    }
};

void lbfgs(const Problem& prob, Vector& theta, int max_iter, std::vector<double>& history) {
    constexpr int kMemory = 10;
    std::deque<Vector> s_hist;
    std::deque<Vector> y_hist;
    Vector g(prob.n_params());
    double f = prob.eval(theta, g, nullptr);
    Vector g_new(prob.n_params());
    for (int it = 0; it < max_iter; ++it) {
        if (g.lpNorm<Eigen::Infinity>() < 1e-9) break;
        // two-loop recursion
        Vector q = g;
        std::vector<double> alpha(s_hist.size());
        for (std::size_t k = s_hist.size(); k-- > 0;) {
            alpha[k] = s_hist[k].dot(q) / y_hist[k].dot(s_hist[k]);
            q -= alpha[k] * y_hist[k];
        }
        if (!s_hist.empty()) {
            q *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
        } else {
            q /= std::max(1.0, g.norm());
        }
        for (std::size_t k = 0; k < s_hist.size(); ++k) {
            const double beta = y_hist[k].dot(q) / y_hist[k].dot(s_hist[k]);
            q += (alpha[k] - beta) * s_hist[k];
        }
        Vector dir = -q;
        double slope = g.dot(dir);
        if (!(slope < 0.0)) {
            s_hist.clear();
            y_hist.clear();
            dir = -g / std::max(1.0, g.norm());
            slope = g.dot(dir);
        }
        double step = 1.0;
        bool accepted = false;
        Vector trial;
        double f_new = f;
        for (int ls = 0; ls < 50; ++ls) {
            trial = theta + step * dir;
            f_new = prob.eval(trial, g_new, nullptr);
            if (std::isfinite(f_new) && f_new <= f + 1e-4 * step * slope) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;
        Vector s = trial - theta;
        Vector y = g_new - g;
        if (s.dot(y) > 1e-12 * y.squaredNorm()) {
            s_hist.push_back(std::move(s));
            y_hist.push_back(std::move(y));
            if (static_cast<int>(s_hist.size()) > kMemory) {
                s_hist.pop_front();
                y_hist.pop_front();
            }
        }
        const double df = f - f_new;
        theta = trial;
        g = g_new;
        f = f_new;
        history.push_back(f);
        if (df <= 1e-15 * std::max(1.0, std::abs(f))) break;
    }
}

void stochastic(const Problem& prob, Vector& theta, int epochs, int batch_size, std::uint64_t seed,
                std::vector<double>& history) {
    const std::size_t n = static_cast<std::size_t>(prob.x.rows());
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    detail::Rng rng(seed);
    Vector g(prob.n_params());
    double f = prob.eval(theta, g, nullptr);
    double lr = 0.5;
    std::vector<std::size_t> batch;
    for (int e = 0; e < epochs; ++e) {
        std::shuffle(order.begin(), order.end(), rng);
        Vector candidate = theta;
        for (std::size_t b = 0; b < n; b += static_cast<std::size_t>(batch_size)) {
            batch.assign(order.begin() + static_cast<std::ptrdiff_t>(b),
                         order.begin() + static_cast<std::ptrdiff_t>(std::min(n, b + static_cast<std::size_t>(batch_size))));
            prob.eval(candidate, g, &batch);
            candidate -= lr * g;
        }
        const double f_new = prob.eval(candidate, g, nullptr);
        if (std::isfinite(f_new) && f_new <= f) {
            theta = candidate;
            f = f_new;
        } else {
            lr *= 0.5;
        }
        history.push_back(f);
        if (lr < 1e-12) break;
    }
}

}  // namespace

Logistic::Logistic(nlohmann::json hyper, TrainingOptions options) : Classifier(std::move(hyper), options) {
    max_iterations_ = hyper_.value("max_iterations", 500);
    solver_ = hyper_.value("solver", std::string("full_batch"));
    c_ = hyper_.value("C", 0.01);
    if (max_iterations_ < 1) throw Error("invalid_config", "logistic max_iterations must be positive");
    if (solver_ != "full_batch" && solver_ != "stochastic") {
        throw Error("invalid_config", "unknown logistic solver '" + solver_ + "'");
    }
    if (!(c_ > 0.0)) throw Error("invalid_config", "logistic C must be positive");
}

void Logistic::fit(const FitInput& input, std::uint64_t seed) {
    check_input(input);
    const auto k = static_cast<Eigen::Index>(classes_.size());
    Problem prob{input.features, detail::label_columns(input.labels, classes_),
                 Eigen::Map<const Vector>(input.weights.data(), static_cast<Eigen::Index>(input.weights.size())),
                 0.0, c_, k == 2 ? 1 : k};
    prob.w_total = prob.w.sum();
    if (!(prob.w_total > 0.0)) throw Error("invalid_argument", "sample weights sum to zero");
    Vector theta = Vector::Zero(prob.n_params());
    loss_history_.clear();
    if (solver_ == "full_batch") {
        lbfgs(prob, theta, max_iterations_, loss_history_);
    } else {
        stochastic(prob, theta, max_iterations_, options_.logistic_batch_size, seed, loss_history_);
    }
    const Eigen::Index d = input.features.cols();
    coef_ = Eigen::Map<const Matrix>(theta.data(), prob.rows_out, d);
    intercept_ = theta.segment(prob.rows_out * d, prob.rows_out);
}

Matrix Logistic::predict_proba(const Matrix& features, std::span<const std::size_t>) const {
    if (coef_.size() == 0) throw Error("not_fitted", "logistic model is not fitted");
    if (features.cols() != coef_.cols()) throw Error("invalid_argument", "feature count differs from the fitted model");
    Matrix z = features * coef_.transpose();
    z.rowwise() += intercept_.transpose();
    if (coef_.rows() == 1) {
        Matrix p(z.rows(), 2);
        for (Eigen::Index i = 0; i < z.rows(); ++i) {
            const double p1 = 1.0 / (1.0 + std::exp(-z(i, 0)));
            p(i, 0) = 1.0 - p1;
            p(i, 1) = p1;
        }
        return p;
    }
    detail::softmax_rows(z);
    return z;
}

nlohmann::json Logistic::parameters_to_json() const {
    return {{"coef", detail::matrix_to_json(coef_)}, {"intercept", detail::vector_to_json(intercept_)}};
}

void Logistic::parameters_from_json(const nlohmann::json& j) {
    coef_ = detail::matrix_from_json(j.at("coef"));
    intercept_ = detail::vector_from_json(j.at("intercept"));
}

}  // namespace selectrade::classifiers
