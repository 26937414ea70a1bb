#include "selectrade/classifiers/feed_forward.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "internal.hpp"

namespace selectrade::classifiers {

struct FeedForward::Net {
    struct Hidden {
        Matrix w;  // out x in
        Matrix b;  // 1 x out
        detail::BatchNorm bn;
    };
    std::vector<Hidden> hidden;
    Matrix w_out;
    Matrix b_out;

    std::vector<Matrix*> params() {
        std::vector<Matrix*> p;
        for (auto& h : hidden) {
            p.push_back(&h.w);
            p.push_back(&h.b);
            p.push_back(&h.bn.gamma);
            p.push_back(&h.bn.beta);
        }
        p.push_back(&w_out);
        p.push_back(&b_out);
        return p;
    }

    // Training pass on one batch; fills grads in params() order.
    double train_step(const Matrix& x, std::span<const int> cols, std::span<const double> w, double dropout,
                      double l2, double momentum, bool update_stats, detail::Rng& rng, std::vector<Matrix>& grads) {
        struct Cache {
            Matrix input;
            detail::BatchNorm::Cache bn;
            Matrix pre;  // batch-norm output, before ReLU
            Matrix mask;
        };
        std::vector<Cache> cache(hidden.size());
        Matrix a = x;
        for (std::size_t l = 0; l < hidden.size(); ++l) {
            auto& h = hidden[l];
            auto& c = cache[l];
            c.input = std::move(a);
            Matrix z = c.input * h.w.transpose();
            z.rowwise() += h.b.row(0);
            c.pre = h.bn.forward_train(z, c.bn, momentum, update_stats);
            c.mask = detail::dropout_mask(c.pre.rows(), c.pre.cols(), dropout, rng);
            a = c.pre.cwiseMax(0.0).cwiseProduct(c.mask);
        }
        Matrix logits = a * w_out.transpose();
        logits.rowwise() += b_out.row(0);
        Matrix dlogits;
        double loss = detail::softmax_cross_entropy(logits, cols, w, dlogits);
        for (const auto& h : hidden) loss += l2 * h.w.squaredNorm();

        grads.assign(4 * hidden.size() + 2, Matrix());
        grads[4 * hidden.size()] = dlogits.transpose() * a;
        grads[4 * hidden.size() + 1] = dlogits.colwise().sum();
        Matrix da = dlogits * w_out;
        for (std::size_t l = hidden.size(); l-- > 0;) {
            auto& h = hidden[l];
            auto& c = cache[l];
            Matrix dy = da.cwiseProduct(c.mask).cwiseProduct((c.pre.array() > 0.0).cast<double>().matrix());
            Matrix dz = h.bn.backward(dy, c.bn, grads[4 * l + 2], grads[4 * l + 3]);
            grads[4 * l] = dz.transpose() * c.input + 2.0 * l2 * h.w;
            grads[4 * l + 1] = dz.colwise().sum();
            if (l > 0) da = dz * h.w;
        }
        return loss;
    }

    Matrix infer(const Matrix& x) const {
        Matrix a = x;
        for (const auto& h : hidden) {
            Matrix z = a * h.w.transpose();
            z.rowwise() += h.b.row(0);
            a = h.bn.forward_infer(z).cwiseMax(0.0);
        }
        Matrix logits = a * w_out.transpose();
        logits.rowwise() += b_out.row(0);
        detail::softmax_rows(logits);
        return logits;
    }
};

FeedForward::FeedForward(nlohmann::json hyper, TrainingOptions options) : Classifier(std::move(hyper), options) {
    hidden_ = hyper_.at("hidden").get<std::vector<int>>();
    learning_rate_ = hyper_.at("learning_rate").get<double>();
    if (hidden_.empty() || std::any_of(hidden_.begin(), hidden_.end(), [](int u) { return u < 1; })) {
        throw Error("invalid_config", "feed-forward hidden layers must have positive widths");
    }
    if (!(learning_rate_ > 0.0)) throw Error("invalid_config", "learning rate must be positive");
}

FeedForward::~FeedForward() = default;

void FeedForward::initialize(Eigen::Index inputs, std::vector<int> classes, std::uint64_t seed) {
    classes_ = std::move(classes);
    detail::Rng rng(seed);
    net_ = std::make_unique<Net>();
    Eigen::Index fan_in = inputs;
    for (const int units : hidden_) {
        Net::Hidden h;
        h.w = detail::glorot(units, fan_in, rng);
        h.b = Matrix::Zero(1, units);
        h.bn = detail::BatchNorm(units);
        net_->hidden.push_back(std::move(h));
        fan_in = units;
    }
    const auto k = static_cast<Eigen::Index>(classes_.size());
    net_->w_out = detail::glorot(k, fan_in, rng);
    net_->b_out = Matrix::Zero(1, k);
}

void FeedForward::fit(const FitInput& input, std::uint64_t seed) {
    check_input(input);
    initialize(input.features.cols(), classes_, mix_seed(seed, "init"));
    const std::vector<int> cols = detail::label_columns(input.labels, classes_);
    const auto n = static_cast<std::size_t>(input.features.rows());
    const auto batch = static_cast<std::size_t>(std::max(1, options_.batch_size));
    detail::Rng rng(mix_seed(seed, "train"));
    detail::Adam adam(learning_rate_, detail::adam_decay_for(learning_rate_));
    auto params = net_->params();
    for (auto* p : params) adam.add(p->rows(), p->cols());

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::vector<Matrix> grads;
    Matrix xb;
    std::vector<int> cb;
    std::vector<double> wb;
    epoch_losses_.clear();
    for (int e = 0; e < options_.epochs; ++e) {
        std::shuffle(order.begin(), order.end(), rng);
        double total = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < n; start += batch) {
            const std::size_t end = std::min(n, start + batch);
            const auto rows = static_cast<Eigen::Index>(end - start);
            xb.resize(rows, input.features.cols());
            cb.resize(end - start);
            wb.resize(end - start);
            for (std::size_t r = start; r < end; ++r) {
                xb.row(static_cast<Eigen::Index>(r - start)) = input.features.row(static_cast<Eigen::Index>(order[r]));
                cb[r - start] = cols[order[r]];
                wb[r - start] = input.weights[order[r]];
            }
            const double loss = net_->train_step(xb, cb, wb, options_.dropout, options_.l2, options_.bn_momentum, true, rng,
                                                 grads);
            if (!std::isfinite(loss)) {
                throw Error("diverged", "feed-forward training diverged (non-finite loss) at learning rate " +
                                            format_double(learning_rate_));
            }
            adam.begin_step();
            for (std::size_t p = 0; p < params.size(); ++p) adam.update(p, *params[p], grads[p]);
            total += loss;
            ++batches;
        }
        epoch_losses_.push_back(total / static_cast<double>(std::max<std::size_t>(1, batches)));
    }
}

Matrix FeedForward::predict_proba(const Matrix& features, std::span<const std::size_t>) const {
    if (!net_) throw Error("not_fitted", "feed-forward model is not fitted");
    if (features.cols() != net_->hidden.front().w.cols()) {
        throw Error("invalid_argument", "feature count differs from the fitted model");
    }
    Matrix out(features.rows(), static_cast<Eigen::Index>(classes_.size()));
    constexpr Eigen::Index kChunk = 4096;
    for (Eigen::Index start = 0; start < features.rows(); start += kChunk) {
        const Eigen::Index rows = std::min(kChunk, features.rows() - start);
        out.middleRows(start, rows) = net_->infer(features.middleRows(start, rows));
    }
    return out;
}

Vector FeedForward::flat_parameters() const {
    auto params = const_cast<Net&>(*net_).params();
    Eigen::Index total = 0;
    for (auto* p : params) total += p->size();
    Vector theta(total);
    Eigen::Index off = 0;
    for (auto* p : params) {
        theta.segment(off, p->size()) = Eigen::Map<const Vector>(p->data(), p->size());
        off += p->size();
    }
    return theta;
}

void FeedForward::set_flat_parameters(const Vector& theta) {
    Eigen::Index off = 0;
    for (auto* p : net_->params()) {
        Eigen::Map<Vector>(p->data(), p->size()) = theta.segment(off, p->size());
        off += p->size();
    }
}

double FeedForward::loss_and_gradient(const Matrix& x, std::span<const int> labels, std::span<const double> weights,
                                      std::uint64_t dropout_seed, Vector& gradient) {
    if (!net_) throw Error("not_fitted", "feed-forward model is not initialised");
    const std::vector<int> cols = detail::label_columns(labels, classes_);
    detail::Rng rng(dropout_seed);
    std::vector<Matrix> grads;
    const double loss = net_->train_step(x, cols, weights, options_.dropout, options_.l2, options_.bn_momentum, false,
                                         rng, grads);
    Eigen::Index total = 0;
    for (const auto& g : grads) total += g.size();
    gradient.resize(total);
    Eigen::Index off = 0;
    for (const auto& g : grads) {
        gradient.segment(off, g.size()) = Eigen::Map<const Vector>(g.data(), g.size());
        off += g.size();
    }
    return loss;
}

nlohmann::json FeedForward::parameters_to_json() const {
    if (!net_) return nlohmann::json::object();
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& h : net_->hidden) {
        layers.push_back({{"w", detail::matrix_to_json(h.w)}, {"b", detail::matrix_to_json(h.b)}, {"bn", h.bn.to_json()}});
    }
    return {{"hidden", std::move(layers)},
            {"w_out", detail::matrix_to_json(net_->w_out)},
            {"b_out", detail::matrix_to_json(net_->b_out)}};
}

void FeedForward::parameters_from_json(const nlohmann::json& j) {
    net_ = std::make_unique<Net>();
    for (const auto& jl : j.at("hidden")) {
        Net::Hidden h;
        h.w = detail::matrix_from_json(jl.at("w"));
        h.b = detail::matrix_from_json(jl.at("b"));
        h.bn = detail::BatchNorm::from_json(jl.at("bn"));
        net_->hidden.push_back(std::move(h));
    }
    net_->w_out = detail::matrix_from_json(j.at("w_out"));
    net_->b_out = detail::matrix_from_json(j.at("b_out"));
}

}  // namespace selectrade::classifiers
