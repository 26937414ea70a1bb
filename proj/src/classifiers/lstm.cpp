#include "selectrade/classifiers/lstm.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/QR>

#include "internal.hpp"

namespace selectrade::classifiers {

namespace {

Matrix sigmoid(const Matrix& z) { return (1.0 / (1.0 + (-z.array()).exp())).matrix(); }

Matrix orthogonal(Eigen::Index rows, Eigen::Index cols, detail::Rng& rng) {
    std::normal_distribution<double> nd(0.0, 1.0);
    const Eigen::Index n = std::max(rows, cols);
    Eigen::MatrixXd a(n, n);
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = nd(rng);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
    Eigen::MatrixXd q = qr.householderQ();
    return q.topLeftCorner(rows, cols);
}

std::vector<std::size_t> normalized_starts(std::span<const std::size_t> starts, std::size_t n) {
    std::vector<std::size_t> s(starts.begin(), starts.end());
    s.push_back(0);
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
    while (!s.empty() && s.back() >= n) s.pop_back();
    if (s.empty()) s.push_back(0);
    return s;
}

}  // namespace

struct Lstm::Net {
    struct Layer {
        Matrix wx;  // in x 4H, gate order i, f, g, o
        Matrix wh;  // H x 4H
        Matrix b;   // 1 x 4H
        Eigen::Index units = 0;
    };
    std::vector<Layer> layers;
    detail::BatchNorm bn;
    Matrix w_out;  // K x H
    Matrix b_out;  // 1 x K

    std::vector<Matrix*> params() {
        std::vector<Matrix*> p;
        for (auto& l : layers) {
            p.push_back(&l.wx);
            p.push_back(&l.wh);
            p.push_back(&l.b);
        }
        p.push_back(&bn.gamma);
        p.push_back(&bn.beta);
        p.push_back(&w_out);
        p.push_back(&b_out);
        return p;
    }

    struct StepCache {
        Matrix x, h_prev, c_prev, i, f, g, o, c, tanh_c;
    };

    // One timestep of one layer.
    void step(const Layer& l, const Matrix& x, Matrix& h, Matrix& c, StepCache* cache) const {
        Matrix z = x * l.wx + h * l.wh;
        z.rowwise() += l.b.row(0);
        const Eigen::Index u = l.units;
        Matrix i = sigmoid(z.middleCols(0, u));
        Matrix f = sigmoid(z.middleCols(u, u));
        Matrix g = z.middleCols(2 * u, u).array().tanh().matrix();
        Matrix o = sigmoid(z.middleCols(3 * u, u));
        Matrix c_new = f.cwiseProduct(c) + i.cwiseProduct(g);
        Matrix tc = c_new.array().tanh().matrix();
        Matrix h_new = o.cwiseProduct(tc);
        if (cache) {
            cache->x = x;
            cache->h_prev = std::move(h);
            cache->c_prev = std::move(c);
            cache->i = std::move(i);
            cache->f = std::move(f);
            cache->g = std::move(g);
            cache->o = std::move(o);
            cache->c = c_new;
            cache->tanh_c = tc;
        }
        h = std::move(h_new);
        c = std::move(c_new);
    }

    Matrix head_infer(const Matrix& top) const {
        Matrix logits = bn.forward_infer(top) * w_out.transpose();
        logits.rowwise() += b_out.row(0);
        detail::softmax_rows(logits);
        return logits;
    }
};

Lstm::Lstm(nlohmann::json hyper, TrainingOptions options) : Classifier(std::move(hyper), options) {
    hidden_ = hyper_.at("hidden").get<std::vector<int>>();
    learning_rate_ = hyper_.at("learning_rate").get<double>();
    if (hidden_.empty() || hidden_.size() > 2 || std::any_of(hidden_.begin(), hidden_.end(), [](int u) { return u < 1; })) {
        throw Error("invalid_config", "LSTM takes one or two layers of positive width");
    }
    if (!(learning_rate_ > 0.0)) throw Error("invalid_config", "learning rate must be positive");
    if (options_.sequence_length < 1) throw Error("invalid_config", "sequence length must be positive");
}

Lstm::~Lstm() = default;

void Lstm::fit(const FitInput& input, std::uint64_t seed) {
    check_input(input);
    const auto n = static_cast<std::size_t>(input.features.rows());
    const auto seq = static_cast<std::size_t>(options_.sequence_length);
    const auto starts = normalized_starts(input.stream_starts, n);
    for (std::size_t s = 0; s < starts.size(); ++s) {
        const std::size_t len = (s + 1 < starts.size() ? starts[s + 1] : n) - starts[s];
        if (len < seq) {
            throw Error("insufficient_data", "LSTM stream of " + std::to_string(len) + " rows is shorter than the " +
                                                 std::to_string(seq) + "-step sequence length");
        }
    }
    const std::vector<int> cols = detail::label_columns(input.labels, classes_);
    const auto k = static_cast<Eigen::Index>(classes_.size());

    detail::Rng init_rng(mix_seed(seed, "init"));
    net_ = std::make_unique<Net>();
    Eigen::Index fan_in = input.features.cols();
    for (const int units : hidden_) {
        Net::Layer l;
        l.units = units;
        l.wx = detail::glorot(fan_in, 4 * units, init_rng);
        l.wh = orthogonal(units, 4 * units, init_rng);
        l.b = Matrix::Zero(1, 4 * units);
        l.b.middleCols(units, units).setOnes();
        net_->layers.push_back(std::move(l));
        fan_in = units;
    }
    net_->bn = detail::BatchNorm(fan_in);
    net_->w_out = detail::glorot(k, fan_in, init_rng);
    net_->b_out = Matrix::Zero(1, k);

    detail::Rng rng(mix_seed(seed, "train"));
    detail::Adam adam(learning_rate_, detail::adam_decay_for(learning_rate_));
    auto params = net_->params();
    for (auto* p : params) adam.add(p->rows(), p->cols());
    const std::size_t nl = net_->layers.size();
    const double l2 = options_.l2;
    const std::size_t max_lanes = std::max<std::size_t>(1, static_cast<std::size_t>(options_.batch_size) / seq);

    epoch_losses_.clear();
    std::vector<Matrix> grads(params.size());
    for (int epoch = 0; epoch < options_.epochs; ++epoch) {
        double total_loss = 0.0;
        std::size_t batches = 0;
        for (std::size_t s = 0; s < starts.size(); ++s) {
            const std::size_t begin = starts[s];
            const std::size_t len = (s + 1 < starts.size() ? starts[s + 1] : n) - begin;
            const std::size_t lanes = std::max<std::size_t>(1, std::min(max_lanes, len / seq));
            const std::size_t seg = (len + lanes - 1) / lanes;
            const auto lanes_i = static_cast<Eigen::Index>(lanes);
            std::vector<Matrix> h(nl);
            std::vector<Matrix> c(nl);
            for (std::size_t l = 0; l < nl; ++l) {
                h[l] = Matrix::Zero(lanes_i, net_->layers[l].units);
                c[l] = Matrix::Zero(lanes_i, net_->layers[l].units);
            }
            for (std::size_t chunk = 0; chunk * seq < seg; ++chunk) {
                const std::size_t steps = std::min(seq, seg - chunk * seq);
                // Row index of (lane, tau), or npos past the lane's end.
                auto row_of = [&](std::size_t lane, std::size_t tau) -> std::size_t {
                    const std::size_t off = lane * seg + chunk * seq + tau;
                    const std::size_t lane_end = std::min(len, (lane + 1) * seg);
                    return lane * seg + chunk * seq + tau < lane_end ? begin + off : static_cast<std::size_t>(-1);
                };
                std::vector<std::vector<Net::StepCache>> cache(nl, std::vector<Net::StepCache>(steps));
                std::vector<std::pair<std::size_t, std::size_t>> valid;  // (tau, lane)
                std::vector<Matrix> tops(steps);
                for (std::size_t tau = 0; tau < steps; ++tau) {
                    Matrix x = Matrix::Zero(lanes_i, input.features.cols());
                    for (std::size_t lane = 0; lane < lanes; ++lane) {
                        const std::size_t r = row_of(lane, tau);
                        if (r == static_cast<std::size_t>(-1)) continue;
                        x.row(static_cast<Eigen::Index>(lane)) = input.features.row(static_cast<Eigen::Index>(r));
                        valid.emplace_back(tau, lane);
                    }
                    for (std::size_t l = 0; l < nl; ++l) {
                        net_->step(net_->layers[l], l == 0 ? x : h[l - 1], h[l], c[l], &cache[l][tau]);
                    }
                    tops[tau] = h[nl - 1];
                }
                if (valid.empty()) continue;
                // Head over the valid (tau, lane) rows.
                const auto rows = static_cast<Eigen::Index>(valid.size());
                Matrix top(rows, net_->layers.back().units);
                std::vector<int> yc(valid.size());
                std::vector<double> wv(valid.size());
                for (std::size_t v = 0; v < valid.size(); ++v) {
                    const auto [tau, lane] = valid[v];
                    top.row(static_cast<Eigen::Index>(v)) = tops[tau].row(static_cast<Eigen::Index>(lane));
                    const std::size_t r = row_of(lane, tau);
                    yc[v] = cols[r];
                    wv[v] = input.weights[r];
                }
                detail::BatchNorm::Cache bn_cache;
                Matrix normed = net_->bn.forward_train(top, bn_cache, options_.bn_momentum, true);
                const Matrix mask = detail::dropout_mask(normed.rows(), normed.cols(), options_.dropout, rng);
                Matrix a = normed.cwiseProduct(mask);
                Matrix logits = a * net_->w_out.transpose();
                logits.rowwise() += net_->b_out.row(0);
                Matrix dlogits;
                double loss = detail::softmax_cross_entropy(logits, yc, wv, dlogits);
                for (const auto& l : net_->layers) loss += l2 * l.wx.squaredNorm();
                if (!std::isfinite(loss)) {
                    throw Error("diverged", "LSTM training diverged (non-finite loss) at learning rate " +
                                                format_double(learning_rate_));
                }
                const std::size_t hp = 3 * nl;
                grads[hp + 2] = dlogits.transpose() * a;
                grads[hp + 3] = dlogits.colwise().sum();
                Matrix dnormed = (dlogits * net_->w_out).cwiseProduct(mask);
                Matrix dtop = net_->bn.backward(dnormed, bn_cache, grads[hp], grads[hp + 1]);

                // Scatter the head gradient back to (tau, lane) and run BPTT.
                std::vector<Matrix> dh_out(steps, Matrix::Zero(lanes_i, net_->layers.back().units));
                for (std::size_t v = 0; v < valid.size(); ++v) {
                    const auto [tau, lane] = valid[v];
                    dh_out[tau].row(static_cast<Eigen::Index>(lane)) = dtop.row(static_cast<Eigen::Index>(v));
                }
                for (std::size_t l = nl; l-- > 0;) {
                    const auto& layer = net_->layers[l];
                    const Eigen::Index u = layer.units;
                    Matrix dwx = Matrix::Zero(layer.wx.rows(), layer.wx.cols());
                    Matrix dwh = Matrix::Zero(layer.wh.rows(), layer.wh.cols());
                    Matrix db = Matrix::Zero(1, layer.b.cols());
                    Matrix dh_next = Matrix::Zero(lanes_i, u);
                    Matrix dc_next = Matrix::Zero(lanes_i, u);
                    std::vector<Matrix> dx_lower(l > 0 ? steps : 0);
                    for (std::size_t tau = steps; tau-- > 0;) {
                        const auto& cc = cache[l][tau];
                        const Matrix dh = dh_out[tau] + dh_next;
                        const Matrix dc =
                            dh.cwiseProduct(cc.o).cwiseProduct((1.0 - cc.tanh_c.array().square()).matrix()) + dc_next;
                        Matrix dz(lanes_i, 4 * u);
                        dz.middleCols(0, u) = dc.cwiseProduct(cc.g).cwiseProduct(cc.i.cwiseProduct((1.0 - cc.i.array()).matrix()));
                        dz.middleCols(u, u) =
                            dc.cwiseProduct(cc.c_prev).cwiseProduct(cc.f.cwiseProduct((1.0 - cc.f.array()).matrix()));
                        dz.middleCols(2 * u, u) = dc.cwiseProduct(cc.i).cwiseProduct((1.0 - cc.g.array().square()).matrix());
                        dz.middleCols(3 * u, u) =
                            dh.cwiseProduct(cc.tanh_c).cwiseProduct(cc.o.cwiseProduct((1.0 - cc.o.array()).matrix()));
                        dwx.noalias() += cc.x.transpose() * dz;
                        dwh.noalias() += cc.h_prev.transpose() * dz;
                        db += dz.colwise().sum();
                        dh_next = dz * layer.wh.transpose();
                        dc_next = dc.cwiseProduct(cc.f);
                        if (l > 0) dx_lower[tau] = dz * layer.wx.transpose();
                    }
                    grads[3 * l] = dwx + 2.0 * l2 * layer.wx;
                    grads[3 * l + 1] = std::move(dwh);
                    grads[3 * l + 2] = std::move(db);
                    if (l > 0) dh_out = std::move(dx_lower);
                }
                adam.begin_step();
                for (std::size_t p = 0; p < params.size(); ++p) adam.update(p, *params[p], grads[p]);
                total_loss += loss;
                ++batches;
            }
        }
        epoch_losses_.push_back(total_loss / static_cast<double>(std::max<std::size_t>(1, batches)));
    }
    reset_state();
}

Matrix Lstm::predict_proba(const Matrix& features, std::span<const std::size_t> stream_starts) const {
    if (!net_) throw Error("not_fitted", "LSTM model is not fitted");
    const auto n = static_cast<std::size_t>(features.rows());
    Matrix out(features.rows(), static_cast<Eigen::Index>(classes_.size()));
    if (n == 0) return out;
    const auto starts = normalized_starts(stream_starts, n);
    const std::size_t nl = net_->layers.size();
    Matrix top(features.rows(), net_->layers.back().units);
    for (std::size_t s = 0; s < starts.size(); ++s) {
        const std::size_t end = s + 1 < starts.size() ? starts[s + 1] : n;
        std::vector<Matrix> h(nl);
        std::vector<Matrix> c(nl);
        for (std::size_t l = 0; l < nl; ++l) {
            h[l] = Matrix::Zero(1, net_->layers[l].units);
            c[l] = Matrix::Zero(1, net_->layers[l].units);
        }
        for (std::size_t r = starts[s]; r < end; ++r) {
            const Matrix x = features.row(static_cast<Eigen::Index>(r));
            for (std::size_t l = 0; l < nl; ++l) net_->step(net_->layers[l], l == 0 ? x : h[l - 1], h[l], c[l], nullptr);
            top.row(static_cast<Eigen::Index>(r)) = h[nl - 1];
        }
    }
    constexpr Eigen::Index kChunk = 4096;
    for (Eigen::Index start = 0; start < features.rows(); start += kChunk) {
        const Eigen::Index rows = std::min(kChunk, features.rows() - start);
        out.middleRows(start, rows) = net_->head_infer(top.middleRows(start, rows));
    }
    return out;
}

void Lstm::reset_state() {
    state_h_.clear();
    state_c_.clear();
    if (!net_) return;
    for (const auto& l : net_->layers) {
        state_h_.push_back(Matrix::Zero(1, l.units));
        state_c_.push_back(Matrix::Zero(1, l.units));
    }
}

Matrix Lstm::predict_step(const Matrix& rows) {
    if (!net_) throw Error("not_fitted", "LSTM model is not fitted");
    if (state_h_.size() != net_->layers.size()) reset_state();
    const std::size_t nl = net_->layers.size();
    Matrix top(rows.rows(), net_->layers.back().units);
    for (Eigen::Index r = 0; r < rows.rows(); ++r) {
        const Matrix x = rows.row(r);
        for (std::size_t l = 0; l < nl; ++l) {
            net_->step(net_->layers[l], l == 0 ? x : state_h_[l - 1], state_h_[l], state_c_[l], nullptr);
        }
        top.row(r) = state_h_[nl - 1];
    }
    return net_->head_infer(top);
}

nlohmann::json Lstm::parameters_to_json() const {
    if (!net_) return nlohmann::json::object();
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& l : net_->layers) {
        layers.push_back({{"units", l.units},
                          {"wx", detail::matrix_to_json(l.wx)},
                          {"wh", detail::matrix_to_json(l.wh)},
                          {"b", detail::matrix_to_json(l.b)}});
    }
    return {{"layers", std::move(layers)},
            {"bn", net_->bn.to_json()},
            {"w_out", detail::matrix_to_json(net_->w_out)},
            {"b_out", detail::matrix_to_json(net_->b_out)}};
}

void Lstm::parameters_from_json(const nlohmann::json& j) {
    net_ = std::make_unique<Net>();
    for (const auto& jl : j.at("layers")) {
        Net::Layer l;
        l.units = jl.at("units").get<Eigen::Index>();
        l.wx = detail::matrix_from_json(jl.at("wx"));
        l.wh = detail::matrix_from_json(jl.at("wh"));
        l.b = detail::matrix_from_json(jl.at("b"));
        net_->layers.push_back(std::move(l));
    }
    net_->bn = detail::BatchNorm::from_json(j.at("bn"));
    net_->w_out = detail::matrix_from_json(j.at("w_out"));
    net_->b_out = detail::matrix_from_json(j.at("b_out"));
    reset_state();
}

}  // namespace selectrade::classifiers
