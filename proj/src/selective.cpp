#include "selectrade/selective.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <string>

#include "selectrade/metrics.hpp"

namespace selectrade::selective {

ScoredSet score(const Matrix& proba, std::span<const int> classes, std::span<const int> truth) {
    if (static_cast<std::size_t>(proba.cols()) != classes.size()) {
        throw Error("invalid_argument", "probability columns do not match the class list");
    }
    if (static_cast<std::size_t>(proba.rows()) != truth.size()) {
        throw Error("invalid_argument", "probability rows do not match the label count");
    }
    ScoredSet out(truth.size());
    for (Eigen::Index i = 0; i < proba.rows(); ++i) {
        Eigen::Index best = 0;
        for (Eigen::Index c = 1; c < proba.cols(); ++c) {
            if (proba(i, c) > proba(i, best)) best = c;
        }
        out[static_cast<std::size_t>(i)] = {proba(i, best), classes[static_cast<std::size_t>(best)],
                                            truth[static_cast<std::size_t>(i)]};
    }
    return out;
}

void SgrConfig::validate() const {
    if (!(delta > 0.0 && delta < 1.0)) {
        throw Error("invalid_config", "delta must lie in (0, 1)");
    }
    if (!(target_risk > 0.0) || !std::isfinite(target_risk)) {
        throw Error("invalid_config", "target risk r* must be positive");
    }
}

double binomial_tail(std::int64_t m, std::int64_t k, double b) {
    if (!(b >= 0.0 && b <= 1.0)) {
        throw Error("invalid_argument", "binomial_tail: b outside [0, 1]");
    }
    if (m < 0 || k < 0 || k > m) {
        throw Error("invalid_argument", "binomial_tail: need 0 <= k <= m");
    }
    if (k == m) return 1.0;
    if (b == 0.0) return 1.0;
    if (b == 1.0) return 0.0;
    // Terms are unimodal in j. Anchor at the largest term of the side being
    // summed and walk away from the mode until terms stop mattering.
    const double lb = std::log(b);
    const double l1b = std::log1p(-b);
    const auto log_term = [&](std::int64_t j) {
        return std::lgamma(static_cast<double>(m) + 1.0) - std::lgamma(static_cast<double>(j) + 1.0) -
               std::lgamma(static_cast<double>(m - j) + 1.0) + static_cast<double>(j) * lb +
               static_cast<double>(m - j) * l1b;
    };
    const double md = static_cast<double>(m);
    const double odds = b / (1.0 - b);
    const auto mode = static_cast<std::int64_t>(std::floor((md + 1.0) * b));
    if (k <= mode) {
        // j = k down to 0; ratio term(j - 1) / term(j) = j / ((m - j + 1) odds).
        double s = 1.0;
        double t = 1.0;
        for (std::int64_t j = k; j > 0; --j) {
            t *= static_cast<double>(j) / (static_cast<double>(m - j + 1) * odds);
            s += t;
            if (t < 1e-17 * s) break;
        }
        return std::min(1.0, std::exp(log_term(k) + std::log(s)));
    }
    // Upper tail from k + 1 up to m; ratio term(j + 1) / term(j) = (m - j) odds / (j + 1).
    double s = 1.0;
    double t = 1.0;
    for (std::int64_t j = k + 1; j < m; ++j) {
        t *= static_cast<double>(m - j) * odds / static_cast<double>(j + 1);
        s += t;
        if (t < 1e-17 * s) break;
    }
    return std::clamp(1.0 - std::exp(log_term(k + 1) + std::log(s)), 0.0, 1.0);
}

double bstar_count(std::int64_t losses, double delta, std::int64_t m) {
    if (m < 1) throw Error("invalid_argument", "bstar: m must be at least 1");
    if (losses < 0 || losses > m) throw Error("invalid_argument", "bstar: loss count outside [0, m]");
    if (!(delta > 0.0 && delta < 1.0)) throw Error("invalid_argument", "bstar: delta must lie in (0, 1)");
    if (losses == m) return 1.0;
    // The tail is decreasing in b, from 1 at b = 0 to 0 at b = 1.
    double lo = 0.0;
    double hi = 1.0;
    for (int it = 0; it < 60 && hi - lo > 1e-9; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (binomial_tail(m, losses, mid) >= delta) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return hi;
}

double bstar(double r_hat, double delta, std::int64_t m) {
    if (!(r_hat >= 0.0 && r_hat <= 1.0)) throw Error("invalid_argument", "bstar: r_hat outside [0, 1]");
    if (m < 1) throw Error("invalid_argument", "bstar: m must be at least 1");
    // r_hat usually arrives as losses / m; absorb the rounding of that division.
    const double scaled = static_cast<double>(m) * r_hat;
    auto k = static_cast<std::int64_t>(std::ceil(scaled - 1e-9 * std::max(1.0, scaled)));
    k = std::clamp<std::int64_t>(k, 0, m);
    return bstar_count(k, delta, m);
}

namespace {

struct Projection {
    std::size_t accepted = 0;
    std::size_t losses = 0;
};

// Over `order` (ascending κ), the accepted set for θ = κ(order[z-1]) starts at
// the first position with κ >= θ, which is at or before z-1 when κ ties.
Projection project(const ScoredSet& s, const std::vector<std::size_t>& order,
                   const std::vector<std::size_t>& loss_suffix, double theta) {
    const auto first = std::lower_bound(order.begin(), order.end(), theta,
                                        [&](std::size_t idx, double t) { return s[idx].kappa < t; });
    const auto pos = static_cast<std::size_t>(first - order.begin());
    return {order.size() - pos, loss_suffix[pos]};
}

}  // namespace

SelectiveResult sgr(const ScoredSet& scored, const SgrConfig& config) {
    config.validate();
    const std::size_t m = scored.size();
    if (m == 0) throw Error("invalid_argument", "SGR needs at least one sample");
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scored[a].kappa < scored[b].kappa; });
    std::vector<std::size_t> loss_suffix(m + 1, 0);
    for (std::size_t i = m; i-- > 0;) loss_suffix[i] = loss_suffix[i + 1] + static_cast<std::size_t>(scored[order[i]].loss());

    const auto iterations = static_cast<std::int64_t>(std::ceil(std::log2(static_cast<double>(m))));
    auto bound_at = [&](double theta, double delta) {
        const Projection p = project(scored, order, loss_suffix, theta);
        return bstar_count(static_cast<std::int64_t>(p.losses), delta, static_cast<std::int64_t>(p.accepted));
    };

    double theta = scored[order[0]].kappa;
    double bound = 1.0;
    if (iterations == 0) {
        bound = bound_at(theta, config.delta);
    } else {
        const double delta_i = config.delta / static_cast<double>(iterations);
        std::int64_t z_min = 1;
        std::int64_t z_max = static_cast<std::int64_t>(m);
        for (std::int64_t i = 0; i < iterations; ++i) {
            const std::int64_t z = (z_min + z_max + 1) / 2;
            theta = scored[order[static_cast<std::size_t>(z - 1)]].kappa;
            bound = bound_at(theta, delta_i);
            if (bound < config.target_risk) {
                z_max = z;
            } else {
                z_min = z;
            }
        }
    }

    SelectiveResult r;
    r.theta = theta;
    r.bound = bound;
    r.accepted = accept_flags(scored, theta);
    const RiskCoverage rc = selective_risk_and_coverage(scored, theta);
    r.coverage = rc.coverage;
    r.risk = rc.risk;
    return r;
}

std::vector<bool> accept_flags(const ScoredSet& scored, double theta) {
    std::vector<bool> flags(scored.size());
    for (std::size_t i = 0; i < scored.size(); ++i) flags[i] = scored[i].kappa >= theta;
    return flags;
}

RiskCoverage selective_risk_and_coverage(const ScoredSet& scored, double theta) {
    RiskCoverage rc;
    std::size_t losses = 0;
    for (const auto& s : scored) {
        if (s.kappa >= theta) {
            ++rc.accepted;
            losses += static_cast<std::size_t>(s.loss());
        }
    }
    if (!scored.empty()) rc.coverage = static_cast<double>(rc.accepted) / static_cast<double>(scored.size());
    if (rc.accepted > 0) rc.risk = static_cast<double>(losses) / static_cast<double>(rc.accepted);
    return rc;
}

std::vector<double> default_rstar_grid() {
    std::vector<double> g;
    for (int i = 1; i <= 19; ++i) g.push_back(0.05 * i);
    return g;
}

ThresholdChoice select_threshold_by_mcc(const ScoredSet& validation, std::span<const double> rstar_grid,
                                        std::span<const int> classes, double delta) {
    if (rstar_grid.empty()) throw Error("invalid_argument", "r* grid is empty");
    std::vector<int> cls(classes.begin(), classes.end());
    std::optional<ThresholdChoice> best;
    for (const double rstar : rstar_grid) {
        const SelectiveResult res = sgr(validation, {delta, rstar});
        metrics::ConfusionMatrix cm(cls);
        std::vector<bool> seen(cls.size(), false);
        for (std::size_t i = 0; i < validation.size(); ++i) {
            if (!res.accepted[i]) continue;
            cm.add(validation[i].truth, validation[i].predicted);
            seen[cm.index_of(validation[i].truth)] = true;
        }
        if (std::count(seen.begin(), seen.end(), true) < 2) continue;
        const double value = metrics::mcc(cm);
        if (!best || value > best->mcc || (value == best->mcc && res.coverage > best->coverage)) {
            best = ThresholdChoice{res.theta, rstar, res.coverage, value, false};
        }
    }
    if (!best) {
        log::warn("threshold selection: every projection is empty or single-class; using full coverage");
        ThresholdChoice fb;
        fb.theta = 0.0;
        fb.rstar = rstar_grid.back();
        fb.coverage = 1.0;
        fb.fallback = true;
        metrics::ConfusionMatrix cm(cls);
        for (const auto& s : validation) cm.add(s.truth, s.predicted);
        fb.mcc = metrics::mcc(cm);
        return fb;
    }
    return *best;
}

double select_multiplier(std::span<const MultiplierResult> results) {
    if (results.empty()) throw Error("invalid_argument", "no multiplier results to choose from");
    const MultiplierResult* best = &results[0];
    for (const auto& r : results) {
        if (r.buy_sell_mcc > best->buy_sell_mcc ||
            (r.buy_sell_mcc == best->buy_sell_mcc && r.multiplier < best->multiplier)) {
            best = &r;
        }
    }
    return best->multiplier;
}

std::vector<CurvePoint> accuracy_coverage_curve(const ScoredSet& scored, double delta) {
    std::vector<CurvePoint> out;
    const std::size_t m = scored.size();
    if (m == 0) return out;
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scored[a].kappa < scored[b].kappa; });
    std::size_t correct = 0;
    for (const auto& s : scored) correct += static_cast<std::size_t>(1 - s.loss());
    std::size_t pos = 0;
    while (pos < m) {
        const double theta = scored[order[pos]].kappa;
        const std::size_t accepted = m - pos;
        CurvePoint p;
        p.theta = theta;
        p.coverage = static_cast<double>(accepted) / static_cast<double>(m);
        p.accuracy = static_cast<double>(correct) / static_cast<double>(accepted);
        p.bstar = bstar_count(static_cast<std::int64_t>(accepted - correct), delta, static_cast<std::int64_t>(accepted));
        out.push_back(p);
        while (pos < m && scored[order[pos]].kappa == theta) {
            correct -= static_cast<std::size_t>(1 - scored[order[pos]].loss());
            ++pos;
        }
    }
    return out;
}

std::vector<CurvePoint> sgr_sweep(const ScoredSet& scored, std::span<const double> rstar_grid, double delta) {
    std::vector<CurvePoint> out;
    for (const double rstar : rstar_grid) {
        const SelectiveResult r = sgr(scored, {delta, rstar});
        CurvePoint p;
        p.coverage = r.coverage;
        p.accuracy = r.risk ? 1.0 - *r.risk : std::numeric_limits<double>::quiet_NaN();
        p.theta = r.theta;
        p.rstar = rstar;
        p.bstar = r.bound;
        out.push_back(p);
    }
    return out;
}

void write_curve_csv(std::ostream& out, std::span<const CurvePoint> points) {
    out << "coverage,accuracy,theta,rstar,bstar\n";
    for (const auto& p : points) {
        out << format_double(p.coverage) << ',' << format_double(p.accuracy) << ',' << format_double(p.theta) << ','
            << (p.rstar ? format_double(*p.rstar) : std::string{}) << ',' << format_double(p.bstar) << '\n';
    }
}

}  // namespace selectrade::selective
