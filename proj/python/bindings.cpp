#include <filesystem>
#include <optional>

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "selectrade/backtest.hpp"
#include "selectrade/experiment.hpp"
#include "selectrade/metrics.hpp"
#include "selectrade/selective.hpp"

namespace py = pybind11;
using namespace selectrade;

namespace {

template <typename T>
std::vector<T> to_vector(const py::array_t<T, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 1) throw py::value_error("expected a one-dimensional array");
    return std::vector<T>(a.data(), a.data() + a.size());
}

py::dict sgr_py(const py::array_t<double, py::array::c_style | py::array::forcecast>& kappa,
                const py::array_t<int, py::array::c_style | py::array::forcecast>& predicted,
                const py::array_t<int, py::array::c_style | py::array::forcecast>& truth, double target_risk,
                double delta) {
    const auto k = to_vector(kappa);
    const auto p = to_vector(predicted);
    const auto t = to_vector(truth);
    if (k.size() != p.size() || k.size() != t.size()) throw py::value_error("kappa, predicted and truth differ in length");
    selective::ScoredSet s;
    for (std::size_t i = 0; i < k.size(); ++i) s.push_back({k[i], p[i], t[i]});
    const auto r = selective::sgr(s, {delta, target_risk});
    py::array_t<bool> accepted(static_cast<py::ssize_t>(r.accepted.size()));
    auto view = accepted.mutable_unchecked<1>();
    for (std::size_t i = 0; i < r.accepted.size(); ++i) view(static_cast<py::ssize_t>(i)) = r.accepted[i];
    py::dict d;
    d["theta"] = r.theta;
    d["bound"] = r.bound;
    d["coverage"] = r.coverage;
    d["risk"] = r.risk ? py::cast(*r.risk) : py::none();
    d["accepted"] = accepted;
    return d;
}

double mcc_py(const std::vector<std::vector<std::int64_t>>& counts, std::vector<int> classes) {
    if (classes.empty()) {
        for (std::size_t i = 0; i < counts.size(); ++i) classes.push_back(static_cast<int>(i));
    }
    if (counts.size() != classes.size()) throw py::value_error("confusion matrix and classes differ in size");
    metrics::ConfusionMatrix cm(classes);
    for (std::size_t i = 0; i < counts.size(); ++i) {
        if (counts[i].size() != classes.size()) throw py::value_error("confusion matrix must be square");
        for (std::size_t j = 0; j < counts.size(); ++j) cm.at(i, j) = counts[i][j];
    }
    return metrics::mcc(cm);
}

py::dict simulate_py(const py::array_t<std::int64_t, py::array::c_style | py::array::forcecast>& positions,
                     const py::array_t<double, py::array::c_style | py::array::forcecast>& closes, double tick_size,
                     double point_value, double slippage) {
    const auto pos = to_vector(positions);
    const auto c = to_vector(closes);
    std::vector<TimeMs> times(c.size());
    for (std::size_t i = 0; i < times.size(); ++i) times[i] = static_cast<TimeMs>(i) * market_data::kDefaultBarInterval;
    const market_data::Instrument inst{"PY", tick_size, point_value};
    const auto r = backtest::simulate(pos, c, times, inst, slippage);
    py::dict d;
    d["pnl"] = py::array_t<double>(static_cast<py::ssize_t>(r.pnl.size()), r.pnl.data());
    d["equity"] = py::array_t<double>(static_cast<py::ssize_t>(r.equity.size()), r.equity.data());
    d["total_pnl"] = r.total_pnl;
    d["total_slippage"] = r.total_slippage;
    d["contracts_traded"] = r.contracts_traded;
    d["trades"] = r.trades.size();
    d["sharpe"] = r.sharpe ? py::cast(*r.sharpe) : py::none();
    return d;
}

std::string run_py(const std::string& config_path, std::optional<std::uint64_t> seed,
                   std::optional<std::string> out) {
    auto config = experiment::load_config(config_path, seed);
    if (out) config.output_dir = *out;
    {
        py::gil_scoped_release release;
        experiment::run(config);
    }
    return (std::filesystem::path(config.output_dir) / "summary.md").string();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "C++ core of selectrade";
    m.attr("__version__") = experiment::kVersion;

    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            PyErr_SetString(PyExc_ValueError, (e.code() + ": " + e.what()).c_str());
        }
    });

    m.def("binomial_tail", &selective::binomial_tail, py::arg("m"), py::arg("k"), py::arg("b"),
          "P(X <= k) for X ~ Binomial(m, b).");
    m.def("bstar", &selective::bstar, py::arg("r_hat"), py::arg("delta"), py::arg("m"),
          "Risk bound that holds with probability 1 - delta given empirical risk r_hat on m samples.");
    m.def("sgr", &sgr_py, py::arg("kappa"), py::arg("predicted"), py::arg("truth"), py::arg("target_risk"),
          py::arg("delta") = 0.001, "Confidence threshold with guaranteed selective risk.");
    m.def("mcc", &mcc_py, py::arg("counts"), py::arg("classes") = std::vector<int>{},
          "Matthews correlation of a confusion matrix (rows = truth).");
    m.def("simulate", &simulate_py, py::arg("positions"), py::arg("closes"), py::arg("tick_size"),
          py::arg("point_value"), py::arg("slippage") = 0.0, "Backtest signed contract positions on a close series.");
    m.def(
        "sharpe",
        [](const std::vector<double>& pnl, double periods) { return backtest::sharpe(pnl, periods); },
        py::arg("pnl"), py::arg("periods_per_year") = backtest::kPeriodsPerYear);
    m.def("run_experiment", &run_py, py::arg("config"), py::arg("seed") = py::none(), py::arg("out") = py::none(),
          "Runs the full pipeline and returns the summary path.");
    m.def("report", &experiment::report, py::arg("manifest"));
}
