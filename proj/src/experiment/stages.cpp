#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "selectrade/experiment.hpp"
#include "selectrade/metrics.hpp"

namespace selectrade::experiment {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& path, const std::string& text) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("io", "cannot write " + path.string());
    out << text;
    if (!out) throw Error("io", "failed writing " + path.string());
}

json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("missing_file", "cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw Error("parse", path.string() + ": " + e.what());
    }
}

json num_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }
json opt_json(const std::optional<double>& v) { return v ? num_or_null(*v) : json(nullptr); }
std::string opt_csv(const std::optional<double>& v) { return v && std::isfinite(*v) ? format_double(*v) : std::string{}; }
std::string num_csv(double v) { return std::isfinite(v) ? format_double(v) : std::string{}; }

std::vector<Task> enumerate_tasks(const ExperimentConfig& config, std::size_t folds) {
    std::vector<Task> tasks;
    for (std::size_t k = 0; k < folds; ++k) {
        for (const auto fs_level : config.feature_sets) {
            for (const auto mode : config.label_modes) {
                for (const auto family : config.families) tasks.push_back({family, fs_level, mode, k});
            }
        }
    }
    return tasks;
}

json task_json(const Task& t) {
    return {{"family", classifiers::to_string(t.family)},
            {"feature_set", features::to_string(t.feature_set)},
            {"label_mode", labeling::to_string(t.label_mode)},
            {"fold", t.fold},
            {"dir", t.dir()}};
}

Task task_from_json(const json& j) {
    Task t;
    t.family = classifiers::parse_family(j.at("family").get<std::string>());
    t.feature_set = features::parse_level(j.at("feature_set").get<std::string>());
    t.label_mode = labeling::parse_label_mode(j.at("label_mode").get<std::string>());
    t.fold = j.at("fold").get<std::size_t>();
    return t;
}

json range_json(const splits::Range& r, const std::vector<market_data::Bar>& bars) {
    return {{"begin", r.begin},
            {"end", r.end},
            {"first_time", format_iso8601(bars[r.begin].open_time)},
            {"last_time", format_iso8601(bars[r.end - 1].open_time)}};
}

std::string predictions_text(const std::vector<PredictionRow>& rows, const std::vector<int>& classes) {
    std::ostringstream out;
    write_predictions(out, rows, classes);
    return out.str();
}

std::vector<Task> ok_tasks(const json& manifest) {
    std::vector<Task> out;
    for (const auto& t : manifest.at("tasks")) {
        if (t.at("status").get<std::string>() == "ok") out.push_back(task_from_json(t));
    }
    return out;
}

selective::ScoredSet scored_from(const std::vector<PredictionRow>& rows) {
    selective::ScoredSet s;
    for (const auto& r : rows) s.push_back({r.kappa, r.predicted, r.label});
    return s;
}

// Rows grouped by symbol, each group ordered by bar row.
std::map<std::string, std::vector<const PredictionRow*>> by_symbol(const std::vector<PredictionRow>& rows) {
    std::map<std::string, std::vector<const PredictionRow*>> out;
    for (const auto& r : rows) out[r.symbol].push_back(&r);
    for (auto& [sym, v] : out) {
        std::stable_sort(v.begin(), v.end(), [](const auto* a, const auto* b) { return a->row < b->row; });
    }
    return out;
}

json confusion_json(const metrics::ConfusionMatrix& cm) {
    json rows = json::array();
    for (std::size_t i = 0; i < cm.size(); ++i) {
        json row = json::array();
        for (std::size_t j = 0; j < cm.size(); ++j) row.push_back(cm.at(i, j));
        rows.push_back(row);
    }
    return {{"classes", cm.classes()}, {"counts", rows}};
}

std::vector<backtest::StrategyMode> strategies_for(labeling::LabelMode mode) {
    using backtest::StrategyMode;
    if (mode == labeling::LabelMode::binary) return {StrategyMode::binary_nonselective, StrategyMode::binary_selective};
    return {StrategyMode::ternary_nonselective, StrategyMode::ternary_selective};
}

std::map<std::string, std::size_t> symbol_index(const std::vector<InstrumentData>& data) {
    std::map<std::string, std::size_t> out;
    for (std::size_t i = 0; i < data.size(); ++i) out[data[i].instrument.symbol] = i;
    return out;
}

// Minimal reader for the CSV tables this module writes.
std::vector<std::map<std::string, std::string>> read_table(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("missing_file", "cannot open " + path.string());
    std::string line;
    std::vector<std::map<std::string, std::string>> rows;
    if (!std::getline(in, line)) return rows;
    std::vector<std::string> header;
    for (const auto f : split_csv(line)) header.emplace_back(f);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto f = split_csv(line);
        std::map<std::string, std::string> row;
        for (std::size_t i = 0; i < header.size() && i < f.size(); ++i) row[header[i]] = std::string(f[i]);
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string fixed(double v, int digits) {
    std::ostringstream out;
    out.setf(std::ios::fixed);
    out.precision(digits);
    out << v;
    return out.str();
}

}  // namespace

std::vector<TaskOutcome> train_stage(const ExperimentConfig& config, const std::vector<InstrumentData>& data) {
    const Schedule schedule = make_schedule(config, data);
    const fs::path out_dir(config.output_dir);
    const auto tasks = enumerate_tasks(config, schedule.folds.size());
    log::info("training " + std::to_string(tasks.size()) + " tasks over " + std::to_string(schedule.folds.size()) +
              " folds");
    std::vector<TaskOutcome> outcomes;
    for (const auto& task : tasks) {
        TaskOutcome o;
        o.task = task;
        try {
            const auto& folds = schedule.folds[task.fold];
            const FoldModel fm = fit_fold(config, data, folds, task);
            const auto classes = labeling::classes_for(task.label_mode);
            const fs::path dir = out_dir / task.dir();
            write_text(dir / "model.json", classifiers::save_model(fm.model).dump() + "\n");
            write_text(dir / "selection.json", fm.selection.dump(2) + "\n");
            write_text(dir / "validation_predictions.csv",
                       predictions_text(predict(config, data, folds, task, fm, true), classes));
            write_text(dir / "predictions.csv", predictions_text(predict(config, data, folds, task, fm, false), classes));
            o.ok = true;
            o.selection = fm.selection;
            log::info("trained " + task.dir());
        } catch (const std::exception& e) {
            o.error = e.what();
            log::warn("task " + task.dir() + " failed: " + o.error);
        }
        outcomes.push_back(std::move(o));
    }

    json manifest;
    manifest["version"] = kVersion;
    manifest["config_hash"] = config.hash();
    manifest["config"] = config.to_json();
    json data_j = json::array();
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto& b = data[i].bars;
        data_j.push_back({{"symbol", data[i].instrument.symbol},
                          {"bars", b.size()},
                          {"first_time", format_iso8601(b.front().open_time)},
                          {"last_time", format_iso8601(b.back().open_time)},
                          {"first_usable_row", schedule.row0[i]}});
    }
    manifest["data"] = data_j;
    json folds_j = json::array();
    for (std::size_t k = 0; k < schedule.folds.size(); ++k) {
        json inst = json::array();
        for (std::size_t i = 0; i < data.size(); ++i) {
            const auto& f = schedule.folds[k][i];
            inst.push_back({{"symbol", data[i].instrument.symbol},
                            {"train", range_json(f.train, data[i].bars)},
                            {"validation", range_json(f.validation, data[i].bars)},
                            {"test", range_json(f.test, data[i].bars)}});
        }
        folds_j.push_back({{"fold", k}, {"instruments", inst}});
    }
    manifest["folds"] = folds_j;
    json tasks_j = json::array();
    std::size_t failed = 0;
    for (const auto& o : outcomes) {
        json t = task_json(o.task);
        t["status"] = o.ok ? "ok" : "failed";
        if (o.ok) {
            t["hyperparameters"] = o.selection.at("hyperparameters");
            t["validation_mcc"] = o.selection.at("validation_mcc");
            t["theta"] = o.selection.at("theta");
            t["rstar"] = o.selection.at("rstar");
            t["multiplier"] = o.selection.at("multiplier");
            t["files"] = {"model.json", "selection.json", "validation_predictions.csv", "predictions.csv"};
        } else {
            t["error"] = o.error;
            ++failed;
        }
        tasks_j.push_back(t);
    }
    manifest["tasks"] = tasks_j;
    manifest["failures"] = failed;
    write_text(out_dir / "manifest.json", manifest.dump(2) + "\n");
    if (!outcomes.empty() && failed == outcomes.size()) {
        throw Error("training_failed", "every task failed; first error: " + outcomes.front().error);
    }
    return outcomes;
}

std::vector<EvaluationRow> evaluate_stage(const ExperimentConfig& config) {
    const fs::path out_dir(config.output_dir);
    const json manifest = read_json(out_dir / "manifest.json");
    std::vector<EvaluationRow> rows;
    for (const auto& task : ok_tasks(manifest)) {
        const fs::path dir = out_dir / task.dir();
        const json sel = read_json(dir / "selection.json");
        const auto preds = read_predictions_file((dir / "predictions.csv").string());
        const auto classes = labeling::classes_for(task.label_mode);
        EvaluationRow e;
        e.task = task;
        e.rows = preds.size();
        e.theta = sel.at("theta").get<double>();
        e.rstar = sel.at("rstar").get<double>();
        if (!sel.at("multiplier").is_null()) e.multiplier = sel.at("multiplier").get<double>();

        metrics::ConfusionMatrix all(classes);
        metrics::ConfusionMatrix accepted(classes);
        std::vector<int> truth;
        std::vector<bool> acc_flags;
        std::size_t n_acc = 0;
        for (const auto& p : preds) {
            all.add(p.label, p.predicted);
            if (p.accepted) {
                accepted.add(p.label, p.predicted);
                ++n_acc;
            }
            truth.push_back(p.label);
            acc_flags.push_back(p.accepted);
        }
        e.nonselective_accuracy = metrics::accuracy(all);
        e.selective_accuracy = metrics::accuracy(accepted);
        e.coverage = preds.empty() ? 0.0 : static_cast<double>(n_acc) / static_cast<double>(preds.size());
        e.nonselective_mcc = metrics::mcc(all);
        e.selective_mcc = metrics::mcc(accepted);
        if (task.label_mode == labeling::LabelMode::ternary) e.buy_sell_mcc = metrics::buy_sell_mcc(accepted);
        const auto scored = scored_from(preds);
        e.curve = selective::accuracy_coverage_curve(scored, config.delta);

        json report = {{"rows", e.rows},
                       {"accepted", n_acc},
                       {"coverage", e.coverage},
                       {"theta", e.theta},
                       {"rstar", e.rstar},
                       {"multiplier", opt_json(e.multiplier)},
                       {"nonselective",
                        {{"accuracy", num_or_null(e.nonselective_accuracy)},
                         {"mcc", e.nonselective_mcc},
                         {"confusion", confusion_json(all)}}},
                       {"selective",
                        {{"accuracy", num_or_null(e.selective_accuracy)},
                         {"mcc", e.selective_mcc},
                         {"confusion", confusion_json(accepted)}}},
                       {"buy_sell_mcc", opt_json(e.buy_sell_mcc)}};
        write_text(dir / "classification.json", report.dump(2) + "\n");

        std::ostringstream curve;
        selective::write_curve_csv(curve, e.curve);
        write_text(dir / "curve.csv", curve.str());

        const auto val = read_predictions_file((dir / "validation_predictions.csv").string());
        std::ostringstream sweep;
        const auto sweep_points = selective::sgr_sweep(scored_from(val), config.rstar_grid, config.delta);
        selective::write_curve_csv(sweep, sweep_points);
        write_text(dir / "sgr_sweep.csv", sweep.str());

        // Gaps are measured within each instrument's bar sequence.
        std::map<std::size_t, std::size_t> gaps;
        for (const auto& [sym, group] : by_symbol(preds)) {
            std::vector<bool> flags(group.back()->row - group.front()->row + 1, false);
            for (const auto* p : group) flags[p->row - group.front()->row] = p->accepted;
            std::unique_ptr<bool[]> buf(new bool[flags.size()]);
            for (std::size_t i = 0; i < flags.size(); ++i) buf[i] = flags[i];
            for (const auto& [gap, count] : metrics::abstention_gaps(std::span<const bool>(buf.get(), flags.size()))) {
                gaps[gap] += count;
            }
        }
        std::ostringstream gaps_csv;
        gaps_csv << "gap,count\n";
        for (const auto& [gap, count] : gaps) gaps_csv << gap << ',' << count << '\n';
        write_text(dir / "gaps.csv", gaps_csv.str());

        std::unique_ptr<bool[]> acc_buf(new bool[acc_flags.size()]);
        for (std::size_t i = 0; i < acc_flags.size(); ++i) acc_buf[i] = acc_flags[i];
        const auto dist = metrics::label_distribution_report(truth, std::span<const bool>(acc_buf.get(), acc_flags.size()),
                                                             classes);
        std::ostringstream dist_csv;
        dist_csv << "class,all_pct,abstained_pct\n";
        for (std::size_t c = 0; c < dist.classes.size(); ++c) {
            dist_csv << dist.classes[c] << ',' << format_double(dist.all_pct[c]) << ','
                     << (dist.abstained_empty ? std::string{} : format_double(dist.abstained_pct[c])) << '\n';
        }
        write_text(dir / "label_distribution.csv", dist_csv.str());
        rows.push_back(std::move(e));
    }

    std::ostringstream table;
    table << "model,feature_set,label_mode,fold,rows,nonselective_accuracy,selective_accuracy,coverage,theta,rstar,"
             "multiplier,nonselective_mcc,selective_mcc,buy_sell_mcc\n";
    for (const auto& e : rows) {
        table << classifiers::to_string(e.task.family) << ',' << features::to_string(e.task.feature_set) << ','
              << labeling::to_string(e.task.label_mode) << ',' << e.task.fold << ',' << e.rows << ','
              << num_csv(e.nonselective_accuracy) << ',' << num_csv(e.selective_accuracy) << ','
              << format_double(e.coverage) << ',' << format_double(e.theta) << ',' << format_double(e.rstar) << ','
              << opt_csv(e.multiplier) << ',' << format_double(e.nonselective_mcc) << ','
              << format_double(e.selective_mcc) << ',' << opt_csv(e.buy_sell_mcc) << '\n';
    }
    write_text(out_dir / "accuracy_coverage.csv", table.str());
    return rows;
}

BacktestOutcome backtest_stage(const ExperimentConfig& config, const std::vector<InstrumentData>& data) {
    const fs::path out_dir(config.output_dir);
    const json manifest = read_json(out_dir / "manifest.json");
    const auto index = symbol_index(data);
    std::vector<std::vector<double>> closes(data.size());
    std::vector<std::vector<double>> ma(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        for (const auto& b : data[i].bars) closes[i].push_back(b.close);
        ma[i] = backtest::dollar_move_ma(closes[i], data[i].instrument.point_value, config.sizing_window);
    }

    // Group folds by (family, FS, label mode), preserving first appearance.
    std::vector<std::string> group_order;
    std::map<std::string, std::vector<Task>> groups;
    for (const auto& t : ok_tasks(manifest)) {
        if (!groups.count(t.group_dir())) group_order.push_back(t.group_dir());
        groups[t.group_dir()].push_back(t);
    }

    BacktestOutcome outcome;
    for (const auto& g : group_order) {
        const auto& tasks = groups[g];
        std::vector<backtest::SharpeRow> group_rows;
        for (const auto strategy : strategies_for(tasks.front().label_mode)) {
            const std::string sname = backtest::to_string(strategy);
            // [slippage][report]
            std::vector<std::vector<backtest::BacktestReport>> reports(config.slippage.size());
            for (const auto& task : tasks) {
                const fs::path dir = out_dir / task.dir();
                const auto preds = read_predictions_file((dir / "predictions.csv").string());
                std::ostringstream pos_csv;
                pos_csv << "symbol,time,predicted,accepted,sign,contracts\n";
                std::vector<std::vector<backtest::BacktestReport>> fold_reports(config.slippage.size());
                for (const auto& [sym, group] : by_symbol(preds)) {
                    const auto it = index.find(sym);
                    if (it == index.end()) throw Error("invalid_argument", "predictions name unknown instrument " + sym);
                    const std::size_t i = it->second;
                    const std::size_t begin = group.front()->row;
                    const std::size_t n = group.size();
                    if (group.back()->row != begin + n - 1 || group.back()->row >= data[i].bars.size()) {
                        throw Error("invalid_argument", "test predictions for " + sym + " are not contiguous bars");
                    }
                    std::vector<int> signs;
                    for (const auto* p : group) signs.push_back(backtest::desired_sign(p->predicted, p->accepted, strategy));
                    const auto positions =
                        backtest::build_positions(signs, std::span(ma[i]).subspan(begin, n), config.risk_budget);
                    for (std::size_t r = 0; r < n; ++r) {
                        pos_csv << sym << ',' << format_iso8601(group[r]->time) << ',' << group[r]->predicted << ','
                                << (group[r]->accepted ? 1 : 0) << ',' << signs[r] << ',' << positions[r] << '\n';
                    }
                    outcome.positions[task.dir() + "/" + sname + "/" + sym] = positions;
                    std::vector<TimeMs> times;
                    for (std::size_t r = begin; r < begin + n; ++r) times.push_back(data[i].bars[r].open_time);
                    for (std::size_t s = 0; s < config.slippage.size(); ++s) {
                        auto rep = backtest::simulate(positions, std::span(closes[i]).subspan(begin, n), times,
                                                      data[i].instrument, config.slippage[s]);
                        fold_reports[s].push_back(rep);
                        reports[s].push_back(std::move(rep));
                    }
                }
                write_text(dir / ("positions_" + sname + ".csv"), pos_csv.str());
                std::vector<backtest::SharpeRow> fold_rows;
                for (std::size_t s = 0; s < config.slippage.size(); ++s) {
                    if (fold_reports[s].empty()) continue;
                    const auto agg = backtest::aggregate(fold_reports[s]);
                    fold_rows.push_back({classifiers::to_string(task.family), features::to_string(task.feature_set),
                                         sname, config.slippage[s], agg.sharpe, agg.total_pnl, agg.contracts_traded});
                }
                std::ostringstream fold_sharpe;
                backtest::write_sharpe_csv(fold_sharpe, fold_rows);
                // Both strategies share the fold file; append the second.
                const fs::path sharpe_path = dir / "sharpe.csv";
                if (strategy == strategies_for(task.label_mode).front()) {
                    write_text(sharpe_path, fold_sharpe.str());
                } else {
                    const std::string text = fold_sharpe.str();
                    std::ofstream(sharpe_path, std::ios::app) << text.substr(text.find('\n') + 1);
                }
            }
            for (std::size_t s = 0; s < config.slippage.size(); ++s) {
                if (reports[s].empty()) continue;
                const auto agg = backtest::aggregate(reports[s]);
                std::ostringstream eq;
                backtest::write_equity_csv(eq, agg);
                write_text(out_dir / g / ("equity_" + sname + "_s" + format_double(config.slippage[s]) + ".csv"), eq.str());
                group_rows.push_back({classifiers::to_string(tasks.front().family),
                                      features::to_string(tasks.front().feature_set), sname, config.slippage[s],
                                      agg.sharpe, agg.total_pnl, agg.contracts_traded});
            }
        }
        std::ostringstream gs;
        backtest::write_sharpe_csv(gs, group_rows);
        write_text(out_dir / g / "sharpe.csv", gs.str());
        outcome.sharpe.insert(outcome.sharpe.end(), group_rows.begin(), group_rows.end());
    }
    std::ostringstream top;
    backtest::write_sharpe_csv(top, outcome.sharpe);
    write_text(out_dir / "sharpe.csv", top.str());
    return outcome;
}

RunResult run(const ExperimentConfig& config) {
    config.validate();
    const auto data = load_data(config);
    RunResult r;
    r.tasks = train_stage(config, data);
    r.evaluation = evaluate_stage(config);
    r.backtest = backtest_stage(config, data);
    report((fs::path(config.output_dir) / "manifest.json").string());
    return r;
}

std::string report(const std::string& manifest_path) {
    const fs::path mpath(manifest_path);
    const fs::path dir = mpath.parent_path();
    const json manifest = read_json(mpath);
    std::ostringstream md;
    md << "# Run summary\n\n";
    md << "- version: " << manifest.value("version", "") << "\n";
    md << "- config hash: " << manifest.value("config_hash", "") << "\n";
    std::size_t ok = 0;
    std::size_t failed = 0;
    for (const auto& t : manifest.at("tasks")) (t.at("status") == "ok" ? ok : failed) += 1;
    md << "- tasks: " << ok << " trained, " << failed << " failed\n";
    md << "- folds: " << manifest.at("folds").size() << "\n";
    for (const auto& d : manifest.at("data")) {
        md << "- " << d.at("symbol").get<std::string>() << ": " << d.at("bars").get<std::size_t>() << " bars, "
           << d.at("first_time").get<std::string>() << " to " << d.at("last_time").get<std::string>() << "\n";
    }
    std::vector<std::string> missing;

    md << "\n## Accuracy and coverage\n\n";
    md << "Means over folds of the test-set figures.\n\n";
    if (fs::exists(dir / "accuracy_coverage.csv")) {
        struct Acc {
            std::size_t folds = 0;
            double nonsel = 0.0;
            double sel = 0.0;
            std::size_t sel_n = 0;
            double cov = 0.0;
        };
        std::vector<std::string> order;
        std::map<std::string, Acc> acc;
        for (const auto& r : read_table(dir / "accuracy_coverage.csv")) {
            const std::string key = r.at("model") + " | " + r.at("feature_set") + " | " + r.at("label_mode");
            if (!acc.count(key)) order.push_back(key);
            auto& a = acc[key];
            ++a.folds;
            if (!r.at("nonselective_accuracy").empty()) a.nonsel += std::stod(r.at("nonselective_accuracy"));
            if (!r.at("selective_accuracy").empty()) {
                a.sel += std::stod(r.at("selective_accuracy"));
                ++a.sel_n;
            }
            a.cov += std::stod(r.at("coverage"));
        }
        if (order.empty()) {
            md << "No evaluated tasks.\n";
        } else {
            md << "| model | feature set | labels | folds | non-selective accuracy | selective accuracy | coverage |\n";
            md << "|---|---|---|---|---|---|---|\n";
            for (const auto& key : order) {
                const auto& a = acc[key];
                const double n = static_cast<double>(a.folds);
                md << "| " << key << " | " << a.folds << " | " << fixed(a.nonsel / n, 4) << " | "
                   << (a.sel_n ? fixed(a.sel / static_cast<double>(a.sel_n), 4) : std::string("n/a")) << " | "
                   << fixed(a.cov / n, 4) << " |\n";
            }
        }
    } else {
        missing.push_back("accuracy_coverage.csv");
        md << "Not evaluated yet.\n";
    }

    md << "\n## Sharpe ratio by slippage\n\n";
    if (fs::exists(dir / "sharpe.csv")) {
        std::vector<std::string> slips;
        std::vector<std::string> order;
        std::map<std::string, std::map<std::string, std::string>> cells;
        for (const auto& r : read_table(dir / "sharpe.csv")) {
            const std::string key = r.at("model") + " | " + r.at("feature_set") + " | " + r.at("mode");
            if (!cells.count(key)) order.push_back(key);
            if (std::find(slips.begin(), slips.end(), r.at("slippage")) == slips.end()) slips.push_back(r.at("slippage"));
            const std::string& s = r.at("sharpe");
            cells[key][r.at("slippage")] = s.empty() ? "n/a" : fixed(std::stod(s), 3);
        }
        if (order.empty()) {
            md << "No backtests.\n";
        } else {
            md << "| model | feature set | strategy |";
            for (const auto& s : slips) md << " s=" << s << " |";
            md << "\n|---|---|---|";
            for (std::size_t i = 0; i < slips.size(); ++i) md << "---|";
            md << "\n";
            for (const auto& key : order) {
                md << "| " << key << " |";
                for (const auto& s : slips) md << ' ' << (cells[key].count(s) ? cells[key][s] : "") << " |";
                md << "\n";
            }
        }
    } else {
        missing.push_back("sharpe.csv");
        md << "Not backtested yet.\n";
    }

    if (failed > 0) {
        md << "\n## Failed tasks\n\n";
        for (const auto& t : manifest.at("tasks")) {
            if (t.at("status") == "failed") {
                md << "- " << t.at("dir").get<std::string>() << ": " << t.value("error", "") << "\n";
            }
        }
    }
    if (!missing.empty()) {
        md << "\n## Missing files\n\n";
        for (const auto& m : missing) md << "- " << m << "\n";
        log::warn("report is missing " + std::to_string(missing.size()) + " result file(s)");
    }
    const std::string text = md.str();
    write_text(dir / "summary.md", text);
    return text;
}

std::vector<std::string> features_stage(const ExperimentConfig& config, const std::vector<InstrumentData>& data) {
    const Schedule schedule = make_schedule(config, data);
    if (schedule.folds.empty()) throw Error("insufficient_data", "no folds available");
    std::vector<std::string> paths;
    const fs::path dir = fs::path(config.output_dir) / "features";
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto& train = schedule.folds[0][i].train;
        std::vector<double> volumes;
        for (std::size_t r = train.begin; r < train.end; ++r) volumes.push_back(static_cast<double>(data[i].bars[r].volume));
        const double lambda = features::boxcox_fit(volumes);
        for (const auto level : config.feature_sets) {
            const auto fm = features::assemble(data[i].bars, level, lambda, config.feature_options);
            std::ostringstream out;
            features::write_csv(out, fm);
            const fs::path p = dir / (data[i].instrument.symbol + "_" + features::to_string(level) + ".csv");
            write_text(p, out.str());
            paths.push_back(p.string());
        }
    }
    return paths;
}

}  // namespace selectrade::experiment
