#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "selectrade/experiment.hpp"
#include "selectrade/metrics.hpp"

namespace selectrade::experiment {

using nlohmann::json;

std::vector<market_data::Tick> synthesize(const InstrumentConfig& ic, std::uint64_t root_seed) {
    if (ic.source.kind != DataSource::Kind::synthetic) {
        throw Error("invalid_argument", ic.instrument.symbol + " is not a synthetic instrument");
    }
    const std::uint64_t seed = ic.source.seed.value_or(mix_seed(root_seed, "data/" + ic.instrument.symbol));
    return market_data::generate_synthetic_ticks(ic.source.synthetic, seed);
}

std::vector<InstrumentData> load_data(const ExperimentConfig& config) {
    std::vector<InstrumentData> out;
    for (const auto& ic : config.instruments) {
        InstrumentData d;
        d.instrument = ic.instrument;
        switch (ic.source.kind) {
            case DataSource::Kind::bars:
                d.bars = market_data::read_bars_file(config.resolve_path(ic.source.path));
                break;
            case DataSource::Kind::ticks: {
                const auto ticks = market_data::read_ticks_file(config.resolve_path(ic.source.path));
                d.bars = market_data::build_bars(market_data::classify_ticks(ticks), config.bar_interval);
                break;
            }
            case DataSource::Kind::synthetic: {
                const auto ticks = synthesize(ic, config.seed);
                d.bars = market_data::build_bars(market_data::classify_ticks(ticks), config.bar_interval);
                break;
            }
        }
        if (d.bars.empty()) throw Error("insufficient_data", "no bars for " + ic.instrument.symbol);
        log::info("loaded " + std::to_string(d.bars.size()) + " bars for " + ic.instrument.symbol);
        out.push_back(std::move(d));
    }
    return out;
}

std::size_t first_usable_row(const ExperimentConfig& config) {
    std::size_t row = config.sizing_window;
    for (const auto fs : config.feature_sets) row = std::max(row, features::warmup_rows(fs, config.feature_options));
    for (const auto m : config.label_modes) {
        if (m == labeling::LabelMode::ternary) row = std::max(row, config.vol_window);
    }
    return row;
}

Schedule make_schedule(const ExperimentConfig& config, const std::vector<InstrumentData>& data) {
    Schedule s;
    const std::size_t row0 = first_usable_row(config);
    std::vector<splits::WalkForwardPlan> plans;
    std::size_t folds = std::numeric_limits<std::size_t>::max();
    for (const auto& d : data) {
        // The last bar has no label.
        const std::size_t usable = d.bars.size() > row0 + 1 ? d.bars.size() - 1 - row0 : 0;
        try {
            plans.push_back(splits::plan(usable, config.walk_forward));
        } catch (const Error& e) {
            throw Error(e.code(), d.instrument.symbol + ": " + e.what() + " (after " + std::to_string(row0) +
                                      " warm-up bars)");
        }
        folds = std::min(folds, plans.back().folds.size());
        s.row0.push_back(row0);
    }
    if (config.max_folds > 0) folds = std::min(folds, config.max_folds);
    for (std::size_t k = 0; k < folds; ++k) {
        std::vector<splits::Fold> per;
        for (const auto& p : plans) {
            splits::Fold f = p.folds[k];
            for (auto* r : {&f.train, &f.validation, &f.test}) {
                r->begin += row0;
                r->end += row0;
            }
            per.push_back(f);
        }
        s.folds.push_back(std::move(per));
    }
    return s;
}

std::string Task::group_dir() const {
    return classifiers::to_string(family) + "/" + features::to_string(feature_set) + "/" + labeling::to_string(label_mode);
}

std::string Task::dir() const { return group_dir() + "/fold_" + std::to_string(fold); }

std::uint64_t Task::seed(std::uint64_t root) const { return mix_seed(root, "fold_" + std::to_string(fold) + "/" + group_dir()); }

namespace {

struct Prepared {
    std::vector<features::FeatureMatrix> fm;
    std::vector<double> lambdas;
};

Prepared prepare_features(const ExperimentConfig& config, const std::vector<InstrumentData>& data,
                          const std::vector<splits::Fold>& folds, features::FeatureSetLevel level, bool truncate) {
    Prepared p;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto& bars = data[i].bars;
        const auto& f = folds[i];
        const std::size_t n = truncate ? f.validation.end : f.test.end;
        if (n > bars.size()) throw Error("invalid_argument", "fold reaches past the data of " + data[i].instrument.symbol);
        std::vector<double> volumes;
        for (std::size_t r = f.train.begin; r < f.train.end; ++r) volumes.push_back(static_cast<double>(bars[r].volume));
        const double lambda = features::boxcox_fit(volumes);
        p.fm.push_back(features::assemble(std::span(bars).first(truncate ? n : bars.size()), level, lambda, config.feature_options));
        p.lambdas.push_back(lambda);
    }
    return p;
}

labeling::LabelSeries labels_for(const ExperimentConfig& config, std::span<const market_data::Bar> bars,
                                 labeling::LabelMode mode, double multiplier) {
    labeling::LabelConfig lc;
    lc.mode = mode;
    lc.multiplier = mode == labeling::LabelMode::ternary ? multiplier : 0.0;
    lc.vol_window = config.vol_window;
    return labeling::make_labels(bars, lc);
}

struct Stacked {
    Matrix x;
    std::vector<int> y;
    std::vector<std::size_t> starts;
    std::vector<bool> mask;
    std::vector<std::pair<std::size_t, std::size_t>> origin;  // (instrument, bar row)
};

// Stacks rows [begin, end) per instrument; rows outside [score_begin, end)
// are context only.
Stacked stack_rows(const Prepared& p, const std::vector<labeling::LabelSeries>& labels,
                   const std::vector<std::pair<std::size_t, std::size_t>>& ranges,
                   const std::vector<std::size_t>& score_begin) {
    Stacked s;
    std::size_t total = 0;
    std::vector<std::vector<std::size_t>> rows(ranges.size());
    for (std::size_t i = 0; i < ranges.size(); ++i) {
        for (std::size_t r = ranges[i].first; r < ranges[i].second; ++r) {
            if (r < p.fm[i].valid_from || !labels[i].valid[r]) continue;
            rows[i].push_back(r);
        }
        total += rows[i].size();
    }
    const auto cols = p.fm.empty() ? 0 : p.fm[0].values.cols();
    s.x.resize(static_cast<Eigen::Index>(total), cols);
    std::size_t out = 0;
    for (std::size_t i = 0; i < ranges.size(); ++i) {
        if (rows[i].empty()) continue;
        s.starts.push_back(out);
        for (const auto r : rows[i]) {
            s.x.row(static_cast<Eigen::Index>(out)) = p.fm[i].values.row(static_cast<Eigen::Index>(r));
            s.y.push_back(labels[i].label[r]);
            s.mask.push_back(r >= score_begin[i]);
            s.origin.emplace_back(i, r);
            ++out;
        }
    }
    return s;
}

bool recurrent(classifiers::Family f) { return f == classifiers::Family::lstm; }

struct Candidate {
    classifiers::GridResult grid;
    selective::ThresholdChoice threshold;
    double buy_sell_mcc = 0.0;
    double multiplier = 0.0;
};

}  // namespace

FoldModel fit_fold(const ExperimentConfig& config, const std::vector<InstrumentData>& data,
                   const std::vector<splits::Fold>& folds, const Task& task) {
    if (folds.size() != data.size()) throw Error("invalid_argument", "one fold range per instrument is required");
    const Prepared prep = prepare_features(config, data, folds, task.feature_set, true);
    const auto classes = labeling::classes_for(task.label_mode);
    const std::uint64_t task_seed = task.seed(config.seed);
    const auto grid = classifiers::default_grid(task.family, config.architectures.count(task.family)
                                                                   ? config.architectures.at(task.family)
                                                                   : std::vector<std::vector<int>>{});
    std::vector<double> multipliers{0.0};
    if (task.label_mode == labeling::LabelMode::ternary) multipliers = config.multipliers;

    std::vector<Candidate> candidates;
    json per_multiplier = json::array();
    for (const double m : multipliers) {
        std::vector<labeling::LabelSeries> labels;
        for (std::size_t i = 0; i < data.size(); ++i) {
            labels.push_back(labels_for(config, std::span(data[i].bars).first(folds[i].validation.end), task.label_mode, m));
        }
        std::vector<std::pair<std::size_t, std::size_t>> train_ranges;
        std::vector<std::pair<std::size_t, std::size_t>> val_ranges;
        std::vector<std::size_t> train_score;
        std::vector<std::size_t> val_score;
        for (const auto& f : folds) {
            train_ranges.emplace_back(f.train.begin, f.train.end);
            train_score.push_back(f.train.begin);
            val_ranges.emplace_back(recurrent(task.family) ? f.train.begin : f.validation.begin, f.validation.end);
            val_score.push_back(f.validation.begin);
        }
        const Stacked train = stack_rows(prep, labels, train_ranges, train_score);
        const Stacked val = stack_rows(prep, labels, val_ranges, val_score);
        if (train.y.empty() || std::none_of(val.mask.begin(), val.mask.end(), [](bool b) { return b; })) {
            throw Error("insufficient_data", "fold " + std::to_string(task.fold) + " has no usable training or validation rows");
        }
        const auto cw = labeling::class_weights(train.y);
        std::vector<double> weights;
        for (const int y : train.y) weights.push_back(cw.at(y));

        const std::uint64_t seed = task.label_mode == labeling::LabelMode::ternary
                                       ? mix_seed(task_seed, "multiplier_" + format_double(m))
                                       : task_seed;
        Candidate c;
        c.multiplier = m;
        const std::vector<bool>& mask_vec = val.mask;
        std::unique_ptr<bool[]> mask(new bool[mask_vec.size()]);
        for (std::size_t r = 0; r < mask_vec.size(); ++r) mask[r] = mask_vec[r];
        const std::span<const bool> mask_span(mask.get(), mask_vec.size());
        c.grid = classifiers::grid_search(task.family, grid, {train.x, train.y, weights, classes, train.starts},
                                          {val.x, val.y, val.starts, mask_span}, seed, config.training, config.jobs);

        // Confidence on the scored validation rows.
        const Matrix proba = c.grid.best.model->predict_proba(val.x, val.starts);
        Matrix scored_proba(static_cast<Eigen::Index>(std::count(mask_vec.begin(), mask_vec.end(), true)), proba.cols());
        std::vector<int> truth;
        for (std::size_t r = 0, o = 0; r < mask_vec.size(); ++r) {
            if (!mask_vec[r]) continue;
            scored_proba.row(static_cast<Eigen::Index>(o++)) = proba.row(static_cast<Eigen::Index>(r));
            truth.push_back(val.y[r]);
        }
        const auto scored = selective::score(scored_proba, classes, truth);
        c.threshold = selective::select_threshold_by_mcc(scored, config.rstar_grid, classes, config.delta);
        if (task.label_mode == labeling::LabelMode::ternary) {
            metrics::ConfusionMatrix cm(classes);
            for (const auto& s : scored) {
                if (s.kappa >= c.threshold.theta) cm.add(s.truth, s.predicted);
            }
            c.buy_sell_mcc = metrics::buy_sell_mcc(cm);
            per_multiplier.push_back({{"multiplier", m},
                                      {"buy_sell_mcc", c.buy_sell_mcc},
                                      {"validation_mcc", c.grid.best.validation_mcc},
                                      {"theta", c.threshold.theta},
                                      {"rstar", c.threshold.rstar},
                                      {"combination", c.grid.best.combination}});
        }
        candidates.push_back(std::move(c));
    }

    std::size_t chosen = 0;
    if (task.label_mode == labeling::LabelMode::ternary) {
        std::vector<selective::MultiplierResult> results;
        for (const auto& c : candidates) results.push_back({c.multiplier, c.buy_sell_mcc});
        const double m = selective::select_multiplier(results);
        for (std::size_t i = 0; i < candidates.size(); ++i) {
            if (candidates[i].multiplier == m) {
                chosen = i;
                break;
            }
        }
    }
    Candidate& c = candidates[chosen];
    FoldModel fm;
    fm.model = c.grid.best;
    fm.theta = c.threshold.theta;
    fm.rstar = c.threshold.rstar;
    fm.theta_fallback = c.threshold.fallback;
    if (task.label_mode == labeling::LabelMode::ternary) fm.multiplier = c.multiplier;
    fm.lambdas = prep.lambdas;

    json lambdas = json::object();
    for (std::size_t i = 0; i < data.size(); ++i) lambdas[data[i].instrument.symbol] = prep.lambdas[i];
    json grid_mcc = json::array();
    for (const double v : c.grid.mcc) grid_mcc.push_back(std::isnan(v) ? json(nullptr) : json(v));
    fm.selection = {{"family", classifiers::to_string(task.family)},
                    {"feature_set", features::to_string(task.feature_set)},
                    {"label_mode", labeling::to_string(task.label_mode)},
                    {"fold", task.fold},
                    {"classes", classes},
                    {"hyperparameters", c.grid.best.hyperparameters},
                    {"combination", c.grid.best.combination},
                    {"seed", c.grid.best.seed},
                    {"validation_mcc", c.grid.best.validation_mcc},
                    {"grid_mcc", grid_mcc},
                    {"grid_failures", c.grid.failures},
                    {"theta", fm.theta},
                    {"rstar", fm.rstar},
                    {"theta_fallback", fm.theta_fallback},
                    {"validation_coverage", c.threshold.coverage},
                    {"validation_selective_mcc", c.threshold.mcc},
                    {"multiplier", fm.multiplier ? json(*fm.multiplier) : json(nullptr)},
                    {"multipliers", per_multiplier},
                    {"boxcox_lambda", lambdas},
                    {"training_options", config.training.to_json()}};
    return fm;
}

std::vector<PredictionRow> predict(const ExperimentConfig& config, const std::vector<InstrumentData>& data,
                                   const std::vector<splits::Fold>& folds, const Task& task, const FoldModel& fm,
                                   bool validation) {
    const Prepared prep = prepare_features(config, data, folds, task.feature_set, validation);
    const auto classes = labeling::classes_for(task.label_mode);
    std::vector<labeling::LabelSeries> labels;
    std::vector<std::pair<std::size_t, std::size_t>> ranges;
    std::vector<std::size_t> score;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto& f = folds[i];
        const std::size_t n = validation ? f.validation.end : data[i].bars.size();
        labels.push_back(labels_for(config, std::span(data[i].bars).first(n), task.label_mode, fm.multiplier.value_or(0.0)));
        const auto& target = validation ? f.validation : f.test;
        ranges.emplace_back(recurrent(task.family) ? f.train.begin : target.begin, target.end);
        score.push_back(target.begin);
    }
    const Stacked s = stack_rows(prep, labels, ranges, score);
    const Matrix proba = fm.model.model->predict_proba(s.x, s.starts);
    std::vector<PredictionRow> out;
    for (std::size_t r = 0; r < s.y.size(); ++r) {
        if (!s.mask[r]) continue;
        const auto [inst, bar] = s.origin[r];
        PredictionRow p;
        p.symbol = data[inst].instrument.symbol;
        p.row = bar;
        p.time = data[inst].bars[bar].open_time;
        p.label = s.y[r];
        Eigen::Index best = 0;
        for (Eigen::Index c = 1; c < proba.cols(); ++c) {
            if (proba(static_cast<Eigen::Index>(r), c) > proba(static_cast<Eigen::Index>(r), best)) best = c;
        }
        p.predicted = classes[static_cast<std::size_t>(best)];
        p.kappa = proba(static_cast<Eigen::Index>(r), best);
        p.accepted = p.kappa >= fm.theta;
        for (Eigen::Index c = 0; c < proba.cols(); ++c) p.proba.push_back(proba(static_cast<Eigen::Index>(r), c));
        out.push_back(std::move(p));
    }
    return out;
}

void write_predictions(std::ostream& out, const std::vector<PredictionRow>& rows, const std::vector<int>& classes) {
    out << "symbol,row,time,label,predicted,kappa,accepted";
    for (const int c : classes) out << ",p_" << c;
    out << '\n';
    for (const auto& r : rows) {
        if (r.proba.size() != classes.size()) throw Error("invalid_argument", "probability row does not match the classes");
        out << r.symbol << ',' << r.row << ',' << format_iso8601(r.time) << ',' << r.label << ',' << r.predicted << ','
            << format_double(r.kappa) << ',' << (r.accepted ? 1 : 0);
        for (const double p : r.proba) out << ',' << format_double(p);
        out << '\n';
    }
}

std::vector<PredictionRow> read_predictions(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw Error("parse", "predictions file is empty");
    const auto header = split_csv(line);
    if (header.size() < 9 || header[0] != "symbol" || header[5] != "kappa") {
        throw Error("parse", "predictions file has an unexpected header");
    }
    const std::size_t k = header.size() - 7;
    std::vector<PredictionRow> rows;
    std::size_t line_no = 1;
    auto to_int = [&](std::string_view s) {
        try {
            return std::stoll(std::string(s));
        } catch (const std::exception&) {
            throw Error("parse", "predictions line " + std::to_string(line_no) + ": bad integer '" + std::string(s) + "'");
        }
    };
    auto to_double = [&](std::string_view s) {
        try {
            return std::stod(std::string(s));
        } catch (const std::exception&) {
            throw Error("parse", "predictions line " + std::to_string(line_no) + ": bad number '" + std::string(s) + "'");
        }
    };
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto f = split_csv(line);
        if (f.size() != header.size()) {
            throw Error("parse", "predictions line " + std::to_string(line_no) + ": expected " +
                                     std::to_string(header.size()) + " fields");
        }
        PredictionRow r;
        r.symbol = std::string(f[0]);
        r.row = static_cast<std::size_t>(to_int(f[1]));
        r.time = parse_iso8601(f[2]);
        r.label = static_cast<int>(to_int(f[3]));
        r.predicted = static_cast<int>(to_int(f[4]));
        r.kappa = to_double(f[5]);
        r.accepted = to_int(f[6]) != 0;
        for (std::size_t c = 0; c < k; ++c) r.proba.push_back(to_double(f[7 + c]));
        rows.push_back(std::move(r));
    }
    return rows;
}

std::vector<PredictionRow> read_predictions_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("missing_file", "cannot open " + path);
    return read_predictions(in);
}

}  // namespace selectrade::experiment
