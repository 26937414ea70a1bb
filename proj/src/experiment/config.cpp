#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "selectrade/experiment.hpp"

namespace selectrade::experiment {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!j.is_object()) throw Error("invalid_config", where + " must be an object");
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [key, _] : j.items()) {
        if (!ok.count(key)) throw Error("invalid_config", "unknown key '" + key + "' in " + where);
    }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback, const std::string& where) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw Error("invalid_config", std::string("wrong type for '") + key + "' in " + where);
    }
}

const char* kind_name(DataSource::Kind k) {
    switch (k) {
        case DataSource::Kind::ticks: return "ticks";
        case DataSource::Kind::bars: return "bars";
        case DataSource::Kind::synthetic: return "synthetic";
    }
    return "?";
}

DataSource parse_source(const json& j, const std::string& where) {
    check_keys(j,
               {"type", "path", "seed", "start_date", "end_date", "base_price", "volatility", "signal_strength",
                "latent_switch_prob", "signal_move_boost", "volume_exponent", "mean_trades_per_bar", "max_trade_size"},
               where);
    DataSource s;
    const auto type = get_or<std::string>(j, "type", "", where);
    if (type == "ticks") {
        s.kind = DataSource::Kind::ticks;
    } else if (type == "bars") {
        s.kind = DataSource::Kind::bars;
    } else if (type == "synthetic") {
        s.kind = DataSource::Kind::synthetic;
    } else {
        throw Error("invalid_config", where + ".type must be ticks, bars or synthetic");
    }
    if (s.kind != DataSource::Kind::synthetic) {
        s.path = get_or<std::string>(j, "path", "", where);
        if (s.path.empty()) throw Error("invalid_config", where + " needs a path");
        return s;
    }
    auto& c = s.synthetic;
    c.start_date = get_or(j, "start_date", c.start_date, where);
    c.end_date = get_or(j, "end_date", c.end_date, where);
    c.base_price = get_or(j, "base_price", c.base_price, where);
    c.volatility = get_or(j, "volatility", c.volatility, where);
    c.signal_strength = get_or(j, "signal_strength", c.signal_strength, where);
    c.latent_switch_prob = get_or(j, "latent_switch_prob", c.latent_switch_prob, where);
    c.signal_move_boost = get_or(j, "signal_move_boost", c.signal_move_boost, where);
    c.volume_exponent = get_or(j, "volume_exponent", c.volume_exponent, where);
    c.mean_trades_per_bar = get_or(j, "mean_trades_per_bar", c.mean_trades_per_bar, where);
    c.max_trade_size = get_or(j, "max_trade_size", c.max_trade_size, where);
    if (j.contains("seed")) s.seed = get_or<std::uint64_t>(j, "seed", 0, where);
    return s;
}

json source_to_json(const DataSource& s) {
    json j{{"type", kind_name(s.kind)}};
    if (s.kind != DataSource::Kind::synthetic) {
        j["path"] = s.path;
        return j;
    }
    const auto& c = s.synthetic;
    j["start_date"] = c.start_date;
    j["end_date"] = c.end_date;
    j["base_price"] = c.base_price;
    j["volatility"] = c.volatility;
    j["signal_strength"] = c.signal_strength;
    j["latent_switch_prob"] = c.latent_switch_prob;
    j["signal_move_boost"] = c.signal_move_boost;
    j["volume_exponent"] = c.volume_exponent;
    j["mean_trades_per_bar"] = c.mean_trades_per_bar;
    j["max_trade_size"] = c.max_trade_size;
    if (s.seed) j["seed"] = *s.seed;
    return j;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const json& j, const std::string& base_dir) {
    try {
        check_keys(j,
                   {"seed", "output_dir", "jobs", "bar_interval_minutes", "instruments", "feature_sets", "label_modes",
                    "families", "labels", "walk_forward", "selective", "backtest", "features", "training"},
                   "config");
        ExperimentConfig c;
        c.base_dir = base_dir;
        if (!j.contains("seed")) throw Error("invalid_config", "config needs a \"seed\" (or pass --seed)");
        c.seed = get_or<std::uint64_t>(j, "seed", 0, "config");
        c.output_dir = get_or(j, "output_dir", c.output_dir, "config");
        c.jobs = get_or(j, "jobs", c.jobs, "config");
        c.bar_interval = get_or<std::int64_t>(j, "bar_interval_minutes", 30, "config") * kMinuteMs;

        if (!j.contains("instruments") || !j.at("instruments").is_array()) {
            throw Error("invalid_config", "config needs an \"instruments\" list");
        }
        std::size_t idx = 0;
        for (const auto& ji : j.at("instruments")) {
            const std::string where = "instruments[" + std::to_string(idx++) + "]";
            check_keys(ji, {"symbol", "tick_size", "point_value", "source"}, where);
            InstrumentConfig ic;
            ic.instrument.symbol = get_or<std::string>(ji, "symbol", "", where);
            if (!ji.contains("tick_size") || !ji.contains("point_value")) {
                throw Error("invalid_config", where + " needs tick_size and point_value");
            }
            ic.instrument.tick_size = get_or(ji, "tick_size", 0.0, where);
            ic.instrument.point_value = get_or(ji, "point_value", 0.0, where);
            if (!ji.contains("source")) throw Error("invalid_config", where + " needs a source");
            ic.source = parse_source(ji.at("source"), where + ".source");
            ic.source.synthetic.tick_size = ic.instrument.tick_size;
            ic.source.synthetic.bar_interval = c.bar_interval;
            c.instruments.push_back(std::move(ic));
        }

        if (j.contains("feature_sets")) {
            c.feature_sets.clear();
            for (const auto& v : j.at("feature_sets")) c.feature_sets.push_back(features::parse_level(v.get<std::string>()));
        }
        if (j.contains("label_modes")) {
            c.label_modes.clear();
            for (const auto& v : j.at("label_modes")) c.label_modes.push_back(labeling::parse_label_mode(v.get<std::string>()));
        }
        if (j.contains("families")) {
            c.families.clear();
            for (const auto& v : j.at("families")) c.families.push_back(classifiers::parse_family(v.get<std::string>()));
        }
        if (j.contains("labels")) {
            const auto& jl = j.at("labels");
            check_keys(jl, {"multipliers", "vol_window"}, "labels");
            c.multipliers = get_or(jl, "multipliers", c.multipliers, "labels");
            c.vol_window = get_or(jl, "vol_window", c.vol_window, "labels");
        }
        if (j.contains("walk_forward")) {
            const auto& jw = j.at("walk_forward");
            check_keys(jw, {"initial_train", "validation", "test", "max_folds"}, "walk_forward");
            c.walk_forward.initial_train = get_or(jw, "initial_train", c.walk_forward.initial_train, "walk_forward");
            c.walk_forward.validation = get_or(jw, "validation", c.walk_forward.validation, "walk_forward");
            c.walk_forward.test = get_or(jw, "test", c.walk_forward.test, "walk_forward");
            c.max_folds = get_or(jw, "max_folds", c.max_folds, "walk_forward");
        }
        c.rstar_grid = selective::default_rstar_grid();
        if (j.contains("selective")) {
            const auto& js = j.at("selective");
            check_keys(js, {"delta", "rstar_grid"}, "selective");
            c.delta = get_or(js, "delta", c.delta, "selective");
            c.rstar_grid = get_or(js, "rstar_grid", c.rstar_grid, "selective");
        }
        c.slippage = backtest::default_slippage_grid();
        if (j.contains("backtest")) {
            const auto& jb = j.at("backtest");
            check_keys(jb, {"slippage", "risk_budget", "sizing_window"}, "backtest");
            c.slippage = get_or(jb, "slippage", c.slippage, "backtest");
            c.risk_budget = get_or(jb, "risk_budget", c.risk_budget, "backtest");
            c.sizing_window = get_or(jb, "sizing_window", c.sizing_window, "backtest");
        }
        if (j.contains("features")) {
            const auto& jf = j.at("features");
            check_keys(jf, {"minmax_window", "sma_windows", "vap_long_window", "vap_short_window"}, "features");
            auto& o = c.feature_options;
            o.minmax_window = get_or(jf, "minmax_window", o.minmax_window, "features");
            o.sma_windows = get_or(jf, "sma_windows", o.sma_windows, "features");
            o.vap_long_window = get_or(jf, "vap_long_window", o.vap_long_window, "features");
            o.vap_short_window = get_or(jf, "vap_short_window", o.vap_short_window, "features");
        }
        if (j.contains("training")) {
            json jt = j.at("training");
            check_keys(jt,
                       {"epochs", "batch_size", "dropout", "l2", "bn_momentum", "sequence_length", "rf_max_samples",
                        "rf_max_depth", "logistic_batch_size", "architectures"},
                       "training");
            if (jt.contains("architectures")) {
                const auto& ja = jt.at("architectures");
                check_keys(ja, {"feed_forward", "lstm"}, "training.architectures");
                for (const auto& [name, list] : ja.items()) {
                    c.architectures[classifiers::parse_family(name)] = list.get<std::vector<std::vector<int>>>();
                }
                jt.erase("architectures");
            }
            c.training = classifiers::TrainingOptions::from_json(jt);
        }
        c.validate_shape();
        return c;
    } catch (const json::exception& e) {
        throw Error("invalid_config", std::string("malformed config: ") + e.what());
    }
}

json ExperimentConfig::to_json() const {
    json instruments = json::array();
    for (const auto& ic : this->instruments) {
        instruments.push_back({{"symbol", ic.instrument.symbol},
                               {"tick_size", ic.instrument.tick_size},
                               {"point_value", ic.instrument.point_value},
                               {"source", source_to_json(ic.source)}});
    }
    json fsets = json::array();
    for (auto f : feature_sets) fsets.push_back(features::to_string(f));
    json modes = json::array();
    for (auto m : label_modes) modes.push_back(labeling::to_string(m));
    json fams = json::array();
    for (auto f : families) fams.push_back(classifiers::to_string(f));
    json training_json = training.to_json();
    json archs = json::object();
    for (const auto& [family, list] : architectures) archs[classifiers::to_string(family)] = list;
    training_json["architectures"] = archs;
    return {{"seed", seed},
            {"output_dir", output_dir},
            {"jobs", jobs},
            {"bar_interval_minutes", bar_interval / kMinuteMs},
            {"instruments", instruments},
            {"feature_sets", fsets},
            {"label_modes", modes},
            {"families", fams},
            {"labels", {{"multipliers", multipliers}, {"vol_window", vol_window}}},
            {"walk_forward",
             {{"initial_train", walk_forward.initial_train},
              {"validation", walk_forward.validation},
              {"test", walk_forward.test},
              {"max_folds", max_folds}}},
            {"selective", {{"delta", delta}, {"rstar_grid", rstar_grid}}},
            {"backtest", {{"slippage", slippage}, {"risk_budget", risk_budget}, {"sizing_window", sizing_window}}},
            {"features",
             {{"minmax_window", feature_options.minmax_window},
              {"sma_windows", feature_options.sma_windows},
              {"vap_long_window", feature_options.vap_long_window},
              {"vap_short_window", feature_options.vap_short_window}}},
            {"training", training_json}};
}

void ExperimentConfig::validate_shape() const {
    if (instruments.empty()) throw Error("invalid_config", "config lists no instruments");
    std::set<std::string> symbols;
    for (const auto& ic : instruments) {
        ic.instrument.validate();
        if (!symbols.insert(ic.instrument.symbol).second) {
            throw Error("invalid_config", "duplicate instrument symbol '" + ic.instrument.symbol + "'");
        }
    }
    if (feature_sets.empty() || label_modes.empty() || families.empty()) {
        throw Error("invalid_config", "feature_sets, label_modes and families must be non-empty");
    }
    if (bar_interval <= 0) throw Error("invalid_config", "bar interval must be positive");
    if (jobs < 1) throw Error("invalid_config", "jobs must be at least 1");
    if (multipliers.empty()) throw Error("invalid_config", "label multipliers must be non-empty");
    for (const double m : multipliers) {
        if (!(m > 0.0)) throw Error("invalid_config", "label multipliers must be positive");
    }
    if (!(delta > 0.0 && delta < 1.0)) throw Error("invalid_config", "delta must lie in (0, 1)");
    if (rstar_grid.empty()) throw Error("invalid_config", "rstar_grid must be non-empty");
    for (const double r : rstar_grid) {
        if (!(r > 0.0)) throw Error("invalid_config", "rstar values must be positive");
    }
    if (slippage.empty()) throw Error("invalid_config", "slippage grid must be non-empty");
    for (const double s : slippage) {
        if (!(s >= 0.0)) throw Error("invalid_config", "slippage multiples must be non-negative");
    }
    if (!(risk_budget > 0.0)) throw Error("invalid_config", "risk_budget must be positive");
    if (sizing_window == 0) throw Error("invalid_config", "sizing_window must be positive");
    for (const auto& [family, list] : architectures) {
        if (family != classifiers::Family::feed_forward && family != classifiers::Family::lstm) {
            throw Error("invalid_config", "architectures apply to feed_forward and lstm only");
        }
        classifiers::default_grid(family, list);
    }
}

void ExperimentConfig::validate() const {
    validate_shape();
    for (const auto& ic : instruments) {
        if (ic.source.kind == DataSource::Kind::synthetic) continue;
        const fs::path p = resolve_path(ic.source.path);
        if (!fs::exists(p)) {
            throw Error("missing_file", "data file for " + ic.instrument.symbol + " not found: " + p.string());
        }
    }
}

std::string ExperimentConfig::resolve_path(const std::string& path) const {
    const fs::path p(path);
    if (p.is_absolute() || base_dir.empty()) return p.string();
    return (fs::path(base_dir) / p).string();
}

std::string ExperimentConfig::hash() const {
    json j = to_json();
    j.erase("output_dir");
    j.erase("jobs");
    const std::string text = j.dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

ExperimentConfig load_config(const std::string& path, std::optional<std::uint64_t> seed_override) {
    std::ifstream in(path);
    if (!in) throw Error("missing_file", "cannot open config file " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw Error("invalid_config", "config " + path + " is not valid JSON: " + e.what());
    }
    if (seed_override) j["seed"] = *seed_override;
    return ExperimentConfig::from_json(j, fs::path(path).parent_path().string());
}

}  // namespace selectrade::experiment
