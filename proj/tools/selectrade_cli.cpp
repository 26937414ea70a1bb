#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "selectrade/experiment.hpp"

namespace fs = std::filesystem;
namespace ex = selectrade::experiment;
namespace md = selectrade::market_data;
using selectrade::Error;

namespace {

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    int jobs = 0;
};

void add_common(CLI::App* cmd, Common& c, bool config_required = true) {
    auto* opt = cmd->add_option("--config", c.config, "Experiment configuration (JSON)");
    if (config_required) opt->required();
    cmd->add_option("--seed", c.seed, "Override the root seed");
    cmd->add_option("--out", c.out, "Override the output directory");
    cmd->add_option("--jobs", c.jobs, "Worker threads")->check(CLI::PositiveNumber);
}

ex::ExperimentConfig load(const Common& c) {
    auto config = ex::load_config(c.config, c.seed);
    if (!c.out.empty()) config.output_dir = c.out;
    if (c.jobs > 0) config.jobs = c.jobs;
    return config;
}

void write_file(const fs::path& path, const std::function<void(std::ostream&)>& fn) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("io", "cannot write " + path.string());
    fn(out);
}

int fail(const std::string& code, const std::string& message, int status) {
    const nlohmann::json j = {{"error", {{"code", code}, {"message", message}}}};
    std::cerr << j.dump() << '\n';
    return status;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Selective classification trading experiments"};
    app.require_subcommand(1);
    bool quiet = false;
    app.add_flag("-q,--quiet", quiet, "Only log warnings and errors");

    Common common;
    std::string input;
    int interval_minutes = 30;
    auto* ingest = app.add_subcommand("ingest", "Build bars from tick files");
    add_common(ingest, common, false);
    ingest->add_option("--input", input, "Tick CSV to convert (otherwise every tick source in --config)");
    ingest->add_option("--interval", interval_minutes, "Bar length in minutes when using --input")
        ->check(CLI::PositiveNumber);

    auto* synth = app.add_subcommand("synth", "Write synthetic tick files for the configured instruments");
    add_common(synth, common);
    auto* features = app.add_subcommand("features", "Write feature matrices");
    add_common(features, common);
    auto* train = app.add_subcommand("train", "Train every configured task");
    add_common(train, common);
    auto* evaluate = app.add_subcommand("evaluate", "Classification reports from trained tasks");
    add_common(evaluate, common);
    auto* backtest = app.add_subcommand("backtest", "Backtest trained tasks over the slippage grid");
    add_common(backtest, common);
    auto* run = app.add_subcommand("run", "Full pipeline: train, evaluate, backtest, report");
    add_common(run, common);
    auto* report = app.add_subcommand("report", "Summarize a finished run");
    add_common(report, common, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return fail("usage", e.what(), 2);
    }
    if (quiet) selectrade::log::set_level(selectrade::log::Level::warn);

    try {
        if (ingest->parsed()) {
            if (!input.empty()) {
                if (common.out.empty()) throw Error("invalid_argument", "--out is required with --input");
                const auto ticks = md::read_ticks_file(input);
                const auto bars = md::build_bars(md::classify_ticks(ticks), interval_minutes * selectrade::kMinuteMs);
                write_file(common.out, [&](std::ostream& o) { md::write_bars(o, bars); });
                std::cout << common.out << '\n';
            } else {
                if (common.config.empty()) throw Error("invalid_argument", "ingest needs --input or --config");
                const auto config = load(common);
                for (const auto& ic : config.instruments) {
                    if (ic.source.kind != ex::DataSource::Kind::ticks) continue;
                    const auto ticks = md::read_ticks_file(config.resolve_path(ic.source.path));
                    const auto bars = md::build_bars(md::classify_ticks(ticks), config.bar_interval);
                    const fs::path p = fs::path(config.output_dir) / "data" / (ic.instrument.symbol + "_bars.csv");
                    write_file(p, [&](std::ostream& o) { md::write_bars(o, bars); });
                    std::cout << p.string() << '\n';
                }
            }
        } else if (synth->parsed()) {
            const auto config = load(common);
            for (const auto& ic : config.instruments) {
                if (ic.source.kind != ex::DataSource::Kind::synthetic) continue;
                const auto ticks = ex::synthesize(ic, config.seed);
                const fs::path p = fs::path(config.output_dir) / "data" / (ic.instrument.symbol + "_ticks.csv");
                write_file(p, [&](std::ostream& o) { md::write_ticks(o, ticks); });
                std::cout << p.string() << '\n';
            }
        } else if (features->parsed()) {
            const auto config = load(common);
            config.validate();
            for (const auto& p : ex::features_stage(config, ex::load_data(config))) std::cout << p << '\n';
        } else if (train->parsed()) {
            const auto config = load(common);
            config.validate();
            ex::train_stage(config, ex::load_data(config));
        } else if (evaluate->parsed()) {
            ex::evaluate_stage(load(common));
        } else if (backtest->parsed()) {
            const auto config = load(common);
            config.validate();
            ex::backtest_stage(config, ex::load_data(config));
        } else if (run->parsed()) {
            const auto config = load(common);
            ex::run(config);
            std::cout << (fs::path(config.output_dir) / "summary.md").string() << '\n';
        } else if (report->parsed()) {
            std::string dir = common.out;
            if (dir.empty()) {
                if (common.config.empty()) throw Error("invalid_argument", "report needs --out or --config");
                dir = load(common).output_dir;
            }
            std::cout << ex::report((fs::path(dir) / "manifest.json").string());
        }
    } catch (const Error& e) {
        return fail(e.code(), e.what(), 1);
    } catch (const std::exception& e) {
        return fail("internal", e.what(), 1);
    }
    return 0;
}
