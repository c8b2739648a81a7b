#include <chrono>
#include <ctime>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "gsmc/gsmc.hpp"

using namespace gsmc;

namespace {

const std::vector<std::string> kOverridable = {
    "lambda",     "theta",         "eps",           "R",          "tau",         "p",          "alpha",
    "beta",       "combo",         "nu",            "monitor_weight", "spending", "b",          "source",
    "mvn",        "accrual",       "censor_yearly", "true_lambda", "true_theta", "true_eps",   "true_accrual",
    "true_censor_yearly", "hypotheses", "reps_h0", "reps_h1",     "seed",        "est_accuracy"};

struct Common {
    std::string config;
    std::string out;
    int threads = 0;
    std::map<std::string, std::string> overrides;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("config", c.config, "JSON config file")->required();
    cmd->add_option("-o,--out", c.out, "output path prefix; stdout when omitted");
    cmd->add_option("--threads", c.threads, "worker threads (default: GSMC_THREADS or all cores)");
    for (const auto& k : kOverridable)
        cmd->add_option_function<std::string>("--" + k, [&c, k](const std::string& v) { c.overrides[k] = v; },
                                              "override config key '" + k + "'");
}

json resolve(const Common& c) {
    json cfg = load_config(c.config);
    for (const auto& [k, v] : c.overrides) apply_override(cfg, k, v);
    return cfg;
}

std::string timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    return buf;
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot write " + path);
    f << text;
}

void write_manifest(const std::string& command, const json& cfg, const std::vector<std::string>& outputs,
                    const Common& c) {
    json m = {{"command", command},
              {"config", cfg},
              {"config_path", c.config},
              {"seed", cfg.value("seed", json())},
              {"version", GSMC_VERSION},
              {"timestamp", timestamp()},
              {"outputs", outputs}};
    write_file(c.out + ".manifest.json", m.dump(2) + "\n");
}

void emit(const Common& c, const std::string& suffix, const std::string& text, std::vector<std::string>& outputs) {
    if (c.out.empty()) {
        std::cout << text;
        return;
    }
    write_file(c.out + suffix, text);
    outputs.push_back(c.out + suffix);
}

bool exact_supported(const DesignSpec& s) {
    try {
        (void)ExactScenario::from(s.model, s.ac);
        return true;
    } catch (const UnsupportedModelError&) {
        return false;
    }
}

struct Designs {
    DesignReport sto;
    std::optional<DesignReport> exa;
};

Designs both_designs(DesignSpec spec) {
    spec.source = SourceKind::PredSto;
    Designs d{design(spec), std::nullopt};
    if (exact_supported(spec)) {
        spec.source = SourceKind::PredExa;
        d.exa = design(spec);
    }
    return d;
}

int cmd_design(const Common& c, bool as_json) {
    const json cfg = resolve(c);
    const DesignSpec spec = design_spec_from_config(cfg);
    const DesignReport r = design(spec);
    std::vector<std::string> outputs;
    if (as_json) {
        emit(c, ".json", to_json(r).dump(2) + "\n", outputs);
    } else {
        write_design_summary(std::cout, r);
        if (!c.out.empty()) {
            write_file(c.out + ".json", to_json(r).dump(2) + "\n");
            outputs.push_back(c.out + ".json");
        }
    }
    if (!c.out.empty()) write_manifest("design", cfg, outputs, c);
    return 0;
}

int cmd_simulate(const Common& c) {
    const json cfg = resolve(c);
    const ScenarioConfig sc = scenario_from_config(cfg);
    const Designs ds = both_designs(sc.spec);
    std::ostringstream csv;
    write_oc_csv_header(csv);
    json summary = {{"n", ds.sto.n}, {"d", ds.sto.d}, {"results", json::array()}};
    for (Hypothesis h : sc.hypotheses) {
        const auto oc = operating_characteristics(make_scenario(sc, h, ds.sto, ds.exa, c.threads));
        write_oc_csv(csv, oc);
        summary["results"].push_back(to_json(oc));
    }
    std::vector<std::string> outputs;
    emit(c, ".csv", csv.str(), outputs);
    if (!c.out.empty()) {
        write_file(c.out + ".json", summary.dump(2) + "\n");
        outputs.push_back(c.out + ".json");
        write_manifest("simulate", cfg, outputs, c);
    }
    return 0;
}

int cmd_corr(const Common& c) {
    const json cfg = resolve(c);
    const ScenarioConfig sc = scenario_from_config(cfg);
    const Designs ds = both_designs(sc.spec);
    std::ostringstream csv;
    bool first = true;
    for (Hypothesis h : sc.hypotheses) {
        const auto rep = sample_correlation_report(make_scenario(sc, h, ds.sto, ds.exa, c.threads));
        std::ostringstream part;
        write_corr_csv(part, rep, sc.spec.M());
        std::string text = part.str();
        if (!first) text = text.substr(text.find('\n') + 1);
        csv << text;
        first = false;
    }
    std::vector<std::string> outputs;
    emit(c, ".csv", csv.str(), outputs);
    if (!c.out.empty()) write_manifest("corr", cfg, outputs, c);
    return 0;
}

int cmd_curve(const Common& c, const std::vector<double>& grid) {
    const json cfg = resolve(c);
    const auto rows = delay_curve(cfg, grid);
    const DesignSpec base = design_spec_from_config(cfg);
    std::ostringstream csv;
    write_curve_csv(csv, base.combo, rows);
    std::vector<std::string> outputs;
    emit(c, ".csv", csv.str(), outputs);
    if (!c.out.empty()) write_manifest("curve", cfg, outputs, c);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Group-sequential maxcombo designs for delayed treatment effects"};
    app.set_version_flag("--version", GSMC_VERSION);
    app.require_subcommand(1);

    Common dc, sc, cc, uc;
    bool as_json = false;
    auto* d = app.add_subcommand("design", "sample size, event target and boundaries");
    add_common(d, dc);
    d->add_flag("--json", as_json, "print the full report as JSON");

    auto* s = app.add_subcommand("simulate", "operating characteristics by simulation");
    add_common(s, sc);

    auto* k = app.add_subcommand("corr", "sample vs predicted vs estimated correlations");
    add_common(k, cc);

    std::vector<double> grid = {0.0, 0.5, 0.9, 1.5, 2.5, 3.5};
    auto* u = app.add_subcommand("curve", "sample sizes over a grid of delay times");
    add_common(u, uc);
    u->add_option("--eps-grid", grid, "delay times")->delimiter(',');

    CLI11_PARSE(app, argc, argv);

    try {
        if (d->parsed()) return cmd_design(dc, as_json);
        if (s->parsed()) return cmd_simulate(sc);
        if (k->parsed()) return cmd_corr(cc);
        if (u->parsed()) return cmd_curve(uc, grid);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
