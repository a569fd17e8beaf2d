#include "qtm/cli_app.hpp"

#include "qtm/collision.hpp"
#include "qtm/liouvillian.hpp"
#include "qtm/model.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

namespace qtm::cli {

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitDegenerate = 3;

struct GridSpec {
    double lo = 0.1, hi = 3.5, step = 0.02;
};

GridSpec resolve_grid(const std::string& flag_value, const RunConfig& run) {
    GridSpec g;
    if (!flag_value.empty()) {
        double lo, hi, step;
        if (std::sscanf(flag_value.c_str(), "%lf:%lf:%lf", &lo, &hi, &step) != 3 ||
            !(step > 0.0) || !(hi >= lo))
            throw ConfigError(0, "--grid must be lo:hi:step with step > 0");
        g = {lo, hi, step};
    } else if (run.grid_lo && run.grid_hi && run.grid_step) {
        g = {*run.grid_lo, *run.grid_hi, *run.grid_step};
    }
    return g;
}

std::vector<double> parse_tau_flag(const std::string& flag_value) {
    std::vector<double> taus;
    std::stringstream ss(flag_value);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        taus.push_back(std::stod(tok));
    }
    return taus;
}

void print_warnings(const std::vector<std::string>& warnings, std::ostream& err) {
    for (const auto& w : warnings) err << "warning: " << w << "\n";
}

int cmd_validate(const std::string& config_path, std::ostream& out, std::ostream& err) {
    const ParsedConfig cfg = parse_config_file(config_path);
    print_warnings(cfg.warnings, err);
    out << "ok: " << config_path << "\n";
    out << "  mode = " << to_string(cfg.scenario.mode)
        << ", interaction = " << to_string(cfg.scenario.interaction.kind)
        << ", N = " << cfg.scenario.n_sites() << "\n";
    return kExitOk;
}

int cmd_steady(const std::string& config_path, std::ostream& out, std::ostream& err) {
    const ParsedConfig cfg = parse_config_file(config_path);
    print_warnings(cfg.warnings, err);
    const Scenario& s = cfg.scenario;

    const Superoperator l = assemble(s);
    const SteadyState ss = steady_state(l);

    out << "steady state (" << to_string(s.mode) << ", " << to_string(s.interaction.kind)
        << ", omega_h/omega_c = " << format_g17(s.hot.omega / s.cold.omega) << ")\n";
    out << "  residual        = " << format_g17(ss.residual) << "\n";
    out << "  spectral gap    = " << format_g17(ss.spectral_gap) << "\n";
    out << "  sigma_max       = " << format_g17(ss.sigma_max) << "\n";
    if (ss.degenerate) {
        err << "error: degenerate steady-state kernel (gap below threshold)\n";
        return kExitDegenerate;
    }
    const double purity = (ss.rho.m * ss.rho.m).trace().real();
    out << "  purity          = " << format_g17(purity) << "\n";

    const Currents c = currents(ss.rho, s);
    out << "currents (units omega_c^2, positive into the system)\n";
    out << "  W_loc  = " << format_g17(c.w_loc) << "   W_nonloc  = " << format_g17(c.w_nonloc)
        << "   W  = " << format_g17(c.w()) << "\n";
    out << "  Qh_loc = " << format_g17(c.q_h_loc) << "   Qh_nonloc = " << format_g17(c.q_h_nonloc)
        << "   Qh = " << format_g17(c.q_h()) << "\n";
    out << "  Qc_loc = " << format_g17(c.q_c_loc) << "   Qc_nonloc = " << format_g17(c.q_c_nonloc)
        << "   Qc = " << format_g17(c.q_c()) << "\n";
    out << "  first-law residual  = " << format_g17(c.first_law_residual()) << "\n";
    out << "  entropy production  = " << format_g17(entropy_production(c, s)) << "\n";

    if (s.n_sites() == 2) {
        const CoherenceMetrics coh = coherence_metrics(ss.rho, s);
        out << "coherence\n";
        out << "  C_loc             = " << format_g17(coh.c_loc) << "\n";
        out << "  C_nonloc          = " << format_g17(coh.c_nonloc) << "\n";
        out << "  C_nonloc_factored = " << format_g17(coh.c_nonloc_factored) << "\n";
    }

    const RegimeReport reg = classify_regime(c, s);
    out << "regime: " << to_string(reg.regime);
    if (reg.regime != Regime::Boundary)
        out << "  (figure of merit " << format_g17(reg.figure_of_merit) << ", Carnot bound "
            << format_g17(reg.carnot_bound) << ")";
    out << "\n";
    return kExitOk;
}

int cmd_sweep(const std::string& config_path, const std::string& out_dir,
              const std::string& grid_flag, const std::string& scenarios_flag, int threads_flag,
              std::ostream& out, std::ostream& err) {
    const ParsedConfig cfg = parse_config_file(config_path);
    print_warnings(cfg.warnings, err);
    if (cfg.scenario.n_sites() != 2)
        throw ConfigError(0, "sweep requires N = 2 (coherence columns are defined there)");

    const GridSpec grid = resolve_grid(grid_flag, cfg.run);

    std::vector<std::string> tags;
    if (!scenarios_flag.empty()) {
        std::stringstream ss(scenarios_flag);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            if (tok.empty()) continue;
            if (std::find(all_scenario_tags().begin(), all_scenario_tags().end(), tok) ==
                all_scenario_tags().end())
                throw ConfigError(0, "unknown scenario tag '" + tok + "'");
            tags.push_back(tok);
        }
    } else if (!cfg.run.scenarios.empty()) {
        tags = cfg.run.scenarios;
    } else {
        tags = all_scenario_tags();
    }

    int threads = threads_flag > 0 ? threads_flag : cfg.run.threads;
    if (threads <= 0)
        threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));

    std::filesystem::create_directories(out_dir);
    for (const auto& tag : tags) {
        const Scenario variant = scenario_variant(cfg.scenario, tag);
        const SweepResult result =
            sweep_and_optimize(variant, grid.lo, grid.hi, grid.step, threads);

        const auto csv_path = std::filesystem::path(out_dir) / ("sweep_" + tag + ".csv");
        std::ofstream csv(csv_path, std::ios::binary);
        csv << sweep_csv(tag, result);

        const auto pe_path = std::filesystem::path(out_dir) / ("power_eta_" + tag + ".csv");
        std::ofstream pe(pe_path, std::ios::binary);
        pe << power_efficiency_csv(tag, result);

        out << tag << ": " << result.points.size() << " points -> " << csv_path.string();
        if (result.summary.has_engine_window)
            out << "  (eta_max = " << format_g17(result.summary.eta_max) << " at ratio "
                << format_g17(result.summary.ratio_at_max) << ")";
        out << "\n";
        long failures = std::count_if(result.points.begin(), result.points.end(),
                                      [](const SweepPoint& p) { return !p.ok; });
        if (failures > 0) err << "warning: " << tag << ": " << failures << " point(s) failed\n";
    }
    return kExitOk;
}

int cmd_collision_check(const std::string& config_path, const std::string& tau_flag,
                        std::ostream& out, std::ostream& err) {
    const ParsedConfig cfg = parse_config_file(config_path);
    print_warnings(cfg.warnings, err);
    const Scenario& s = cfg.scenario;
    if (s.mode == DissipationMode::Independent)
        err << "note: independent mode refreshes ancillas between sub-collisions\n";

    std::vector<double> taus = tau_flag.empty() ? cfg.run.taus : parse_tau_flag(tau_flag);
    if (taus.size() < 3)
        throw ConfigError(0, "collision-check needs at least 3 tau values (--tau or [run] tau)");
    std::sort(taus.begin(), taus.end());

    const SteadyState ss = steady_state(assemble(s));
    const bool have_qme = !ss.degenerate;
    Currents qme;
    if (have_qme) {
        qme = currents(ss.rho, s);
        out << "QME closed-form currents: W = " << format_g17(qme.w())
            << "  Qh = " << format_g17(qme.q_h()) << "  Qc = " << format_g17(qme.q_c()) << "\n";
    } else {
        err << "warning: degenerate QME kernel; skipping the closed-form comparison\n";
    }

    std::vector<SteadyCycleResult> runs;
    out << "tau            W              Qh             Qc             steps  converged\n";
    for (double tau : taus) {
        const SteadyCycleResult r = run_to_steady(s, tau);
        runs.push_back(r);
        char line[160];
        std::snprintf(line, sizeof(line), "%-14.6g %-14.8g %-14.8g %-14.8g %-6ld %s", tau,
                      r.w_rate, r.q_h_rate, r.q_c_rate, r.steps_used,
                      r.converged ? "yes" : "NO");
        out << line << "\n";
        if (!r.converged) err << "warning: tau = " << tau << " did not converge\n";
    }

    const TauExtrapolation ex = tau_extrapolate(s, taus);
    out << "tau -> 0 extrapolation: W = " << format_g17(ex.w) << "  Qh = " << format_g17(ex.q_h)
        << "  Qc = " << format_g17(ex.q_c) << "\n";
    out << "fit residuals:          W = " << format_g17(ex.residual_w)
        << "  Qh = " << format_g17(ex.residual_q_h) << "  Qc = " << format_g17(ex.residual_q_c)
        << "\n";

    if (!have_qme) return kExitOk;

    auto rel_dev = [](double a, double b) {
        const double scale = std::max({std::abs(a), std::abs(b), 1e-12});
        return std::abs(a - b) / scale;
    };
    out << "relative deviation from QME: W = " << format_g17(rel_dev(ex.w, qme.w()))
        << "  Qh = " << format_g17(rel_dev(ex.q_h, qme.q_h()))
        << "  Qc = " << format_g17(rel_dev(ex.q_c, qme.q_c())) << "\n";

    // Convergence order from the slope of log|I(tau) - I_qme| against log tau.
    auto order_estimate = [&](auto value, double qme_value) -> double {
        double sx = 0.0, sxx = 0.0, sy = 0.0, sxy = 0.0;
        int m = 0;
        for (size_t k = 0; k < taus.size(); ++k) {
            const double diff = std::abs(value(runs[k]) - qme_value);
            if (diff < 1e-12) continue;
            const double x = std::log(taus[k]), y = std::log(diff);
            sx += x;
            sxx += x * x;
            sy += y;
            sxy += x * y;
            ++m;
        }
        if (m < 2) return std::numeric_limits<double>::quiet_NaN();
        return (m * sxy - sx * sy) / (m * sxx - sx * sx);
    };
    const double ow = order_estimate([](const SteadyCycleResult& r) { return r.w_rate; }, qme.w());
    const double oh =
        order_estimate([](const SteadyCycleResult& r) { return r.q_h_rate; }, qme.q_h());
    const double oc =
        order_estimate([](const SteadyCycleResult& r) { return r.q_c_rate; }, qme.q_c());
    out << "convergence-order estimates: W = " << format_g17(ow) << "  Qh = " << format_g17(oh)
        << "  Qc = " << format_g17(oc) << "\n";
    return kExitOk;
}

}  // namespace

std::string format_g17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string sweep_csv(const std::string& tag, const SweepResult& result) {
    std::ostringstream os;
    os << "scenario,omega_ratio,w_loc,w_nonloc,q_h_loc,q_h_nonloc,q_c_loc,q_c_nonloc,"
          "c_loc,c_nonloc,c_nonloc_factored,regime,figure_of_merit,first_law_residual,"
          "entropy_production,error\n";
    for (const auto& p : result.points) {
        os << tag << "," << format_g17(p.ratio) << ",";
        os << format_g17(p.cur.w_loc) << "," << format_g17(p.cur.w_nonloc) << ",";
        os << format_g17(p.cur.q_h_loc) << "," << format_g17(p.cur.q_h_nonloc) << ",";
        os << format_g17(p.cur.q_c_loc) << "," << format_g17(p.cur.q_c_nonloc) << ",";
        os << format_g17(p.coh.c_loc) << "," << format_g17(p.coh.c_nonloc) << ","
           << format_g17(p.coh.c_nonloc_factored) << ",";
        os << to_string(p.reg.regime) << "," << format_g17(p.reg.figure_of_merit) << ",";
        os << format_g17(p.first_law_residual) << "," << format_g17(p.entropy) << ",";
        os << p.error << "\n";
    }
    os << "# summary\n";
    if (result.summary.has_engine_window) {
        os << "# eta_max = " << format_g17(result.summary.eta_max) << "\n";
        os << "# w_at_eta_max = " << format_g17(result.summary.w_at_eta_max) << "\n";
        os << "# ratio_at_eta_max = " << format_g17(result.summary.ratio_at_max) << "\n";
    } else {
        os << "# engine_window = none\n";
    }
    return os.str();
}

std::string power_efficiency_csv(const std::string& tag, const SweepResult& result) {
    std::ostringstream os;
    os << "scenario,eta,w\n";
    for (const auto& p : result.points) {
        if (!p.ok || p.reg.regime != Regime::Engine) continue;
        os << tag << "," << format_g17(p.reg.figure_of_merit) << "," << format_g17(p.cur.w())
           << "\n";
    }
    return os.str();
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"steady-state thermodynamics of two coupled TLS ensembles"};
    app.require_subcommand(1);

    std::string config_path, out_dir = ".", grid_flag, scenarios_flag, tau_flag;
    int threads_flag = 0;

    auto* validate = app.add_subcommand("validate", "parse and validate a scenario file");
    validate->add_option("--config", config_path, "scenario file")->required();

    auto* steady = app.add_subcommand("steady", "solve one NESS and report diagnostics");
    steady->add_option("--config", config_path, "scenario file")->required();

    auto* sweep = app.add_subcommand("sweep", "sweep omega_h/omega_c and emit CSV files");
    sweep->add_option("--config", config_path, "scenario file")->required();
    sweep->add_option("--out", out_dir, "output directory");
    sweep->add_option("--grid", grid_flag, "lo:hi:step");
    sweep->add_option("--scenarios", scenarios_flag, "comma list of com1,com2,cas1,cas2,ind1,ind2");
    sweep->add_option("--threads", threads_flag, "worker threads");

    auto* coll = app.add_subcommand("collision-check",
                                    "finite-tau collision currents against the QME route");
    coll->add_option("--config", config_path, "scenario file")->required();
    coll->add_option("--tau", tau_flag, "comma list of collision durations");

    std::vector<const char*> argv_store;
    argv_store.push_back("qtm");
    for (const auto& a : args) argv_store.push_back(a.c_str());

    try {
        app.parse(static_cast<int>(argv_store.size()), argv_store.data());
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            out << app.help();
            return kExitOk;
        }
        err << "error: " << e.what() << "\n";
        return kExitConfig;
    }

    try {
        if (validate->parsed()) return cmd_validate(config_path, out, err);
        if (steady->parsed()) return cmd_steady(config_path, out, err);
        if (sweep->parsed())
            return cmd_sweep(config_path, out_dir, grid_flag, scenarios_flag, threads_flag, out,
                             err);
        if (coll->parsed()) return cmd_collision_check(config_path, tau_flag, out, err);
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const ScenarioError& e) {
        err << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitConfig;
    }
    return kExitConfig;
}

int run(int argc, const char* const* argv) {
    std::vector<std::string> args;
    for (int k = 1; k < argc; ++k) args.emplace_back(argv[k]);
    return run(args, std::cout, std::cerr);
}

}  // namespace qtm::cli
