#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ottomech/dynamics.hpp"
#include "ottomech/ensemble.hpp"
#include "ottomech/io.hpp"
#include "ottomech/model.hpp"
#include "ottomech/protocol.hpp"
#include "ottomech/spectra.hpp"
#include "ottomech/thermo.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ottomech;

namespace {

// separates bad input (exit 2) from failures of a valid run (exit 3)
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CommonOpts {
    std::string config_path;
    std::string out_dir = "out";
    std::uint64_t seed = 0;
    bool seed_set = false;
    unsigned workers = 1;
    bool no_correlation = false;
    bool dump_defaults = false;
};

json common_defaults() {
    return json{{"omega_m_hz", 400e3}, {"gamma1_hz", 6.0}, {"gamma2_hz", 12.0},
                {"lambda_hz", 40.0},   {"seed", 1}};
}

json engine_defaults(bool twin) {
    json j = common_defaults();
    j["t_cold_k"] = 295.0;
    j["t_hot_k"] = 17700.0;
    // the twin window is offset so both branches close a positive loop;
    // the single-cylinder window is symmetric about the crossing
    j["delta_start_hz"] = twin ? 720.0 : 200.0;
    j["delta_end_hz"] = twin ? -180.0 : -200.0;
    j["sweep_time_s"] = 15e-3;
    j["therm_cold_s"] = 0.4;
    j["therm_hot_s"] = 0.4;
    j["dt_s"] = 2e-5;
    j["record_stride"] = 10;
    j["n_traj"] = 256;
    j["n_cycles"] = 8;
    j["warmup_cycles"] = 1;
    return j;
}

json spectrum_defaults() {
    json j = common_defaults();
    j["t_bath_k"] = 295.0;
    j["detuning_min_hz"] = -200.0;
    j["detuning_max_hz"] = 200.0;
    j["n_detunings"] = 21;
    j["fs_hz"] = 1024.0;
    j["nperseg"] = 4096;
    j["n_samples"] = 32768;
    return j;
}

json sweep_defaults() {
    json j = engine_defaults(false);
    j.erase("sweep_time_s");
    j["kind"] = "single-cylinder";
    j["sweep_times_s"] = {5e-3, 10e-3, 15e-3, 20e-3, 30e-3};
    return j;
}

json optimize_defaults() {
    json j = engine_defaults(false);
    j.erase("sweep_time_s");
    j["kind"] = "single-cylinder";
    j["sweep_min_s"] = 2e-3;
    j["sweep_max_s"] = 30e-3;
    j["n_coarse"] = 7;
    j["rel_tol"] = 0.02;
    j["max_iter"] = 24;
    return j;
}

json load_config(json defaults, const CommonOpts& o) {
    if (!o.config_path.empty()) {
        std::ifstream in(o.config_path);
        if (!in) throw ConfigError("cannot open config file: " + o.config_path);
        json user = json::parse(in); // parse_error maps to exit 2 below
        if (!user.is_object()) throw ConfigError("config must be a JSON object");
        for (const auto& [key, value] : user.items()) {
            if (!defaults.contains(key)) throw ConfigError("unknown config key: " + key);
            defaults[key] = value;
        }
    }
    if (o.seed_set) defaults["seed"] = o.seed;
    return defaults;
}

double num(const json& c, const char* key) {
    const json& v = c.at(key);
    if (!v.is_number()) throw ConfigError(std::string(key) + " must be a number");
    return v.get<double>();
}

long long count_of(const json& c, const char* key) {
    const json& v = c.at(key);
    if (!v.is_number_integer()) throw ConfigError(std::string(key) + " must be an integer");
    return v.get<long long>();
}

CoupledSystem system_from(const json& c) {
    const double wm = hz_to_rad(num(c, "omega_m_hz"));
    return CoupledSystem{MechanicalMode{wm, hz_to_rad(num(c, "gamma1_hz"))},
                         MechanicalMode{wm, hz_to_rad(num(c, "gamma2_hz"))},
                         hz_to_rad(num(c, "lambda_hz"))};
}

BathSpec bath_from(const json& c) {
    return BathSpec(num(c, "t_cold_k"), num(c, "t_hot_k"), hz_to_rad(num(c, "omega_m_hz")));
}

Protocol::Kind kind_from(const json& c) {
    const std::string k = c.at("kind").get<std::string>();
    if (k == "single-cylinder") return Protocol::Kind::single_cylinder;
    if (k == "straight-twin") return Protocol::Kind::straight_twin;
    throw ConfigError("kind must be single-cylinder or straight-twin, got " + k);
}

EnsembleConfig ensemble_from(const json& c, const CommonOpts& o) {
    EnsembleConfig e;
    e.n_traj = static_cast<std::size_t>(count_of(c, "n_traj"));
    e.n_cycles = static_cast<int>(count_of(c, "n_cycles"));
    e.warmup_cycles = static_cast<int>(count_of(c, "warmup_cycles"));
    e.sim.dt = num(c, "dt_s");
    e.sim.record_stride = static_cast<int>(count_of(c, "record_stride"));
    e.sim.seed = c.at("seed").get<std::uint64_t>();
    e.workers = o.workers;
    return e;
}

EngineSpec spec_from(const json& c, Protocol::Kind kind) {
    EngineSpec s;
    s.kind = kind;
    s.delta_omega_i = hz_to_rad(num(c, "delta_start_hz"));
    s.delta_omega_f = hz_to_rad(num(c, "delta_end_hz"));
    s.therm_cold_s = num(c, "therm_cold_s");
    s.therm_hot_s = num(c, "therm_hot_s");
    s.bath = bath_from(c);
    s.omega_carrier = hz_to_rad(num(c, "omega_m_hz"));
    return s;
}

int run_engine(const CommonOpts& o, Protocol::Kind kind) {
    const bool twin = kind == Protocol::Kind::straight_twin;
    const json c = load_config(engine_defaults(twin), o);
    const CoupledSystem sys = system_from(c);
    const EngineSpec spec = spec_from(c, kind);
    const Protocol p = spec.protocol(num(c, "sweep_time_s"));
    const EnsembleConfig ens = ensemble_from(c, o);

    const EnsembleResult r = run_ensemble(sys, p, ens);
    const fs::path out(o.out_dir);
    save_ensemble(r, out);

    const TwinThermo th = ensemble_thermo(r, p, spec.omega_carrier, !o.no_correlation);
    write_json_atomic(out / (twin ? "thermo_twin.json" : "thermo.json"), twin_thermo_to_json(th));
    if (twin) {
        write_text_atomic(out / "diagram_upper.csv", diagram_to_csv(th.upper));
        write_text_atomic(out / "diagram_lower.csv", diagram_to_csv(th.lower));
    } else {
        write_text_atomic(out / "diagram.csv", diagram_to_csv(th.upper));
    }

    std::vector<double> total(r.works_upper.size());
    for (std::size_t i = 0; i < total.size(); ++i)
        total[i] = r.works_upper[i] + r.works_lower[i];
    if (total.size() >= 100)
        write_json_atomic(out / "workdist.json", workdist_to_json(work_distribution(total)));

    if (r.n_traj == 1) {
        SimConfig sc;
        sc.dt = ens.sim.dt;
        sc.record_stride = ens.sim.record_stride;
        sc.seed = ens.sim.seed;
        const Trajectory tr = simulate_trajectory(sys, p, sc, r.n_cycles);
        write_text_atomic(out / "trajectory.csv", trajectory_to_csv(tr));
        write_text_atomic(out / "normal_modes.csv",
                          normal_mode_series_to_csv(decompose(tr, p, sys.lambda)));
    }

    std::printf("work_output_j %.9g\n", th.work_output_total);
    std::printf("heat_input_j %.9g\n", th.heat_input_total);
    std::printf("efficiency %.9g\n", th.efficiency_total);
    std::printf("wrote %s\n", out.c_str());
    return 0;
}

int run_spectrum(const CommonOpts& o) {
    const json c = load_config(spectrum_defaults(), o);
    const CoupledSystem sys = system_from(c);
    MapConfig mc;
    mc.detuning_min_hz = num(c, "detuning_min_hz");
    mc.detuning_max_hz = num(c, "detuning_max_hz");
    mc.n_detunings = static_cast<std::size_t>(count_of(c, "n_detunings"));
    mc.t_bath = num(c, "t_bath_k");
    mc.fs = num(c, "fs_hz");
    mc.nperseg = static_cast<std::size_t>(count_of(c, "nperseg"));
    mc.n_samples = static_cast<std::size_t>(count_of(c, "n_samples"));
    mc.seed = c.at("seed").get<std::uint64_t>();

    const SpectrumMap m = anticrossing_map(sys, mc);
    const fs::path out(o.out_dir);
    write_text_atomic(out / "spectrum_map.csv", spectrum_map_to_csv(m));

    CsvBuilder peaks("detuning_hz,f_lower_hz,f_upper_hz,splitting_hz");
    double min_split = std::numeric_limits<double>::infinity();
    double at_detuning = 0.0;
    for (std::size_t i = 0; i < m.detuning_hz.size(); ++i) {
        const SplittingResult s = extract_splitting(m.freq_hz, m.psd[i]);
        peaks.cell(m.detuning_hz[i]).cell(s.f_lower_hz).cell(s.f_upper_hz).cell(s.splitting_hz);
        peaks.end_row();
        if (s.splitting_hz < min_split) {
            min_split = s.splitting_hz;
            at_detuning = m.detuning_hz[i];
        }
    }
    write_text_atomic(out / "peaks.csv", peaks.str());
    write_json_atomic(out / "splitting.json",
                      json{{"min_splitting_hz", min_split},
                           {"detuning_at_min_hz", at_detuning},
                           {"lambda_hz", num(c, "lambda_hz")}});

    std::printf("min_splitting_hz %.9g\n", min_split);
    std::printf("wrote %s\n", out.c_str());
    return 0;
}

int run_sweep(const CommonOpts& o) {
    const json c = load_config(sweep_defaults(), o);
    const CoupledSystem sys = system_from(c);
    const EngineSpec spec = spec_from(c, kind_from(c));
    const EnsembleConfig ens = ensemble_from(c, o);

    const json& arr = c.at("sweep_times_s");
    if (!arr.is_array() || arr.empty())
        throw ConfigError("sweep_times_s must be a non-empty array of seconds");
    std::vector<double> times;
    for (const json& v : arr) {
        if (!v.is_number()) throw ConfigError("sweep_times_s must contain numbers");
        times.push_back(v.get<double>());
    }

    const auto scan = sweep_time_scan(sys, spec, times, ens);
    const fs::path out(o.out_dir);
    write_text_atomic(out / "sweep.csv", scan_to_csv(scan));

    const CyclePoint* best = &scan.front();
    for (const CyclePoint& p : scan)
        if (p.power_mean_w > best->power_mean_w) best = &p;
    std::printf("best_sweep_time_s %.9g\n", best->sweep_time_s);
    std::printf("best_power_w %.9g\n", best->power_mean_w);
    std::printf("wrote %s\n", out.c_str());
    return 0;
}

int run_optimize(const CommonOpts& o) {
    const json c = load_config(optimize_defaults(), o);
    const CoupledSystem sys = system_from(c);
    const EngineSpec spec = spec_from(c, kind_from(c));
    const EnsembleConfig ens = ensemble_from(c, o);

    const OptimizeResult res = optimize_sweep_time(
        sys, spec, num(c, "sweep_min_s"), num(c, "sweep_max_s"), ens,
        static_cast<int>(count_of(c, "n_coarse")), num(c, "rel_tol"),
        static_cast<int>(count_of(c, "max_iter")));

    const fs::path out(o.out_dir);
    write_json_atomic(out / "optimize.json", optimize_to_json(res));
    std::printf("best_sweep_time_s %.9g\n", res.best_sweep_time_s);
    std::printf("best_power_w %.9g\n", res.best_power_w);
    if (!res.unimodal) std::printf("warning: power curve not single-peaked in range\n");
    std::printf("wrote %s\n", out.c_str());
    return 0;
}

void add_common(CLI::App* sub, CommonOpts& o, bool ensemble_cmd) {
    sub->add_option("--config", o.config_path, "JSON config file");
    sub->add_option("--out", o.out_dir, "output directory")->capture_default_str();
    sub->add_option("--seed", o.seed, "override the config seed")
        ->each([&o](const std::string&) { o.seed_set = true; });
    if (ensemble_cmd) {
        sub->add_option("--workers", o.workers, "worker threads, 0 = hardware count")
            ->capture_default_str();
    }
    sub->add_flag("--dump-defaults", o.dump_defaults, "print the default config and exit");
}

template <typename F>
int guarded(F&& body) {
    try {
        return body();
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const json::exception& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
}

int dump(const json& defaults) {
    std::printf("%s\n", defaults.dump(2).c_str());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"stochastic simulator for cavity-coupled membrane heat engines"};
    app.require_subcommand(1);

    CommonOpts cyc_o, twin_o, spec_o, sweep_o, opt_o;

    CLI::App* cyc = app.add_subcommand(
        "cycle", "single-cylinder engine: folded ensemble, cycle diagram, thermodynamics");
    add_common(cyc, cyc_o, true);
    cyc->add_flag("--no-correlation", cyc_o.no_correlation,
                  "drop the inter-mode coherence from the cycle thermodynamics");

    CLI::App* twn = app.add_subcommand(
        "twin", "straight-twin engine: both branches work in counterphase");
    add_common(twn, twin_o, true);
    twn->add_flag("--no-correlation", twin_o.no_correlation,
                  "drop the inter-mode coherence from the cycle thermodynamics");

    CLI::App* spc = app.add_subcommand(
        "spectrum", "thermal spectra across the anticrossing and the mode splitting");
    add_common(spc, spec_o, false);

    CLI::App* swp = app.add_subcommand(
        "sweep", "work, power and correlation transfer versus sweep time");
    add_common(swp, sweep_o, true);

    CLI::App* opt = app.add_subcommand("optimize", "search the sweep time for peak mean power");
    add_common(opt, opt_o, true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    if (*cyc)
        return cyc_o.dump_defaults
                   ? dump(engine_defaults(false))
                   : guarded([&] { return run_engine(cyc_o, Protocol::Kind::single_cylinder); });
    if (*twn)
        return twin_o.dump_defaults
                   ? dump(engine_defaults(true))
                   : guarded([&] { return run_engine(twin_o, Protocol::Kind::straight_twin); });
    if (*spc)
        return spec_o.dump_defaults ? dump(spectrum_defaults())
                                    : guarded([&] { return run_spectrum(spec_o); });
    if (*swp)
        return sweep_o.dump_defaults ? dump(sweep_defaults())
                                     : guarded([&] { return run_sweep(sweep_o); });
    if (*opt)
        return opt_o.dump_defaults ? dump(optimize_defaults())
                                   : guarded([&] { return run_optimize(opt_o); });
    return 2; // unreachable with require_subcommand(1)
}
