#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ottomech/constants.hpp"
#include "ottomech/dynamics.hpp"
#include "ottomech/io.hpp"
#include "ottomech/model.hpp"
#include "ottomech/parallel.hpp"
#include "ottomech/protocol.hpp"
#include "ottomech/random.hpp"
#include "ottomech/thermo.hpp"

namespace ottomech {

struct EnsembleConfig {
    std::size_t n_traj = 256;
    int n_cycles = 8;      // measured cycles per trajectory
    int warmup_cycles = 1; // cycles discarded before measuring
    SimConfig sim;
    unsigned workers = 1; // 0 picks the hardware count
    std::size_t block = 4; // trajectories per reduction block
};

struct FoldedSeries {
    std::vector<double> mean, sem;
};

// Cycle-folded ensemble statistics plus per-cycle work readings.  The sem
// treats every (trajectory, cycle) pair as independent; successive cycles
// of one trajectory are correlated when the holds are short against
// 1/gamma, so the bars are optimistic in that regime.
struct EnsembleResult {
    std::vector<double> times;                   // s, 0 .. period inclusive
    std::vector<double> omega_plus, omega_minus; // rad/s at the sample times
    FoldedSeries n1, n2;                         // bare populations
    FoldedSeries n_plus, n_minus;                // branch occupancies
    FoldedSeries n1_plus, n2_plus, ncorr_plus;   // n_plus split by origin
    FoldedSeries n1_minus, n2_minus, ncorr_minus;
    std::vector<double> works_upper, works_lower; // J, indexed traj * n_cycles + cycle
    std::size_t n_traj = 0;
    int n_cycles = 0;
    int record_stride = 1;
    double period = 0.0; // s
    double dt = 0.0;     // s, actual step after snapping to the period
    std::uint64_t seed = 0;
};

namespace detail {

inline void finalize_folded(FoldedSeries& s, const std::vector<double>& sum,
                            const std::vector<double>& sumsq, std::size_t offset,
                            std::size_t len, double m) {
    s.mean.resize(len);
    s.sem.resize(len);
    for (std::size_t j = 0; j < len; ++j) {
        const double mu = sum[offset + j] / m;
        s.mean[j] = mu;
        double sem = 0.0;
        if (m > 1.5) {
            const double var = (sumsq[offset + j] - m * mu * mu) / (m - 1.0);
            sem = std::sqrt(std::max(0.0, var) / m);
        }
        s.sem[j] = sem;
    }
}

} // namespace detail

// Simulates cfg.n_traj independent trajectories of the scheduled system
// and folds the recorded samples onto one cycle.  Branch work is
// accumulated at the full step rate during the sweeps, one reading per
// (trajectory, cycle) and branch.  Trajectory seeds depend only on the
// trajectory index, and block reductions merge in index order, so the
// result is reproducible for any worker count.
inline EnsembleResult run_ensemble(const CoupledSystem& sys, const Protocol& p,
                                   const EnsembleConfig& cfg) {
    if (cfg.n_traj < 1) throw std::invalid_argument("run_ensemble: need at least one trajectory");
    if (cfg.n_cycles < 1) throw std::invalid_argument("run_ensemble: need at least one cycle");
    if (cfg.warmup_cycles < 0) throw std::invalid_argument("run_ensemble: negative warmup");
    if (cfg.sim.record_stride < 1)
        throw std::invalid_argument("run_ensemble: record_stride must be >= 1");

    const PropagatorTable table = build_propagator_table(sys, p, cfg.sim.dt);
    const long stride = cfg.sim.record_stride;
    if (table.n_steps % stride != 0)
        throw std::invalid_argument("run_ensemble: record_stride " + std::to_string(stride) +
                                    " does not divide the cycle step count " +
                                    std::to_string(table.n_steps));
    const std::size_t J = static_cast<std::size_t>(table.n_steps / stride);
    const std::size_t len = J + 1; // closing sample repeats the cycle start
    const double hbar = PhysicalConstants::hbar;

    EnsembleResult r;
    r.n_traj = cfg.n_traj;
    r.n_cycles = cfg.n_cycles;
    r.record_stride = cfg.sim.record_stride;
    r.period = p.period;
    r.dt = table.dt;
    r.seed = cfg.sim.seed;
    r.times.resize(len);
    r.omega_plus.resize(len);
    r.omega_minus.resize(len);
    for (std::size_t j = 0; j < len; ++j) {
        const long k = static_cast<long>(j) * stride;
        r.times[j] = table.dt * static_cast<double>(k);
        r.omega_plus[j] = table.omega_plus[k];
        r.omega_minus[j] = table.omega_minus[k];
    }
    r.works_upper.assign(cfg.n_traj * static_cast<std::size_t>(cfg.n_cycles), 0.0);
    r.works_lower.assign(cfg.n_traj * static_cast<std::size_t>(cfg.n_cycles), 0.0);

    // ten folded series, flattened as series-major blocks of length len
    constexpr std::size_t kSeries = 10;
    struct Partial {
        std::vector<double> sum, sumsq;
    };
    std::vector<double> sum(kSeries * len, 0.0), sumsq(kSeries * len, 0.0);

    auto work_block = [&](std::size_t, std::size_t first, std::size_t last) {
        Partial part;
        part.sum.assign(kSeries * len, 0.0);
        part.sumsq.assign(kSeries * len, 0.0);
        for (std::size_t t = first; t < last; ++t) {
            NoiseStream rng(cfg.sim.seed, t);
            EnvelopeState s = draw_stationary_start(table, rng);
            for (int c = 0; c < cfg.warmup_cycles; ++c)
                for (long k = 0; k < table.n_steps; ++k) s = apply_step(table.ops[k], s, rng);

            auto record = [&](std::size_t j, long k, const EnvelopeState& st) {
                const double n1v = std::norm(st.b1), n2v = std::norm(st.b2);
                const double cross = 2.0 * (st.b1 * std::conj(st.b2)).real();
                const double a11 = table.u11[k], a21 = table.u21[k];
                const double a12 = table.u12[k], a22 = table.u22[k];
                const double n1p = a12 * a12 * n1v, n2p = a22 * a22 * n2v;
                const double ncp = a12 * a22 * cross;
                const double n1m = a11 * a11 * n1v, n2m = a21 * a21 * n2v;
                const double ncm = a11 * a21 * cross;
                const double v[kSeries] = {n1v,       n2v, n1p + n2p + ncp,
                                           n1m + n2m + ncm, n1p, n2p, ncp, n1m, n2m, ncm};
                for (std::size_t q = 0; q < kSeries; ++q) {
                    part.sum[q * len + j] += v[q];
                    part.sumsq[q * len + j] += v[q] * v[q];
                }
            };
            auto branch_n = [&](long k, const EnvelopeState& st, double& np, double& nm) {
                np = std::norm(table.u12[k] * st.b1 + table.u22[k] * st.b2);
                nm = std::norm(table.u11[k] * st.b1 + table.u21[k] * st.b2);
            };

            for (int c = 0; c < cfg.n_cycles; ++c) {
                double wu = 0.0, wl = 0.0;
                for (long k = 0; k < table.n_steps; ++k) {
                    if (k % stride == 0) record(static_cast<std::size_t>(k / stride), k, s);
                    if (table.in_sweep(k)) {
                        double np0, nm0, np1, nm1;
                        branch_n(k, s, np0, nm0);
                        s = apply_step(table.ops[k], s, rng);
                        branch_n(k + 1, s, np1, nm1);
                        wu += 0.5 * (np0 + np1) * (table.omega_plus[k + 1] - table.omega_plus[k]);
                        wl += 0.5 * (nm0 + nm1) *
                              (table.omega_minus[k + 1] - table.omega_minus[k]);
                    } else {
                        s = apply_step(table.ops[k], s, rng);
                    }
                }
                record(J, table.n_steps, s);
                const std::size_t slot = t * static_cast<std::size_t>(cfg.n_cycles) +
                                         static_cast<std::size_t>(c);
                r.works_upper[slot] = -hbar * wu;
                r.works_lower[slot] = -hbar * wl;
            }
        }
        return part;
    };
    auto merge_block = [&](Partial part) {
        for (std::size_t i = 0; i < sum.size(); ++i) {
            sum[i] += part.sum[i];
            sumsq[i] += part.sumsq[i];
        }
    };
    parallel_ordered(cfg.n_traj, cfg.block, cfg.workers, work_block, merge_block);

    const double m = static_cast<double>(cfg.n_traj) * static_cast<double>(cfg.n_cycles);
    FoldedSeries* series[kSeries] = {&r.n1,      &r.n2,      &r.n_plus,   &r.n_minus,
                                     &r.n1_plus, &r.n2_plus, &r.ncorr_plus, &r.n1_minus,
                                     &r.n2_minus, &r.ncorr_minus};
    for (std::size_t q = 0; q < kSeries; ++q)
        detail::finalize_folded(*series[q], sum, sumsq, q * len, len, m);
    return r;
}

// Cycle thermodynamics of the folded mean occupancies, both branches.
// Dropping the correlation term shows how much of the output rides on the
// inter-mode coherence rather than on the populations alone.
inline TwinThermo ensemble_thermo(const EnsembleResult& r, const Protocol& p,
                                  double omega_carrier, bool include_correlation = true) {
    const std::size_t len = r.times.size();
    if (len < 2) throw std::invalid_argument("ensemble_thermo: empty ensemble");
    std::vector<double> n_up(len), n_lo(len);
    for (std::size_t j = 0; j < len; ++j) {
        n_up[j] = r.n1_plus.mean[j] + r.n2_plus.mean[j] +
                  (include_correlation ? r.ncorr_plus.mean[j] : 0.0);
        n_lo[j] = r.n1_minus.mean[j] + r.n2_minus.mean[j] +
                  (include_correlation ? r.ncorr_minus.mean[j] : 0.0);
    }
    return twin_cycle_thermo(r.times, n_up, r.omega_plus, n_lo, r.omega_minus, p, omega_carrier);
}

inline void save_ensemble(const EnsembleResult& r, const std::filesystem::path& dir) {
    nlohmann::json j;
    j["format_version"] = 1;
    j["n_traj"] = r.n_traj;
    j["n_cycles"] = r.n_cycles;
    j["record_stride"] = r.record_stride;
    j["period_s"] = r.period;
    j["dt_s"] = r.dt;
    j["seed"] = r.seed;
    j["n_samples"] = r.times.size();
    write_json_atomic(dir / "summary.json", j);

    CsvBuilder series(
        "t_s,omega_plus_hz,omega_minus_hz"
        ",mean_n_plus,sem_n_plus,mean_n_minus,sem_n_minus"
        ",mean_n1,sem_n1,mean_n2,sem_n2"
        ",mean_n1_plus,sem_n1_plus,mean_n2_plus,sem_n2_plus,mean_ncorr_plus,sem_ncorr_plus"
        ",mean_n1_minus,sem_n1_minus,mean_n2_minus,sem_n2_minus,mean_ncorr_minus,sem_ncorr_minus");
    for (std::size_t j2 = 0; j2 < r.times.size(); ++j2) {
        series.cell(r.times[j2]);
        series.cell(rad_to_hz(r.omega_plus[j2]));
        series.cell(rad_to_hz(r.omega_minus[j2]));
        for (const FoldedSeries* s :
             {&r.n_plus, &r.n_minus, &r.n1, &r.n2, &r.n1_plus, &r.n2_plus, &r.ncorr_plus,
              &r.n1_minus, &r.n2_minus, &r.ncorr_minus}) {
            series.cell(s->mean[j2]);
            series.cell(s->sem[j2]);
        }
        series.end_row();
    }
    write_text_atomic(dir / "series.csv", series.str());

    CsvBuilder works("traj,cycle,work_upper_j,work_lower_j");
    for (std::size_t t = 0; t < r.n_traj; ++t)
        for (int c = 0; c < r.n_cycles; ++c) {
            const std::size_t slot = t * static_cast<std::size_t>(r.n_cycles) +
                                     static_cast<std::size_t>(c);
            works.cell(static_cast<long long>(t));
            works.cell(static_cast<long long>(c));
            works.cell(r.works_upper[slot]);
            works.cell(r.works_lower[slot]);
            works.end_row();
        }
    write_text_atomic(dir / "works.csv", works.str());
}

// --- sweep-time studies ---

struct EngineSpec {
    Protocol::Kind kind = Protocol::Kind::single_cylinder;
    double delta_omega_i = 0.0; // rad/s at the start of the opening sweep
    double delta_omega_f = 0.0; // rad/s at its end
    double therm_cold_s = 0.0;
    double therm_hot_s = 0.0;
    BathSpec bath;
    double omega_carrier = 0.0; // rad/s, efficiency reference

    Protocol protocol(double sweep_time_s) const {
        return kind == Protocol::Kind::single_cylinder
                   ? build_single_cylinder(delta_omega_i, delta_omega_f, sweep_time_s,
                                           therm_cold_s, therm_hot_s, bath)
                   : build_twin(delta_omega_i, delta_omega_f, sweep_time_s, therm_cold_s,
                                therm_hot_s, bath);
    }
};

struct CyclePoint {
    double sweep_time_s = 0.0;
    double period_s = 0.0;
    double work_mean_j = 0.0; // per cycle, both branches
    double work_sem_j = 0.0;
    double power_mean_w = 0.0;
    double power_sem_w = 0.0;
    double efficiency = 0.0;
    double efficiency_normalized = 0.0;
    double corr_peak_time_s = 0.0; // within the opening sweep
    double corr_peak_value = 0.0;
};

inline CyclePoint evaluate_sweep_time(const CoupledSystem& sys, const EngineSpec& spec,
                                      double sweep_time_s, const EnsembleConfig& cfg) {
    const Protocol p = spec.protocol(sweep_time_s);
    const EnsembleResult r = run_ensemble(sys, p, cfg);

    CyclePoint pt;
    pt.sweep_time_s = sweep_time_s;
    pt.period_s = p.period;
    const std::size_t m = r.works_upper.size();
    double acc = 0.0;
    for (std::size_t i = 0; i < m; ++i) acc += r.works_upper[i] + r.works_lower[i];
    pt.work_mean_j = acc / static_cast<double>(m);
    if (m > 1) {
        double ss = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            const double d = r.works_upper[i] + r.works_lower[i] - pt.work_mean_j;
            ss += d * d;
        }
        pt.work_sem_j = std::sqrt(ss / static_cast<double>(m - 1) / static_cast<double>(m));
    }
    pt.power_mean_w = pt.work_mean_j / p.period;
    pt.power_sem_w = pt.work_sem_j / p.period;

    const TwinThermo th = ensemble_thermo(r, p, spec.omega_carrier);
    pt.efficiency = th.efficiency_total;
    pt.efficiency_normalized = th.upper.efficiency_ideal > 0.0
                                   ? th.efficiency_total / th.upper.efficiency_ideal
                                   : std::numeric_limits<double>::quiet_NaN();

    // peak of the mean correlation transfer during the opening sweep,
    // refined with the vertex of the parabola through the winning sample
    std::size_t limit = 0;
    while (limit + 1 < r.times.size() && r.times[limit + 1] <= sweep_time_s * (1.0 + 1e-12))
        ++limit;
    std::size_t arg = 0;
    for (std::size_t j = 1; j <= limit; ++j)
        if (r.ncorr_plus.mean[j] > r.ncorr_plus.mean[arg]) arg = j;
    pt.corr_peak_time_s = r.times[arg];
    pt.corr_peak_value = r.ncorr_plus.mean[arg];
    if (arg > 0 && arg < limit) {
        const double y0 = r.ncorr_plus.mean[arg - 1];
        const double y1 = r.ncorr_plus.mean[arg];
        const double y2 = r.ncorr_plus.mean[arg + 1];
        const double denom = y0 - 2.0 * y1 + y2;
        if (denom < 0.0) {
            const double h = r.times[arg + 1] - r.times[arg];
            const double shift = std::clamp(0.5 * (y0 - y2) / denom, -0.5, 0.5);
            pt.corr_peak_time_s += shift * h;
        }
    }
    return pt;
}

// Every point reuses the same seeds (common random numbers), so curve
// shape across sweep times is not washed out by independent sampling
// noise.
inline std::vector<CyclePoint> sweep_time_scan(const CoupledSystem& sys, const EngineSpec& spec,
                                               const std::vector<double>& sweep_times_s,
                                               const EnsembleConfig& cfg) {
    if (sweep_times_s.empty())
        throw std::invalid_argument("sweep_time_scan: no sweep times given");
    std::vector<CyclePoint> out;
    out.reserve(sweep_times_s.size());
    for (double ts : sweep_times_s) out.push_back(evaluate_sweep_time(sys, spec, ts, cfg));
    return out;
}

struct OptimizeResult {
    double best_sweep_time_s = 0.0;
    double best_power_w = 0.0;
    double best_work_j = 0.0;
    // cleared when the coarse scan is not single-peaked inside the range,
    // in which case the refinement may have chased a local maximum
    bool unimodal = true;
    std::vector<CyclePoint> evaluations; // in evaluation order
};

// Coarse grid to bracket the best mean power, then golden-section
// refinement between the bracketing neighbors.  Common random numbers
// keep the comparison between nearby sweep times meaningful.  Candidate
// sweep times are snapped so each cycle holds a whole number of recording
// windows (run_ensemble requires it, and the search would otherwise
// propose incommensurate times); duplicate snapped candidates reuse the
// earlier evaluation.
inline OptimizeResult optimize_sweep_time(const CoupledSystem& sys, const EngineSpec& spec,
                                          double t_min_s, double t_max_s,
                                          const EnsembleConfig& cfg, int n_coarse = 7,
                                          double rel_tol = 0.02, int max_iter = 24) {
    if (!(t_min_s > 0.0) || !(t_max_s > t_min_s))
        throw std::invalid_argument("optimize_sweep_time: need 0 < t_min < t_max");
    if (n_coarse < 3) throw std::invalid_argument("optimize_sweep_time: need >= 3 coarse points");

    OptimizeResult res;
    auto snap = [&](double ts) {
        // period grows as 2*ts for either engine kind, so shifting ts by
        // half the period mismatch lands the cycle on the recording grid
        const double window = cfg.sim.dt * static_cast<double>(cfg.sim.record_stride);
        const double period = spec.protocol(ts).period;
        const double target = std::max(1.0, std::round(period / window)) * window;
        const double snapped = ts + 0.5 * (target - period);
        return snapped > 0.0 ? snapped : ts;
    };
    auto eval = [&](double ts) {
        ts = snap(ts);
        for (const CyclePoint& e : res.evaluations)
            if (e.sweep_time_s == ts) return e.power_mean_w;
        res.evaluations.push_back(evaluate_sweep_time(sys, spec, ts, cfg));
        return res.evaluations.back().power_mean_w;
    };

    std::vector<double> grid(n_coarse), pw(n_coarse);
    for (int i = 0; i < n_coarse; ++i) {
        grid[i] = t_min_s + (t_max_s - t_min_s) * static_cast<double>(i) /
                                static_cast<double>(n_coarse - 1);
        pw[i] = eval(grid[i]);
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < pw.size(); ++i)
        if (pw[i] > pw[best]) best = i;
    bool dropped = false;
    for (std::size_t i = 1; i < pw.size(); ++i) {
        if (pw[i] < pw[i - 1]) dropped = true;
        else if (dropped) res.unimodal = false;
    }
    if (best == 0 || best + 1 == pw.size()) res.unimodal = false;

    double a = grid[best == 0 ? 0 : best - 1];
    double b = grid[std::min(best + 1, pw.size() - 1)];
    const double phi = 0.6180339887498949; // inverse golden ratio
    double x1 = b - phi * (b - a), x2 = a + phi * (b - a);
    double f1 = eval(x1), f2 = eval(x2);
    const double tol = rel_tol * (t_max_s - t_min_s);
    for (int iter = 0; iter < max_iter && b - a > tol; ++iter) {
        if (f1 < f2) {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = eval(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = eval(x1);
        }
    }

    res.best_power_w = -std::numeric_limits<double>::infinity();
    for (const CyclePoint& e : res.evaluations)
        if (e.power_mean_w > res.best_power_w) {
            res.best_power_w = e.power_mean_w;
            res.best_sweep_time_s = e.sweep_time_s;
            res.best_work_j = e.work_mean_j;
        }
    return res;
}

inline std::string scan_to_csv(const std::vector<CyclePoint>& points) {
    CsvBuilder csv("sweep_time_s,period_s,work_mean_j,work_sem_j,power_mean_w,power_sem_w"
                   ",efficiency,efficiency_normalized,corr_peak_time_s,corr_peak_value");
    for (const CyclePoint& p : points) {
        csv.cell(p.sweep_time_s).cell(p.period_s).cell(p.work_mean_j).cell(p.work_sem_j);
        csv.cell(p.power_mean_w).cell(p.power_sem_w).cell(p.efficiency);
        csv.cell(p.efficiency_normalized).cell(p.corr_peak_time_s).cell(p.corr_peak_value);
        csv.end_row();
    }
    return csv.str();
}

inline nlohmann::json optimize_to_json(const OptimizeResult& r) {
    nlohmann::json j;
    j["best_sweep_time_s"] = r.best_sweep_time_s;
    j["best_power_w"] = r.best_power_w;
    j["best_work_j"] = r.best_work_j;
    j["unimodal"] = r.unimodal;
    j["n_evaluations"] = r.evaluations.size();
    nlohmann::json evals = nlohmann::json::array();
    for (const CyclePoint& p : r.evaluations)
        evals.push_back({{"sweep_time_s", p.sweep_time_s},
                         {"power_mean_w", p.power_mean_w},
                         {"work_mean_j", p.work_mean_j}});
    j["evaluations"] = evals;
    return j;
}

} // namespace ottomech
