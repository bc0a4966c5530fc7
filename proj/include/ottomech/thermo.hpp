#pragma once

// Branch-resolved thermodynamics.  A normal-mode branch with occupancy
// N(t) and laboratory frequency w_c + w(t) (carrier plus rotating-frame
// offset) carries energy E = hbar (w_c + w) N.  Over one sample step the
// change splits exactly into
//
//   work  dW = hbar <N> dw          (frequency moves, occupancy rides)
//   heat  dQ = hbar (w_c + <w>) dN  (occupancy moves)
//
// with <.> the trapezoid average, so summed work + heat telescopes to the
// total energy change with no discretization residue.  Holds have dw = 0
// identically; sweeps pick up a small dissipative heat from the baths.

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "constants.hpp"
#include "dynamics.hpp"
#include "io.hpp"
#include "model.hpp"
#include "protocol.hpp"
#include "stats.hpp"

namespace ottomech {

// Occupancies of the instantaneous normal modes along a sampled record,
// split into bare-mode weights and the interference (beat) term.
struct NormalModeSeries {
    std::vector<double> times;                          // s
    std::vector<double> omega_plus, omega_minus;        // rad/s frame offsets
    std::vector<double> n_plus, n_minus;                // full occupancies
    std::vector<double> n1_plus, n2_plus, ncorr_plus;   // n_plus components
    std::vector<double> n1_minus, n2_minus, ncorr_minus;
};

inline NormalModeSeries decompose(const Trajectory& tr, const Protocol& p, double lambda) {
    NormalModeSeries s;
    const std::size_t n = tr.times.size();
    if (tr.b1.size() != n || tr.b2.size() != n)
        throw std::invalid_argument("decompose: ragged trajectory");
    s.times = tr.times;
    for (auto* v : {&s.omega_plus, &s.omega_minus, &s.n_plus, &s.n_minus, &s.n1_plus,
                    &s.n2_plus, &s.ncorr_plus, &s.n1_minus, &s.n2_minus, &s.ncorr_minus})
        v->resize(n);

    for (std::size_t i = 0; i < n; ++i) {
        const double dw = p.delta_omega_at(tr.times[i]);
        const auto [wp, wm] = p.branch_frequencies(dw, lambda);
        s.omega_plus[i] = wp;
        s.omega_minus[i] = wm;
        const ModeTransform u = mode_transform(dw, lambda);
        const double n1 = std::norm(tr.b1[i]);
        const double n2 = std::norm(tr.b2[i]);
        const double cross = 2.0 * std::real(tr.b1[i] * std::conj(tr.b2[i]));
        s.n1_plus[i] = u.u12() * u.u12() * n1;
        s.n2_plus[i] = u.u22() * u.u22() * n2;
        s.ncorr_plus[i] = u.u12() * u.u22() * cross;
        s.n_plus[i] = s.n1_plus[i] + s.n2_plus[i] + s.ncorr_plus[i];
        s.n1_minus[i] = u.u11() * u.u11() * n1;
        s.n2_minus[i] = u.u21() * u.u21() * n2;
        s.ncorr_minus[i] = u.u11() * u.u21() * cross;
        s.n_minus[i] = s.n1_minus[i] + s.n2_minus[i] + s.ncorr_minus[i];
    }
    return s;
}

struct CycleThermo {
    // energy into the working branch, indexed by Stroke
    std::array<double, 4> stroke_work{{0.0, 0.0, 0.0, 0.0}}; // J
    std::array<double, 4> stroke_heat{{0.0, 0.0, 0.0, 0.0}}; // J

    double work_output = 0.0;      // J, net work done by the branch
    double heat_input = 0.0;       // J, heat absorbed during the hot hold
    double efficiency = 0.0;       // work_output / heat_input
    double efficiency_ideal = 0.0; // (w_top - w_bottom) / w_carrier
    double efficiency_normalized = 0.0;
    double closure_residual = 0.0; // J, first-law residual over the cycle
    double n_hot = 0.0, n_cold = 0.0; // plateau occupancies at the hold ends
    double omega_top = 0.0, omega_bottom = 0.0; // rad/s frame offsets at the holds

    std::vector<double> diagram_omega; // rad/s, one per sample
    std::vector<double> diagram_n;
    std::vector<const char*> diagram_stroke;
};

// One-cycle energy accounting for a single branch.  The series must span
// exactly one period, first sample at t = 0 and last at t = period (the
// wrap sample).  Any uniform or non-uniform sample grid works; each step
// is booked to the stroke containing its midpoint.
inline CycleThermo cycle_thermo(const std::vector<double>& times, const std::vector<double>& n,
                                const std::vector<double>& omega, const Protocol& p,
                                double omega_carrier) {
    const std::size_t K = times.size();
    if (K < 2 || n.size() != K || omega.size() != K)
        throw std::invalid_argument("cycle_thermo: need matching series with at least 2 samples");
    if (std::abs(times.front()) > 1e-12 * p.period ||
        std::abs(times.back() - p.period) > 1e-9 * p.period)
        throw std::invalid_argument("cycle_thermo: series must cover one period from t = 0");
    if (!(omega_carrier > 0.0))
        throw std::invalid_argument("cycle_thermo: carrier frequency must be positive");
    const double hbar = PhysicalConstants::hbar;

    CycleThermo ct;
    for (std::size_t k = 0; k + 1 < K; ++k) {
        const double dw = omega[k + 1] - omega[k];
        const double dn = n[k + 1] - n[k];
        const double w_step = hbar * 0.5 * (n[k] + n[k + 1]) * dw;
        const double q_step = hbar * (omega_carrier + 0.5 * (omega[k] + omega[k + 1])) * dn;
        const int s = static_cast<int>(p.stroke_at(0.5 * (times[k] + times[k + 1])));
        ct.stroke_work[s] += w_step;
        ct.stroke_heat[s] += q_step;
        ct.closure_residual += w_step + q_step;
    }

    ct.work_output = -(ct.stroke_work[0] + ct.stroke_work[1] + ct.stroke_work[2] + ct.stroke_work[3]);
    ct.heat_input = ct.stroke_heat[static_cast<int>(Stroke::hot_4_1)];

    // hold plateaus: average over the trailing window of each hold, never
    // reaching past the hold start into the preceding sweep
    double max_gap = 0.0;
    for (std::size_t k = 0; k + 1 < K; ++k) max_gap = std::max(max_gap, times[k + 1] - times[k]);
    auto plateau = [&](double t_begin, double t_end, double& n_out, double& w_out) {
        const double win = std::max(1e-3, max_gap) * (1.0 + 1e-9);
        const double lo = std::max(t_end - win, t_begin - 1e-12 * p.period);
        double acc = 0.0, wacc = 0.0;
        std::size_t cnt = 0;
        for (std::size_t k = 0; k < K; ++k)
            if (times[k] >= lo && times[k] <= t_end + 1e-12 * p.period) {
                acc += n[k];
                wacc += omega[k];
                ++cnt;
            }
        if (cnt == 0)
            throw std::invalid_argument("cycle_thermo: sample grid too coarse to resolve the holds");
        n_out = acc / static_cast<double>(cnt);
        w_out = wacc / static_cast<double>(cnt);
    };
    plateau(p.stroke_start(Stroke::cold_2_3), p.stroke_end(Stroke::cold_2_3), ct.n_cold,
            ct.omega_bottom);
    plateau(p.stroke_start(Stroke::hot_4_1), p.period, ct.n_hot, ct.omega_top);

    ct.efficiency_ideal = (ct.omega_top - ct.omega_bottom) / omega_carrier;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    ct.efficiency = ct.heat_input > 0.0 ? ct.work_output / ct.heat_input : nan;
    ct.efficiency_normalized =
        ct.efficiency_ideal != 0.0 ? ct.efficiency / ct.efficiency_ideal : nan;

    ct.diagram_omega = omega;
    ct.diagram_n = n;
    ct.diagram_stroke.resize(K);
    for (std::size_t k = 0; k + 1 < K; ++k) ct.diagram_stroke[k] = stroke_label(p.stroke_at(times[k]));
    ct.diagram_stroke[K - 1] = stroke_label(Stroke::hot_4_1); // wrap sample closes the cycle
    return ct;
}

struct TwinThermo {
    CycleThermo upper, lower;
    double work_output_total = 0.0; // J
    double heat_input_total = 0.0;  // J
    double efficiency_total = 0.0;
};

inline TwinThermo twin_cycle_thermo(const std::vector<double>& times,
                                    const std::vector<double>& n_up,
                                    const std::vector<double>& w_up,
                                    const std::vector<double>& n_lo,
                                    const std::vector<double>& w_lo, const Protocol& p,
                                    double omega_carrier) {
    TwinThermo t;
    t.upper = cycle_thermo(times, n_up, w_up, p, omega_carrier);
    t.lower = cycle_thermo(times, n_lo, w_lo, p, omega_carrier);
    t.work_output_total = t.upper.work_output + t.lower.work_output;
    t.heat_input_total = t.upper.heat_input + t.lower.heat_input;
    t.efficiency_total = t.heat_input_total > 0.0
                             ? t.work_output_total / t.heat_input_total
                             : std::numeric_limits<double>::quiet_NaN();
    return t;
}

struct WorkDistribution {
    std::size_t n = 0;
    double mean = 0.0;      // J
    double std_error = 0.0; // J, standard error of the mean
    ExponentialFit fit;
    KsResult ks;
    Histogram hist;
};

// Per-cycle work statistics.  The exponential reference needs a decent
// sample before the KS p-value means anything.
inline WorkDistribution work_distribution(const std::vector<double>& works, int n_bins = 40) {
    if (works.size() < 100)
        throw std::invalid_argument("work_distribution: need at least 100 per-cycle samples, got " +
                                    std::to_string(works.size()));
    WorkDistribution w;
    w.n = works.size();
    double s = 0.0;
    for (double v : works) s += v;
    w.mean = s / static_cast<double>(w.n);
    double ss = 0.0;
    for (double v : works) ss += (v - w.mean) * (v - w.mean);
    w.std_error = std::sqrt(ss / (static_cast<double>(w.n) - 1.0) / static_cast<double>(w.n));
    w.fit = fit_exponential(works);
    w.ks = ks_test_exponential(works, w.fit.rate);
    w.hist = make_histogram(works, n_bins);
    return w;
}

// --- serialization ---

inline nlohmann::json thermo_to_json(const CycleThermo& ct) {
    nlohmann::json strokes;
    for (int s = 0; s < 4; ++s)
        strokes[stroke_label(static_cast<Stroke>(s))] = {{"work_j", ct.stroke_work[s]},
                                                         {"heat_j", ct.stroke_heat[s]}};
    return nlohmann::json{
        {"work_output_j", ct.work_output},
        {"heat_input_j", ct.heat_input},
        {"efficiency", ct.efficiency},
        {"efficiency_ideal", ct.efficiency_ideal},
        {"efficiency_normalized", ct.efficiency_normalized},
        {"closure_residual_j", ct.closure_residual},
        {"n_hot", ct.n_hot},
        {"n_cold", ct.n_cold},
        {"omega_top_hz", rad_to_hz(ct.omega_top)},
        {"omega_bottom_hz", rad_to_hz(ct.omega_bottom)},
        {"strokes", strokes},
    };
}

inline nlohmann::json twin_thermo_to_json(const TwinThermo& t) {
    return nlohmann::json{
        {"upper", thermo_to_json(t.upper)},
        {"lower", thermo_to_json(t.lower)},
        {"work_output_total_j", t.work_output_total},
        {"heat_input_total_j", t.heat_input_total},
        {"efficiency_total", t.efficiency_total},
    };
}

inline nlohmann::json workdist_to_json(const WorkDistribution& w) {
    return nlohmann::json{
        {"n_cycles", w.n},
        {"mean_work_j", w.mean},
        {"std_error_j", w.std_error},
        {"exp_rate_per_j", w.fit.rate},
        {"ks_statistic", w.ks.statistic},
        {"ks_p_value", w.ks.p_value},
        {"histogram", {{"edges_j", w.hist.edges}, {"counts", w.hist.counts}}},
    };
}

inline std::string diagram_to_csv(const CycleThermo& ct) {
    CsvBuilder csv("omega_branch_hz,occupancy,stroke");
    for (std::size_t k = 0; k < ct.diagram_omega.size(); ++k) {
        csv.cell(rad_to_hz(ct.diagram_omega[k]))
            .cell(ct.diagram_n[k])
            .cell(std::string(ct.diagram_stroke[k]));
        csv.end_row();
    }
    return csv.str();
}

inline std::string normal_mode_series_to_csv(const NormalModeSeries& s) {
    CsvBuilder csv("t_s,omega_plus_hz,omega_minus_hz,n_plus,n_minus,"
                   "n1_plus,n2_plus,ncorr_plus,n1_minus,n2_minus,ncorr_minus");
    for (std::size_t i = 0; i < s.times.size(); ++i) {
        csv.cell(s.times[i])
            .cell(rad_to_hz(s.omega_plus[i]))
            .cell(rad_to_hz(s.omega_minus[i]))
            .cell(s.n_plus[i])
            .cell(s.n_minus[i])
            .cell(s.n1_plus[i])
            .cell(s.n2_plus[i])
            .cell(s.ncorr_plus[i])
            .cell(s.n1_minus[i])
            .cell(s.n2_minus[i])
            .cell(s.ncorr_minus[i]);
        csv.end_row();
    }
    return csv.str();
}

} // namespace ottomech
