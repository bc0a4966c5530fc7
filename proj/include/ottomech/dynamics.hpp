#pragma once

// Stochastic rotating-frame dynamics of the coupled pair.  Complex
// envelopes b1, b2 obey
//
//   db1/dt = -(i d1 + g1/2) b1 - i L b2 + sqrt(g1 n1) xi1(t)
//   db2/dt = -(i d2 + g2/2) b2 - i L b1 + sqrt(g2 n2) xi2(t)
//
// with unit-intensity circular complex white noise and classical bath
// occupancies n_i = kB T_i / (hbar w_i).  Each step freezes the
// coefficients at the step midpoint and applies the exact solution of the
// frozen system: b <- exp(A dt) b + eta with eta drawn from the exact
// increment covariance.  There is no Milstein/Euler truncation error, so
// the step size only has to resolve the schedule, not the damping.
//
// Step-size rule: dt <= 1 / (50 max(L, |dw|_max, g_max)/2pi)  [seconds].

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "constants.hpp"
#include "io.hpp"
#include "linalg2.hpp"
#include "model.hpp"
#include "protocol.hpp"
#include "random.hpp"

namespace ottomech {

struct EnvelopeState {
    cplx b1{0.0, 0.0}, b2{0.0, 0.0};

    bool finite() const {
        return std::isfinite(b1.real()) && std::isfinite(b1.imag()) &&
               std::isfinite(b2.real()) && std::isfinite(b2.imag());
    }
    double n1() const { return std::norm(b1); }
    double n2() const { return std::norm(b2); }
};

struct SimConfig {
    double dt = 2e-5;       // s
    int record_stride = 10; // samples kept every record_stride steps
    std::uint64_t seed = 1;
};

namespace detail {

inline Mat2c drift_matrix(const CoupledSystem& sys, double delta1, double delta2) {
    return {cplx(-0.5 * sys.mode1.gamma, -delta1), cplx(0.0, -sys.lambda),
            cplx(0.0, -sys.lambda), cplx(-0.5 * sys.mode2.gamma, -delta2)};
}

inline Mat2c diffusion_matrix(const CoupledSystem& sys, double t1, double t2) {
    return Mat2c::diag(sys.mode1.gamma * thermal_occupancy(t1, sys.mode1.omega0),
                       sys.mode2.gamma * thermal_occupancy(t2, sys.mode2.omega0));
}

} // namespace detail

struct StepOperator {
    Mat2c f; // propagator exp(A dt)
    Mat2c l; // Cholesky factor of the increment covariance
    bool noisy = false;
};

inline StepOperator make_step_operator(const CoupledSystem& sys, double delta1, double delta2,
                                       double t1, double t2, double dt) {
    if (!(dt > 0.0)) throw std::invalid_argument("step: dt must be positive");
    const Mat2c a = detail::drift_matrix(sys, delta1, delta2);
    StepOperator op;
    op.f = expm(a * cplx(dt, 0.0));
    const Mat2c d = detail::diffusion_matrix(sys, t1, t2);
    if (d.norm1() > 0.0) {
        op.l = cholesky(increment_covariance(a, d, dt));
        op.noisy = op.l.norm1() > 0.0;
    }
    return op;
}

inline EnvelopeState apply_step(const StepOperator& op, const EnvelopeState& s, NoiseStream& rng) {
    Vec2c b = op.f * Vec2c{s.b1, s.b2};
    if (op.noisy) {
        const cplx z1 = rng.complex_normal(), z2 = rng.complex_normal();
        b.x += op.l.a * z1;
        b.y += op.l.c * z1 + op.l.d * z2;
    }
    return {b.x, b.y};
}

// One exact frozen-coefficient step.  Intended for scripted ramps and
// tests; scheduled runs precompute the operators once (PropagatorTable).
inline EnvelopeState step(const EnvelopeState& state, double dt, double delta1, double delta2,
                          const CoupledSystem& sys, double t1, double t2, NoiseStream& rng) {
    if (!state.finite())
        throw std::runtime_error("step: non-finite envelope state");
    const StepOperator op = make_step_operator(sys, delta1, delta2, t1, t2, dt);
    EnvelopeState out = apply_step(op, state, rng);
    if (!out.finite())
        throw std::runtime_error("step: numerical blow-up");
    return out;
}

inline double dt_bound(const CoupledSystem& sys, const Protocol& p) {
    const double fastest = std::max({sys.lambda, p.max_abs_delta_omega(),
                                     sys.mode1.gamma, sys.mode2.gamma}) /
                           two_pi;
    return 1.0 / (50.0 * fastest);
}

// Per-step operators for one period plus the branch geometry at every
// step boundary.  Shared read-only by all trajectories of an ensemble;
// dt is snapped so the grid tiles the period exactly.
struct PropagatorTable {
    double dt = 0.0;
    long n_steps = 0;
    std::vector<StepOperator> ops;          // size n_steps, midpoint-frozen
    std::vector<double> omega_plus;         // size n_steps + 1, boundary times
    std::vector<double> omega_minus;
    std::vector<double> u11, u21, u12, u22; // transform columns at boundaries
    bool stationary_ok = false;
    Mat2c init_chol; // factor of the status-1 stationary covariance

    bool in_sweep(long k) const { return omega_plus[k + 1] != omega_plus[k]; }
};

inline PropagatorTable build_propagator_table(const CoupledSystem& sys, const Protocol& p,
                                              double dt_requested) {
    {
        auto violations = p.validate();
        if (!violations.empty())
            throw std::invalid_argument("invalid protocol: " + violations.front());
    }
    if (!(dt_requested > 0.0)) throw std::invalid_argument("dt must be positive");
    const double bound = dt_bound(sys, p);
    if (dt_requested > bound * (1.0 + 1e-12))
        throw std::invalid_argument("dt too large for the schedule: dt = " + fmt_g9(dt_requested) +
                                    " s exceeds the resolution bound " + fmt_g9(bound) + " s");

    PropagatorTable t;
    t.n_steps = std::llround(p.period / dt_requested);
    if (t.n_steps < 1) throw std::invalid_argument("dt exceeds the protocol period");
    t.dt = p.period / static_cast<double>(t.n_steps);

    t.ops.reserve(t.n_steps);
    const long nb = t.n_steps + 1;
    t.omega_plus.resize(nb);
    t.omega_minus.resize(nb);
    t.u11.resize(nb);
    t.u21.resize(nb);
    t.u12.resize(nb);
    t.u22.resize(nb);

    for (long k = 0; k < t.n_steps; ++k) {
        const double tm = (static_cast<double>(k) + 0.5) * t.dt;
        auto [w1, w2] = p.frequency_at(tm);
        auto [temp1, temp2] = p.bath_at(tm);
        t.ops.push_back(make_step_operator(sys, w1, w2, temp1, temp2, t.dt));
    }
    for (long k = 0; k < nb; ++k) {
        const double tb = std::min(static_cast<double>(k) * t.dt, p.period);
        const double dw = (k == t.n_steps) ? p.delta_omega_at(0.0) : p.delta_omega_at(tb);
        auto [wp, wm] = p.branch_frequencies(dw, sys.lambda);
        t.omega_plus[k] = wp;
        t.omega_minus[k] = wm;
        const ModeTransform u = mode_transform(dw, sys.lambda);
        t.u11[k] = u.u11();
        t.u21[k] = u.u21();
        t.u12[k] = u.u12();
        t.u22[k] = u.u22();
    }

    // status-1 start: frequencies of t = 0, baths as connected during the
    // closing stroke (the hot bath disconnects exactly at t = 0)
    auto [w1, w2] = p.frequency_at(0.0);
    const auto& closing = p.segments.back();
    const double t1 = closing.hot_bath_on_mode1 ? p.bath.t_hot : p.bath.t_cold;
    const Mat2c a0 = detail::drift_matrix(sys, w1, w2);
    const Mat2c d0 = detail::diffusion_matrix(sys, t1, p.bath.t_cold);
    try {
        t.init_chol = cholesky(stationary_covariance(a0, d0));
        t.stationary_ok = true;
    } catch (const std::runtime_error&) {
        t.stationary_ok = false;
    }
    return t;
}

inline EnvelopeState draw_stationary_start(const PropagatorTable& t, NoiseStream& rng) {
    if (!t.stationary_ok)
        throw std::invalid_argument(
            "no stationary start: undamped mode, supply an explicit initial state");
    const cplx z1 = rng.complex_normal(), z2 = rng.complex_normal();
    return {t.init_chol.a * z1, t.init_chol.c * z1 + t.init_chol.d * z2};
}

struct Trajectory {
    double record_dt = 0.0;
    std::vector<double> times; // s, uniform grid from t = 0
    std::vector<cplx> b1, b2;
};

inline std::pair<std::vector<double>, std::vector<double>> bare_populations(const Trajectory& tr) {
    std::vector<double> n1(tr.b1.size()), n2(tr.b2.size());
    for (std::size_t i = 0; i < tr.b1.size(); ++i) {
        n1[i] = std::norm(tr.b1[i]);
        n2[i] = std::norm(tr.b2[i]);
    }
    return {std::move(n1), std::move(n2)};
}

inline Trajectory simulate_trajectory(const CoupledSystem& sys, const Protocol& p,
                                      const SimConfig& cfg, int n_cycles,
                                      const EnvelopeState* initial = nullptr) {
    if (n_cycles < 1) throw std::invalid_argument("n_cycles must be >= 1");
    if (cfg.record_stride < 1) throw std::invalid_argument("record_stride must be >= 1");
    const PropagatorTable table = build_propagator_table(sys, p, cfg.dt);

    NoiseStream rng(cfg.seed, 0);
    EnvelopeState s = initial ? *initial : draw_stationary_start(table, rng);
    if (!s.finite()) throw std::runtime_error("simulate_trajectory: non-finite initial state");

    const long total = table.n_steps * n_cycles;
    Trajectory tr;
    tr.record_dt = table.dt * cfg.record_stride;
    tr.times.reserve(total / cfg.record_stride + 1);
    tr.b1.reserve(total / cfg.record_stride + 1);
    tr.b2.reserve(total / cfg.record_stride + 1);

    auto record = [&](long g) {
        tr.times.push_back(static_cast<double>(g) * table.dt);
        tr.b1.push_back(s.b1);
        tr.b2.push_back(s.b2);
    };
    record(0);
    for (long g = 0; g < total; ++g) {
        s = apply_step(table.ops[g % table.n_steps], s, rng);
        if (!s.finite()) throw std::runtime_error("simulate_trajectory: numerical blow-up");
        if ((g + 1) % cfg.record_stride == 0) record(g + 1);
    }
    return tr;
}

inline std::string trajectory_to_csv(const Trajectory& tr) {
    CsvBuilder csv("t_s,re_b1,im_b1,re_b2,im_b2,n1,n2");
    for (std::size_t i = 0; i < tr.times.size(); ++i) {
        csv.cell(tr.times[i])
            .cell(tr.b1[i].real())
            .cell(tr.b1[i].imag())
            .cell(tr.b2[i].real())
            .cell(tr.b2[i].imag())
            .cell(std::norm(tr.b1[i]))
            .cell(std::norm(tr.b2[i]));
        csv.end_row();
    }
    return csv.str();
}

} // namespace ottomech
