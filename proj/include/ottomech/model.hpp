#pragma once

// Closed-form model of two nearly degenerate mechanical modes with a
// cavity-mediated quasi-static coupling Λ.  In the frame rotating at a
// reference frequency the coupled-mode matrix is
//
//     M(Δω) = [ Δω  Λ ]        (reference = bare frequency of mode 2)
//             [ Λ   0 ]
//
// whose eigenvalues ω± = Δω/2 ± sqrt(Δω²/4 + Λ²) form the familiar
// avoided crossing.  The symmetric-frame variant (reference = mean of the
// two bare frequencies) differs only by the identity shift -Δω/2, so both
// share one eigenvector routine.

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

#include "constants.hpp"

namespace ottomech {

struct MechanicalMode {
    double omega0 = 0.0; // carrier frequency, rad/s
    double gamma = 0.0;  // energy damping rate, rad/s

    MechanicalMode() = default;
    MechanicalMode(double omega0_, double gamma_) : omega0(omega0_), gamma(gamma_) {
        if (!(omega0 > 0.0))
            throw std::invalid_argument("MechanicalMode: carrier frequency must be positive");
        if (gamma < 0.0)
            throw std::invalid_argument("MechanicalMode: damping must be non-negative");
        // high-Q regime is assumed throughout (rotating-wave envelopes)
        if (gamma > 0.0 && gamma / omega0 >= 1e-3)
            throw std::invalid_argument("MechanicalMode: gamma/omega0 must be < 1e-3");
    }
};

struct CoupledSystem {
    MechanicalMode mode1, mode2;
    double lambda = 0.0; // effective coupling, rad/s

    CoupledSystem() = default;
    CoupledSystem(MechanicalMode m1, MechanicalMode m2, double lambda_)
        : mode1(m1), mode2(m2), lambda(lambda_) {
        if (lambda < 0.0)
            throw std::invalid_argument("CoupledSystem: coupling must be non-negative");
    }

    // splitting resolvable against both linewidths
    bool strong_coupling() const {
        return lambda > std::max(mode1.gamma, mode2.gamma);
    }
};

struct BathSpec {
    double t_cold = 0.0;          // K
    double t_hot = 0.0;           // K
    double occupancy_omega = 0.0; // rad/s, frequency basis of kB T / (hbar w)

    BathSpec() = default;
    BathSpec(double t_cold_, double t_hot_, double occupancy_omega_)
        : t_cold(t_cold_), t_hot(t_hot_), occupancy_omega(occupancy_omega_) {
        if (!(t_cold > 0.0))
            throw std::invalid_argument("BathSpec: cold temperature must be positive");
        if (t_hot < t_cold)
            throw std::invalid_argument("BathSpec: hot temperature below cold");
        if (!(occupancy_omega > 0.0))
            throw std::invalid_argument("BathSpec: occupancy frequency must be positive");
    }
};

// Classical (equipartition) occupancy.  The carrier frequency is used as
// the denominator for every temperature; offsets of a few hundred Hz on a
// 400 kHz carrier are irrelevant at this precision.
inline double thermal_occupancy(double temperature_k, double omega) {
    if (!(omega > 0.0))
        throw std::invalid_argument("thermal_occupancy: frequency must be positive");
    if (temperature_k < 0.0)
        throw std::invalid_argument("thermal_occupancy: negative temperature");
    return PhysicalConstants::k_B * temperature_k / (PhysicalConstants::hbar * omega);
}

// Branch frequencies in the mode-2 frame: ω± = Δω/2 ± sqrt(Δω²/4 + Λ²).
// Returned as (upper, lower).
inline std::pair<double, double> normal_mode_frequencies(double delta_omega, double lambda) {
    if (lambda < 0.0)
        throw std::invalid_argument("normal_mode_frequencies: coupling must be non-negative");
    const double r = std::hypot(0.5 * delta_omega, lambda);
    return {0.5 * delta_omega + r, 0.5 * delta_omega - r};
}

// Symmetric (straight-twin) frame: ω± = ±sqrt(Δω²/4 + Λ²).
inline std::pair<double, double> twin_mode_frequencies(double delta_omega, double lambda) {
    if (lambda < 0.0)
        throw std::invalid_argument("twin_mode_frequencies: coupling must be non-negative");
    const double r = std::hypot(0.5 * delta_omega, lambda);
    return {r, -r};
}

// Real orthogonal change of basis between bare modes (b1, b2) and normal
// modes (B-, B+).  Columns are (lower, upper):
//
//     B- = u11 b1 + u21 b2,   B+ = u12 b1 + u22 b2.
//
// Sign convention: upper column -> (+1, 0) as Δω -> +inf; everything else
// follows by continuity and det u = +1.  With Λ > 0 the branch gap never
// closes on the real Δω axis, so the canonical form below is already
// continuous in Δω; an optional previous transform re-anchors signs for
// callers stepping through their own sweep history.
struct ModeTransform {
    std::array<std::array<double, 2>, 2> u{{{0.0, 0.0}, {0.0, 0.0}}};

    double u11() const { return u[0][0]; }
    double u21() const { return u[1][0]; }
    double u12() const { return u[0][1]; }
    double u22() const { return u[1][1]; }
    double det() const { return u[0][0] * u[1][1] - u[0][1] * u[1][0]; }
};

inline ModeTransform mode_transform(double delta_omega, double lambda,
                                    const ModeTransform* previous = nullptr) {
    if (lambda < 0.0)
        throw std::invalid_argument("mode_transform: coupling must be non-negative");
    if (lambda == 0.0 && delta_omega == 0.0)
        throw std::invalid_argument("mode_transform: degenerate uncoupled point");

    // Half the rotation of the traceless part [[ε, Λ], [Λ, -ε]], ε = Δω/2.
    // atan2 keeps full accuracy on both wings of the crossing.
    const double phi = 0.5 * std::atan2(lambda, 0.5 * delta_omega);
    const double c = std::cos(phi), s = std::sin(phi);

    ModeTransform t;
    t.u[0][1] = c;  // upper = (cos φ, sin φ)
    t.u[1][1] = s;
    t.u[0][0] = s;  // lower = (sin φ, -cos φ), det = +1
    t.u[1][0] = -c;

    if (previous) {
        const double d_lower = t.u[0][0] * previous->u[0][0] + t.u[1][0] * previous->u[1][0];
        const double d_upper = t.u[0][1] * previous->u[0][1] + t.u[1][1] * previous->u[1][1];
        if (d_lower < 0.0) { t.u[0][0] = -t.u[0][0]; t.u[1][0] = -t.u[1][0]; }
        if (d_upper < 0.0) { t.u[0][1] = -t.u[0][1]; t.u[1][1] = -t.u[1][1]; }
    }
    return t;
}

// Product u12 u22 = cos φ sin φ = sin 2φ / 2 = Λ / (2 sqrt(Δω²/4 + Λ²)),
// the weight of the bare-mode cross term in the upper-branch occupancy.
// The closed form is exact where cos·sin would pick up a rounding: at
// Δω = 0 it returns 0.5 with no error.
inline double transform_cross_weight(double delta_omega, double lambda) {
    if (lambda < 0.0)
        throw std::invalid_argument("transform_cross_weight: coupling must be non-negative");
    if (lambda == 0.0 && delta_omega == 0.0)
        throw std::invalid_argument("transform_cross_weight: degenerate uncoupled point");
    return 0.5 * lambda / std::hypot(0.5 * delta_omega, lambda);
}

// Probability of jumping across the avoided crossing when Δω is chirped
// linearly at rate α: P = exp(-2π Λ² / |α|).
inline double lz_diabatic_probability(double lambda, double alpha) {
    if (lambda < 0.0)
        throw std::invalid_argument("lz_diabatic_probability: coupling must be non-negative");
    if (alpha == 0.0)
        throw std::invalid_argument("lz_diabatic_probability: zero sweep rate");
    return std::exp(-two_pi * lambda * lambda / std::abs(alpha));
}

} // namespace ottomech
