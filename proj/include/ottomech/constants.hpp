#pragma once

namespace ottomech {

// SI values (2019 redefinition; hbar derived from the exact h).
struct PhysicalConstants {
    static constexpr double hbar = 1.054571817e-34; // J s
    static constexpr double k_B  = 1.380649e-23;    // J/K
};

inline constexpr double two_pi = 6.283185307179586476925286766559;

// Convenience for specs written in ordinary frequency units.
inline constexpr double hz_to_rad(double f_hz) { return two_pi * f_hz; }
inline constexpr double rad_to_hz(double w_rad) { return w_rad / two_pi; }

} // namespace ottomech
