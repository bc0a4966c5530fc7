#pragma once

// Piecewise-linear frequency schedules for the four-stroke cycles.
//
// Stroke layout (one period):
//   1->2  expansion sweep,   Δω: Δω_i -> Δω_f, both baths cold
//   2->3  cold hold          Δω_f
//   3->4  compression sweep, Δω: Δω_f -> Δω_i
//   4->1  hot hold           Δω_i, hot bath coupled to mode 1
//
// Single-cylinder frame pins mode 2 (ω2 offset = 0, ω1 = Δω); the
// straight-twin frame ramps both symmetrically (ω1,2 = ±Δω/2).  Bath
// switching is instantaneous at stroke boundaries; segments are half-open
// [t_start, t_end), so at t = 0 the hot bath has just disconnected.

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "constants.hpp"
#include "model.hpp"

namespace ottomech {

struct RampSegment {
    double t_start = 0.0, t_end = 0.0;              // s
    double omega1_start = 0.0, omega1_end = 0.0;    // rad/s, offsets from frame reference
    double omega2_start = 0.0, omega2_end = 0.0;
    bool hot_bath_on_mode1 = false;
};

enum class Stroke { expansion_1_2 = 0, cold_2_3 = 1, compression_3_4 = 2, hot_4_1 = 3 };

inline const char* stroke_label(Stroke s) {
    switch (s) {
        case Stroke::expansion_1_2: return "1->2";
        case Stroke::cold_2_3: return "2->3";
        case Stroke::compression_3_4: return "3->4";
        case Stroke::hot_4_1: return "4->1";
    }
    return "?";
}

struct Protocol {
    enum class Kind { single_cylinder, straight_twin };

    Kind kind = Kind::single_cylinder;
    std::vector<RampSegment> segments;
    double period = 0.0; // s
    BathSpec bath;

    const RampSegment& segment_at(double t) const {
        double tau = wrap(t);
        for (const auto& s : segments)
            if (tau >= s.t_start && tau < s.t_end) return s;
        return segments.back(); // tau == period only via rounding; clamp
    }

    // (ω1, ω2) frame offsets at time t, periodic in the cycle length.
    std::pair<double, double> frequency_at(double t) const {
        double tau = wrap(t);
        const RampSegment& s = segment_at(tau);
        const double x = (tau - s.t_start) / (s.t_end - s.t_start);
        return {s.omega1_start + (s.omega1_end - s.omega1_start) * x,
                s.omega2_start + (s.omega2_end - s.omega2_start) * x};
    }

    double delta_omega_at(double t) const {
        auto [w1, w2] = frequency_at(t);
        return w1 - w2;
    }

    // (T1, T2); mode 2 stays on the cold bath for the whole cycle.
    std::pair<double, double> bath_at(double t) const {
        return {segment_at(t).hot_bath_on_mode1 ? bath.t_hot : bath.t_cold, bath.t_cold};
    }

    // |dΔω/dt| of the expansion stroke.
    double sweep_rate() const {
        const RampSegment& s = segments.front();
        const double d_i = s.omega1_start - s.omega2_start;
        const double d_f = s.omega1_end - s.omega2_end;
        return std::abs(d_f - d_i) / (s.t_end - s.t_start);
    }

    double max_abs_delta_omega() const {
        double m = 0.0;
        for (const auto& s : segments) {
            m = std::max(m, std::abs(s.omega1_start - s.omega2_start));
            m = std::max(m, std::abs(s.omega1_end - s.omega2_end));
        }
        return m;
    }

    double stroke_start(Stroke s) const { return segments[static_cast<int>(s)].t_start; }
    double stroke_end(Stroke s) const { return segments[static_cast<int>(s)].t_end; }

    // Which stroke a time instant belongs to (canonical four-stroke order).
    Stroke stroke_at(double t) const {
        return static_cast<Stroke>(&segment_at(t) - segments.data());
    }

    // Branch frequencies for this frame's convention.
    std::pair<double, double> branch_frequencies(double delta_omega, double lambda) const {
        return kind == Kind::single_cylinder ? normal_mode_frequencies(delta_omega, lambda)
                                             : twin_mode_frequencies(delta_omega, lambda);
    }

    std::vector<std::string> validate() const;

  private:
    double wrap(double t) const {
        if (t < 0.0) throw std::invalid_argument("Protocol: negative time");
        if (t < period) return t;
        double tau = std::fmod(t, period);
        return tau;
    }
};

namespace detail {
inline void check_build_args(double delta_i, double delta_f, double sweep_time,
                             double therm_cold, double therm_hot) {
    if (!(sweep_time > 0.0) || !(therm_cold > 0.0) || !(therm_hot > 0.0))
        throw std::invalid_argument("protocol builder: stroke durations must be positive");
    if (!(delta_i > delta_f))
        throw std::invalid_argument("protocol builder: need delta_omega_i > delta_omega_f");
}

inline Protocol assemble(Protocol::Kind kind, double w1_i, double w1_f, double w2_i, double w2_f,
                         double sweep_time, double therm_cold, double therm_hot, BathSpec bath) {
    Protocol p;
    p.kind = kind;
    p.bath = bath;
    const double t1 = sweep_time;
    const double t2 = t1 + therm_cold;
    const double t3 = t2 + sweep_time;
    const double t4 = t3 + therm_hot;
    p.period = t4;
    p.segments = {
        {0.0, t1, w1_i, w1_f, w2_i, w2_f, false},
        {t1, t2, w1_f, w1_f, w2_f, w2_f, false},
        {t2, t3, w1_f, w1_i, w2_f, w2_i, false},
        {t3, t4, w1_i, w1_i, w2_i, w2_i, true},
    };
    return p;
}
} // namespace detail

inline Protocol build_single_cylinder(double delta_omega_i, double delta_omega_f,
                                      double sweep_time, double therm_cold, double therm_hot,
                                      BathSpec bath) {
    detail::check_build_args(delta_omega_i, delta_omega_f, sweep_time, therm_cold, therm_hot);
    return detail::assemble(Protocol::Kind::single_cylinder, delta_omega_i, delta_omega_f,
                            0.0, 0.0, sweep_time, therm_cold, therm_hot, bath);
}

inline Protocol build_twin(double delta_omega_i, double delta_omega_f, double sweep_time,
                           double therm_cold, double therm_hot, BathSpec bath) {
    detail::check_build_args(delta_omega_i, delta_omega_f, sweep_time, therm_cold, therm_hot);
    return detail::assemble(Protocol::Kind::straight_twin, 0.5 * delta_omega_i,
                            0.5 * delta_omega_f, -0.5 * delta_omega_i, -0.5 * delta_omega_f,
                            sweep_time, therm_cold, therm_hot, bath);
}

inline std::vector<std::string> Protocol::validate() const {
    std::vector<std::string> v;
    if (segments.empty()) {
        v.push_back("no segments");
        return v;
    }
    if (segments.front().t_start != 0.0) v.push_back("first segment does not start at 0");
    if (segments.back().t_end != period) v.push_back("last segment does not end at the period");
    for (size_t i = 0; i < segments.size(); ++i) {
        const auto& s = segments[i];
        if (!(s.t_end > s.t_start)) v.push_back("segment " + std::to_string(i) + ": non-positive duration");
        if (i + 1 < segments.size()) {
            const auto& n = segments[i + 1];
            if (n.t_start != s.t_end) v.push_back("gap between segments " + std::to_string(i) + " and " + std::to_string(i + 1));
            if (n.omega1_start != s.omega1_end || n.omega2_start != s.omega2_end)
                v.push_back("frequency jump at segment boundary " + std::to_string(i + 1));
        }
    }
    const auto& first = segments.front();
    const auto& last = segments.back();
    if (last.omega1_end != first.omega1_start || last.omega2_end != first.omega2_start)
        v.push_back("cycle does not close: frequency at period differs from t = 0");
    if (segments.size() != 4) {
        v.push_back("expected four strokes, got " + std::to_string(segments.size()));
        return v;
    }
    auto delta_change = [](const RampSegment& s) {
        return (s.omega1_end - s.omega2_end) - (s.omega1_start - s.omega2_start);
    };
    if (delta_change(segments[0]) == 0.0) v.push_back("stroke 1->2 is not a sweep");
    if (delta_change(segments[1]) != 0.0) v.push_back("stroke 2->3 is not an isochoric hold");
    if (delta_change(segments[2]) == 0.0) v.push_back("stroke 3->4 is not a sweep");
    if (delta_change(segments[3]) != 0.0) v.push_back("stroke 4->1 is not an isochoric hold");
    for (size_t i = 0; i < 4; ++i)
        if (segments[i].hot_bath_on_mode1 != (i == 3))
            v.push_back("hot bath must be connected during stroke 4->1 only");
    return v;
}

// --- JSON (frequencies in Hz for readability; internal units are rad/s) ---

inline void to_json(nlohmann::json& j, const Protocol& p) {
    j = nlohmann::json{
        {"kind", p.kind == Protocol::Kind::single_cylinder ? "single-cylinder" : "straight-twin"},
        {"period_s", p.period},
        {"bath", {{"t_cold_k", p.bath.t_cold},
                  {"t_hot_k", p.bath.t_hot},
                  {"occupancy_omega_hz", rad_to_hz(p.bath.occupancy_omega)}}},
        {"segments", nlohmann::json::array()},
    };
    for (const auto& s : p.segments)
        j["segments"].push_back({{"t_start_s", s.t_start},
                                 {"t_end_s", s.t_end},
                                 {"omega1_start_hz", rad_to_hz(s.omega1_start)},
                                 {"omega1_end_hz", rad_to_hz(s.omega1_end)},
                                 {"omega2_start_hz", rad_to_hz(s.omega2_start)},
                                 {"omega2_end_hz", rad_to_hz(s.omega2_end)},
                                 {"hot_bath_on_mode1", s.hot_bath_on_mode1}});
}

inline void from_json(const nlohmann::json& j, Protocol& p) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "single-cylinder") p.kind = Protocol::Kind::single_cylinder;
    else if (kind == "straight-twin") p.kind = Protocol::Kind::straight_twin;
    else throw std::invalid_argument("Protocol: unknown kind '" + kind + "'");
    p.period = j.at("period_s").get<double>();
    const auto& b = j.at("bath");
    p.bath = BathSpec(b.at("t_cold_k").get<double>(), b.at("t_hot_k").get<double>(),
                      hz_to_rad(b.at("occupancy_omega_hz").get<double>()));
    p.segments.clear();
    for (const auto& js : j.at("segments")) {
        RampSegment s;
        s.t_start = js.at("t_start_s").get<double>();
        s.t_end = js.at("t_end_s").get<double>();
        s.omega1_start = hz_to_rad(js.at("omega1_start_hz").get<double>());
        s.omega1_end = hz_to_rad(js.at("omega1_end_hz").get<double>());
        s.omega2_start = hz_to_rad(js.at("omega2_start_hz").get<double>());
        s.omega2_end = hz_to_rad(js.at("omega2_end_hz").get<double>());
        s.hot_bath_on_mode1 = js.at("hot_bath_on_mode1").get<bool>();
        p.segments.push_back(s);
    }
}

} // namespace ottomech
