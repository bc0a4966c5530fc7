#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <vector>

#include "ottomech/stats.hpp"
#include "ottomech/thermo.hpp"

using namespace ottomech;
using Catch::Approx;

namespace {

constexpr double kOmegaM = two_pi * 4.0e5;
constexpr double kLambda = two_pi * 40.0;
constexpr double kHbar = PhysicalConstants::hbar;
const double kNHot = thermal_occupancy(17700.0, kOmegaM);
const double kNCold = thermal_occupancy(295.0, kOmegaM);

Protocol engine_protocol() {
    return build_single_cylinder(two_pi * 200.0, -two_pi * 200.0, 15e-3, 0.4, 0.4,
                                 BathSpec(295.0, 17700.0, kOmegaM));
}

// sample grid covering exactly one period, wrap sample included
std::vector<double> time_grid(const Protocol& p, double h) {
    std::vector<double> t;
    const long n = std::lround(p.period / h);
    for (long k = 0; k <= n; ++k) t.push_back(p.period * double(k) / double(n));
    return t;
}

std::vector<double> upper_branch_omega(const Protocol& p, const std::vector<double>& t) {
    std::vector<double> w;
    for (double x : t) w.push_back(p.branch_frequencies(p.delta_omega_at(x), kLambda).first);
    return w;
}

double uniform01(NoiseStream& rng) { return (rng.raw() >> 11) * 0x1.0p-53; }

} // namespace

TEST_CASE("kolmogorov limit distribution", "[stats]") {
    CHECK(kolmogorov_q(0.1) == 1.0);
    CHECK(kolmogorov_q(0.3) == Approx(0.999990694198665).epsilon(1e-12));
    CHECK(kolmogorov_q(0.8) == Approx(0.544142411574198).epsilon(1e-12));
    CHECK(kolmogorov_q(1.2) == Approx(0.112249666670725).epsilon(1e-12));
    CHECK(kolmogorov_q(1.628) == Approx(0.00997552243118105).epsilon(1e-10));
    CHECK(kolmogorov_q(5.0) < 1e-20);
    CHECK_THROWS_AS(kolmogorov_q(-0.1), std::invalid_argument);
}

TEST_CASE("exponential fit and KS test", "[stats]") {
    SECTION("midpoint quantile grid is a near-perfect exponential sample") {
        const double rate = 3.0;
        std::vector<double> x;
        const int n = 500;
        for (int i = 0; i < n; ++i) x.push_back(-std::log(1.0 - (i + 0.5) / n) / rate);
        const auto fit = fit_exponential(x);
        CHECK(fit.rate == Approx(rate).epsilon(0.01));
        const auto ks = ks_test_exponential(x, rate);
        CHECK(ks.statistic == Approx(0.5 / n).epsilon(1e-6));
        CHECK(ks.p_value == 1.0);
        // a badly wrong rate is rejected outright
        CHECK(ks_test_exponential(x, 2.0 * rate).p_value < 1e-10);
    }
    SECTION("validation") {
        CHECK_THROWS_AS(fit_exponential({}), std::invalid_argument);
        CHECK_THROWS_AS(fit_exponential({-1.0, -2.0}), std::invalid_argument);
        CHECK_THROWS_AS(ks_test_exponential({}, 1.0), std::invalid_argument);
        CHECK_THROWS_AS(ks_test_exponential({1.0}, 0.0), std::invalid_argument);
    }
    SECTION("scaled statistic reproduces the frozen table") {
        // n = 100, D = 0.15 -> lam = 1.51965
        CHECK(kolmogorov_q(0.15 * (10.0 + 0.12 + 0.011))
              == Approx(0.0197317547498697).epsilon(1e-10));
    }
}

TEST_CASE("histogram", "[stats]") {
    const Histogram h = make_histogram({0.0, 0.5, 1.0, 1.5, 2.0}, 2);
    REQUIRE(h.edges.size() == 3);
    CHECK(h.edges[0] == 0.0);
    CHECK(h.edges[1] == 1.0);
    CHECK(h.edges[2] == 2.0);
    CHECK(h.counts[0] == 2.0);
    CHECK(h.counts[1] == 3.0);

    const Histogram d = make_histogram({4.0, 4.0, 4.0}, 3);
    double total = 0.0;
    for (double c : d.counts) total += c;
    CHECK(total == 3.0);
    CHECK(d.edges.front() < 4.0);
    CHECK(d.edges.back() > 4.0);
    CHECK_THROWS_AS(make_histogram({}, 4), std::invalid_argument);
    CHECK_THROWS_AS(make_histogram({1.0}, 0), std::invalid_argument);
}

TEST_CASE("decompose conserves the population and splits it correctly", "[thermo]") {
    Protocol p = engine_protocol();
    NoiseStream rng(21, 0);

    SECTION("trace identity at random states and times") {
        Trajectory tr;
        tr.record_dt = 1e-3;
        for (int k = 0; k < 200; ++k) {
            tr.times.push_back(uniform01(rng) * p.period);
            tr.b1.push_back(cplx(rng.normal(), rng.normal()) * 100.0);
            tr.b2.push_back(cplx(rng.normal(), rng.normal()) * 100.0);
        }
        const NormalModeSeries s = decompose(tr, p, kLambda);
        for (std::size_t i = 0; i < tr.times.size(); ++i) {
            const double total = std::norm(tr.b1[i]) + std::norm(tr.b2[i]);
            CHECK(s.n_plus[i] + s.n_minus[i] == Approx(total).epsilon(1e-12));
            CHECK(s.n_plus[i]
                  == Approx(s.n1_plus[i] + s.n2_plus[i] + s.ncorr_plus[i]).margin(1e-9));
        }
    }
    SECTION("a state prepared on one branch stays on it") {
        Trajectory tr;
        tr.record_dt = 1e-3;
        for (int k = 0; k < 50; ++k) {
            const double t = uniform01(rng) * p.period;
            const ModeTransform u = mode_transform(p.delta_omega_at(t), kLambda);
            const cplx amp(rng.normal(), rng.normal());
            tr.times.push_back(t);
            tr.b1.push_back(amp * u.u12());
            tr.b2.push_back(amp * u.u22());
        }
        const NormalModeSeries s = decompose(tr, p, kLambda);
        for (std::size_t i = 0; i < tr.times.size(); ++i) {
            const double n = std::norm(tr.b1[i]) + std::norm(tr.b2[i]);
            CHECK(s.n_plus[i] == Approx(n).epsilon(1e-12));
            CHECK(std::abs(s.n_minus[i]) < 1e-12 * n);
        }
    }
    SECTION("branch frequencies follow the schedule") {
        Trajectory tr;
        tr.record_dt = 1e-3;
        tr.times = {0.0, 0.2};
        tr.b1 = {cplx(1.0, 0.0), cplx(1.0, 0.0)};
        tr.b2 = {cplx(0.0, 0.0), cplx(0.0, 0.0)};
        const NormalModeSeries s = decompose(tr, p, kLambda);
        CHECK(s.omega_plus[0] / two_pi == Approx(207.703296142690081).epsilon(1e-12));
        CHECK(s.omega_plus[1] / two_pi == Approx(7.70329614269008063).epsilon(1e-11));
        CHECK(s.omega_minus[0] / two_pi == Approx(-7.70329614269008063).epsilon(1e-11));
    }
    SECTION("ragged trajectories are rejected") {
        Trajectory tr;
        tr.times = {0.0, 1.0};
        tr.b1 = {cplx(1.0, 0.0)};
        tr.b2 = {cplx(0.0, 0.0), cplx(0.0, 0.0)};
        CHECK_THROWS_AS(decompose(tr, p, kLambda), std::invalid_argument);
    }
}

TEST_CASE("rectangle cycle reproduces the ideal Otto energetics", "[thermo]") {
    Protocol p = engine_protocol();
    const std::vector<double> t = time_grid(p, 5e-4);
    const std::vector<double> w = upper_branch_omega(p, t);

    // occupancy jumps happen strictly inside the holds, so the sweeps see
    // constant occupancy: a perfect rectangle in the (omega, N) plane.
    // Index arithmetic keeps the jump off the sweep-end samples.
    const double h = t[1] - t[0];
    const long k1 = std::lround(p.stroke_end(Stroke::expansion_1_2) / h);
    const long k3 = std::lround(p.stroke_end(Stroke::compression_3_4) / h);
    std::vector<double> n;
    for (long k = 0; k < long(t.size()); ++k)
        n.push_back(k <= k1 ? kNHot : (k <= k3 ? kNCold : kNHot));

    const CycleThermo ct = cycle_thermo(t, n, w, p, kOmegaM);
    const double dw_span = two_pi * 200.0; // exact upper-branch drop for the symmetric window

    CHECK(ct.stroke_work[0] == Approx(-kHbar * kNHot * dw_span).epsilon(1e-12));
    CHECK(ct.stroke_work[2] == Approx(kHbar * kNCold * dw_span).epsilon(1e-12));
    CHECK(ct.stroke_work[1] == 0.0);
    CHECK(ct.stroke_work[3] == 0.0);
    CHECK(ct.stroke_heat[0] == 0.0);
    CHECK(ct.stroke_heat[2] == 0.0);

    const double w_cold = p.branch_frequencies(-two_pi * 200.0, kLambda).first;
    const double w_hot = p.branch_frequencies(two_pi * 200.0, kLambda).first;
    CHECK(ct.stroke_heat[1]
          == Approx(kHbar * (kOmegaM + w_cold) * (kNCold - kNHot)).epsilon(1e-12));
    CHECK(ct.stroke_heat[3]
          == Approx(kHbar * (kOmegaM + w_hot) * (kNHot - kNCold)).epsilon(1e-12));

    CHECK(ct.work_output == Approx(kHbar * dw_span * (kNHot - kNCold)).epsilon(1e-12));
    CHECK(ct.heat_input == Approx(ct.stroke_heat[3]));
    CHECK(std::abs(ct.closure_residual) < 1e-12 * ct.heat_input);

    CHECK(ct.n_hot == Approx(kNHot).epsilon(1e-14));
    CHECK(ct.n_cold == Approx(kNCold).epsilon(1e-14));
    CHECK(ct.omega_top == Approx(w_hot).epsilon(1e-14));
    CHECK(ct.omega_bottom == Approx(w_cold).epsilon(1e-14));

    CHECK(ct.efficiency == Approx(0.000499740505624414486).epsilon(1e-11));
    CHECK(ct.efficiency_ideal == Approx(5.0e-4).epsilon(1e-12));
    CHECK(ct.efficiency_normalized == Approx(0.999481011248828973).epsilon(1e-11));

    REQUIRE(ct.diagram_omega.size() == t.size());
    CHECK(std::string(ct.diagram_stroke.front()) == "1->2");
    CHECK(std::string(ct.diagram_stroke.back()) == "4->1");
    const std::size_t mid_cold = t.size() / 4; // 0.2 s, inside the cold hold
    CHECK(std::string(ct.diagram_stroke[mid_cold]) == "2->3");
}

TEST_CASE("flat occupancy leaves no work and no heat", "[thermo]") {
    Protocol p = engine_protocol();
    const std::vector<double> t = time_grid(p, 1e-3);
    const std::vector<double> w = upper_branch_omega(p, t);
    const std::vector<double> n(t.size(), 5.0e7);

    const CycleThermo ct = cycle_thermo(t, n, w, p, kOmegaM);
    CHECK(std::abs(ct.work_output) < 1e-12 * kHbar * kOmegaM * 5.0e7);
    CHECK(ct.heat_input == 0.0);
    CHECK(std::isnan(ct.efficiency));
    CHECK(std::isnan(ct.efficiency_normalized));
    CHECK(std::abs(ct.closure_residual) < 1e-15 * kHbar * kOmegaM * 5.0e7);
    CHECK(ct.efficiency_ideal == Approx(5.0e-4).epsilon(1e-12));
    // NaN serializes as null rather than breaking the writer
    CHECK(thermo_to_json(ct).dump().find("null") != std::string::npos);
}

TEST_CASE("trapezoid work is exact for occupancies linear in frequency", "[thermo]") {
    Protocol p = engine_protocol();
    const std::vector<double> t = time_grid(p, 2.5e-4);
    const std::vector<double> w = upper_branch_omega(p, t);
    const double a = 3.0e7, b = 40.0;
    std::vector<double> n;
    for (double x : w) n.push_back(a + b * x);

    const CycleThermo ct = cycle_thermo(t, n, w, p, kOmegaM);
    const double wi = w.front();
    const double wf = p.branch_frequencies(-two_pi * 200.0, kLambda).first;
    const double expect = kHbar * (a * (wf - wi) + 0.5 * b * (wf * wf - wi * wi));
    CHECK(ct.stroke_work[0] == Approx(expect).epsilon(1e-12));
    CHECK(ct.stroke_work[2] == Approx(-expect).epsilon(1e-12));
    // periodic series: the first law closes on the nose
    CHECK(std::abs(ct.closure_residual) < 1e-13 * kHbar * kOmegaM * a);
}

TEST_CASE("cycle_thermo input validation", "[thermo]") {
    Protocol p = engine_protocol();
    const std::vector<double> t = time_grid(p, 1e-3);
    const std::vector<double> w = upper_branch_omega(p, t);
    const std::vector<double> n(t.size(), 1.0);

    std::vector<double> short_n(t.size() - 1, 1.0);
    CHECK_THROWS_AS(cycle_thermo(t, short_n, w, p, kOmegaM), std::invalid_argument);

    std::vector<double> bad_t = t;
    bad_t.back() = 0.9 * p.period;
    CHECK_THROWS_AS(cycle_thermo(bad_t, n, w, p, kOmegaM), std::invalid_argument);

    std::vector<double> off_t = t;
    for (auto& x : off_t) x += 0.01;
    CHECK_THROWS_AS(cycle_thermo(off_t, n, w, p, kOmegaM), std::invalid_argument);

    CHECK_THROWS_AS(cycle_thermo(t, n, w, p, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(cycle_thermo({0.0, p.period}, {1.0, 1.0}, {0.0, 0.0}, p, kOmegaM),
                    std::invalid_argument); // no samples inside the holds
}

TEST_CASE("twin accounting combines both branches", "[thermo]") {
    Protocol p = build_twin(two_pi * 720.0, -two_pi * 180.0, 15e-3, 0.4, 0.4,
                            BathSpec(295.0, 17700.0, kOmegaM));
    const std::vector<double> t = time_grid(p, 5e-4);
    std::vector<double> wu, wl;
    for (double x : t) {
        const auto [up, lo] = p.branch_frequencies(p.delta_omega_at(x), kLambda);
        wu.push_back(up);
        wl.push_back(lo);
    }
    const double h = t[1] - t[0];
    const long k1 = std::lround(p.stroke_end(Stroke::expansion_1_2) / h);
    const long k3 = std::lround(p.stroke_end(Stroke::compression_3_4) / h);
    std::vector<double> n_up, n_lo;
    for (long k = 0; k < long(t.size()); ++k) {
        n_up.push_back(k <= k1 ? kNHot : (k <= k3 ? kNCold : kNHot));
        n_lo.push_back(k <= k1 ? kNCold : (k <= k3 ? kNHot : kNCold));
    }

    const TwinThermo tw = twin_cycle_thermo(t, n_up, wu, n_lo, wl, p, kOmegaM);
    const double dw_span = wu.front() - p.branch_frequencies(-two_pi * 180.0, kLambda).first;
    CHECK(tw.upper.work_output == Approx(kHbar * dw_span * (kNHot - kNCold)).epsilon(1e-12));
    // the lower branch rises in frequency while hot: it also outputs work
    CHECK(tw.lower.work_output == Approx(kHbar * dw_span * (kNHot - kNCold)).epsilon(1e-12));
    CHECK(tw.work_output_total
          == Approx(tw.upper.work_output + tw.lower.work_output).epsilon(1e-14));
    CHECK(tw.heat_input_total == Approx(tw.upper.heat_input + tw.lower.heat_input));
    CHECK(tw.efficiency_total
          == Approx(tw.work_output_total / tw.heat_input_total).epsilon(1e-12));
    CHECK(twin_thermo_to_json(tw).contains("upper"));
}

TEST_CASE("work distribution statistics", "[thermo]") {
    NoiseStream rng(314, 0);
    const double rate = 2.0e20; // 1/J scale of per-cycle works
    std::vector<double> works;
    for (int k = 0; k < 5000; ++k) works.push_back(-std::log(1.0 - uniform01(rng)) / rate);

    const WorkDistribution wd = work_distribution(works);
    CHECK(wd.n == 5000);
    CHECK(wd.mean == Approx(1.0 / rate).epsilon(0.06));
    CHECK(wd.fit.rate == Approx(rate).epsilon(0.06));
    CHECK(wd.std_error == Approx(wd.mean / std::sqrt(5000.0)).epsilon(0.1));
    CHECK(wd.ks.p_value > 0.01);
    double total = 0.0;
    for (double c : wd.hist.counts) total += c;
    CHECK(total == 5000.0);

    SECTION("contaminated sample is rejected by the test") {
        std::vector<double> mixed = works;
        for (int k = 0; k < 1500; ++k) mixed[k] = 0.3 / rate;
        CHECK(work_distribution(mixed).ks.p_value < 1e-6);
    }
    SECTION("too few cycles") {
        std::vector<double> few(works.begin(), works.begin() + 99);
        CHECK_THROWS_AS(work_distribution(few), std::invalid_argument);
    }
    SECTION("serialization carries the test verdict") {
        const nlohmann::json j = workdist_to_json(wd);
        CHECK(j.at("n_cycles").get<std::size_t>() == 5000);
        CHECK(j.at("ks_p_value").get<double>() == wd.ks.p_value);
        CHECK(j.at("histogram").at("edges_j").size() == wd.hist.edges.size());
    }
}

TEST_CASE("csv emitters", "[thermo]") {
    Protocol p = engine_protocol();
    const std::vector<double> t = time_grid(p, 5e-3);
    const std::vector<double> w = upper_branch_omega(p, t);
    const std::vector<double> n(t.size(), 2.0);
    const CycleThermo ct = cycle_thermo(t, n, w, p, kOmegaM);
    const std::string csv = diagram_to_csv(ct);
    CHECK(csv.rfind("omega_branch_hz,occupancy,stroke\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == long(t.size()) + 1);
    CHECK(csv.find("1->2") != std::string::npos);

    Trajectory tr;
    tr.record_dt = 0.1;
    tr.times = {0.0, 0.1};
    tr.b1 = {cplx(1.0, 0.0), cplx(0.5, 0.5)};
    tr.b2 = {cplx(0.0, 1.0), cplx(0.25, 0.0)};
    const std::string ms = normal_mode_series_to_csv(decompose(tr, p, kLambda));
    CHECK(ms.rfind("t_s,omega_plus_hz,omega_minus_hz,n_plus,n_minus,", 0) == 0);
    CHECK(std::count(ms.begin(), ms.end(), '\n') == 3);
}
