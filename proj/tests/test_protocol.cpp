#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "ottomech/protocol.hpp"

using namespace ottomech;

namespace {
const BathSpec kBath(295.0, 17700.0, two_pi * 4.0e5);

Protocol default_single() {
    return build_single_cylinder(two_pi * 200.0, -two_pi * 200.0, 2.5e-3, 0.4, 0.4, kBath);
}

Protocol default_twin() {
    return build_twin(two_pi * 200.0, -two_pi * 200.0, 2.5e-3, 0.4, 0.4, kBath);
}
} // namespace

TEST_CASE("single-cylinder builder geometry", "[protocol]") {
    Protocol p = default_single();

    REQUIRE(p.segments.size() == 4);
    CHECK(p.period == Catch::Approx(0.805).margin(1e-15));
    CHECK(p.stroke_start(Stroke::expansion_1_2) == 0.0);
    CHECK(p.stroke_end(Stroke::expansion_1_2) == Catch::Approx(2.5e-3));
    CHECK(p.stroke_end(Stroke::cold_2_3) == Catch::Approx(0.4025));
    CHECK(p.stroke_end(Stroke::compression_3_4) == Catch::Approx(0.405));
    CHECK(p.stroke_end(Stroke::hot_4_1) == p.period);

    // mode 2 is the frame reference
    for (double t : {0.0, 1e-3, 0.2, 0.404, 0.5}) {
        auto [w1, w2] = p.frequency_at(t);
        CHECK(w2 == 0.0);
        CHECK(w1 == Catch::Approx(p.delta_omega_at(t)));
    }

    CHECK(p.delta_omega_at(0.0) == Catch::Approx(two_pi * 200.0));
    CHECK(p.delta_omega_at(1.25e-3) == Catch::Approx(0.0).margin(1e-9));
    CHECK(p.delta_omega_at(0.2) == Catch::Approx(-two_pi * 200.0));
    CHECK(p.delta_omega_at(0.5) == Catch::Approx(two_pi * 200.0));

    CHECK(p.sweep_rate() == Catch::Approx(two_pi * 400.0 / 2.5e-3));
    CHECK(p.max_abs_delta_omega() == Catch::Approx(two_pi * 200.0));
    CHECK(p.validate().empty());
}

TEST_CASE("twin builder splits the ramp symmetrically", "[protocol]") {
    Protocol p = default_twin();
    REQUIRE(p.segments.size() == 4);
    for (double t : {0.0, 1e-3, 0.2, 0.404, 0.5}) {
        auto [w1, w2] = p.frequency_at(t);
        CHECK(w1 == Catch::Approx(-w2).margin(1e-12));
        CHECK(w1 - w2 == Catch::Approx(p.delta_omega_at(t)));
    }
    CHECK(p.delta_omega_at(0.0) == Catch::Approx(two_pi * 200.0));
    CHECK(p.delta_omega_at(0.2) == Catch::Approx(-two_pi * 200.0));
    CHECK(p.validate().empty());

    // frame dispatch
    auto [sp, sm] = default_single().branch_frequencies(two_pi * 200.0, two_pi * 40.0);
    auto [tp, tm] = p.branch_frequencies(two_pi * 200.0, two_pi * 40.0);
    CHECK(sp - tp == Catch::Approx(two_pi * 100.0).margin(1e-9));
    CHECK(tp == -tm);
    CHECK(sp / two_pi == Catch::Approx(207.703296142690081).epsilon(1e-13));
}

TEST_CASE("schedule is periodic and segments are half-open", "[protocol]") {
    Protocol p = default_single();

    for (double t : {1e-4, 0.3, 0.4026, 0.77}) {
        CHECK(p.delta_omega_at(t + p.period) == Catch::Approx(p.delta_omega_at(t)));
        CHECK(p.delta_omega_at(t + 7.0 * p.period) == Catch::Approx(p.delta_omega_at(t)));
    }
    CHECK(p.delta_omega_at(p.period) == Catch::Approx(p.delta_omega_at(0.0)));
    CHECK_THROWS_AS(p.delta_omega_at(-1e-9), std::invalid_argument);

    // hot bath is on only inside [t3, period); t = 0 is already cold
    CHECK(p.bath_at(0.0).first == kBath.t_cold);
    CHECK(p.bath_at(0.405).first == kBath.t_hot);
    CHECK(p.bath_at(p.period - 1e-9).first == kBath.t_hot);
    CHECK(p.bath_at(p.period).first == kBath.t_cold);
    for (double t : {0.0, 1e-3, 0.3, 0.405, 0.7})
        CHECK(p.bath_at(t).second == kBath.t_cold);

    // stroke boundaries belong to the following stroke
    CHECK(&p.segment_at(2.5e-3) == &p.segments[1]);
    CHECK(&p.segment_at(0.405) == &p.segments[3]);
}

TEST_CASE("builder rejects bad stroke arguments", "[protocol]") {
    CHECK_THROWS_AS(build_single_cylinder(two_pi * 200.0, two_pi * 200.0, 2.5e-3, 0.4, 0.4, kBath),
                    std::invalid_argument);
    CHECK_THROWS_AS(build_single_cylinder(-two_pi * 200.0, two_pi * 200.0, 2.5e-3, 0.4, 0.4, kBath),
                    std::invalid_argument);
    CHECK_THROWS_AS(build_single_cylinder(two_pi * 200.0, -two_pi * 200.0, 0.0, 0.4, 0.4, kBath),
                    std::invalid_argument);
    CHECK_THROWS_AS(build_twin(two_pi * 200.0, -two_pi * 200.0, 2.5e-3, -0.1, 0.4, kBath),
                    std::invalid_argument);
    CHECK_THROWS_AS(build_twin(two_pi * 200.0, -two_pi * 200.0, 2.5e-3, 0.4, 0.0, kBath),
                    std::invalid_argument);
}

TEST_CASE("validate flags structural defects", "[protocol]") {
    SECTION("clean protocols pass") {
        CHECK(default_single().validate().empty());
        CHECK(default_twin().validate().empty());
    }
    SECTION("gap between segments") {
        Protocol p = default_single();
        p.segments[2].t_start += 1e-6;
        auto v = p.validate();
        REQUIRE_FALSE(v.empty());
        CHECK(v.front().find("gap") != std::string::npos);
    }
    SECTION("frequency jump at a boundary") {
        Protocol p = default_single();
        p.segments[1].omega1_start += 1.0;
        auto v = p.validate();
        REQUIRE_FALSE(v.empty());
        CHECK(v.front().find("jump") != std::string::npos);
    }
    SECTION("cycle that does not close") {
        Protocol p = default_single();
        p.segments[3].omega1_end *= 0.5;
        auto v = p.validate();
        REQUIRE_FALSE(v.empty());
        CHECK(v.front().find("close") != std::string::npos);
    }
    SECTION("hot bath on the wrong stroke") {
        Protocol p = default_single();
        p.segments[1].hot_bath_on_mode1 = true;
        auto v = p.validate();
        REQUIRE_FALSE(v.empty());
        CHECK(v.front().find("hot bath") != std::string::npos);
    }
    SECTION("hold that drifts is not isochoric") {
        Protocol p = default_single();
        p.segments[1].omega1_end += 1.0;
        auto v = p.validate();
        CHECK_FALSE(v.empty());
    }
    SECTION("wrong stroke count") {
        Protocol p = default_single();
        p.segments.pop_back();
        p.period = p.segments.back().t_end;
        auto v = p.validate();
        REQUIRE_FALSE(v.empty());
        bool found = false;
        for (const auto& m : v) found = found || m.find("four strokes") != std::string::npos;
        CHECK(found);
    }
}

TEST_CASE("stroke labels", "[protocol]") {
    CHECK(std::string(stroke_label(Stroke::expansion_1_2)) == "1->2");
    CHECK(std::string(stroke_label(Stroke::cold_2_3)) == "2->3");
    CHECK(std::string(stroke_label(Stroke::compression_3_4)) == "3->4");
    CHECK(std::string(stroke_label(Stroke::hot_4_1)) == "4->1");
}

TEST_CASE("protocol JSON round trip", "[protocol]") {
    for (Protocol p : {default_single(), default_twin()}) {
        nlohmann::json j = p;
        Protocol q = j.get<Protocol>();
        CHECK(q.kind == p.kind);
        CHECK(q.period == p.period);
        CHECK(q.bath.t_cold == p.bath.t_cold);
        CHECK(q.bath.t_hot == p.bath.t_hot);
        CHECK(q.bath.occupancy_omega == Catch::Approx(p.bath.occupancy_omega).epsilon(1e-14));
        REQUIRE(q.segments.size() == p.segments.size());
        for (size_t i = 0; i < p.segments.size(); ++i) {
            CHECK(q.segments[i].t_start == p.segments[i].t_start);
            CHECK(q.segments[i].t_end == p.segments[i].t_end);
            CHECK(q.segments[i].omega1_start
                  == Catch::Approx(p.segments[i].omega1_start).margin(1e-9));
            CHECK(q.segments[i].omega2_end
                  == Catch::Approx(p.segments[i].omega2_end).margin(1e-9));
            CHECK(q.segments[i].hot_bath_on_mode1 == p.segments[i].hot_bath_on_mode1);
        }
        CHECK(q.validate().empty());
    }

    nlohmann::json bad = nlohmann::json{{"kind", "v8"}};
    Protocol q;
    CHECK_THROWS(from_json(bad, q));
}
