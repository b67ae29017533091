#include "oracles.hpp"

#include "rtc/errors.hpp"
#include "rtc/model.hpp"

#include <doctest.h>

#include <string>

using namespace rtc;

TEST_CASE("update_gap recomputes r from the forecast error") {
    HouseholdState h;
    h.r_hat = 1.0;

    auto z = update_gap(h, 0.0, 0.0);
    CHECK(z.r == 1.0);
    CHECK(z.r_tilde == 0.0);

    auto a = update_gap(h, 0.2, 0.5);
    CHECK(a.r_tilde == doctest::Approx(-0.3).epsilon(1e-12));
    CHECK(a.r == doctest::Approx(0.7).epsilon(1e-12));

    h.r_hat = -2.0;
    auto b = update_gap(h, 0.1, -0.4);
    CHECK(b.r == doctest::Approx(-1.5).epsilon(1e-12));
}

TEST_CASE("update_gap replaces, not accumulates, the previous error") {
    HouseholdState h;
    h.r_hat = 1.0;
    h = update_gap(h, 0.5, 0.0);
    h = update_gap(h, 0.1, 0.0);
    CHECK(h.r == doctest::Approx(1.1));
}

TEST_CASE("grid_vector places the flow at its PCC only") {
    const Strategy s{PccId{1}, 2.5, -0.5};
    const auto v = s.grid_vector(3);
    REQUIRE(v.size() == 3);
    CHECK(v[0] == 0.0);
    CHECK(v[1] == 2.5);
    CHECK(v[2] == 0.0);
}

TEST_CASE("validate_household accepts the worked example") {
    CHECK_NOTHROW(validate_household(fixture::cost_example()));
}

TEST_CASE("validate_household names the household and the field") {
    auto expect_field = [](HouseholdState h, const std::string& field) {
        try {
            validate_household(h);
            FAIL("no error for " << field);
        } catch (const ValidationError& e) {
            const std::string msg = e.what();
            CHECK(msg.find("household 7") != std::string::npos);
            CHECK(msg.find(field) != std::string::npos);
        }
    };
    auto h = fixture::cost_example();
    h.id = 7;

    auto bad = h;
    bad.commitment.x_hat = 2.5;
    expect_field(bad, "x_hat");

    bad = h;
    bad.e0 = 200.0;
    expect_field(bad, "e0");

    bad = h;
    bad.commitment.p_m = 0.2;
    expect_field(bad, "p_m");

    bad = h;
    bad.battery.cyc_up = -0.1;
    expect_field(bad, "cyc");

    bad = h;
    bad.battery.a = 0.0;
    expect_field(bad, "battery.a");

    bad = h;
    bad.r = 3.0;
    expect_field(bad, "r");
}

TEST_CASE("slot configuration") {
    SlotConfig c;
    CHECK(c.slot_hours() == doctest::Approx(1.0 / 6.0));
    CHECK(c.slot_seconds() == 600.0);
    CHECK_NOTHROW(c.validate());
    c.max_iterations = 61;
    CHECK_THROWS_AS(c.validate(), ValidationError);
    c.max_iterations = 60;
    c.slot_duration_min = 0.0;
    CHECK_THROWS_AS(c.validate(), ValidationError);
}
