#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "cphase/errors.hpp"
#include "cphase/phasing.hpp"

using namespace cphase;
using doctest::Approx;

namespace {
const EngineGeometry geom;
const ModelParams params;

OperatingCondition midpoint() {
    OperatingCondition c;
    c.n = 1350;
    c.egr = 0.25;
    c.phi = 0.7;
    c.ivc = make_ivc_state(3.6, 393.0, geom);
    c.x_r = 0.04;
    c.soi = 0.0;
    return c;
}
}  // namespace

TEST_CASE("Arrhenius kernel") {
    CHECK(arrhenius_tau(0.7, 56, 494, 0.25, params) == Approx(706.372877130791).epsilon(1e-12));
    const double t0 = arrhenius_tau(0.6, 40, 450, 0.0, params);
    CHECK(t0 == Approx(std::pow(0.6, params.c3) * std::exp(-params.c4 * std::pow(40.0, params.c5) / 450) /
                       params.c2)
                    .epsilon(1e-14));
    ModelParams doubled = params;
    doubled.c1 *= 2;
    doubled.c2 *= 2;
    CHECK(arrhenius_tau(0.7, 56, 494, 0.25, doubled) ==
          Approx(arrhenius_tau(0.7, 56, 494, 0.25, params) / 2).epsilon(1e-14));
    CHECK_THROWS_AS(arrhenius_tau(0.7, 0, 494, 0.25, params), DomainError);
    CHECK_THROWS_AS(arrhenius_tau(0.7, 56, -1, 0.25, params), DomainError);
}

TEST_CASE("simplified SOC") {
    OperatingCondition c;
    c.n = 1200;
    c.egr = 0.25;
    c.phi = 0.7;
    c.soi = 0.0;
    const double d = ignition_delay(c, 56, 494, params);
    CHECK(d == Approx(1.698819474601386).epsilon(1e-12));
    CHECK(soc_simplified(c, 56, 494, params) == Approx(d).epsilon(1e-14));
    c.soi = -3.0;
    CHECK(soc_simplified(c, 56, 494, params) == Approx(-3.0 + d).epsilon(1e-12));

    c.n = 2400;
    CHECK(ignition_delay(c, 56, 494, params) == Approx(2 * d).epsilon(1e-14));
    c.n = 1200;

    // Affine in EGR.
    const double d0 = (c.egr = 0.0, ignition_delay(c, 56, 494, params));
    const double d1 = (c.egr = 0.1, ignition_delay(c, 56, 494, params));
    const double d2 = (c.egr = 0.2, ignition_delay(c, 56, 494, params));
    CHECK(d2 - d1 == Approx(d1 - d0).epsilon(1e-12));
    const double slope = params.c1 * 1200 * std::pow(0.7, -params.c3) *
                         std::exp(params.c4 * std::pow(56.0, params.c5) / 494);
    CHECK((d1 - d0) / 0.1 == Approx(slope).epsilon(1e-10));
}

TEST_CASE("full knock integral") {
    SUBCASE("Table-4 midpoint against a fine-step oracle") {
        const OperatingCondition c = midpoint();
        CHECK(soc_full_integral(c, params, geom, 0.1) == Approx(0.22697646981196504).epsilon(1e-10));
        CHECK(soc_full_integral(c, params, geom, 0.01) == Approx(0.22697345312458028).epsilon(1e-6));
    }
    SUBCASE("constant integrand has the closed form") {
        OperatingCondition c = midpoint();
        for (double soi : {-5.0, 0.0, 3.3}) {
            c.soi = soi;
            const auto ps = polytropic_state(soi, c.ivc, params.k_c, geom);
            const double k = arrhenius_tau(c.phi, ps.pressure, ps.temperature, c.egr, params) / c.n;
            for (double step : {0.1, 0.01}) {
                CHECK(soc_full_integral(c, params, geom, step, IntegrandMode::frozen_at_soi) ==
                      Approx(soi + 1.0 / k).epsilon(1e-12));
            }
            CHECK(soc_full_integral(c, params, geom, 0.1, IntegrandMode::frozen_at_soi) ==
                  Approx(soc_simplified(c, ps.pressure, ps.temperature, params)).epsilon(1e-12));
        }
    }
    SUBCASE("misfire when the integral never reaches one") {
        OperatingCondition c = midpoint();
        c.ivc = make_ivc_state(1.0, 200.0, geom);
        c.soi = 20.0;
        CHECK_THROWS_AS(soc_full_integral(c, params, geom, 0.1), MisfireError);
    }
    SUBCASE("preconditions") {
        OperatingCondition c = midpoint();
        CHECK_THROWS_AS(soc_full_integral(c, params, geom, 0.0), DomainError);
        c.soi = -150.0;
        CHECK_THROWS_AS(soc_full_integral(c, params, geom, 0.1), DomainError);
    }
}

TEST_CASE("burn duration and Wiebe") {
    const WiebeParams w = WiebeParams::from_composite(5.0, 2.0, params.c9);
    CHECK(w.c6 == Approx(12.848825843969488).epsilon(1e-12));
    CHECK(w.composite() == Approx(params.c9).epsilon(1e-14));
    CHECK(burn_duration(0.0, 1.0, w, params) == Approx(w.c6).epsilon(1e-15));
    CHECK(burn_duration(0.2884, 0.7, w, params) == Approx(14.032542814923515).epsilon(1e-12));
    CHECK(burn_duration(0.3, 0.7, w, params) > burn_duration(0.2, 0.7, w, params));

    CHECK(wiebe_mfb(3.0, 3.0, 14.0, w) == 0.0);
    CHECK(wiebe_mfb(3.0 + w.half_burn_factor() * 14.0, 3.0, 14.0, w) == Approx(0.5).epsilon(1e-14));
    double last = 0.0;
    for (double th = 3.1; th < 200.0; th += 1.0) {  // saturates at 1 in double precision
        const double x = wiebe_mfb(th, 3.0, 14.0, w);
        CHECK(x >= last);
        CHECK(x < 1.0 + 1e-15);
        last = x;
    }
    CHECK(last == Approx(1.0).epsilon(1e-12));
    CHECK_THROWS_AS(wiebe_mfb(2.0, 3.0, 14.0, w), DomainError);
    CHECK_THROWS_AS(wiebe_mfb(4.0, 3.0, 0.0, w), DomainError);
    CHECK(wiebe_ca50(3.0, 14.0, w) == Approx(3.0 + w.half_burn_factor() * 14.0).epsilon(1e-14));
}

TEST_CASE("CA50 offset and predictor") {
    CHECK(ca50_offset(0.0, 1.0, params) == Approx(4.784).epsilon(1e-15));
    CHECK(ca50_offset(0.2884, 0.7, params) == Approx(5.2247330333379765).epsilon(1e-12));
    OperatingCondition c;
    c.n = 1200;
    c.egr = 0.25;
    c.phi = 0.7;
    c.x_r = 0.0384;
    c.soi = 0.0;
    CHECK(ca50_predict(c, 56, 494, params) == Approx(6.9235525079393625).epsilon(1e-12));

    // Only the composite enters: rescaling (a, b, c6) at fixed c9 leaves CA50 alone.
    for (auto [a, b] : {std::pair{5.0, 2.0}, {3.0, 1.5}, {6.9, 3.0}}) {
        const WiebeParams w = WiebeParams::from_composite(a, b, params.c9);
        const double bd = burn_duration(0.2884, 0.7, w, params);
        CHECK(wiebe_ca50(1.7, bd, w) - 1.7 == Approx(ca50_offset(0.2884, 0.7, params)).epsilon(1e-12));
    }

    const OperatingCondition m = midpoint();
    const SocCa50 r = predict_from_ivc(m, params, geom);
    CHECK(r.soc == Approx(0.22695971064185963).epsilon(1e-10));
    CHECK(r.ca50 == Approx(ca50_predict_from_ivc(m, params, geom)).epsilon(1e-15));
}

TEST_CASE("parameter validation") {
    CHECK(params.valid());
    ModelParams p = params;
    p.c2 = 0.0;
    CHECK_THROWS_AS(p.validate(), DomainError);
    p = params;
    p.k_c = 1.4;
    CHECK_FALSE(p.valid());
    p = params;
    p.c9 = -1;
    CHECK_FALSE(p.valid());
    p = params;
    p.c1 = -3e-6;  // c1*EGR + c2 vanishes inside [0, 1)
    CHECK_FALSE(p.valid());
}

TEST_CASE("parameter file round trip") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.9, 1.1);
    auto v = params.to_array();
    for (auto& x : v) x *= u(rng);
    const ModelParams p = ModelParams::from_array(v);
    std::stringstream ss;
    write_params(ss, p);
    CHECK(read_params(ss) == p);

    std::istringstream dup("c1=1e-6\nc1=2e-6\n");
    CHECK_THROWS_AS(read_params(dup), ParseError);
    std::istringstream unknown("# header\nc1=1e-6\nzz=3\n");
    try {
        read_params(unknown, "p.txt");
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 3);
        CHECK(std::string(e.what()).find("p.txt:3") != std::string::npos);
    }
    std::istringstream missing("c1=1e-6\n");
    CHECK_THROWS_AS(read_params(missing), ParseError);
    std::istringstream bad("c1=abc\n");
    CHECK_THROWS_AS(read_params(bad), ParseError);
}
