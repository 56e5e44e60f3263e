#include <doctest.h>

#include <cmath>
#include <sstream>

#include "cphase/errors.hpp"
#include "cphase/studies.hpp"

using namespace cphase;
using doctest::Approx;

namespace {
const EngineGeometry geom;
}

TEST_CASE("Halton radical inverse") {
    CHECK(halton(1, 2) == 0.5);
    CHECK(halton(2, 2) == 0.25);
    CHECK(halton(3, 2) == 0.75);
    CHECK(halton(1, 3) == Approx(1.0 / 3));
    CHECK(halton(5, 3) == Approx(7.0 / 9));
    CHECK(halton(0, 7) == 0.0);
}

TEST_CASE("lattice covers the box") {
    const GridSpec g;
    const auto pts = lattice(g, geom);
    REQUIRE(pts.size() == 516);
    double nmin = 1e9, nmax = 0, tmin = 1e9, tmax = 0;
    for (const auto& c : pts) {
        nmin = std::min(nmin, c.n);
        nmax = std::max(nmax, c.n);
        tmin = std::min(tmin, c.ivc.t_ivc);
        tmax = std::max(tmax, c.ivc.t_ivc);
        CHECK(c.soi >= -5.0);
        CHECK(c.soi <= 5.0);
        CHECK(c.egr >= 0.0);
        CHECK(c.egr <= 0.5);
        CHECK(c.ivc.v_ivc == Approx(cylinder_volume(-148.5, geom)));
    }
    CHECK(nmin < 1205);
    CHECK(nmax > 1495);
    CHECK(tmin < 373.5);
    CHECK(tmax > 413);

    GridSpec bad;
    bad.points = 0;
    CHECK_THROWS_AS(lattice(bad, geom), DomainError);
    bad = GridSpec{};
    bad.egr = {0.5, 0.1};
    CHECK_THROWS_AS(bad.validate(), DomainError);
}

TEST_CASE("dataset generation") {
    GridSpec g;
    g.points = 50;
    GenerateOptions o;
    const GeneratedData a = generate_dataset(g, ModelParams{}, geom, o);
    CHECK(a.data.size() + a.misfires == 50);
    for (const auto& s : a.data) {
        const double soc = soc_full_integral(s.cond, ModelParams{}, geom, 0.1);
        CHECK(*s.observed_soc == soc);
        CHECK(s.observed_ca50 == Approx(soc + ca50_offset(s.cond.egr + s.cond.x_r, s.cond.phi, ModelParams{})).epsilon(1e-12));
    }
    o.ca50_noise = 0.3;
    o.seed = 5;
    const GeneratedData b = generate_dataset(g, ModelParams{}, geom, o);
    const GeneratedData c = generate_dataset(g, ModelParams{}, geom, o);
    std::ostringstream sb, sc;
    write_dataset(sb, b.data);
    write_dataset(sc, c.data);
    CHECK(sb.str() == sc.str());
    CHECK(b.data[0].observed_ca50 != a.data[0].observed_ca50);
    CHECK(*b.data[0].observed_soc == *a.data[0].observed_soc);
    CHECK(truth_model_from_string("simplified") == TruthModel::simplified);
    CHECK_THROWS_AS(truth_model_from_string("gt"), DomainError);
}

TEST_CASE("SOC comparison") {
    SUBCASE("single point reduces to the closed form") {
        OperatingCondition c;
        c.n = 1200;
        c.egr = 0.25;
        c.phi = 0.7;
        c.ivc = make_ivc_state(2.0, 300.0, geom);
        c.x_r = 0.0384;
        c.soi = 0.0;
        const SocComparison r = compare_soc({c}, ModelParams{}, geom, 0.01);
        REQUIRE(r.rows.size() == 1);
        const auto tdc = polytropic_state(0.0, c.ivc, ModelParams{}.k_c, geom);
        CHECK(r.rows[0].soc_simplified == Approx(soc_simplified(c, tdc.pressure, tdc.temperature, ModelParams{})));
        CHECK(r.soc.max_abs == Approx(std::abs(r.rows[0].soc_simplified - r.rows[0].soc_full)));
    }
    SUBCASE("frozen integrand agrees within one step") {
        const auto pts = lattice(GridSpec{}, geom);
        const SocComparison r = compare_soc(pts, ModelParams{}, geom, 0.1, IntegrandMode::frozen_at_soi);
        CHECK(r.rows.size() == 516);
        CHECK(r.soc.max_abs <= 0.1);
        CHECK(r.exceed_1cad == 0);
    }
    SUBCASE("output table") {
        GridSpec g;
        g.points = 3;
        std::ostringstream out;
        write_soc_comparison(out, compare_soc(lattice(g, geom), ModelParams{}, geom, 0.1));
        CHECK(out.str().rfind("N,EGR,phi,P_IVC,T_IVC,X_r,SOI,SOC_full", 0) == 0);
        CHECK(out.str().find("# exceed_1cad=0") != std::string::npos);
    }
}

TEST_CASE("sensitivity rows") {
    GridSpec g = GridSpec::experimental();
    g.points = 60;
    const Dataset d = generate_dataset(g, ModelParams{}, geom).data;
    const auto rows = sensitivity(d, ModelParams{}, geom);
    REQUIRE(rows.size() == 11);
    CHECK(rows[0].channel == InputChannel::none);
    const ErrorStats base = error_stats(ca50_errors(d, ModelParams{}, geom));
    CHECK(rows[0].stats.std_dev == base.std_dev);
    CHECK(rows[0].stats.max_abs == base.max_abs);

    // Positive T error shortens the predicted delay, so CA50 moves earlier.
    CHECK(rows[3].channel == InputChannel::t_ivc);
    CHECK(rows[3].stats.mean < rows[0].stats.mean);
    CHECK(rows[4].stats.mean > rows[0].stats.mean);
    // More dilution lengthens delay and burn.
    CHECK(rows[5].stats.mean > rows[0].stats.mean);

    OperatingCondition c = d[0].cond;
    c.egr = 0.02;
    CHECK(perturb(c, InputChannel::egr, -0.05, geom).egr == 0.0);
    CHECK(perturb(c, InputChannel::x_r, -1.0, geom).x_r == 0.0);
    CHECK(perturb(c, InputChannel::t_ivc, 5.0, geom).ivc.t_ivc == c.ivc.t_ivc + 5.0);
    CHECK_THROWS_AS(sensitivity(Dataset{}, ModelParams{}, geom), DomainError);

    std::ostringstream out;
    write_sensitivity(out, rows);
    CHECK(out.str().rfind("source,delta,std,max_abs,mean\nnone,0,", 0) == 0);
}
