#include <doctest.h>

#include <cmath>

#include "oscflat/matter.hpp"
#include "oscflat/units.hpp"

using namespace oscflat;
using matter::MatterParams;
using matter::Profile;

namespace {

MatterParams base_params() {
    MatterParams p;
    p.Ye = 0.4;
    p.nb0 = 1.63e36;
    p.Rnu = 10.0;
    p.hNS = 0.9;
    p.Mns = 1.4;
    p.gs = 1.0;
    p.S = 100.0;
    p.profile = Profile::Sum;
    return p;
}

}  // namespace

TEST_CASE("power-law density anchors at 4.2e30 cm^-3") {
    auto p = base_params();
    p.profile = Profile::PowerLaw;
    CHECK(matter::baryon_density(10.0, p) == doctest::Approx(4.2e30).epsilon(1e-12));
    // scaling in each factor
    p.gs = 2.0;
    CHECK(matter::baryon_density(10.0, p) == doctest::Approx(8.4e30).epsilon(1e-12));
    p.gs = 1.0;
    p.S = 50.0;
    CHECK(matter::baryon_density(10.0, p) == doctest::Approx(4.2e30 * 16.0).epsilon(1e-12));
}

TEST_CASE("exponential density: surface value and half-life") {
    auto p = base_params();
    p.profile = Profile::Exponential;
    CHECK(matter::baryon_density(p.Rnu, p) == doctest::Approx(1.63e36).epsilon(1e-12));
    const double r_half = p.Rnu + p.hNS * std::log(2.0);
    CHECK(matter::baryon_density(r_half, p) == doctest::Approx(0.5 * 1.63e36).epsilon(1e-12));
}

TEST_CASE("sum profile dominates both constituents; Off gives zero") {
    auto p = base_params();
    for (const double r : {10.0, 15.0, 40.0, 200.0}) {
        p.profile = Profile::Sum;
        const double s = matter::baryon_density(r, p);
        p.profile = Profile::PowerLaw;
        CHECK(s >= matter::baryon_density(r, p));
        p.profile = Profile::Exponential;
        CHECK(s >= matter::baryon_density(r, p));
    }
    p.profile = Profile::Off;
    CHECK(matter::matter_potential(50.0, p) == 0.0);
}

TEST_CASE("density is monotonically nonincreasing in r") {
    auto p = base_params();
    for (const auto prof : {Profile::PowerLaw, Profile::Exponential, Profile::Sum}) {
        p.profile = prof;
        double prev = matter::baryon_density(10.0, p);
        for (double r = 11.0; r < 250.0; r *= 1.3) {
            const double cur = matter::baryon_density(r, p);
            CHECK(cur <= prev);
            prev = cur;
        }
    }
}

TEST_CASE("matter potential: zero Ye, linear in Ye") {
    auto p = base_params();
    p.Ye = 0.0;
    CHECK(matter::matter_potential(12.0, p) == 0.0);
    p.Ye = 0.2;
    const double a1 = matter::matter_potential(12.0, p);
    p.Ye = 0.4;
    CHECK(matter::matter_potential(12.0, p) == doctest::Approx(2.0 * a1).epsilon(1e-14));
}

TEST_CASE("unit conversion oracle: sqrt(2) G_F n_e via an independent route") {
    // Route: everything in fm. G_F (hbar c)^2 = 1.166e-5 GeV^-2 * (0.197327 GeV fm)^2,
    // n_e: cm^-3 -> fm^-3, result fm^-1 -> km^-1.
    const double ne_cm3 = 1e30;
    const double gf_fm2 = 1.166e-5 * 0.197327 * 0.197327;  // fm^2
    const double ne_fm3 = ne_cm3 * 1e-39;
    const double a_per_fm = std::sqrt(2.0) * gf_fm2 * ne_fm3;
    const double a_per_km = a_per_fm * 1e18;

    CHECK(units::matter_A_per_km(ne_cm3) == doctest::Approx(a_per_km).epsilon(1e-10));
}

TEST_CASE("hvv coupling oracle: sqrt(2) G_F/(2 pi R^2) L/<E> via fm units") {
    const double L = 1e51, Em = 11.0, R_km = 10.0;
    const double erg_per_GeV = 1.602176634e-3;
    const double flux_per_s = (L / erg_per_GeV) / (Em * 1e-3);  // 1/s
    const double c_fm_per_s = 2.99792458e23;
    const double flux_per_fm = flux_per_s / c_fm_per_s;
    const double gf_fm2 = 1.166e-5 * 0.197327 * 0.197327;
    const double R_fm = R_km * 1e18;
    const double mu_per_fm =
        std::sqrt(2.0) * gf_fm2 * flux_per_fm / (2.0 * units::kPi * R_fm * R_fm);
    const double mu_per_km = mu_per_fm * 1e18;

    CHECK(units::hvv_coupling_per_km(L, Em, R_km) ==
          doctest::Approx(mu_per_km).epsilon(1e-6));
}

TEST_CASE("radius below the neutrino sphere is a domain error") {
    auto p = base_params();
    CHECK_THROWS_AS(matter::baryon_density(9.0, p), NumericError);
    CHECK_THROWS_AS(matter::matter_potential(9.0, p), NumericError);
}
