#include "oscflat/matter.hpp"

#include <cmath>
#include <string>

#include "oscflat/units.hpp"

namespace oscflat::matter {

namespace {

double power_law(double r_km, const MatterParams& p) {
    const double m = p.Mns / 1.4;
    const double s = 100.0 / p.S;
    const double x = 10.0 / r_km;
    return 4.2e30 * p.gs * m * m * m * s * s * s * s * x * x * x;
}

double exponential(double r_km, const MatterParams& p) {
    return p.nb0 * std::exp(-(r_km - p.Rnu) / p.hNS);
}

}  // namespace

double baryon_density(double r_km, const MatterParams& p) {
    if (r_km < p.Rnu)
        throw NumericError("baryon_density: r = " + std::to_string(r_km) +
                           " km is below the neutrino sphere Rnu = " +
                           std::to_string(p.Rnu) + " km");
    switch (p.profile) {
        case Profile::PowerLaw: return power_law(r_km, p);
        case Profile::Exponential: return exponential(r_km, p);
        case Profile::Sum: return power_law(r_km, p) + exponential(r_km, p);
        case Profile::Off: return 0.0;
    }
    return 0.0;
}

double matter_potential(double r_km, const MatterParams& p) {
    if (p.profile == Profile::Off) return 0.0;
    return units::matter_A_per_km(p.Ye * baryon_density(r_km, p));
}

}  // namespace oscflat::matter
