#pragma once

#include "oscflat/types.hpp"

namespace oscflat::matter {

enum class Profile { PowerLaw, Exponential, Sum, Off };

struct MatterParams {
    double Ye = 0.0;    // electron fraction
    double nb0 = 0.0;   // surface baryon density, 1/cm^3
    double Rnu = 10.0;  // neutrino-sphere radius, km
    double hNS = 1.0;   // scale height, km
    double Mns = 1.4;   // neutron-star mass, solar masses
    double gs = 1.0;    // statistical weight
    double S = 100.0;   // entropy per baryon
    Profile profile = Profile::Off;
};

/// Baryon density in 1/cm^3 at radius r (km). PowerLaw is the anchored
/// 4.2e30 cm^-3 * gs * (Mns/1.4)^3 * (100/S)^4 * (10 km/r)^3 form,
/// Exponential is nb0 * exp(-(r - Rnu)/hNS), Sum is their sum.
double baryon_density(double r_km, const MatterParams& p);

/// A = sqrt(2) G_F Ye n_b(r) in 1/km. The antineutrino sign (A -> -A) is
/// applied by the Hamiltonian assembler, not here.
double matter_potential(double r_km, const MatterParams& p);

}  // namespace oscflat::matter
