#pragma once

#include <cmath>

namespace oscflat::units {

// Physical constants. Everything downstream works in MeV / km / s / cm^-3;
// Hamiltonian entries are carried in 1/km.

inline constexpr double kPi = 3.14159265358979323846;

/// Fermi coupling constant, 1.166e-5 GeV^-2 (PDG, truncated as quoted).
inline constexpr double kGF_MeV2 = 1.166e-5 * 1e-6;  // MeV^-2

/// hbar*c = 197.327 MeV fm.
inline constexpr double kHbarC_MeV_cm = 197.327e-13;  // MeV cm (1 fm = 1e-13 cm)
inline constexpr double kHbarC_MeV_km = 197.327e-18;  // MeV km (1 fm = 1e-18 km)

/// hbar = 6.582119569e-22 MeV s.
inline constexpr double kHbar_MeV_s = 6.582119569e-22;

/// 1 MeV = 1.602176634e-6 erg (exact).
inline constexpr double kErgPerMeV = 1.602176634e-6;

/// Documentation constants for the power-law density derivation:
/// Planck mass 1.221e22 MeV, nucleon mass 939.57 MeV, solar mass 1.989e33 g.
inline constexpr double kPlanckMass_MeV = 1.221e22;
inline constexpr double kNucleonMass_MeV = 939.57;
inline constexpr double kSolarMass_g = 1.989e33;

inline constexpr double kKmPerCm = 1e-5;
inline constexpr double kCmPerKm = 1e5;

/// MeV -> 1/km (divide an energy by hbar*c).
inline constexpr double per_km_from_MeV(double e_MeV) { return e_MeV / kHbarC_MeV_km; }

/// Matter potential sqrt(2) G_F n_e in 1/km, n_e in cm^-3.
inline double matter_A_per_km(double ne_cm3) {
    const double hc3 = kHbarC_MeV_cm * kHbarC_MeV_cm * kHbarC_MeV_cm;  // MeV^3 cm^3
    const double a_MeV = std::sqrt(2.0) * kGF_MeV2 * ne_cm3 * hc3;
    return per_km_from_MeV(a_MeV);
}

/// Vacuum oscillation frequency delta = dm^2/(2E) in 1/km,
/// dm2 in eV^2, E in MeV.
inline double vacuum_delta_per_km(double dm2_eV2, double E_MeV) {
    const double dm2_MeV2 = dm2_eV2 * 1e-12;
    return per_km_from_MeV(dm2_MeV2 / (2.0 * E_MeV));
}

/// Per-species neutrino-neutrino coupling weight in 1/km:
///   sqrt(2) G_F / (2 pi R^2) * L/<E>
/// with L in erg/s, <E> in MeV, R in km. The number flux L/<E> converts via
/// hbar, the 1/area via (hbar c)^2, and the result drops to 1/km via hbar c.
inline double hvv_coupling_per_km(double L_erg_s, double Emean_MeV, double Rnu_km) {
    const double flux_per_s = (L_erg_s / kErgPerMeV) / Emean_MeV;  // 1/s
    const double R_cm = Rnu_km * kCmPerKm;
    const double a_MeV = std::sqrt(2.0) * kGF_MeV2 * flux_per_s * kHbar_MeV_s *
                         kHbarC_MeV_cm * kHbarC_MeV_cm / (2.0 * kPi * R_cm * R_cm);
    return per_km_from_MeV(a_MeV);
}

}  // namespace oscflat::units
