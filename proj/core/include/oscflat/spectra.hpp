#pragma once

#include <span>

#include "oscflat/types.hpp"

namespace oscflat::spectra {

/// Complete Fermi-Dirac integral F_k(eta) = int_0^inf x^k/(exp(x-eta)+1) dx,
/// relative error <= 1e-8. Throws NumericError if the quadrature fails to
/// converge.
double fermi_integral(int k, double eta);

/// T = <E> * F_2(eta)/F_3(eta); inverse of the Fermi-Dirac mean energy.
double temperature_from_mean_energy(double Emean_MeV, double eta);

/// <E> = T * F_3(eta)/F_2(eta).
double mean_energy_from_temperature(double T_MeV, double eta);

struct SpectrumParams {
    double T = -1.0;      // MeV; derived from Emean when negative
    double Emean = -1.0;  // MeV; derived from T when negative
    double eta = 0.0;
    double L = 0.0;  // erg/s
};

/// Per-species Fermi-Dirac spectrum sampled at bin centers. f is normalized
/// analytically (integral over [0,inf) is one); the residual weight outside
/// the truncated grid is recorded, not hidden, in norm_deficit.
class SpectrumTable {
public:
    SpectrumTable(const SpectrumParams& p, double E0, double E1, int ebins,
                  double coupling_per_km = 0.0);

    double E0() const { return E0_; }
    double E1() const { return E1_; }
    int ebins() const { return ebins_; }
    int padded() const { return padded_; }
    double dE() const { return dE_; }
    double T() const { return T_; }
    double eta() const { return eta_; }
    double Emean() const { return Emean_; }

    /// Spectral density at bin center e, 1/MeV.
    double f(int e) const { return f_[e]; }
    std::span<const double> f_values() const { return {f_.data(), static_cast<std::size_t>(ebins_)}; }

    /// Weights f*dE, padded with zeros; the quantity used by energy sums.
    std::span<const double> weights() const { return {fdE_.data(), fdE_.size()}; }

    /// Number-flux coupling weight, already converted to 1/km.
    double coupling() const { return coupling_; }

    /// 1 - sum(f*dE): spectral weight lost to grid truncation.
    double norm_deficit() const { return deficit_; }

    /// Grid mean energy sum(E f dE)/sum(f dE).
    double grid_mean_energy() const;

    double bin_center(int e) const { return E0_ + (e + 0.5) * dE_; }

private:
    double E0_, E1_, dE_;
    int ebins_, padded_;
    double T_, eta_, Emean_;
    double coupling_;
    double deficit_;
    AlignedVector<double> f_;
    AlignedVector<double> fdE_;
};

}  // namespace oscflat::spectra
