#pragma once

#include <array>
#include <cmath>
#include <span>

#include "oscflat/types.hpp"

namespace oscflat {

/// First row (d, o_re + i*o_im) of a traceless Hermitian 2x2; the second row
/// is determined as (o_re - i*o_im, -d). This is both the density-matrix row
/// and the unit exchanged at the reduction points.
struct ReductionRow {
    double d = 0.0;
    double o_re = 0.0;
    double o_im = 0.0;

    ReductionRow& operator+=(const ReductionRow& o) {
        d += o.d;
        o_re += o.o_re;
        o_im += o.o_im;
        return *this;
    }
    friend ReductionRow operator+(ReductionRow a, const ReductionRow& b) { return a += b; }
    friend ReductionRow operator*(const ReductionRow& a, double s) {
        return {a.d * s, a.o_re * s, a.o_im * s};
    }
    /// Complex conjugate of the represented matrix row (negates o_im).
    ReductionRow conj() const { return {d, o_re, -o_im}; }
};

/// Traceless Hermitian 2x2 Hamiltonian H = [[h11, h12], [h12*, -h11]], 1/km.
struct Ham2 {
    double h11 = 0.0;
    double h12_re = 0.0;
    double h12_im = 0.0;

    double lambda() const {
        return std::sqrt(h11 * h11 + h12_re * h12_re + h12_im * h12_im);
    }
    Ham2& operator+=(const Ham2& o) {
        h11 += o.h11;
        h12_re += o.h12_re;
        h12_im += o.h12_im;
        return *this;
    }
    friend Ham2 operator+(Ham2 a, const Ham2& b) { return a += b; }
};

/// SoA wavefunction storage for one trajectory x one species: four aligned
/// component arrays over energy bins, padded to the SIMD width. Padding bins
/// hold the pure e-flavor state and never carry spectral weight.
class BeamState {
public:
    BeamState(Species s, int ebins)
        : species_(s), ebins_(ebins), padded_(padded_len(ebins)) {
        if (ebins < 1) throw ConfigError("BeamState: ebins must be >= 1");
        ar_.resize(padded_);
        ai_.resize(padded_);
        br_.resize(padded_);
        bi_.resize(padded_);
    }

    Species species() const { return species_; }
    int ebins() const { return ebins_; }
    int padded() const { return padded_; }

    double* ar() { return ar_.data(); }
    double* ai() { return ai_.data(); }
    double* br() { return br_.data(); }
    double* bi() { return bi_.data(); }
    const double* ar() const { return ar_.data(); }
    const double* ai() const { return ai_.data(); }
    const double* br() const { return br_.data(); }
    const double* bi() const { return bi_.data(); }

    /// Flavor-eigenstate emission: psi = (1,0,0,0) for the e species,
    /// (0,0,1,0) for the x species. Also used for the padding bins.
    void init_flavor_state();

    /// Deterministic per-bin perturbation of magnitude eps (0 disables),
    /// seeded from (seed, bin) so results do not depend on partitioning.
    void init_flavor_state(double eps, std::uint64_t seed);

private:
    Species species_;
    int ebins_;
    int padded_;
    AlignedVector<double> ar_, ai_, br_, bi_;
};

namespace flavor {

/// Density-matrix first row for one bin: (|a|^2-|b|^2, 2Re(ab*), 2Im(ab*)).
inline ReductionRow density(double ar, double ai, double br, double bi) {
    return {ar * ar + ai * ai - br * br - bi * bi,
            2.0 * (ar * br + ai * bi),
            2.0 * (ai * br - ar * bi)};
}

/// One-bin unitary evolution psi' = exp(-i H dl) psi.
/// sin(lambda dl)/lambda is evaluated as dl in the lambda*dl -> 0 limit, so
/// lambda = 0 reduces to the identity.
inline void evolve_bin(double h11, double h12_re, double h12_im, double dl,
                       double ar, double ai, double br, double bi,
                       double& n_ar, double& n_ai, double& n_br, double& n_bi) {
    const double lam = std::sqrt(h11 * h11 + h12_re * h12_re + h12_im * h12_im);
    const double ldl = lam * dl;
    const double c = std::cos(ldl);
    const double s = (ldl < 1e-12) ? dl : std::sin(ldl) / lam;

    const double h11s = h11 * s;
    const double hres = h12_re * s;
    const double hims = h12_im * s;

    n_ar = c * ar + h11s * ai + hims * br + hres * bi;
    n_ai = c * ai - h11s * ar + hims * bi - hres * br;
    n_br = c * br - h11s * bi - hims * ar + hres * ai;
    n_bi = c * bi + h11s * br - hims * ai - hres * ar;
}

inline std::array<double, 4> evolve_bin(const Ham2& h, double dl,
                                        const std::array<double, 4>& psi) {
    std::array<double, 4> out;
    evolve_bin(h.h11, h.h12_re, h.h12_im, dl, psi[0], psi[1], psi[2], psi[3],
               out[0], out[1], out[2], out[3]);
    return out;
}

/// Beam-level Hamiltonian for one species: the assembled neutrino-neutrino
/// row plus half the matter potential, with the antiparticle transformation
/// A -> -A, B -> -B, B_etau -> -B_etau* applied when required.
inline Ham2 beam_ham(const Ham2& hvv, double half_A, bool antiparticle) {
    if (antiparticle)
        return {-(hvv.h11 + half_A), -hvv.h12_re, hvv.h12_im};
    return {hvv.h11 + half_A, hvv.h12_re, hvv.h12_im};
}

/// Per-bin vacuum Hamiltonian entries; h12 is real by convention.
struct VacuumView {
    const double* h11 = nullptr;
    const double* h12 = nullptr;
};

// Beam-level kernels. `vac` supplies the per-bin vacuum part, `hb` the
// bin-independent beam part (matter + hvv, species sign already applied),
// `fw` the spectral weights f*dE (zero on padding bins).

void evolve(const VacuumView& vac, const Ham2& hb, double dl,
            const BeamState& in, BeamState& out);

/// Spectrum-weighted density sum over energy bins (fixed low-to-high order).
ReductionRow e_sum(const BeamState& beam, std::span<const double> fw);

/// dst <- (dst + src)/2, bin-wise over every component.
void add_avg(BeamState& dst, const BeamState& src);

/// Max over logical bins and components of |a - b|.
double calc_err(const BeamState& a, const BeamState& b);

void copy_state(BeamState& dst, const BeamState& src);

/// Max over logical bins of |(ar^2+ai^2+br^2+bi^2) - 1|.
double norm_deviation(const BeamState& beam);

// Fused single-pass variants; results match the unfused compositions.

ReductionRow evolve_sum(const VacuumView& vac, const Ham2& hb, double dl,
                        const BeamState& in, BeamState& out,
                        std::span<const double> fw);

/// out <- evolved(in); avg_with <- (avg_with + out)/2.
void evolve_avg(const VacuumView& vac, const Ham2& hb, double dl,
                const BeamState& in, BeamState& out, BeamState& avg_with);

/// As evolve_avg, then returns calc_err(err_against, updated avg_with).
double evolve_avg_err(const VacuumView& vac, const Ham2& hb, double dl,
                      const BeamState& in, BeamState& out, BeamState& avg_with,
                      const BeamState& err_against);

}  // namespace flavor
}  // namespace oscflat
