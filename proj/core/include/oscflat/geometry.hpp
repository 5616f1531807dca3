#pragma once

#include <array>
#include <span>

#include "oscflat/beam.hpp"
#include "oscflat/types.hpp"

namespace oscflat::geom {

enum class Model { SingleAngle, Bulb, ExtendedBulb };

const char* model_name(Model m);

/// cos(theta') at radius r for a trajectory emitted with cos^2(theta0)
/// at the neutrino sphere.
double cos_theta_prime(double r_km, double cos2_theta0, double Rnu_km);

/// Single-angle geometric factor D(r/Rnu) = 1/2 [1 - sqrt(1 - (Rnu/r)^2)]^2.
double geometric_factor_D(double r_km, double Rnu_km);

/// Uniform emission-angle grid: bin centers in cos^2(theta0) on [0,1] and in
/// phi on [0,2pi). SingleAngle pins abins = pbins = 1, Bulb pins pbins = 1.
struct AngleGrid {
    Model model = Model::Bulb;
    int abins = 1;
    int pbins = 1;
    double Rnu = 10.0;
    AlignedVector<double> cos2_theta0;
    AlignedVector<double> sin_theta0;
    AlignedVector<double> cos_phi;
    AlignedVector<double> sin_phi;

    static AngleGrid make(Model model, int abins, int pbins, double Rnu_km);

    int trajectories() const { return abins * pbins; }
    int traj_index(int t, int p) const { return t * pbins + p; }
};

/// Per-evaluation-point angle cache: cos(theta'), sin(theta'), the measure
/// weight per theta bin, and the step path length dl. Written for one radius,
/// then read-only.
struct RadiusCache {
    double r = 0.0;
    AlignedVector<double> cos_theta;
    AlignedVector<double> sin_theta;
    AlignedVector<double> w;
    AlignedVector<double> dl;

    void resize(int abins) {
        cos_theta.resize(abins);
        sin_theta.resize(abins);
        w.resize(abins);
        dl.resize(abins);
    }
};

/// Fill the cache slice [t_lo, t_hi) for radius r.
/// Bulb weight: 1/2 (Rnu/r)^2 dcos^2(theta0) / cos(theta');
/// ExtendedBulb folds the dphi/2pi measure in as well; SingleAngle uses
/// radial trajectories (cos = 1, w = 1).
void fill_cache(const AngleGrid& grid, RadiusCache& cache, double r_km,
                int t_lo, int t_hi);

/// dl[t] = dr / (0.5 (cos_s[t] + cos_e[t])) for t in [t_lo, t_hi), stored in
/// `dst`: the path length for a step of dr whose endpoints carry the two
/// cosine caches.
void calc_delta_ls(RadiusCache& dst, const RadiusCache& s, const RadiusCache& e,
                   double dr_km, int t_lo, int t_hi);

/// Model-dependent set of energy-integrated rows; the entire value exchanged
/// between workers for one Hamiltonian evaluation (at most 12 reals).
struct PartialSums {
    ReductionRow a, b, c, d;

    PartialSums& operator+=(const PartialSums& o) {
        a += o.a;
        b += o.b;
        c += o.c;
        d += o.d;
        return *this;
    }
    friend PartialSums operator+(PartialSums x, const PartialSums& y) { return x += y; }

    static constexpr int kDoubles = 12;
    void to_doubles(double* out) const;
    static PartialSums from_doubles(const double* in);
};

/// Per-species coupling weights (1/km) in species order.
using Couplings = std::array<double, kSpeciesCount>;

/// Flavor-summed, antineutrino-conjugated integrand for one trajectory:
/// sum_s [ c(nu) rows[nu] - c(nubar) conj(rows[nubar]) ].
ReductionRow combine_species(const std::array<ReductionRow, kSpeciesCount>& rows,
                             const Couplings& c);

/// Accumulate the staged per-theta rows for theta in [t_lo, t_hi) into
/// `stage` (12 doubles per theta bin, row order a,b,c,d). `beam_rows` holds
/// one unweighted e_sum row per (trajectory x species), indexed
/// (t*pbins + p)*4 + s.
void fold_rows(const AngleGrid& grid, const RadiusCache& cache,
               const Couplings& couplings,
               std::span<const ReductionRow> beam_rows,
               int t_lo, int t_hi, std::span<double> stage);

/// Combine staged rows over all theta bins in fixed ascending order.
PartialSums combine_stage(std::span<const double> stage, int abins);

/// Single-worker convenience: fold + combine over every trajectory.
PartialSums partial_hvv(const AngleGrid& grid, const RadiusCache& cache,
                        const Couplings& couplings,
                        std::span<const ReductionRow> beam_rows);

/// Final per-beam neutrino-neutrino Hamiltonian from the globally reduced
/// sums. The 1/2 of the Hamiltonian convention is applied here.
Ham2 assemble_hvv(const AngleGrid& grid, const RadiusCache& cache,
                  const PartialSums& sums, int theta_idx, int phi_idx);

/// Per-bin vacuum Hamiltonian table: h11 = -delta/2 cos(2 theta_mix),
/// h12 = +delta/2 sin(2 theta_mix) with delta = dm^2/(2E), in 1/km.
struct VacuumTable {
    int ebins = 0;
    int padded = 0;
    AlignedVector<double> h11;
    AlignedVector<double> h12;

    static VacuumTable make(double E0_MeV, double E1_MeV, int ebins,
                            double dm2_eV2, double theta_mix);

    flavor::VacuumView view() const { return {h11.data(), h12.data()}; }
};

/// Full per-bin Hamiltonian for one species: vacuum + signed matter + hvv.
Ham2 full_bin_ham(const VacuumTable& vac, int e, const Ham2& hvv, double A_per_km,
                  Species s);

}  // namespace oscflat::geom
