#include "oscflat/geometry.hpp"

#include <cmath>
#include <string>

#include "oscflat/units.hpp"

namespace oscflat::geom {

const char* model_name(Model m) {
    switch (m) {
        case Model::SingleAngle: return "single-angle";
        case Model::Bulb: return "bulb";
        case Model::ExtendedBulb: return "extended-bulb";
    }
    return "?";
}

double cos_theta_prime(double r_km, double cos2_theta0, double Rnu_km) {
    if (r_km < Rnu_km)
        throw NumericError("cos_theta_prime: r = " + std::to_string(r_km) +
                           " km below Rnu = " + std::to_string(Rnu_km) + " km");
    const double ra = Rnu_km / r_km;
    return std::sqrt(1.0 - ra * ra * (1.0 - cos2_theta0));
}

double geometric_factor_D(double r_km, double Rnu_km) {
    if (r_km < Rnu_km)
        throw NumericError("geometric_factor_D: r = " + std::to_string(r_km) +
                           " km below Rnu = " + std::to_string(Rnu_km) + " km");
    const double ra = Rnu_km / r_km;
    const double t = 1.0 - std::sqrt(1.0 - ra * ra);
    return 0.5 * t * t;
}

AngleGrid AngleGrid::make(Model model, int abins, int pbins, double Rnu_km) {
    if (model == Model::SingleAngle) {
        abins = 1;
        pbins = 1;
    }
    if (model == Model::Bulb) pbins = 1;
    if (abins < 1 || pbins < 1) throw ConfigError("AngleGrid: bins must be >= 1");

    AngleGrid g;
    g.model = model;
    g.abins = abins;
    g.pbins = pbins;
    g.Rnu = Rnu_km;
    g.cos2_theta0.resize(abins);
    g.sin_theta0.resize(abins);
    g.cos_phi.resize(pbins);
    g.sin_phi.resize(pbins);
    for (int t = 0; t < abins; ++t) {
        g.cos2_theta0[t] = (t + 0.5) / abins;
        g.sin_theta0[t] = std::sqrt(1.0 - g.cos2_theta0[t]);
    }
    const double dphi = 2.0 * units::kPi / pbins;
    for (int p = 0; p < pbins; ++p) {
        const double phi = (p + 0.5) * dphi;
        g.cos_phi[p] = std::cos(phi);
        g.sin_phi[p] = std::sin(phi);
    }
    return g;
}

void fill_cache(const AngleGrid& grid, RadiusCache& cache, double r_km,
                int t_lo, int t_hi) {
    cache.r = r_km;
    if (grid.model == Model::SingleAngle) {
        cache.cos_theta[0] = 1.0;
        cache.sin_theta[0] = 0.0;
        cache.w[0] = 1.0;
        return;
    }
    const double ra = grid.Rnu / r_km;
    if (r_km < grid.Rnu)
        throw NumericError("fill_cache: r below the neutrino sphere");
    const double dcos2 = 1.0 / grid.abins;
    // dphi/2pi measure so that phi-symmetric data reproduces the bulb sums
    const double phi_measure = (grid.model == Model::ExtendedBulb) ? 1.0 / grid.pbins : 1.0;
    for (int t = t_lo; t < t_hi; ++t) {
        const double ct = std::sqrt(1.0 - ra * ra * (1.0 - grid.cos2_theta0[t]));
        cache.cos_theta[t] = ct;
        cache.sin_theta[t] = ra * grid.sin_theta0[t];
        cache.w[t] = 0.5 * ra * ra * dcos2 / ct * phi_measure;
    }
}

void calc_delta_ls(RadiusCache& dst, const RadiusCache& s, const RadiusCache& e,
                   double dr_km, int t_lo, int t_hi) {
    if (s.cos_theta.size() == 1) {
        dst.dl[0] = dr_km / (0.5 * (s.cos_theta[0] + e.cos_theta[0]));
        return;
    }
    for (int t = t_lo; t < t_hi; ++t)
        dst.dl[t] = dr_km / (0.5 * (s.cos_theta[t] + e.cos_theta[t]));
}

void PartialSums::to_doubles(double* out) const {
    const ReductionRow* rows[4] = {&a, &b, &c, &d};
    for (int i = 0; i < 4; ++i) {
        out[i * 3 + 0] = rows[i]->d;
        out[i * 3 + 1] = rows[i]->o_re;
        out[i * 3 + 2] = rows[i]->o_im;
    }
}

PartialSums PartialSums::from_doubles(const double* in) {
    PartialSums s;
    ReductionRow* rows[4] = {&s.a, &s.b, &s.c, &s.d};
    for (int i = 0; i < 4; ++i) {
        rows[i]->d = in[i * 3 + 0];
        rows[i]->o_re = in[i * 3 + 1];
        rows[i]->o_im = in[i * 3 + 2];
    }
    return s;
}

ReductionRow combine_species(const std::array<ReductionRow, kSpeciesCount>& rows,
                             const Couplings& c) {
    ReductionRow out;
    for (int s = 0; s < kSpeciesCount; ++s) {
        const Species sp = static_cast<Species>(s);
        if (is_antiparticle(sp)) {
            const ReductionRow cj = rows[s].conj();
            out.d -= c[s] * cj.d;
            out.o_re -= c[s] * cj.o_re;
            out.o_im -= c[s] * cj.o_im;
        } else {
            out.d += c[s] * rows[s].d;
            out.o_re += c[s] * rows[s].o_re;
            out.o_im += c[s] * rows[s].o_im;
        }
    }
    return out;
}

void fold_rows(const AngleGrid& grid, const RadiusCache& cache,
               const Couplings& couplings,
               std::span<const ReductionRow> beam_rows,
               int t_lo, int t_hi, std::span<double> stage) {
    for (int t = t_lo; t < t_hi; ++t) {
        ReductionRow acc, acc_c, acc_s;
        for (int p = 0; p < grid.pbins; ++p) {
            const int j = grid.traj_index(t, p);
            std::array<ReductionRow, kSpeciesCount> rows;
            for (int s = 0; s < kSpeciesCount; ++s)
                rows[s] = beam_rows[j * kSpeciesCount + s];
            const ReductionRow R = combine_species(rows, couplings);
            acc += R;
            if (grid.model == Model::ExtendedBulb) {
                acc_c += R * grid.cos_phi[p];
                acc_s += R * grid.sin_phi[p];
            }
        }
        PartialSums rowset;
        switch (grid.model) {
            case Model::SingleAngle:
                rowset.a = acc;  // energy integral only; D applied at assembly
                break;
            case Model::Bulb:
                rowset.a = acc * cache.w[t];
                rowset.b = acc * (cache.w[t] * cache.cos_theta[t]);
                break;
            case Model::ExtendedBulb:
                rowset.a = acc * cache.w[t];
                rowset.b = acc * (cache.w[t] * cache.cos_theta[t]);
                rowset.c = acc_c * (cache.w[t] * cache.sin_theta[t]);
                rowset.d = acc_s * (cache.w[t] * cache.sin_theta[t]);
                break;
        }
        rowset.to_doubles(stage.data() + static_cast<std::size_t>(t) * PartialSums::kDoubles);
    }
}

PartialSums combine_stage(std::span<const double> stage, int abins) {
    PartialSums total;
    for (int t = 0; t < abins; ++t)
        total += PartialSums::from_doubles(stage.data() +
                                           static_cast<std::size_t>(t) * PartialSums::kDoubles);
    return total;
}

PartialSums partial_hvv(const AngleGrid& grid, const RadiusCache& cache,
                        const Couplings& couplings,
                        std::span<const ReductionRow> beam_rows) {
    std::vector<double> stage(static_cast<std::size_t>(grid.abins) * PartialSums::kDoubles);
    fold_rows(grid, cache, couplings, beam_rows, 0, grid.abins, stage);
    return combine_stage(stage, grid.abins);
}

Ham2 assemble_hvv(const AngleGrid& grid, const RadiusCache& cache,
                  const PartialSums& sums, int theta_idx, int phi_idx) {
    ReductionRow row;
    switch (grid.model) {
        case Model::SingleAngle: {
            const double D = geometric_factor_D(cache.r, grid.Rnu);
            row = sums.a * D;
            break;
        }
        case Model::Bulb: {
            const double ct = cache.cos_theta[theta_idx];
            row = sums.a + sums.b * (-ct);
            break;
        }
        case Model::ExtendedBulb: {
            const double ct = cache.cos_theta[theta_idx];
            const double st = cache.sin_theta[theta_idx];
            row = sums.a + sums.b * (-ct) +
                  sums.c * (-st * grid.cos_phi[phi_idx]) +
                  sums.d * (-st * grid.sin_phi[phi_idx]);
            break;
        }
    }
    return {0.5 * row.d, 0.5 * row.o_re, 0.5 * row.o_im};
}

VacuumTable VacuumTable::make(double E0_MeV, double E1_MeV, int ebins,
                              double dm2_eV2, double theta_mix) {
    VacuumTable v;
    v.ebins = ebins;
    v.padded = padded_len(ebins);
    v.h11.resize(v.padded);
    v.h12.resize(v.padded);
    const double dE = (E1_MeV - E0_MeV) / ebins;
    const double c2 = std::cos(2.0 * theta_mix);
    const double s2 = std::sin(2.0 * theta_mix);
    for (int e = 0; e < v.padded; ++e) {
        if (e < ebins) {
            const double E = E0_MeV + (e + 0.5) * dE;
            const double delta = units::vacuum_delta_per_km(dm2_eV2, E);
            v.h11[e] = -0.5 * delta * c2;
            v.h12[e] = 0.5 * delta * s2;
        } else {
            v.h11[e] = 0.0;
            v.h12[e] = 0.0;
        }
    }
    return v;
}

Ham2 full_bin_ham(const VacuumTable& vac, int e, const Ham2& hvv, double A_per_km,
                  Species s) {
    const Ham2 hb = flavor::beam_ham(hvv, 0.5 * A_per_km, is_antiparticle(s));
    return {vac.h11[e] + hb.h11, vac.h12[e] + hb.h12_re, hb.h12_im};
}

}  // namespace oscflat::geom
