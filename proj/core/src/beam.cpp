#include "oscflat/beam.hpp"

#include <cmath>
#include <cstring>

namespace oscflat {

namespace {

/// splitmix64; gives partition-independent per-bin noise.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline double unit_noise(std::uint64_t seed, std::uint64_t bin, std::uint64_t comp) {
    const std::uint64_t h = mix64(seed ^ mix64(bin * 4 + comp));
    return (static_cast<double>(h >> 11) * 0x1.0p-53) - 0.5;  // [-0.5, 0.5)
}

inline void check_shape(const BeamState& a, const BeamState& b) {
    if (a.ebins() != b.ebins() || a.species() != b.species())
        throw ConfigError("beam shape/species mismatch");
}

}  // namespace

void BeamState::init_flavor_state() {
    const double a = is_e_flavor(species_) ? 1.0 : 0.0;
    const double b = 1.0 - a;
    for (int e = 0; e < padded_; ++e) {
        ar_[e] = (e < ebins_) ? a : 1.0;  // padding held at pure e state
        ai_[e] = 0.0;
        br_[e] = (e < ebins_) ? b : 0.0;
        bi_[e] = 0.0;
    }
}

void BeamState::init_flavor_state(double eps, std::uint64_t seed) {
    init_flavor_state();
    if (eps == 0.0) return;
    for (int e = 0; e < ebins_; ++e) {
        const double u = eps * unit_noise(seed, e, 0);
        const double v = eps * unit_noise(seed, e, 1);
        const double w = std::sqrt(std::max(0.0, 1.0 - u * u - v * v));
        if (is_e_flavor(species_)) {
            ar_[e] = w;
            br_[e] = u;
        } else {
            ar_[e] = u;
            br_[e] = w;
        }
        bi_[e] = v;
    }
}

namespace flavor {

void evolve(const VacuumView& vac, const Ham2& hb, double dl,
            const BeamState& in, BeamState& out) {
    check_shape(in, out);
    const int n = in.padded();
    const double* __restrict__ iar = in.ar();
    const double* __restrict__ iai = in.ai();
    const double* __restrict__ ibr = in.br();
    const double* __restrict__ ibi = in.bi();
    double* __restrict__ oar = out.ar();
    double* __restrict__ oai = out.ai();
    double* __restrict__ obr = out.br();
    double* __restrict__ obi = out.bi();
    const double* __restrict__ v11 = vac.h11;
    const double* __restrict__ v12 = vac.h12;

#pragma omp simd
    for (int e = 0; e < n; ++e) {
        evolve_bin(v11[e] + hb.h11, v12[e] + hb.h12_re, hb.h12_im, dl,
                   iar[e], iai[e], ibr[e], ibi[e],
                   oar[e], oai[e], obr[e], obi[e]);
    }
}

ReductionRow e_sum(const BeamState& beam, std::span<const double> fw) {
    if (static_cast<int>(fw.size()) < beam.padded())
        throw ConfigError("e_sum: spectrum/beam ebins mismatch");
    const int n = beam.padded();
    const double* __restrict__ ar = beam.ar();
    const double* __restrict__ ai = beam.ai();
    const double* __restrict__ br = beam.br();
    const double* __restrict__ bi = beam.bi();
    const double* __restrict__ f = fw.data();

    // fixed low-to-high accumulation order; reproducible across builds
    double r0 = 0.0, r1 = 0.0, r2 = 0.0;
    for (int e = 0; e < n; ++e) {
        const ReductionRow rho = density(ar[e], ai[e], br[e], bi[e]);
        r0 += rho.d * f[e];
        r1 += rho.o_re * f[e];
        r2 += rho.o_im * f[e];
    }
    return {r0, r1, r2};
}

void add_avg(BeamState& dst, const BeamState& src) {
    check_shape(dst, src);
    const int n = dst.padded();
    double* __restrict__ dar = dst.ar();
    double* __restrict__ dai = dst.ai();
    double* __restrict__ dbr = dst.br();
    double* __restrict__ dbi = dst.bi();
    const double* __restrict__ sar = src.ar();
    const double* __restrict__ sai = src.ai();
    const double* __restrict__ sbr = src.br();
    const double* __restrict__ sbi = src.bi();
#pragma omp simd
    for (int e = 0; e < n; ++e) {
        dar[e] = (dar[e] + sar[e]) * 0.5;
        dai[e] = (dai[e] + sai[e]) * 0.5;
        dbr[e] = (dbr[e] + sbr[e]) * 0.5;
        dbi[e] = (dbi[e] + sbi[e]) * 0.5;
    }
}

double calc_err(const BeamState& a, const BeamState& b) {
    check_shape(a, b);
    const int n = a.ebins();
    double m = 0.0;
    for (int e = 0; e < n; ++e) {
        m = std::max(m, std::fabs(a.ar()[e] - b.ar()[e]));
        m = std::max(m, std::fabs(a.ai()[e] - b.ai()[e]));
        m = std::max(m, std::fabs(a.br()[e] - b.br()[e]));
        m = std::max(m, std::fabs(a.bi()[e] - b.bi()[e]));
    }
    return m;
}

void copy_state(BeamState& dst, const BeamState& src) {
    check_shape(dst, src);
    const std::size_t bytes = sizeof(double) * static_cast<std::size_t>(dst.padded());
    std::memcpy(dst.ar(), src.ar(), bytes);
    std::memcpy(dst.ai(), src.ai(), bytes);
    std::memcpy(dst.br(), src.br(), bytes);
    std::memcpy(dst.bi(), src.bi(), bytes);
}

double norm_deviation(const BeamState& beam) {
    double m = 0.0;
    for (int e = 0; e < beam.ebins(); ++e) {
        const double n2 = beam.ar()[e] * beam.ar()[e] + beam.ai()[e] * beam.ai()[e] +
                          beam.br()[e] * beam.br()[e] + beam.bi()[e] * beam.bi()[e];
        m = std::max(m, std::fabs(n2 - 1.0));
    }
    return m;
}

ReductionRow evolve_sum(const VacuumView& vac, const Ham2& hb, double dl,
                        const BeamState& in, BeamState& out,
                        std::span<const double> fw) {
    check_shape(in, out);
    const int n = in.padded();
    const double* __restrict__ iar = in.ar();
    const double* __restrict__ iai = in.ai();
    const double* __restrict__ ibr = in.br();
    const double* __restrict__ ibi = in.bi();
    double* __restrict__ oar = out.ar();
    double* __restrict__ oai = out.ai();
    double* __restrict__ obr = out.br();
    double* __restrict__ obi = out.bi();
    const double* __restrict__ v11 = vac.h11;
    const double* __restrict__ v12 = vac.h12;
    const double* __restrict__ f = fw.data();

    // single pass; accumulation stays in low-to-high bin order
    double r0 = 0.0, r1 = 0.0, r2 = 0.0;
    for (int e = 0; e < n; ++e) {
        evolve_bin(v11[e] + hb.h11, v12[e] + hb.h12_re, hb.h12_im, dl,
                   iar[e], iai[e], ibr[e], ibi[e],
                   oar[e], oai[e], obr[e], obi[e]);
        const ReductionRow rho = density(oar[e], oai[e], obr[e], obi[e]);
        r0 += rho.d * f[e];
        r1 += rho.o_re * f[e];
        r2 += rho.o_im * f[e];
    }
    return {r0, r1, r2};
}

void evolve_avg(const VacuumView& vac, const Ham2& hb, double dl,
                const BeamState& in, BeamState& out, BeamState& avg_with) {
    check_shape(in, out);
    check_shape(in, avg_with);
    const int n = in.padded();
    const double* __restrict__ iar = in.ar();
    const double* __restrict__ iai = in.ai();
    const double* __restrict__ ibr = in.br();
    const double* __restrict__ ibi = in.bi();
    double* __restrict__ oar = out.ar();
    double* __restrict__ oai = out.ai();
    double* __restrict__ obr = out.br();
    double* __restrict__ obi = out.bi();
    double* __restrict__ var = avg_with.ar();
    double* __restrict__ vai = avg_with.ai();
    double* __restrict__ vbr = avg_with.br();
    double* __restrict__ vbi = avg_with.bi();
    const double* __restrict__ v11 = vac.h11;
    const double* __restrict__ v12 = vac.h12;

#pragma omp simd
    for (int e = 0; e < n; ++e) {
        evolve_bin(v11[e] + hb.h11, v12[e] + hb.h12_re, hb.h12_im, dl,
                   iar[e], iai[e], ibr[e], ibi[e],
                   oar[e], oai[e], obr[e], obi[e]);
        var[e] = (var[e] + oar[e]) * 0.5;
        vai[e] = (vai[e] + oai[e]) * 0.5;
        vbr[e] = (vbr[e] + obr[e]) * 0.5;
        vbi[e] = (vbi[e] + obi[e]) * 0.5;
    }
}

double evolve_avg_err(const VacuumView& vac, const Ham2& hb, double dl,
                      const BeamState& in, BeamState& out, BeamState& avg_with,
                      const BeamState& err_against) {
    evolve_avg(vac, hb, dl, in, out, avg_with);
    return calc_err(err_against, avg_with);
}

}  // namespace flavor
}  // namespace oscflat
