#include "oscflat/analysis.hpp"

#include <filesystem>
#include <fstream>

namespace oscflat::analysis {

namespace {

struct Mode1Dims {
    std::uint64_t abins, pbins, prtcls, comps, ebins;
};

Mode1Dims mode1_dims(const io::SnapshotHeader& h) {
    if (h.mode != 1 || h.dim_lens.size() != 6)
        throw IoError("analysis: a whole-state (mode 1) snapshot is required");
    return {h.dim_lens[1], h.dim_lens[2], h.dim_lens[3], h.dim_lens[4], h.dim_lens[5]};
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("analysis: cannot write " + path);
    out.precision(10);
    return out;
}

double bin_center(const io::SnapshotHeader& h, int e) {
    if (!h.has_spectra) return e;  // fall back to the bin index
    const double dE = (h.spectra.E1 - h.spectra.E0) / h.spectra.ebins;
    return h.spectra.E0 + (e + 0.5) * dE;
}

}  // namespace

SurvivalGrid survival_from_mode1(const io::SnapshotHeader& h,
                                 std::span<const double> payload) {
    const Mode1Dims d = mode1_dims(h);
    if (payload.size() != d.abins * d.pbins * d.prtcls * d.comps * d.ebins)
        throw IoError("analysis: payload does not match header dims");

    SurvivalGrid g;
    g.abins = static_cast<int>(d.abins);
    g.ebins = static_cast<int>(d.ebins);
    for (auto& v : g.P) v.assign(d.abins * d.ebins, 0.0);

    const auto at = [&](std::uint64_t t, std::uint64_t p, std::uint64_t s,
                        std::uint64_t c, std::uint64_t e) {
        return payload[(((t * d.pbins + p) * d.prtcls + s) * d.comps + c) * d.ebins + e];
    };

    for (std::uint64_t s = 0; s < d.prtcls; ++s) {
        const bool eflv = is_e_flavor(static_cast<Species>(s));
        for (std::uint64_t t = 0; t < d.abins; ++t) {
            for (std::uint64_t e = 0; e < d.ebins; ++e) {
                double acc = 0.0;
                for (std::uint64_t p = 0; p < d.pbins; ++p) {
                    // comp order ar, ai, br, bi; survival is the original
                    // flavor's amplitude squared
                    const double x0 = at(t, p, s, eflv ? 0 : 2, e);
                    const double x1 = at(t, p, s, eflv ? 1 : 3, e);
                    acc += x0 * x0 + x1 * x1;
                }
                g.P[s][t * d.ebins + e] = acc / static_cast<double>(d.pbins);
            }
        }
    }
    return g;
}

std::vector<double> energy_survival(const SurvivalGrid& g, Species s) {
    std::vector<double> out(g.ebins, 0.0);
    const auto& P = g.P[static_cast<int>(s)];
    for (int e = 0; e < g.ebins; ++e) {
        double acc = 0.0;
        for (int t = 0; t < g.abins; ++t) acc += P[static_cast<std::size_t>(t) * g.ebins + e];
        out[e] = acc / g.abins;
    }
    return out;
}

void write_survival_csv(const SurvivalGrid& g, const io::SnapshotHeader& h,
                        const std::string& path, Species s) {
    auto out = open_out(path);
    out << "theta_idx,ebin,E_MeV,P\n";
    for (int t = 0; t < g.abins; ++t)
        for (int e = 0; e < g.ebins; ++e)
            out << t << "," << e << "," << bin_center(h, e) << "," << g.at(s, t, e) << "\n";
}

void write_spectra_csv(const SurvivalGrid& g, const io::SnapshotHeader& h,
                       const std::string& path, Species s) {
    if (!h.has_spectra) throw IoError("analysis: snapshot carries no spectra header");
    auto out = open_out(path);
    out << "E_MeV,f_initial,f_final\n";

    // Partner species of the other flavor, same particle/antiparticle kind.
    const int si = static_cast<int>(s);
    const int pi = (si + 2) % kSpeciesCount;
    const double cs = h.spectra.coupling[si];
    const double cp = h.spectra.coupling[pi];
    const double flux_ratio = (cs > 0.0) ? cp / cs : 0.0;

    const auto stay = energy_survival(g, s);
    const auto partner_stay = energy_survival(g, static_cast<Species>(pi));
    for (int e = 0; e < g.ebins; ++e) {
        const double fi = h.spectra.f[si][e];
        const double fp = h.spectra.f[pi][e];
        const double ff = fi * stay[e] + flux_ratio * fp * (1.0 - partner_stay[e]);
        out << bin_center(h, e) << "," << fi << "," << ff << "\n";
    }
}

void write_content_series_csv(const std::string& snapshot_path,
                              const std::string& out_path) {
    io::SnapshotReader reader(snapshot_path);
    const auto& h = reader.header();
    if (h.mode != 2 || h.dim_lens.size() != 4)
        throw IoError("analysis: content series needs a mode 2 file");
    const std::uint64_t abins = h.dim_lens[1], pbins = h.dim_lens[2],
                        prtcls = h.dim_lens[3];

    auto out = open_out(out_path);
    out << "iter,r";
    for (int s = 0; s < kSpeciesCount; ++s) out << "," << species_name(static_cast<Species>(s));
    out << "\n";

    io::RecordMeta meta;
    std::vector<double> payload;
    while (reader.next(meta, payload)) {
        out << meta.iter << "," << meta.r;
        for (std::uint64_t s = 0; s < prtcls; ++s) {
            double acc = 0.0;
            for (std::uint64_t t = 0; t < abins; ++t)
                for (std::uint64_t p = 0; p < pbins; ++p)
                    acc += payload[(t * pbins + p) * prtcls + s];
            out << "," << acc / static_cast<double>(abins * pbins);
        }
        out << "\n";
    }
}

std::vector<std::string> analyze_file(const std::string& snapshot_path,
                                      const std::string& out_dir,
                                      const std::string& what) {
    namespace fs = std::filesystem;
    if (!out_dir.empty()) fs::create_directories(out_dir);
    const auto join = [&](const std::string& name) {
        return out_dir.empty() ? name : out_dir + "/" + name;
    };

    std::vector<std::string> written;
    io::SnapshotReader reader(snapshot_path);
    const auto mode = reader.header().mode;

    if (what == "content" || (what == "all" && mode == 2)) {
        if (mode != 2)
            throw ConfigError("analyze: 'content' needs a mode 2 (averaged) file");
        const std::string p = join("content.csv");
        write_content_series_csv(snapshot_path, p);
        written.push_back(p);
        return written;
    }

    if (mode != 1)
        throw ConfigError("analyze: '" + what + "' needs a mode 1 (whole-state) file");

    std::vector<double> payload;
    reader.read_last(payload);
    const SurvivalGrid g = survival_from_mode1(reader.header(), payload);

    if (what == "survival" || what == "all") {
        for (int s = 0; s < kSpeciesCount; ++s) {
            const std::string p =
                join(std::string("survival_") + species_name(static_cast<Species>(s)) + ".csv");
            write_survival_csv(g, reader.header(), p, static_cast<Species>(s));
            written.push_back(p);
        }
    }
    if (what == "spectra" || what == "all") {
        for (int s = 0; s < kSpeciesCount; ++s) {
            const std::string p =
                join(std::string("spectra_") + species_name(static_cast<Species>(s)) + ".csv");
            write_spectra_csv(g, reader.header(), p, static_cast<Species>(s));
            written.push_back(p);
        }
    }
    if (written.empty())
        throw ConfigError("analyze: unknown product '" + what + "'");
    return written;
}

}  // namespace oscflat::analysis
