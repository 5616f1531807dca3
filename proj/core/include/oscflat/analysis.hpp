#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "oscflat/snapshot.hpp"
#include "oscflat/types.hpp"

namespace oscflat::analysis {

/// Survival probability per species over (theta, energy), phi-averaged:
/// |a|^2 for the e species, |b|^2 for the x species.
struct SurvivalGrid {
    int abins = 0;
    int ebins = 0;
    std::array<std::vector<double>, kSpeciesCount> P;  // abins*ebins, theta-major

    double at(Species s, int t, int e) const {
        return P[static_cast<int>(s)][static_cast<std::size_t>(t) * ebins + e];
    }
};

SurvivalGrid survival_from_mode1(const io::SnapshotHeader& h,
                                 std::span<const double> payload);

/// Theta-averaged survival per energy bin for one species.
std::vector<double> energy_survival(const SurvivalGrid& g, Species s);

/// CSV: theta_idx,ebin,E_MeV,P per species (one file per species).
void write_survival_csv(const SurvivalGrid& g, const io::SnapshotHeader& h,
                        const std::string& path, Species s);

/// CSV: E_MeV,f_initial,f_final per species. The final spectrum folds in the
/// flavor exchange weighted by the number-flux couplings from the header.
void write_spectra_csv(const SurvivalGrid& g, const io::SnapshotHeader& h,
                       const std::string& path, Species s);

/// CSV over all records of a mode-2 file: iter,r,<content per species>.
void write_content_series_csv(const std::string& snapshot_path,
                              const std::string& out_path);

/// Full analyze entry point used by the CLI; `what` is "survival", "spectra",
/// "content" or "all". Returns the files written.
std::vector<std::string> analyze_file(const std::string& snapshot_path,
                                      const std::string& out_dir,
                                      const std::string& what);

}  // namespace oscflat::analysis
