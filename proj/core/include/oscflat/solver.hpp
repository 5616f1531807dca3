#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "oscflat/beam.hpp"
#include "oscflat/config.hpp"
#include "oscflat/geometry.hpp"
#include "oscflat/matter.hpp"
#include "oscflat/parallel.hpp"
#include "oscflat/snapshot.hpp"
#include "oscflat/spectra.hpp"

namespace oscflat::solver {

/// Adaptive-step state: current step, bounds, tolerance, radius window and
/// termination limits.
struct StepControl {
    double dr = 1e-3;       // km
    double dr_max = 1.0;    // km
    double dr_min = 1e-12;  // km
    double eps0 = 1e-8;
    double kappa = 0.8;
    double r = 0.0;   // km
    double R0 = 0.0;  // km
    double Rn = 0.0;  // km
    std::uint64_t iter = 0;
    std::uint64_t Ts = 0;  // max loop iterations, 0 disables
    double Tn = 0.0;       // max wall seconds, 0 disables

    static StepControl from_config(const io::RunConfig& cfg);
};

/// dr' = clamp(kappa * dr * sqrt(eps0/max(err, 1e-300)), dr_min, dr_max).
/// Throws NumericError ("step collapse") when a rejected step would need a
/// step below dr_min.
double step_size_update(const StepControl& ctl, double err, bool accepted);

/// All beams of one lattice point: (trajectory x species) BeamStates.
class BeamSet {
public:
    BeamSet(const geom::AngleGrid& grid, int ebins);

    int trajectories() const { return n_traj_; }
    int ebins() const { return ebins_; }
    int size() const { return static_cast<int>(beams_.size()); }

    BeamState& at(int traj, Species s) {
        return beams_[static_cast<std::size_t>(traj) * kSpeciesCount + static_cast<int>(s)];
    }
    const BeamState& at(int traj, Species s) const {
        return beams_[static_cast<std::size_t>(traj) * kSpeciesCount + static_cast<int>(s)];
    }
    BeamState& operator[](int i) { return beams_[i]; }
    const BeamState& operator[](int i) const { return beams_[i]; }

    friend void swap(BeamSet& a, BeamSet& b) noexcept {
        std::swap(a.beams_, b.beams_);
    }

private:
    int n_traj_;
    int ebins_;
    std::vector<BeamState> beams_;
};

/// Everything the step needs besides the state: geometry, spectra (with
/// coupling weights), matter profile, vacuum table.
struct Environment {
    geom::AngleGrid grid;
    geom::VacuumTable vacuum;
    std::vector<spectra::SpectrumTable> tables;  // species order
    geom::Couplings couplings{};
    matter::MatterParams matt;
    int ebins = 1;
    double perturb = 0.0;

    static Environment from_config(const io::RunConfig& cfg);

    io::SpectraHeader spectra_header() const;
};

struct RunSummary {
    double final_r = 0.0;
    std::uint64_t iterations = 0;
    std::uint64_t accepted = 0;
    std::uint64_t rejected = 0;
    double wall_s = 0.0;
    double phase_hamiltonian_s = 0.0;
    double phase_evolve_s = 0.0;
    double phase_io_s = 0.0;
    double max_worker_wait_s = 0.0;
    double final_max_norm_dev = 0.0;
    std::string termination;  // "radius" | "iterations" | "walltime"

    std::string to_kv() const;  // machine-readable key=value lines
};

struct HookInfo {
    std::uint64_t iter = 0;
    double r = 0.0;
    double dr = 0.0;
    double t_wall = 0.0;
};

/// Called on the designated writer lane after each accepted step with the
/// committed state; may snapshot, must not mutate.
using IoHook = std::function<void(const HookInfo&, const BeamSet&)>;

// Snapshot payload bridges (dim order [theta][phi][prtcl][comp][ebin]).
void extract_mode1(const BeamSet& set, const geom::AngleGrid& grid,
                   std::vector<double>& payload);
void fill_mode1(BeamSet& set, const geom::AngleGrid& grid,
                std::span<const double> payload);
/// Per-beam e-flavor content sum_e |a_e|^2 f_e dE, dims [theta][phi][prtcl].
void extract_mode2(const BeamSet& set, const geom::AngleGrid& grid,
                   const Environment& env, std::vector<double>& payload);

/// Load the last record of a mode-1 snapshot into `set`; dims must match
/// (fatal otherwise), config-hash mismatch downgrades to a warning.
io::RecordMeta resume_from(const std::string& path, BeamSet& set,
                           const geom::AngleGrid& grid, std::uint64_t expect_hash,
                           std::vector<std::string>* warnings = nullptr);

/// The evolution engine; owns the 8-set lattice and the reduction staging.
class Engine {
public:
    Engine(const Environment& env, int lanes = 1);
    ~Engine();
    Engine(Engine&&) noexcept;
    Engine& operator=(Engine&&) noexcept;

    BeamSet& state();
    const BeamSet& state() const;
    const Environment& env() const { return *env_; }

    /// Initialize every set to flavor-eigenstate emission (+ perturbation).
    void init_states();

    /// One trial step from radius r with step dr on a single lane; computes
    /// the embedded error but never commits. For order-of-accuracy checks.
    double trial_step_error(double r, double dr);

    /// Run the full adaptive loop on `lanes` workers.
    RunSummary run(StepControl ctl, const IoHook& hook = {});

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    const Environment* env_;
};

}  // namespace oscflat::solver
