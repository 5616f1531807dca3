#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "oscflat/geometry.hpp"
#include "oscflat/matter.hpp"
#include "oscflat/types.hpp"

namespace oscflat::io {

/// One keyword per line, `Keyword= value`, comments from '#' to end of line.
/// Every keyword below mirrors the documented configuration vocabulary;
/// unknown keywords are collected as warnings, missing physics keywords are
/// reported and block a run.
struct RunConfig {
    // I/O behavior
    int dumpMode = 0;
    std::string filePrefix = "out";
    int newFile_step = 1000;   // snapshots per file before rotation
    int sync_step = 1;         // snapshots per durability flush
    double r_step1 = 0.0, r_step2 = 0.0;     // km between dumps (0 disables)
    double t_step1 = 0.0, t_step2 = 0.0;     // seconds between dumps
    std::uint64_t itr_step1 = 0, itr_step2 = 0;  // iterations between dumps
    int designatedWriter = 1;  // 1: async single-writer lane; 0: synchronous

    // distribution / autotune
    int start_beam = -1;  // negative: automatic partitioning / pre-benchmark
    int end_beam = -1;
    int multiNodeBench = 0;
    int minNodes = 1;
    int maxNodes = 1;
    double ratio_min = 1.0;
    double ratio_max = 5.0;
    double ratio_step = 0.1;
    double knee_threshold = 0.05;
    int cpu_threads = 16;
    int accel_threads = 244;
    double cpu_per_beam_us = 100.0;
    double accel_per_beam_us = 100.0;

    // termination
    double Tn = 0.0;         // wall seconds (0 disables)
    std::uint64_t Ts = 0;    // loop iterations (0 disables)

    // step control
    double eps0 = 1e-8;
    double kappa = 0.8;
    double dr = 1e-3;      // initial step, km
    double max_dr = 1.0;   // km
    double min_dr = 1e-12;  // km; collapse guard

    // physics
    double dm2 = 0.0;    // eV^2, signed by hierarchy
    double theta = 0.0;  // vacuum mixing angle
    double R0 = 0.0, Rn = 0.0;  // km
    double E0 = 0.0, E1 = 0.0;  // MeV
    int Abins = 1, Pbins = 1, Ebins = 1;
    int SPoints = 1;
    int Flvs = 2;
    std::string model = "bulb";  // sa | bulb | ebulb
    double hvvScale = 1.0;
    double perturb = 0.0;  // azimuthal symmetry-breaking amplitude
    int lanes = 1;

    // matter
    int hasMatter = 0;
    std::string matterProfile = "sum";  // powerlaw | exp | sum
    double Ye = 0.0;
    double nb0 = 0.0;
    double Rv = 10.0;
    double Mns = 1.4;
    double gs = 1.0;
    double S = 100.0;
    double hNS = 1.0;

    // per-species spectra: order NuE, NuEBar, NuX, NuXBar
    double Lve = -1.0, Lvae = -1.0, Lvt = -1.0, Lvat = -1.0;      // erg/s
    double Tve = -1.0, Tvae = -1.0, Tvt = -1.0, Tvat = -1.0;      // MeV
    double Eve = -1.0, Evae = -1.0, Evt = -1.0, Evat = -1.0;      // MeV mean
    double eta_ve = 0.0, eta_vae = 0.0, eta_vt = 0.0, eta_vat = 0.0;

    std::vector<std::string> warnings;   // unknown keywords etc.
    std::set<std::string> provided;      // keys actually present

    double L(Species s) const;
    double T(Species s) const;
    double Emean(Species s) const;
    double eta(Species s) const;

    geom::Model geometry_model() const;
    matter::Profile matter_profile() const;
};

RunConfig parse_config(const std::string& text);
RunConfig parse_config_file(const std::string& path);

/// Apply one `key=value` pair (no comments) on top of a parsed config.
void apply_override(RunConfig& cfg, const std::string& key_value);

/// Canonical rendering; parse(render(cfg)) reproduces cfg.
std::string render_config(const RunConfig& cfg);

/// FNV-1a over the canonical rendering.
std::uint64_t config_hash(const RunConfig& cfg);

/// Physics keywords a run cannot proceed without (the "uninitialized"
/// report). Empty when the config is runnable.
std::vector<std::string> missing_run_keys(const RunConfig& cfg);

/// Throws ConfigError listing the missing keys, plus basic invariant checks
/// (R0 < Rn, E0 < E1, bins >= 1, Flvs == 2).
void require_runnable(const RunConfig& cfg);

}  // namespace oscflat::io
