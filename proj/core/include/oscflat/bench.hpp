#pragma once

#include <string>
#include <vector>

#include "oscflat/types.hpp"

namespace oscflat::bench {

enum class Family {
    Transcendental,
    FlopMadd,
    SoAvsAoS,
    FusedVsUnfused,
    LoopShape,
    IoBuffering,
};

const char* family_name(Family f);

struct KernelSpec {
    std::string name;
    Family family = Family::FlopMadd;
    std::string variant;      // family-specific: sin_cos|exp, soa|aos, ...
    int vector_width = 512;   // doubles in the vectorized loop
    long outer_iters = 2000;  // repetitions of the inner loop per timed run
    int array_len = 100;      // SoA/AoS per-object array length
    int repetitions = 9;      // timed runs; median reported (>= 5)
    int lanes = 1;            // thread count for LoopShape variants
};

struct KernelResult {
    std::string name;
    std::string variant;
    double median_ns = 0.0;  // per timed run
    double min_ns = 0.0;
    double max_ns = 0.0;
    double throughput = 0.0;
    std::string throughput_unit;
    double checksum = 0.0;  // consumed result; guards against dead-code elimination
    long outer_iters_used = 0;
    bool noisy = false;
};

/// Executes one kernel: auto-scales outer_iters until a timed run exceeds
/// 50 ms, then reports the median of `repetitions` runs. The checksum is
/// computed from the produced data and is independent of instrumentation.
KernelResult run_kernel(const KernelSpec& spec);

/// Runs one kernel body at exactly spec.outer_iters (no scaling, no timing)
/// and returns its checksum. For SoAvsAoS the variant "scalar" selects the
/// plain reference loop the vectorized variants must reproduce.
double kernel_checksum(const KernelSpec& spec);

/// The kernel families as regression-style experiments.
std::vector<KernelSpec> default_suite(bool quick = false);

/// CSV: kernel,variant,params,median_ns,throughput,unit,checksum,noisy
std::string suite_csv(const std::vector<KernelResult>& results);

}  // namespace oscflat::bench
