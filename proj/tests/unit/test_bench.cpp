#include <doctest.h>

#include <cmath>

#include "oscflat/bench.hpp"

using namespace oscflat;
using bench::Family;
using bench::KernelSpec;

TEST_CASE("SoA and AoS kernels reproduce the scalar reference checksum") {
    KernelSpec spec;
    spec.family = Family::SoAvsAoS;
    spec.vector_width = 128;
    spec.array_len = 64;
    spec.outer_iters = 20;

    spec.variant = "scalar";
    const double ref = bench::kernel_checksum(spec);
    spec.variant = "soa";
    const double soa = bench::kernel_checksum(spec);
    spec.variant = "aos";
    const double aos = bench::kernel_checksum(spec);

    CHECK(std::fabs(soa - ref) <= 1e-12 * std::fabs(ref));
    CHECK(std::fabs(aos - ref) <= 1e-12 * std::fabs(ref));
}

TEST_CASE("buffered and per-element I/O variants produce identical files") {
    KernelSpec spec;
    spec.family = Family::IoBuffering;
    spec.vector_width = 256;
    spec.outer_iters = 1;

    spec.variant = "nested";
    const double nested = bench::kernel_checksum(spec);
    spec.variant = "single";
    const double single = bench::kernel_checksum(spec);
    spec.variant = "buffered";
    const double buffered = bench::kernel_checksum(spec);

    CHECK(nested == single);  // file-content hashes
    CHECK(nested == buffered);
}

TEST_CASE("fused and unfused flavor kernels agree") {
    KernelSpec spec;
    spec.family = Family::FusedVsUnfused;
    spec.vector_width = 64;
    spec.outer_iters = 10;
    spec.variant = "fused";
    const double fused = bench::kernel_checksum(spec);
    spec.variant = "unfused";
    const double unfused = bench::kernel_checksum(spec);
    CHECK(std::fabs(fused - unfused) <= 4e-15 * std::max(1.0, std::fabs(fused)));
}

TEST_CASE("loop-shape variants compute identical results") {
    KernelSpec spec;
    spec.family = Family::LoopShape;
    spec.vector_width = 1 << 12;
    spec.outer_iters = 4;
    spec.lanes = 2;
    spec.variant = "serial";
    const double serial = bench::kernel_checksum(spec);
    for (const char* v : {"spawn", "pool", "chunked"}) {
        spec.variant = v;
        CHECK(bench::kernel_checksum(spec) == serial);
    }
}

TEST_CASE("run_kernel auto-scales, reports a median and consumes a checksum") {
    KernelSpec spec;
    spec.name = "madd_smoke";
    spec.family = Family::FlopMadd;
    spec.vector_width = 256;
    spec.outer_iters = 1;  // forces auto-scaling
    spec.repetitions = 5;
    const auto r = bench::run_kernel(spec);
    CHECK(r.median_ns >= 50e6);  // scaled to the 50 ms floor
    CHECK(r.min_ns <= r.median_ns);
    CHECK(r.median_ns <= r.max_ns);
    CHECK(r.outer_iters_used > 1);
    CHECK(std::isfinite(r.checksum));
    CHECK(r.checksum != 0.0);

    const auto csv = bench::suite_csv({r});
    CHECK(csv.find("madd_smoke") != std::string::npos);
    CHECK(csv.find("median_ns") != std::string::npos);
}

TEST_CASE("kernel spec validation") {
    KernelSpec spec;
    spec.repetitions = 3;  // below the methodology floor
    CHECK_THROWS_AS(bench::run_kernel(spec), ConfigError);
}
