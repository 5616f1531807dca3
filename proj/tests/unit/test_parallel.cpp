#include <doctest.h>

#include <cmath>
#include <thread>

#include "oscflat/parallel.hpp"
#include "testutil.hpp"

using namespace oscflat;
using par::Comm;
using par::makespan;
using par::WorkerProfile;
using testutil::Rng;

TEST_CASE("partitions are disjoint, ordered and cover the range") {
    Rng rng(8);
    for (int trial = 0; trial < 50; ++trial) {
        const int len = static_cast<int>(rng.uniform(0, 300));
        const int workers = 1 + static_cast<int>(rng.uniform(0, 9));
        const auto parts = par::make_partitions(len, workers);
        REQUIRE(static_cast<int>(parts.size()) == workers);
        int at = 0;
        for (int w = 0; w < workers; ++w) {
            CHECK(parts[w].worker_id == w);
            CHECK(parts[w].start_beam == at);
            CHECK(parts[w].end_beam >= parts[w].start_beam);
            at = parts[w].end_beam;
        }
        CHECK(at == len);
    }
}

TEST_CASE("makespan reproduces the thread-quantization examples") {
    const double t = 0.37;
    CHECK(makespan(250, 244, t) == doctest::Approx(2 * t));  // six threads carry 2 beams
    CHECK(makespan(227, 244, t) == doctest::Approx(1 * t));
    CHECK(makespan(244, 244, t) == doctest::Approx(1 * t));  // exact divisibility
    CHECK(makespan(0, 244, t) == 0.0);
}

TEST_CASE("makespan monotonicity and quantization plateaus") {
    const double t = 1.0;
    double prev = 0.0;
    for (int beams = 1; beams <= 1000; ++beams) {
        const double m = makespan(beams, 244, t);
        CHECK(m >= prev);
        prev = m;
    }
    // piecewise constant between divisibility boundaries
    CHECK(makespan(245, 244, t) == makespan(488, 244, t));
    CHECK(makespan(100, 64, t) >= makespan(100, 128, t));
}

TEST_CASE("speedup and efficiency") {
    CHECK(par::speedup(100.0, 50.0) == doctest::Approx(2.0));
    CHECK(par::efficiency(8.0, 8) == doctest::Approx(1.0));
    CHECK_THROWS_AS(par::speedup(0.0, 1.0), ConfigError);
}

TEST_CASE("autotune: homogeneous workers tie at the lowest ratio deterministically") {
    const std::vector<WorkerProfile> node = {{"cpu", 16, 1e-3}};
    const auto rep = par::autotune(1000, node, 1, 4, 1.0, 5.0, 0.1);
    for (const auto& c : rep.grid) {
        CHECK(c.feasible);
        const int beams = (1000 + c.nodes - 1) / c.nodes;
        CHECK(c.steps_per_sec == doctest::Approx(1.0 / makespan(beams, 16, 1e-3)));
    }
}

TEST_CASE("autotune: a 3x faster accelerator pulls the best ratio near 3:1") {
    // accel processes beams 3x faster in aggregate: same threads, a third the time
    const std::vector<WorkerProfile> node = {{"cpu", 64, 3e-3}, {"accel", 64, 1e-3}};
    const auto rep = par::autotune(10000, node, 1, 1, 1.0, 5.0, 0.1);
    double best_ratio = 0.0;
    for (const auto& c : rep.grid)
        if (c.best_for_nodes) best_ratio = c.ratio;
    CHECK(best_ratio == doctest::Approx(3.0).epsilon(0.15));
}

TEST_CASE("autotune best cell equals exhaustive enumeration") {
    const std::vector<WorkerProfile> node = {{"cpu", 8, 2.5e-3}, {"accel", 244, 1e-3}};
    const auto rep = par::autotune(5000, node, 2, 6, 1.0, 5.0, 0.1);
    for (int nodes = 2; nodes <= 6; ++nodes) {
        double best = -1.0, best_ratio = 1e9;
        for (const auto& c : rep.grid) {
            if (c.nodes != nodes || !c.feasible) continue;
            if (c.steps_per_sec > best) {
                best = c.steps_per_sec;
                best_ratio = c.ratio;
            }
        }
        for (const auto& c : rep.grid)
            if (c.nodes == nodes && c.best_for_nodes) {
                CHECK(c.steps_per_sec == doctest::Approx(best));
                CHECK(c.ratio <= best_ratio + 1e-12);
            }
    }
}

TEST_CASE("autotune: throughput is flat across node counts sharing a ceil value") {
    // 10000 theta beams on accel-only nodes of 244 threads
    const std::vector<WorkerProfile> node = {{"accel", 244, 1e-3}};
    const auto rep = par::autotune(10000, node, 1, 24, 1.0, 1.0, 0.1);
    std::vector<double> sps(25, 0.0);
    std::vector<int> rounds(25, 0);
    for (const auto& c : rep.grid) {
        sps[c.nodes] = c.steps_per_sec;
        const int beams = (10000 + c.nodes - 1) / c.nodes;
        rounds[c.nodes] = (beams + 243) / 244;
    }
    for (int n = 2; n <= 24; ++n) {
        CHECK(sps[n] >= sps[n - 1] - 1e-12);  // non-decreasing in nodes
        if (rounds[n] == rounds[n - 1])
            CHECK(sps[n] == doctest::Approx(sps[n - 1]));  // flat region
    }
}

TEST_CASE("reduce_sum: identity on one worker, partition sums match a single total") {
    Comm c1(1);
    geom::PartialSums local;
    local.a = {1.0, 2.0, 3.0};
    const auto out = c1.reduce_sum(0, local);
    CHECK(out.a.d == 1.0);
    CHECK(out.a.o_im == 3.0);

    // multi-worker: totals equal the single-worker reference
    const int lanes = 4;
    Comm comm(lanes);
    std::array<geom::PartialSums, 4> locals;
    Rng rng(11);
    geom::PartialSums ref;
    for (auto& l : locals) {
        l.a = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
        l.c = {rng.uniform(-1, 1), 0, 0};
        ref += l;
    }
    std::array<geom::PartialSums, 4> results;
    par::run_lanes(comm, lanes,
                   [&](int lane) { results[lane] = comm.reduce_sum(lane, locals[lane]); });
    for (int w = 0; w < lanes; ++w) {
        CHECK(results[w].a.d == doctest::Approx(ref.a.d).epsilon(1e-15));
        CHECK(results[w].c.d == doctest::Approx(ref.c.d).epsilon(1e-15));
    }
}

TEST_CASE("reduce_max and broadcast") {
    const int lanes = 3;
    Comm comm(lanes);
    const double locals[3] = {0.1, 0.3, 0.2};
    std::array<double, 3> out{};
    par::run_lanes(comm, lanes, [&](int lane) { out[lane] = comm.reduce_max(lane, locals[lane]); });
    for (const double v : out) CHECK(v == 0.3);

    Comm comm2(lanes);
    std::array<int, 3> got{};
    par::run_lanes(comm2, lanes, [&](int lane) {
        const int v = (lane == 0) ? 42 : -1;
        got[lane] = comm2.broadcast(lane, v);
    });
    for (const int v : got) CHECK(v == 42);
}

TEST_CASE("a worker missing a collective trips the deadlock timeout") {
    const int lanes = 2;
    Comm comm(lanes, 0.2);  // short timeout
    std::atomic<int> failures{0};
    std::thread t1([&] {
        try {
            comm.barrier(0);
        } catch (const par::ParallelError&) {
            ++failures;
        }
    });
    // lane 1 never arrives
    t1.join();
    CHECK(failures.load() == 1);
}
