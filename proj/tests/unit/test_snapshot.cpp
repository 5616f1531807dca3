#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "oscflat/snapshot.hpp"
#include "testutil.hpp"

using namespace oscflat;
namespace fs = std::filesystem;
using io::DumpGates;
using io::DumpMarks;
using io::RecordMeta;
using io::SnapshotDims;
using io::SnapshotFileWriter;
using io::SnapshotReader;
using testutil::Rng;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("oscflat_test_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter()++));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    static int& counter() {
        static int c = 0;
        return c;
    }
};

io::SpectraHeader tiny_spectra(int ebins) {
    io::SpectraHeader h;
    h.E0 = 0.0;
    h.E1 = 80.0;
    h.ebins = ebins;
    for (int s = 0; s < kSpeciesCount; ++s) {
        h.coupling[s] = 0.5 + s;
        h.f[s].assign(ebins, 0.0);
        for (int e = 0; e < ebins; ++e) h.f[s][e] = 0.01 * (s + 1) * (e + 1);
    }
    return h;
}

std::vector<double> random_payload(Rng& rng, std::size_t n) {
    std::vector<double> p(n);
    for (auto& x : p) x = rng.uniform(-1, 1);
    return p;
}

}  // namespace

TEST_CASE("mode-1 payload size arithmetic") {
    // the full-production dims: 1.28 GB per snapshot
    CHECK(io::mode1_payload_bytes(1000, 100, 4, 4, 100) == 1280000000ull);
    // tiny dims: 4 x 1 x 2 bins, 4 species, 4 comps -> 1024 bytes
    CHECK(io::mode1_payload_bytes(4, 1, 4, 4, 2) == 1024ull);
}

TEST_CASE("snapshot write-read round trip is bit exact") {
    TempDir tmp;
    Rng rng(1);
    const SnapshotDims dims{3, 2, 4, 4, 5};
    const auto payload =
        random_payload(rng, static_cast<std::size_t>(3) * 2 * 4 * 4 * 5);

    SnapshotFileWriter w(tmp.path.string(), "t", 1, 0, 100, 1, dims, tiny_spectra(5),
                         0xabcdefull);
    w.append({7, 61.5, 0.25, 1.5}, payload);
    w.close();

    SnapshotReader r(tmp.path.string() + "/tSnapshot0_0");
    CHECK(r.header().mode == 1);
    CHECK(r.header().config_hash == 0xabcdefull);
    CHECK(r.header().dim_names ==
          std::vector<std::string>({"r", "theta", "phi", "prtcl", "comp", "ebin"}));
    CHECK(r.header().dim_lens == std::vector<std::uint64_t>({1, 3, 2, 4, 4, 5}));
    CHECK(r.header().species[0] == "NuE");
    CHECK(r.header().has_spectra);
    CHECK(r.header().spectra.f[2][3] == tiny_spectra(5).f[2][3]);

    std::vector<double> back;
    RecordMeta meta;
    REQUIRE(r.next(meta, back));
    CHECK(meta.iter == 7);
    CHECK(meta.r == 61.5);
    CHECK(meta.dr == 0.25);
    CHECK(back == payload);  // bit-identical
    CHECK_FALSE(r.next(meta, back));
}

TEST_CASE("file rotation preserves global snapshot ordering") {
    TempDir tmp;
    Rng rng(2);
    const SnapshotDims dims{2, 1, 4, 4, 2};
    const std::size_t n = 2ull * 1 * 4 * 4 * 2;

    SnapshotFileWriter w(tmp.path.string(), "rot", 1, 0, /*new_file_step=*/2,
                         /*sync_step=*/1, dims, {}, 1);
    for (int i = 0; i < 5; ++i)
        w.append({static_cast<std::uint64_t>(i), 10.0 + i, 0.1, 0.0},
                 random_payload(rng, n));
    w.close();
    REQUIRE(w.files_written().size() == 3);  // 2 + 2 + 1 snapshots

    std::uint64_t prev_iter = 0;
    double prev_r = -1.0;
    int count = 0;
    for (const auto& f : w.files_written()) {
        SnapshotReader r(f);
        RecordMeta meta;
        std::vector<double> payload;
        while (r.next(meta, payload)) {
            if (count > 0) {
                CHECK(meta.iter > prev_iter);
                CHECK(meta.r > prev_r);
            }
            prev_iter = meta.iter;
            prev_r = meta.r;
            ++count;
        }
    }
    CHECK(count == 5);
}

TEST_CASE("a corrupted payload byte fails the checksum") {
    TempDir tmp;
    Rng rng(3);
    const SnapshotDims dims{2, 1, 4, 4, 2};
    const std::size_t n = 2ull * 1 * 4 * 4 * 2;
    SnapshotFileWriter w(tmp.path.string(), "c", 1, 0, 10, 1, dims, {}, 1);
    w.append({1, 10.0, 0.1, 0.0}, random_payload(rng, n));
    w.close();

    const std::string path = w.files_written()[0];
    // flip one byte inside the payload region (past the header)
    {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.seekg(0, std::ios::end);
        const auto size = static_cast<long>(f.tellg());
        f.seekp(size - 16);  // inside the last payload doubles
        char b;
        f.seekg(size - 16);
        f.read(&b, 1);
        b ^= 0x40;
        f.seekp(size - 16);
        f.write(&b, 1);
    }
    SnapshotReader r(path);
    RecordMeta meta;
    std::vector<double> payload;
    CHECK_THROWS_AS(r.next(meta, payload), IoError);
}

TEST_CASE("should_dump: OR semantics, independent criteria, zero disables") {
    const DumpMarks last{50.0, 100.0, 10};

    CHECK(io::should_dump({1.0, 0, 0}, 51.0, 0, 0, last));       // r advanced 1 km
    CHECK_FALSE(io::should_dump({2.0, 0, 0}, 51.0, 0, 0, last)); // not yet 2 km
    CHECK(io::should_dump({0, 10.0, 0}, 50.0, 111.0, 10, last)); // 11 s elapsed
    CHECK(io::should_dump({2.0, 10.0, 0}, 51.0, 111.0, 10, last));  // OR: time fires
    CHECK(io::should_dump({0, 0, 5}, 50.0, 100.0, 15, last));    // iterations
    CHECK_FALSE(io::should_dump({0, 0, 0}, 1e9, 1e9, 1000000, last));  // all disabled
}

TEST_CASE("dump gating bookkeeping is independent per mode") {
    // mode 1 gates on radius, mode 2 on iterations; firing one must not
    // disturb the other's marks
    DumpMarks m1{0.0, 0.0, 0}, m2{0.0, 0.0, 0};
    const DumpGates g1{5.0, 0, 0}, g2{0, 0, 3};

    int fires1 = 0, fires2 = 0;
    double r = 0.0;
    for (std::uint64_t it = 1; it <= 12; ++it) {
        r += 1.0;
        if (io::should_dump(g1, r, 0, it, m1)) {
            ++fires1;
            m1 = {r, 0, it};
        }
        if (io::should_dump(g2, r, 0, it, m2)) {
            ++fires2;
            m2 = {r, 0, it};
        }
    }
    CHECK(fires1 == 2);  // r = 5, 10
    CHECK(fires2 == 4);  // it = 3, 6, 9, 12
}

TEST_CASE("writer lane: async submission preserves record order") {
    TempDir tmp;
    Rng rng(4);
    const SnapshotDims dims{2, 1, 4, 4, 2};
    const std::size_t n = 2ull * 1 * 4 * 4 * 2;
    auto w1 = std::make_unique<SnapshotFileWriter>(tmp.path.string(), "q", 1, 0, 100, 1,
                                                   dims, io::SpectraHeader{}, 1);
    io::WriterLane lane(std::move(w1), nullptr, /*async=*/true, 2);
    for (int i = 0; i < 8; ++i) {
        io::WriterLane::Job job;
        job.mode = 1;
        job.meta = {static_cast<std::uint64_t>(i), 10.0 + i, 0.1, 0.0};
        job.payload = random_payload(rng, n);
        lane.submit(std::move(job));
    }
    lane.finish();

    SnapshotReader r(tmp.path.string() + "/qSnapshot0_0");
    RecordMeta meta;
    std::vector<double> payload;
    std::uint64_t expect = 0;
    while (r.next(meta, payload)) CHECK(meta.iter == expect++);
    CHECK(expect == 8);
}

TEST_CASE("mode-2 writer uses the 4-dim header") {
    TempDir tmp;
    const SnapshotDims dims{3, 2, 4, 4, 6};
    SnapshotFileWriter w(tmp.path.string(), "m2_", 2, 0, 10, 1, dims, {}, 9);
    std::vector<double> payload(3ull * 2 * 4, 0.25);
    w.append({1, 20.0, 0.1, 0.0}, payload);
    w.close();
    SnapshotReader r(tmp.path.string() + "/m2_Average0_0");
    CHECK(r.header().mode == 2);
    CHECK(r.header().dim_names ==
          std::vector<std::string>({"r", "theta", "phi", "prtcl"}));
    CHECK(r.header().payload_doubles() == 3ull * 2 * 4);
}
