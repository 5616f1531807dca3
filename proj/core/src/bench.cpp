#include "oscflat/bench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <mutex>
#include <sstream>
#include <thread>

#include "oscflat/beam.hpp"
#include "oscflat/geometry.hpp"
#include "oscflat/snapshot.hpp"

namespace oscflat::bench {

namespace {

using Clock = std::chrono::steady_clock;

double run_ns(const std::function<void()>& fn) {
    const auto t0 = Clock::now();
    fn();
    return std::chrono::duration<double, std::nano>(Clock::now() - t0).count();
}

/// Minimal fork-join pool for the loop-shape variants.
class Pool {
public:
    explicit Pool(int n) : n_(n) {
        for (int i = 1; i < n_; ++i)
            workers_.emplace_back([this, i] { worker(i); });
    }
    ~Pool() {
        {
            std::lock_guard<std::mutex> lk(m_);
            stop_ = true;
        }
        cv_.notify_all();
        for (auto& t : workers_) t.join();
    }

    /// fn(worker, workers) for every worker; returns when all are done.
    void parallel(const std::function<void(int, int)>& fn) {
        {
            std::lock_guard<std::mutex> lk(m_);
            fn_ = fn;
            pending_ = n_ - 1;
            ++epoch_;
        }
        cv_.notify_all();
        fn(0, n_);
        std::unique_lock<std::mutex> lk(m_);
        done_cv_.wait(lk, [&] { return pending_ == 0; });
    }

private:
    void worker(int id) {
        std::uint64_t seen = 0;
        for (;;) {
            std::function<void(int, int)> fn;
            {
                std::unique_lock<std::mutex> lk(m_);
                cv_.wait(lk, [&] { return stop_ || epoch_ != seen; });
                if (stop_) return;
                seen = epoch_;
                fn = fn_;
            }
            fn(id, n_);
            {
                std::lock_guard<std::mutex> lk(m_);
                if (--pending_ == 0) done_cv_.notify_all();
            }
        }
    }

    int n_;
    std::vector<std::thread> workers_;
    std::mutex m_;
    std::condition_variable cv_, done_cv_;
    std::function<void(int, int)> fn_;
    int pending_ = 0;
    std::uint64_t epoch_ = 0;
    bool stop_ = false;
};

// ---- kernel bodies; each returns a checksum over the produced data ----

double k_transcendental(const KernelSpec& s, long iters) {
    const int w = s.vector_width;
    AlignedVector<double> A(w), B(w);
    for (int i = 0; i < w; ++i) {
        A[i] = 0.25 + 0.5 * i / w;
        B[i] = 0.50 + 0.25 * i / w;
    }
    double* __restrict__ a = A.data();
    double* __restrict__ b = B.data();
    if (s.variant == "exp") {
        for (long it = 0; it < iters; ++it) {
#pragma omp simd
            for (int i = 0; i < w; ++i) a[i] = std::exp(-a[i]);
        }
    } else {  // sin_cos
        for (long it = 0; it < iters; ++it) {
#pragma omp simd
            for (int i = 0; i < w; ++i) {
                a[i] = std::sin(a[i]);
                b[i] = std::cos(b[i]);
            }
        }
    }
    double cs = 0.0;
    for (int i = 0; i < w; ++i) cs += a[i] + b[i];
    return cs;
}

double k_flop_madd(const KernelSpec& s, long iters) {
    const int w = s.vector_width;
    AlignedVector<double> A(w, 0.0), B(w, 1.0), C(w, 0.0), D(w, 1.0),
        E(w, 0.0), F(w, 1.0), G(w, 0.0), H(w, 1.0);
    double* __restrict__ a = A.data();
    double* __restrict__ b = B.data();
    double* __restrict__ c = C.data();
    double* __restrict__ d = D.data();
    double* __restrict__ e = E.data();
    double* __restrict__ f = F.data();
    double* __restrict__ g = G.data();
    double* __restrict__ h = H.data();
    const double x1 = 1.000001, x2 = 0.999999, x3 = 1.000002, x4 = 0.999998;
    for (long it = 0; it < iters; ++it) {
#pragma omp simd
        for (int i = 0; i < w; ++i) {
            a[i] += x1 * b[i];
            c[i] += x2 * d[i];
            e[i] += x3 * f[i];
            g[i] += x4 * h[i];
        }
    }
    double cs = 0.0;
    for (int i = 0; i < w; ++i) cs += a[i] + c[i] + e[i] + g[i];
    return cs;
}

// Structure-of-arrays and array-of-structures variants of the same update.
struct SoABlock {
    AlignedVector<double> a, b, c, d;
    explicit SoABlock(int len) : a(len, 0.5), b(len, 0.25), c(len, 0.75), d(len, 0.125) {}
};
struct AoSItem {
    double a = 0.5, b = 0.25, c = 0.75, d = 0.125;
};

double k_soa_aos(const KernelSpec& s, long iters, bool scalar_reference = false) {
    const int n_obj = 1000;
    const int len = s.array_len;
    double cs = 0.0;
    if (s.variant == "soa" || scalar_reference) {
        std::vector<SoABlock> objs(n_obj, SoABlock(len));
        for (long it = 0; it < iters; ++it) {
            for (int o = 0; o < n_obj; ++o) {
                double* __restrict__ a = objs[o].a.data();
                double* __restrict__ b = objs[o].b.data();
                double* __restrict__ c = objs[o].c.data();
                double* __restrict__ d = objs[o].d.data();
                if (scalar_reference) {
                    for (int i = 0; i < len; ++i) {
                        a[i] = a[i] * 0.999 + b[i] * 0.001;
                        c[i] = c[i] * 0.999 + d[i] * 0.001;
                    }
                } else {
#pragma omp simd
                    for (int i = 0; i < len; ++i) {
                        a[i] = a[i] * 0.999 + b[i] * 0.001;
                        c[i] = c[i] * 0.999 + d[i] * 0.001;
                    }
                }
            }
        }
        for (int o = 0; o < n_obj; ++o)
            for (int i = 0; i < len; ++i) cs += objs[o].a[i] + objs[o].c[i];
    } else {  // aos
        std::vector<AoSItem> items(static_cast<std::size_t>(n_obj) * len);
        for (long it = 0; it < iters; ++it) {
            for (int o = 0; o < n_obj; ++o) {
                AoSItem* base = items.data() + static_cast<std::size_t>(o) * len;
                for (int i = 0; i < len; ++i) {
                    base[i].a = base[i].a * 0.999 + base[i].b * 0.001;
                    base[i].c = base[i].c * 0.999 + base[i].d * 0.001;
                }
            }
        }
        for (int o = 0; o < n_obj; ++o)
            for (int i = 0; i < len; ++i) {
                const AoSItem& it = items[static_cast<std::size_t>(o) * len + i];
                cs += it.a + it.c;
            }
    }
    return cs;
}

double k_fused(const KernelSpec& s, long iters) {
    const int ebins = s.vector_width;
    BeamState in(Species::NuE, ebins), out(Species::NuE, ebins);
    in.init_flavor_state();
    out.init_flavor_state();
    const auto vac = geom::VacuumTable::make(0.0, 80.0, ebins, 3e-3, 0.1);
    AlignedVector<double> fw(padded_len(ebins), 0.0);
    for (int e = 0; e < ebins; ++e) fw[e] = 1.0 / ebins;
    const Ham2 hb{0.3, 0.05, 0.02};

    ReductionRow row;
    if (s.variant == "unfused") {
        for (long it = 0; it < iters; ++it) {
            flavor::evolve(vac.view(), hb, 1e-3, in, out);
            row += flavor::e_sum(out, {fw.data(), fw.size()});
        }
    } else {
        for (long it = 0; it < iters; ++it)
            row += flavor::evolve_sum(vac.view(), hb, 1e-3, in, out, {fw.data(), fw.size()});
    }
    return row.d + row.o_re + row.o_im + out.ar()[0] + out.br()[ebins - 1];
}

double k_loop_shape(const KernelSpec& s, long iters) {
    const int w = s.vector_width;
    const int lanes = std::max(1, s.lanes);
    AlignedVector<double> A(w, 0.5), B(w, 0.25);
    double* __restrict__ a = A.data();
    double* __restrict__ b = B.data();

    auto loop1 = [&](int lo, int hi) {
        for (int i = lo; i < hi; ++i) a[i] = a[i] * 0.999 + 0.001;
    };
    auto loop2 = [&](int lo, int hi) {
        for (int i = lo; i < hi; ++i) b[i] = b[i] * 0.998 + 0.002 * a[i];
    };

    auto range = [&](int worker, int workers, int n) {
        const int per = (n + workers - 1) / workers;
        const int lo = std::min(n, worker * per);
        return std::pair<int, int>(lo, std::min(n, lo + per));
    };

    if (s.variant == "spawn") {
        const std::function<void(int, int)> loops[2] = {loop1, loop2};
        for (long it = 0; it < iters; ++it) {
            for (const auto& fn : loops) {
                std::vector<std::thread> ts;
                for (int k = 1; k < lanes; ++k)
                    ts.emplace_back([&, k] {
                        auto [lo, hi] = range(k, lanes, w);
                        fn(lo, hi);
                    });
                auto [lo, hi] = range(0, lanes, w);
                fn(lo, hi);
                for (auto& t : ts) t.join();
            }
        }
    } else if (s.variant == "pool") {
        Pool pool(lanes);
        for (long it = 0; it < iters; ++it) {
            pool.parallel([&](int k, int n) {
                auto [lo, hi] = range(k, n, w);
                loop1(lo, hi);
            });
            pool.parallel([&](int k, int n) {
                auto [lo, hi] = range(k, n, w);
                loop2(lo, hi);
            });
        }
    } else if (s.variant == "chunked") {
        Pool pool(lanes);
        const int chunk = 256;
        for (long it = 0; it < iters; ++it) {
            for (int which = 0; which < 2; ++which) {
                std::atomic<int> next{0};
                pool.parallel([&](int, int) {
                    for (;;) {
                        const int lo = next.fetch_add(chunk);
                        if (lo >= w) break;
                        const int hi = std::min(w, lo + chunk);
                        if (which == 0) loop1(lo, hi);
                        else loop2(lo, hi);
                    }
                });
            }
        }
    } else {  // serial
        for (long it = 0; it < iters; ++it) {
            loop1(0, w);
            loop2(0, w);
        }
    }
    double cs = 0.0;
    for (int i = 0; i < w; ++i) cs += a[i] + b[i];
    return cs;
}

double k_io_buffering(const KernelSpec& s, long iters) {
    // Dims of one synthetic snapshot; payload = product * 8 bytes.
    const int th = 8, ph = 4, pr = 4, cm = 4;
    const int eb = std::max(4, s.vector_width / 64);
    const std::size_t n = static_cast<std::size_t>(th) * ph * pr * cm * eb;
    std::vector<double> data(n);
    for (std::size_t i = 0; i < n; ++i) data[i] = 1e-3 * static_cast<double>(i % 997);

    namespace fs = std::filesystem;
    const fs::path path = fs::temp_directory_path() /
                          ("oscflat_bench_io_" + s.variant + ".bin");

    std::uint64_t file_hash = 0;
    for (long it = 0; it < iters; ++it) {
        std::FILE* fp = std::fopen(path.string().c_str(), "wb");
        if (!fp) throw IoError("bench: cannot open " + path.string());
        if (s.variant == "nested") {
            std::size_t idx = 0;
            for (int t = 0; t < th; ++t)
                for (int p = 0; p < ph; ++p)
                    for (int q = 0; q < pr; ++q)
                        for (int c = 0; c < cm; ++c)
                            for (int e = 0; e < eb; ++e)
                                std::fwrite(&data[idx++], sizeof(double), 1, fp);
        } else if (s.variant == "single") {
            for (std::size_t i = 0; i < n; ++i)
                std::fwrite(&data[i], sizeof(double), 1, fp);
        } else {  // buffered: extract to a buffer, one write call
            std::vector<double> buf(n);
            for (std::size_t i = 0; i < n; ++i) buf[i] = data[i];
            std::fwrite(buf.data(), sizeof(double), n, fp);
        }
        std::fclose(fp);
    }

    // Checksum the written file so all variants must produce identical bytes.
    std::FILE* fp = std::fopen(path.string().c_str(), "rb");
    if (fp) {
        std::vector<double> back(n);
        const std::size_t got = std::fread(back.data(), sizeof(double), n, fp);
        std::fclose(fp);
        file_hash = io::fnv1a(back.data(), got * sizeof(double));
    }
    std::error_code ec;
    fs::remove(path, ec);
    return static_cast<double>(file_hash % (1ull << 52));
}

double dispatch(const KernelSpec& s, long iters) {
    switch (s.family) {
        case Family::Transcendental: return k_transcendental(s, iters);
        case Family::FlopMadd: return k_flop_madd(s, iters);
        case Family::SoAvsAoS: return k_soa_aos(s, iters, s.variant == "scalar");
        case Family::FusedVsUnfused: return k_fused(s, iters);
        case Family::LoopShape: return k_loop_shape(s, iters);
        case Family::IoBuffering: return k_io_buffering(s, iters);
    }
    throw ConfigError("bench: unknown family");
}

double elems_per_iter(const KernelSpec& s) {
    switch (s.family) {
        case Family::SoAvsAoS: return 1000.0 * s.array_len;
        case Family::FusedVsUnfused: return s.vector_width;
        case Family::IoBuffering: {
            const int eb = std::max(4, s.vector_width / 64);
            return 8.0 * 4 * 4 * 4 * eb * 8;  // bytes
        }
        default: return s.vector_width;
    }
}

}  // namespace

const char* family_name(Family f) {
    switch (f) {
        case Family::Transcendental: return "transcendental";
        case Family::FlopMadd: return "flop_madd";
        case Family::SoAvsAoS: return "soa_vs_aos";
        case Family::FusedVsUnfused: return "fused_vs_unfused";
        case Family::LoopShape: return "loop_shape";
        case Family::IoBuffering: return "io_buffering";
    }
    return "?";
}

double kernel_checksum(const KernelSpec& spec) {
    return dispatch(spec, std::max(1L, spec.outer_iters));
}

KernelResult run_kernel(const KernelSpec& spec) {
    if (spec.repetitions < 5) throw ConfigError("bench: repetitions must be >= 5");

    // Auto-scale until one timed run is at least 50 ms (timer resolution).
    long iters = std::max(1L, spec.outer_iters);
    double cs = 0.0;
    double t = 0.0;
    for (int tries = 0; tries < 12; ++tries) {
        t = run_ns([&] { cs = dispatch(spec, iters); });
        if (t >= 50e6) break;
        const double scale = std::min(64.0, std::max(2.0, 55e6 / std::max(t, 1e3)));
        iters = static_cast<long>(iters * scale) + 1;
    }

    std::vector<double> times(spec.repetitions);
    for (int r = 0; r < spec.repetitions; ++r)
        times[r] = run_ns([&] { cs = dispatch(spec, iters); });

    std::vector<double> sorted = times;
    std::sort(sorted.begin(), sorted.end());
    KernelResult res;
    res.name = spec.name.empty() ? family_name(spec.family) : spec.name;
    res.variant = spec.variant;
    res.median_ns = sorted[sorted.size() / 2];
    res.min_ns = sorted.front();
    res.max_ns = sorted.back();
    res.checksum = cs;
    res.outer_iters_used = iters;

    const double elems = elems_per_iter(spec) * static_cast<double>(iters);
    if (spec.family == Family::IoBuffering) {
        res.throughput = elems / (res.median_ns / 1e9) / 1e6;  // MB/s
        res.throughput_unit = "MB/s";
    } else {
        res.throughput = elems / (res.median_ns / 1e9) / 1e6;
        res.throughput_unit = "Melem/s";
    }

    // Stability: coefficient of variation across three run groups.
    const int g = spec.repetitions / 3;
    double means[3] = {0, 0, 0};
    for (int i = 0; i < 3 * g; ++i) means[i / g] += times[i] / g;
    const double m = (means[0] + means[1] + means[2]) / 3.0;
    double var = 0.0;
    for (double x : means) var += (x - m) * (x - m) / 3.0;
    res.noisy = (std::sqrt(var) / m) > 0.25;
    return res;
}

std::vector<KernelSpec> default_suite(bool quick) {
    std::vector<KernelSpec> suite;
    const int reps = quick ? 5 : 9;
    const long base = quick ? 50 : 500;

    for (int w : {64, 512, 4096}) {
        suite.push_back({"sincos_w" + std::to_string(w), Family::Transcendental,
                         "sin_cos", w, base, 100, reps, 1});
        suite.push_back({"exp_w" + std::to_string(w), Family::Transcendental, "exp", w,
                         base, 100, reps, 1});
        suite.push_back({"madd_w" + std::to_string(w), Family::FlopMadd, "", w,
                         base * 4, 100, reps, 1});
    }
    suite.push_back({"soa", Family::SoAvsAoS, "soa", 512, base, 100, reps, 1});
    suite.push_back({"aos", Family::SoAvsAoS, "aos", 512, base, 100, reps, 1});
    suite.push_back({"fused", Family::FusedVsUnfused, "fused", 256, base * 2, 100, reps, 1});
    suite.push_back({"unfused", Family::FusedVsUnfused, "unfused", 256, base * 2, 100, reps, 1});
    const int lanes = static_cast<int>(std::max(2u, std::thread::hardware_concurrency()));
    for (const char* v : {"serial", "spawn", "pool", "chunked"})
        suite.push_back({std::string("loop_") + v, Family::LoopShape, v, 1 << 16,
                         quick ? 10 : 50, 100, reps, lanes});
    for (const char* v : {"nested", "single", "buffered"})
        suite.push_back({std::string("io_") + v, Family::IoBuffering, v, 4096,
                         quick ? 2 : 5, 100, reps, 1});
    return suite;
}

std::string suite_csv(const std::vector<KernelResult>& results) {
    std::ostringstream os;
    os << "kernel,variant,outer_iters,median_ns,min_ns,max_ns,throughput,unit,checksum,noisy\n";
    os.precision(12);
    for (const auto& r : results) {
        os << r.name << "," << r.variant << "," << r.outer_iters_used << ","
           << r.median_ns << "," << r.min_ns << "," << r.max_ns << ","
           << r.throughput << "," << r.throughput_unit << "," << r.checksum << ","
           << (r.noisy ? 1 : 0) << "\n";
    }
    return os.str();
}

}  // namespace oscflat::bench
