// oscflat command-line driver: run, resume, autotune, bench, analyze.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "oscflat/analysis.hpp"
#include "oscflat/bench.hpp"
#include "oscflat/config.hpp"
#include "oscflat/parallel.hpp"
#include "oscflat/snapshot.hpp"
#include "oscflat/solver.hpp"

namespace {

using namespace oscflat;

constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitIo = 4;

struct RunOptions {
    std::string config_path;
    std::string snapshot_path;
    std::string output_dir = ".";
    std::vector<std::string> overrides;
    int lanes = 0;  // 0: take from config
    bool verbose = false;
};

io::RunConfig load_config(const RunOptions& opt) {
    io::RunConfig cfg = io::parse_config_file(opt.config_path);
    for (const auto& ov : opt.overrides) io::apply_override(cfg, ov);
    for (const auto& w : cfg.warnings) std::cerr << "warning: " << w << "\n";
    return cfg;
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << text;
}

/// Per-mode dump gating + extraction, feeding the writer lane.
class DumpDriver {
public:
    DumpDriver(const io::RunConfig& cfg, const solver::Environment& env,
               const std::string& out_dir, std::uint64_t cfg_hash)
        : cfg_(cfg), env_(env) {
        const io::SnapshotDims dims{env.grid.abins, env.grid.pbins, kSpeciesCount, 4,
                                    env.ebins};
        std::unique_ptr<io::SnapshotFileWriter> w1, w2;
        if (cfg.dumpMode & 1)
            w1 = std::make_unique<io::SnapshotFileWriter>(
                out_dir, cfg.filePrefix, 1, 0, cfg.newFile_step, cfg.sync_step, dims,
                env.spectra_header(), cfg_hash);
        if (cfg.dumpMode & 2)
            w2 = std::make_unique<io::SnapshotFileWriter>(
                out_dir, cfg.filePrefix, 2, 0, cfg.newFile_step, cfg.sync_step, dims,
                env.spectra_header(), cfg_hash);
        if (w1 || w2)
            lane_ = std::make_unique<io::WriterLane>(std::move(w1), std::move(w2),
                                                     cfg.designatedWriter != 0);
        gates_[0] = {cfg.r_step1, cfg.t_step1, cfg.itr_step1};
        gates_[1] = {cfg.r_step2, cfg.t_step2, cfg.itr_step2};
    }

    void reset_marks(double r, std::uint64_t iter) {
        for (auto& m : marks_) m = {r, 0.0, iter};
    }

    solver::IoHook hook() {
        if (!lane_) return {};
        return [this](const solver::HookInfo& info, const solver::BeamSet& set) {
            on_step(info, set);
        };
    }

    /// Unconditional whole-state dump (used for the final state).
    void dump_final(const solver::HookInfo& info, const solver::BeamSet& set) {
        if (!lane_ || !(cfg_.dumpMode & 1)) return;
        io::WriterLane::Job job;
        job.mode = 1;
        job.meta = {info.iter, info.r, info.dr, info.t_wall};
        solver::extract_mode1(set, env_.grid, job.payload);
        lane_->submit(std::move(job));
    }

    void finish() {
        if (lane_) lane_->finish();
    }

private:
    void on_step(const solver::HookInfo& info, const solver::BeamSet& set) {
        for (int mode = 1; mode <= 2; ++mode) {
            if (!(cfg_.dumpMode & mode)) continue;
            auto& mark = marks_[mode - 1];
            if (!io::should_dump(gates_[mode - 1], info.r, info.t_wall, info.iter, mark))
                continue;
            io::WriterLane::Job job;
            job.mode = mode;
            job.meta = {info.iter, info.r, info.dr, info.t_wall};
            if (mode == 1)
                solver::extract_mode1(set, env_.grid, job.payload);
            else
                solver::extract_mode2(set, env_.grid, env_, job.payload);
            lane_->submit(std::move(job));
            mark = {info.r, info.t_wall, info.iter};
        }
    }

    const io::RunConfig& cfg_;
    const solver::Environment& env_;
    std::unique_ptr<io::WriterLane> lane_;
    io::DumpGates gates_[2];
    io::DumpMarks marks_[2];
};

int cmd_run(const RunOptions& opt, bool resume) {
    io::RunConfig cfg = load_config(opt);
    io::require_runnable(cfg);
    const std::uint64_t hash = io::config_hash(cfg);

    solver::Environment env = solver::Environment::from_config(cfg);
    solver::StepControl ctl = solver::StepControl::from_config(cfg);
    const int lanes = opt.lanes > 0 ? opt.lanes : std::max(1, cfg.lanes);

    solver::Engine engine(env, lanes);
    engine.init_states();

    std::vector<std::string> warnings;
    if (resume) {
        const io::RecordMeta meta =
            solver::resume_from(opt.snapshot_path, engine.state(), env.grid, hash, &warnings);
        ctl.r = meta.r;
        ctl.dr = meta.dr;
        ctl.iter = meta.iter;
        for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
        if (opt.verbose)
            std::cerr << "resumed at r = " << meta.r << " km, iteration " << meta.iter
                      << "\n";
    }

    std::filesystem::create_directories(opt.output_dir);
    DumpDriver dumps(cfg, env, opt.output_dir, hash);
    dumps.reset_marks(ctl.r, ctl.iter);

    const solver::RunSummary summary = engine.run(ctl, dumps.hook());
    dumps.dump_final({summary.iterations + ctl.iter, summary.final_r, ctl.dr,
                      summary.wall_s},
                     engine.state());
    dumps.finish();

    const std::string kv = summary.to_kv();
    write_file(opt.output_dir + "/summary.kv", kv);
    std::cout << "run finished: r = " << summary.final_r << " km after "
              << summary.iterations << " iterations (" << summary.accepted
              << " accepted, " << summary.rejected << " rejected), "
              << summary.wall_s << " s, termination: " << summary.termination << "\n";
    if (opt.verbose) std::cout << kv;
    return 0;
}

int cmd_autotune(const RunOptions& opt, bool measure) {
    io::RunConfig cfg = load_config(opt);

    std::vector<par::WorkerProfile> profiles;
    profiles.push_back({"cpu", cfg.cpu_threads, cfg.cpu_per_beam_us * 1e-6});
    profiles.push_back({"accel", cfg.accel_threads, cfg.accel_per_beam_us * 1e-6});

    // Negative beam indices request the capability pre-benchmark: measure the
    // real evolution step and rescale the declared per-beam times.
    if (measure || (cfg.multiNodeBench != 0 && (cfg.start_beam < 0 || cfg.end_beam < 0))) {
        io::RunConfig bench_cfg = cfg;
        bench_cfg.model = "bulb";
        bench_cfg.Abins = std::min(cfg.Abins > 1 ? cfg.Abins : 64, 64);
        bench_cfg.Pbins = 1;
        bench_cfg.Ebins = std::min(cfg.Ebins > 1 ? cfg.Ebins : 16, 16);
        if (!bench_cfg.provided.count("E0")) bench_cfg.E0 = 0.0;
        if (!bench_cfg.provided.count("E1")) bench_cfg.E1 = 80.0;
        solver::Environment env = solver::Environment::from_config(bench_cfg);
        solver::Engine engine(env, 1);
        engine.init_states();
        solver::StepControl ctl;
        ctl.r = std::max(bench_cfg.R0, bench_cfg.Rv);
        ctl.R0 = ctl.r;
        ctl.Rn = ctl.r + 1e3;
        ctl.dr = ctl.dr_max = 1e-3;
        ctl.eps0 = 1e30;  // fixed-step capability probe
        ctl.Ts = 20;
        const auto t0 = std::chrono::steady_clock::now();
        engine.run(ctl);
        const double wall = std::chrono::duration<double>(
                                std::chrono::steady_clock::now() - t0)
                                .count();
        const double measured =
            wall / (20.0 * bench_cfg.Abins * kSpeciesCount);
        const double scale = measured / (cfg.cpu_per_beam_us * 1e-6);
        for (auto& p : profiles) p.per_beam_time *= scale;
        std::cout << "measured per-beam step time: " << measured * 1e6 << " us\n";
    }

    const int total_beams = cfg.Abins * std::max(1, cfg.Pbins);
    const par::AutotuneReport rep =
        par::autotune(total_beams, profiles, cfg.minNodes, cfg.maxNodes, cfg.ratio_min,
                      cfg.ratio_max, cfg.ratio_step, cfg.knee_threshold);

    std::filesystem::create_directories(opt.output_dir);
    const std::string path = opt.output_dir + "/autotune.csv";
    write_file(path, rep.to_csv());
    std::cout << "autotune grid written to " << path << "\n";
    for (const auto& c : rep.grid)
        if (c.best_for_nodes)
            std::cout << "  nodes " << c.nodes << ": best ratio " << c.ratio << " -> "
                      << c.steps_per_sec << " steps/s\n";
    std::cout << "knee at " << rep.knee_nodes << " nodes (gain threshold "
              << rep.knee_threshold * 100 << "%)\n";
    return 0;
}

int cmd_bench(const std::string& out_csv, const std::string& family, bool quick) {
    auto suite = bench::default_suite(quick);
    std::vector<bench::KernelResult> results;
    for (const auto& spec : suite) {
        if (!family.empty() && family != bench::family_name(spec.family)) continue;
        auto r = bench::run_kernel(spec);
        std::cout << r.name << (r.variant.empty() ? "" : "/" + r.variant) << ": "
                  << r.median_ns / 1e6 << " ms median, " << r.throughput << " "
                  << r.throughput_unit << (r.noisy ? "  [noisy]" : "") << "\n";
        results.push_back(std::move(r));
    }
    if (results.empty()) throw ConfigError("bench: no kernels match family " + family);
    if (!out_csv.empty()) {
        write_file(out_csv, bench::suite_csv(results));
        std::cout << "report written to " << out_csv << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"oscflat: two-flavor collective neutrino oscillation simulator"};
    app.require_subcommand(1);

    RunOptions opt;
    bool measure = false;
    bool quick = false;
    std::string bench_csv = "bench.csv";
    std::string bench_family;
    std::string analyze_input, analyze_what = "all";

    auto add_common = [&](CLI::App* cmd, bool need_config) {
        if (need_config)
            cmd->add_option("-c,--config", opt.config_path, "configuration file")
                ->required();
        cmd->add_option("-o,--output", opt.output_dir, "output directory");
        cmd->add_option("--override", opt.overrides,
                        "key=value applied after config parse (repeatable)");
        cmd->add_option("--lanes", opt.lanes, "worker lane count override");
        cmd->add_flag("-v,--verbose", opt.verbose, "verbose output");
    };

    CLI::App* run = app.add_subcommand("run", "run the evolution loop");
    add_common(run, true);

    CLI::App* resume = app.add_subcommand("resume", "resume from a snapshot");
    add_common(resume, true);
    resume->add_option("-s,--snapshot", opt.snapshot_path, "mode-1 snapshot file")
        ->required();

    CLI::App* tune = app.add_subcommand("autotune", "search the nodes x load-ratio grid");
    add_common(tune, true);
    tune->add_flag("--measure", measure, "calibrate with a real evolution micro-run");

    CLI::App* bench_cmd = app.add_subcommand("bench", "run the kernel benchmark suite");
    bench_cmd->add_option("--csv", bench_csv, "CSV report path");
    bench_cmd->add_option("--family", bench_family, "run only one kernel family");
    bench_cmd->add_flag("--quick", quick, "fewer repetitions");

    CLI::App* analyze = app.add_subcommand("analyze", "emit plot grids from a snapshot");
    analyze->add_option("-i,--input", analyze_input, "snapshot file")->required();
    analyze->add_option("-o,--output", opt.output_dir, "output directory");
    analyze->add_option("--what", analyze_what, "survival|spectra|content|all");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(opt, false);
        if (resume->parsed()) return cmd_run(opt, true);
        if (tune->parsed()) return cmd_autotune(opt, measure);
        if (bench_cmd->parsed()) return cmd_bench(bench_csv, bench_family, quick);
        if (analyze->parsed()) {
            const auto files =
                analysis::analyze_file(analyze_input, opt.output_dir, analyze_what);
            for (const auto& f : files) std::cout << "wrote " << f << "\n";
            return 0;
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const par::ParallelError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
