#include "oscflat/solver.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

#include "oscflat/units.hpp"

namespace oscflat::solver {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

/// Loop control packet broadcast from the root lane each iteration.
struct CtlPacket {
    double r = 0.0;
    double dr = 0.0;
    std::uint64_t iter = 0;
    int terminate = 0;  // 0 run, 1 radius, 2 iterations, 3 walltime
};

}  // namespace

StepControl StepControl::from_config(const io::RunConfig& cfg) {
    StepControl c;
    c.dr = cfg.dr;
    c.dr_max = cfg.max_dr;
    c.dr_min = cfg.min_dr;
    c.eps0 = cfg.eps0;
    c.kappa = cfg.kappa;
    c.r = cfg.R0;
    c.R0 = cfg.R0;
    c.Rn = cfg.Rn;
    c.Ts = cfg.Ts;
    c.Tn = cfg.Tn;
    return c;
}

double step_size_update(const StepControl& ctl, double err, bool accepted) {
    if (err < 0.0) throw NumericError("step_size_update: negative error");
    const double raw = ctl.kappa * ctl.dr * std::sqrt(ctl.eps0 / std::max(err, 1e-300));
    if (!accepted && raw < ctl.dr_min)
        throw NumericError("step collapse: rejected step would need dr = " +
                           std::to_string(raw) + " km < min_dr at r = " +
                           std::to_string(ctl.r) + " km");
    return std::clamp(raw, ctl.dr_min, ctl.dr_max);
}

BeamSet::BeamSet(const geom::AngleGrid& grid, int ebins)
    : n_traj_(grid.trajectories()), ebins_(ebins) {
    beams_.reserve(static_cast<std::size_t>(n_traj_) * kSpeciesCount);
    for (int j = 0; j < n_traj_; ++j)
        for (int s = 0; s < kSpeciesCount; ++s)
            beams_.emplace_back(static_cast<Species>(s), ebins);
}

Environment Environment::from_config(const io::RunConfig& cfg) {
    Environment env;
    env.grid = geom::AngleGrid::make(cfg.geometry_model(), cfg.Abins, cfg.Pbins, cfg.Rv);
    env.ebins = cfg.Ebins;
    env.perturb = cfg.perturb;
    env.vacuum = geom::VacuumTable::make(cfg.E0, cfg.E1, cfg.Ebins, cfg.dm2, cfg.theta);

    env.tables.reserve(kSpeciesCount);
    for (int s = 0; s < kSpeciesCount; ++s) {
        const Species sp = static_cast<Species>(s);
        spectra::SpectrumParams p;
        p.T = cfg.T(sp);
        p.Emean = cfg.Emean(sp);
        p.eta = cfg.eta(sp);
        p.L = cfg.L(sp);
        const double Em = (p.Emean > 0.0)
                              ? p.Emean
                              : spectra::mean_energy_from_temperature(p.T, p.eta);
        const double coupling =
            cfg.hvvScale * units::hvv_coupling_per_km(p.L, Em, cfg.Rv);
        env.tables.emplace_back(p, cfg.E0, cfg.E1, cfg.Ebins, coupling);
        env.couplings[s] = coupling;
    }

    env.matt.Ye = cfg.Ye;
    env.matt.nb0 = cfg.nb0;
    env.matt.Rnu = cfg.Rv;
    env.matt.hNS = cfg.hNS;
    env.matt.Mns = cfg.Mns;
    env.matt.gs = cfg.gs;
    env.matt.S = cfg.S;
    env.matt.profile = cfg.matter_profile();
    return env;
}

io::SpectraHeader Environment::spectra_header() const {
    io::SpectraHeader h;
    h.E0 = tables[0].E0();
    h.E1 = tables[0].E1();
    h.ebins = static_cast<std::uint64_t>(ebins);
    for (int s = 0; s < kSpeciesCount; ++s) {
        h.coupling[s] = tables[s].coupling();
        const auto f = tables[s].f_values();
        h.f[s].assign(f.begin(), f.end());
    }
    return h;
}

std::string RunSummary::to_kv() const {
    std::ostringstream os;
    os.precision(17);
    os << "final_r= " << final_r << "\n"
       << "iterations= " << iterations << "\n"
       << "accepted= " << accepted << "\n"
       << "rejected= " << rejected << "\n"
       << "termination= " << termination << "\n"
       << "wall_s= " << wall_s << "\n"
       << "phase_hamiltonian_s= " << phase_hamiltonian_s << "\n"
       << "phase_evolve_s= " << phase_evolve_s << "\n"
       << "phase_io_s= " << phase_io_s << "\n"
       << "max_worker_wait_s= " << max_worker_wait_s << "\n"
       << "final_max_norm_dev= " << final_max_norm_dev << "\n";
    return os.str();
}

void extract_mode1(const BeamSet& set, const geom::AngleGrid& grid,
                   std::vector<double>& payload) {
    const int ebins = set.ebins();
    payload.resize(static_cast<std::size_t>(grid.trajectories()) * kSpeciesCount * 4 * ebins);
    std::size_t at = 0;
    for (int j = 0; j < grid.trajectories(); ++j) {
        for (int s = 0; s < kSpeciesCount; ++s) {
            const BeamState& b = set[j * kSpeciesCount + s];
            const double* comps[4] = {b.ar(), b.ai(), b.br(), b.bi()};
            for (const double* c : comps)
                for (int e = 0; e < ebins; ++e) payload[at++] = c[e];
        }
    }
}

void fill_mode1(BeamSet& set, const geom::AngleGrid& grid,
                std::span<const double> payload) {
    const int ebins = set.ebins();
    const std::size_t expect =
        static_cast<std::size_t>(grid.trajectories()) * kSpeciesCount * 4 * ebins;
    if (payload.size() != expect)
        throw IoError("fill_mode1: payload size does not match the configured problem");
    std::size_t at = 0;
    for (int j = 0; j < grid.trajectories(); ++j) {
        for (int s = 0; s < kSpeciesCount; ++s) {
            BeamState& b = set[j * kSpeciesCount + s];
            double* comps[4] = {b.ar(), b.ai(), b.br(), b.bi()};
            for (double* c : comps)
                for (int e = 0; e < ebins; ++e) c[e] = payload[at++];
        }
    }
}

void extract_mode2(const BeamSet& set, const geom::AngleGrid& grid,
                   const Environment& env, std::vector<double>& payload) {
    payload.resize(static_cast<std::size_t>(grid.trajectories()) * kSpeciesCount);
    std::size_t at = 0;
    for (int j = 0; j < grid.trajectories(); ++j) {
        for (int s = 0; s < kSpeciesCount; ++s) {
            const BeamState& b = set[j * kSpeciesCount + s];
            const auto fw = env.tables[s].weights();
            double acc = 0.0;
            for (int e = 0; e < b.ebins(); ++e)
                acc += (b.ar()[e] * b.ar()[e] + b.ai()[e] * b.ai()[e]) * fw[e];
            payload[at++] = acc;
        }
    }
}

io::RecordMeta resume_from(const std::string& path, BeamSet& set,
                           const geom::AngleGrid& grid, std::uint64_t expect_hash,
                           std::vector<std::string>* warnings) {
    io::SnapshotReader reader(path);
    const auto& h = reader.header();
    if (h.mode != 1)
        throw IoError("resume: " + path + " is not a whole-state (mode 1) snapshot");
    const std::vector<std::uint64_t> expect = {
        1, static_cast<std::uint64_t>(grid.abins), static_cast<std::uint64_t>(grid.pbins),
        kSpeciesCount, 4, static_cast<std::uint64_t>(set.ebins())};
    if (h.dim_lens != expect)
        throw IoError("resume: snapshot dims do not match the configured problem");
    if (h.config_hash != expect_hash && warnings)
        warnings->push_back("resume: config hash mismatch (continuing anyway)");
    std::vector<double> payload;
    const io::RecordMeta meta = reader.read_last(payload);
    fill_mode1(set, grid, payload);
    return meta;
}

// ------------------------- Engine -------------------------

struct Engine::Impl {
    const Environment* env;
    int lanes;
    par::Comm comm;
    std::vector<par::Partition> parts;

    BeamSet psi0, mid, full1, full2, avgA, half2, full3, result;

    std::array<geom::RadiusCache, 3> cache;  // [0]=current, [1]=mid, [2]=end
    // dl slots: cache[0].dl = first half step, cache[1].dl = second half step,
    // cache[2].dl = full step
    std::vector<ReductionRow> rows_a, rows_b;
    AlignedVector<double> stage_a, stage_b;
    std::vector<Ham2> hvvA, hvvB, hvvC;  // H0/H3, H1, H2 per trajectory

    geom::PartialSums sums0, sums1, sums2, sums3;

    // root-side control and accounting
    StepControl ctl;
    CtlPacket pkt;
    std::uint64_t accepted = 0, rejected = 0;
    double t_ham = 0.0, t_evolve = 0.0, t_io = 0.0;
    Clock::time_point t_start;

    Impl(const Environment& e, int nlanes)
        : env(&e), lanes(nlanes), comm(nlanes),
          parts(par::make_partitions(e.grid.abins, nlanes)),
          psi0(e.grid, e.ebins), mid(e.grid, e.ebins), full1(e.grid, e.ebins),
          full2(e.grid, e.ebins), avgA(e.grid, e.ebins), half2(e.grid, e.ebins),
          full3(e.grid, e.ebins), result(e.grid, e.ebins) {
        const int n_traj = e.grid.trajectories();
        for (auto& c : cache) c.resize(e.grid.abins);
        rows_a.resize(static_cast<std::size_t>(n_traj) * kSpeciesCount);
        rows_b.resize(rows_a.size());
        stage_a.resize(static_cast<std::size_t>(e.grid.abins) * geom::PartialSums::kDoubles);
        stage_b.resize(stage_a.size());
        hvvA.resize(n_traj);
        hvvB.resize(n_traj);
        hvvC.resize(n_traj);
    }

    std::pair<int, int> theta_range(int lane) const {
        return {parts[lane].start_beam, parts[lane].end_beam};
    }

    void check_sums_finite(double r) const {
        double buf[geom::PartialSums::kDoubles];
        for (const geom::PartialSums* s : {&sums0, &sums1, &sums2, &sums3}) {
            s->to_doubles(buf);
            for (double v : buf)
                if (!std::isfinite(v))
                    throw NumericError("non-finite Hamiltonian sum at r = " +
                                       std::to_string(r) + " km, iteration " +
                                       std::to_string(pkt.iter));
        }
    }

    void init_lane_states(int lane) {
        const auto [t_lo, t_hi] = theta_range(lane);
        const auto& grid = env->grid;
        for (int t = t_lo; t < t_hi; ++t) {
            for (int p = 0; p < grid.pbins; ++p) {
                const int j = grid.traj_index(t, p);
                for (int s = 0; s < kSpeciesCount; ++s) {
                    const int idx = j * kSpeciesCount + s;
                    psi0[idx].init_flavor_state(env->perturb,
                                                static_cast<std::uint64_t>(idx));
                    for (BeamSet* set : {&mid, &full1, &full2, &avgA, &half2,
                                         &full3, &result})
                        (*set)[idx].init_flavor_state();
                }
            }
        }
    }

    /// Evolve every local beam of `in` into `out` with the given Hamiltonian
    /// array and dl slot; optionally produce e_sum rows, average into `avg`,
    /// or compute the error against `err_ref`.
    template <bool WithRows>
    double evolve_pass(int lane, const std::vector<Ham2>& hvv, const double* dl,
                       double A, const BeamSet& in, BeamSet& out,
                       std::vector<ReductionRow>* rows, BeamSet* avg,
                       const BeamSet* err_ref) {
        const auto [t_lo, t_hi] = theta_range(lane);
        const auto& grid = env->grid;
        const auto vac = env->vacuum.view();
        double err = 0.0;
        for (int t = t_lo; t < t_hi; ++t) {
            for (int p = 0; p < grid.pbins; ++p) {
                const int j = grid.traj_index(t, p);
                for (int s = 0; s < kSpeciesCount; ++s) {
                    const int idx = j * kSpeciesCount + s;
                    const Ham2 hb = flavor::beam_ham(hvv[j], 0.5 * A,
                                                     is_antiparticle(static_cast<Species>(s)));
                    const double dlj = dl[t];
                    if constexpr (WithRows) {
                        (*rows)[idx] = flavor::evolve_sum(vac, hb, dlj, in[idx], out[idx],
                                                          env->tables[s].weights());
                    } else {
                        if (avg && err_ref) {
                            err = std::max(err, flavor::evolve_avg_err(
                                                    vac, hb, dlj, in[idx], out[idx],
                                                    (*avg)[idx], (*err_ref)[idx]));
                        } else if (avg) {
                            flavor::evolve_avg(vac, hb, dlj, in[idx], out[idx], (*avg)[idx]);
                        } else {
                            flavor::evolve(vac, hb, dlj, in[idx], out[idx]);
                        }
                    }
                }
            }
        }
        return err;
    }

    void produce_rows_psi0(int lane) {
        const auto [t_lo, t_hi] = theta_range(lane);
        const auto& grid = env->grid;
        for (int t = t_lo; t < t_hi; ++t)
            for (int p = 0; p < grid.pbins; ++p) {
                const int j = grid.traj_index(t, p);
                for (int s = 0; s < kSpeciesCount; ++s)
                    rows_a[j * kSpeciesCount + s] =
                        flavor::e_sum(psi0[j * kSpeciesCount + s], env->tables[s].weights());
            }
    }

    void assemble_range(int lane, const geom::RadiusCache& c, const geom::PartialSums& sums,
                        std::vector<Ham2>& dst) {
        const auto [t_lo, t_hi] = theta_range(lane);
        const auto& grid = env->grid;
        for (int t = t_lo; t < t_hi; ++t)
            for (int p = 0; p < grid.pbins; ++p)
                dst[grid.traj_index(t, p)] = geom::assemble_hvv(grid, c, sums, t, p);
    }

    void copy_range(int lane, BeamSet& dst, const BeamSet& src) {
        const auto [t_lo, t_hi] = theta_range(lane);
        const auto& grid = env->grid;
        const int lo = grid.traj_index(t_lo, 0) * kSpeciesCount;
        const int hi = grid.traj_index(t_hi, 0) * kSpeciesCount;
        for (int idx = lo; idx < hi; ++idx) flavor::copy_state(dst[idx], src[idx]);
    }

    /// S1-S4 of the step; returns the global embedded error. Never commits.
    double do_step(int lane, double r, double dr) {
        const auto& grid = env->grid;
        const auto [t_lo, t_hi] = theta_range(lane);
        const bool root = (lane == 0);
        const auto tick = [&] { return root ? Clock::now() : Clock::time_point{}; };

        // caches for the three evaluation points and the dl slots
        geom::fill_cache(grid, cache[0], r, t_lo, t_hi);
        geom::fill_cache(grid, cache[1], r + 0.5 * dr, t_lo, t_hi);
        geom::fill_cache(grid, cache[2], r + dr, t_lo, t_hi);
        geom::calc_delta_ls(cache[0], cache[0], cache[1], 0.5 * dr, t_lo, t_hi);
        geom::calc_delta_ls(cache[1], cache[1], cache[2], 0.5 * dr, t_lo, t_hi);
        geom::calc_delta_ls(cache[2], cache[0], cache[2], dr, t_lo, t_hi);

        const double A0 = matter::matter_potential(r, env->matt);
        const double A1 = matter::matter_potential(r + 0.5 * dr, env->matt);
        const double A2 = matter::matter_potential(r + dr, env->matt);

        // S1: H0 from the current state
        auto t0 = tick();
        produce_rows_psi0(lane);
        geom::fold_rows(grid, cache[0], env->couplings, rows_a, t_lo, t_hi, stage_a);
        comm.run_root(lane, [&] { sums0 = geom::combine_stage(stage_a, grid.abins); });
        assemble_range(lane, cache[0], sums0, hvvA);
        if (root) t_ham += seconds_since(t0);

        // S2: psi_mid and psi_f1 from H0; H1 and H2 exchanged in one message
        t0 = tick();
        evolve_pass<true>(lane, hvvA, cache[0].dl.data(), A0, psi0, mid, &rows_b,
                          nullptr, nullptr);
        evolve_pass<true>(lane, hvvA, cache[2].dl.data(), A0, psi0, full1, &rows_a,
                          nullptr, nullptr);
        if (root) t_evolve += seconds_since(t0);
        t0 = tick();
        geom::fold_rows(grid, cache[2], env->couplings, rows_a, t_lo, t_hi, stage_a);
        geom::fold_rows(grid, cache[1], env->couplings, rows_b, t_lo, t_hi, stage_b);
        comm.run_root(lane, [&] {
            sums1 = geom::combine_stage(stage_a, grid.abins);
            sums2 = geom::combine_stage(stage_b, grid.abins);
        });
        assemble_range(lane, cache[2], sums1, hvvB);  // H1 at r+dr
        assemble_range(lane, cache[1], sums2, hvvC);  // H2 at r+dr/2
        if (root) t_ham += seconds_since(t0);

        // S3: psi_f2 from H1, average -> psi_A; psi_h2 from H2; H3
        t0 = tick();
        copy_range(lane, avgA, full1);
        evolve_pass<false>(lane, hvvB, cache[2].dl.data(), A2, psi0, full2, nullptr,
                           &avgA, nullptr);
        evolve_pass<true>(lane, hvvC, cache[1].dl.data(), A1, mid, half2, &rows_a,
                          nullptr, nullptr);
        if (root) t_evolve += seconds_since(t0);
        t0 = tick();
        geom::fold_rows(grid, cache[2], env->couplings, rows_a, t_lo, t_hi, stage_a);
        comm.run_root(lane, [&] {
            sums3 = geom::combine_stage(stage_a, grid.abins);
            check_sums_finite(r);
        });
        assemble_range(lane, cache[2], sums3, hvvA);  // H3 at r+dr
        if (root) t_ham += seconds_since(t0);

        // S4: psi_f3 from H3, average -> psi_B, embedded error vs psi_A
        t0 = tick();
        copy_range(lane, result, half2);
        const double err_local = evolve_pass<false>(lane, hvvA, cache[2].dl.data(), A2,
                                                    psi0, full3, nullptr, &result, &avgA);
        if (root) t_evolve += seconds_since(t0);

        return comm.reduce_max(lane, err_local);
    }

    void lane_body(int lane, const IoHook& hook) {
        for (;;) {
            const CtlPacket p = comm.broadcast(lane, pkt);
            if (p.terminate) break;

            const double err = do_step(lane, p.r, p.dr);
            if (!std::isfinite(err))
                throw NumericError("non-finite amplitudes at r = " + std::to_string(p.r) +
                                   " km, iteration " + std::to_string(p.iter));
            const bool accept = err <= ctl.eps0;

            comm.run_root(lane, [&] {
                ctl.iter = p.iter + 1;
                ctl.dr = p.dr;  // the step actually attempted
                if (accept) {
                    swap(psi0, result);
                    ctl.r = p.r + p.dr;
                    ++accepted;
                } else {
                    ++rejected;
                }
                double next_dr = step_size_update(ctl, err, accept);
                const double r_eps = 1e-12 * std::max(1.0, std::fabs(ctl.Rn));
                if (ctl.r + next_dr > ctl.Rn) next_dr = ctl.Rn - ctl.r;

                // the hook sees the next step size so a resumed run replays
                // the exact same step sequence
                if (accept && hook) {
                    const auto t0 = Clock::now();
                    hook(HookInfo{ctl.iter, ctl.r, next_dr, seconds_since(t_start)}, psi0);
                    t_io += seconds_since(t0);
                }

                pkt.r = ctl.r;
                pkt.dr = next_dr;
                pkt.iter = ctl.iter;
                pkt.terminate = 0;
                if (ctl.r >= ctl.Rn - r_eps) pkt.terminate = 1;
                else if (ctl.Ts > 0 && ctl.iter >= ctl.Ts) pkt.terminate = 2;
                else if (ctl.Tn > 0.0 && seconds_since(t_start) >= ctl.Tn) pkt.terminate = 3;
            });
        }
    }
};

Engine::Engine(const Environment& env, int lanes) : env_(&env) {
    if (lanes < 1) throw ConfigError("Engine: lanes must be >= 1");
    if (env.grid.model == geom::Model::SingleAngle && lanes != 1)
        throw ConfigError("single-angle model does not support multiple workers");
    if (lanes > env.grid.abins)
        throw ConfigError("Engine: more lanes than theta bins");
    impl_ = std::make_unique<Impl>(env, lanes);
}

Engine::~Engine() = default;
Engine::Engine(Engine&&) noexcept = default;
Engine& Engine::operator=(Engine&&) noexcept = default;

BeamSet& Engine::state() { return impl_->psi0; }
const BeamSet& Engine::state() const { return impl_->psi0; }

void Engine::init_states() {
    par::run_lanes(impl_->comm, impl_->lanes,
                   [&](int lane) { impl_->init_lane_states(lane); });
}

double Engine::trial_step_error(double r, double dr) {
    if (impl_->lanes != 1)
        throw ConfigError("trial_step_error: single-lane engines only");
    return impl_->do_step(0, r, dr);
}

RunSummary Engine::run(StepControl ctl, const IoHook& hook) {
    Impl& im = *impl_;
    im.ctl = ctl;
    im.accepted = im.rejected = 0;
    im.t_ham = im.t_evolve = im.t_io = 0.0;
    im.t_start = Clock::now();

    // first packet
    im.pkt = CtlPacket{};
    im.pkt.r = ctl.r;
    im.pkt.dr = std::min(ctl.dr, std::max(0.0, ctl.Rn - ctl.r));
    im.pkt.iter = ctl.iter;
    const double r_eps = 1e-12 * std::max(1.0, std::fabs(ctl.Rn));
    im.pkt.terminate = (ctl.r >= ctl.Rn - r_eps) ? 1 : 0;
    if (ctl.Ts > 0 && ctl.iter >= ctl.Ts) im.pkt.terminate = 2;

    par::run_lanes(im.comm, im.lanes, [&](int lane) { im.lane_body(lane, hook); });

    RunSummary s;
    s.final_r = im.ctl.r;
    s.iterations = im.ctl.iter - ctl.iter;
    s.accepted = im.accepted;
    s.rejected = im.rejected;
    s.wall_s = seconds_since(im.t_start);
    s.phase_hamiltonian_s = im.t_ham;
    s.phase_evolve_s = im.t_evolve;
    s.phase_io_s = im.t_io;
    for (int w = 0; w < im.lanes; ++w)
        s.max_worker_wait_s = std::max(s.max_worker_wait_s, im.comm.wait_seconds(w));
    switch (im.pkt.terminate) {
        case 2: s.termination = "iterations"; break;
        case 3: s.termination = "walltime"; break;
        default: s.termination = "radius"; break;
    }
    double nd = 0.0;
    for (int i = 0; i < im.psi0.size(); ++i)
        nd = std::max(nd, flavor::norm_deviation(im.psi0[i]));
    s.final_max_norm_dev = nd;
    return s;
}

}  // namespace oscflat::solver
