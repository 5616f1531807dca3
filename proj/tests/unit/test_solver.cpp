#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "oscflat/solver.hpp"
#include "oscflat/units.hpp"
#include "testutil.hpp"

using namespace oscflat;
using solver::BeamSet;
using solver::Engine;
using solver::Environment;
using solver::StepControl;

namespace {

/// Minimal runnable config; vacuum-only unless overridden.
io::RunConfig base_config() {
    return io::parse_config(
        "dm2= -3e-3\ntheta= 0.1\nR0= 60\nRn= 70\ndr= 1e-2\nmax_dr= 1.0\n"
        "E0= 0\nE1= 80\nAbins= 4\nPbins= 1\nEbins= 8\neps0= 1e-8\nkappa= 0.8\n"
        "Rv= 10\nmodel= bulb\nhasMatter= 0\n"
        "Lve= 0\nLvae= 0\nLvt= 0\nLvat= 0\n"
        "Eve= 11\nEvae= 16\nEvt= 25\nEvat= 25\n"
        "eta_ve= 3\neta_vae= 3\neta_vt= 3\neta_vat= 3\n");
}

StepControl ctl_of(const io::RunConfig& cfg) { return StepControl::from_config(cfg); }

std::vector<double> state_bits(const Engine& e, const Environment& env) {
    std::vector<double> payload;
    solver::extract_mode1(e.state(), env.grid, payload);
    return payload;
}

}  // namespace

TEST_CASE("step_size_update: unit ratio, sqrt growth, caps and collapse") {
    StepControl ctl;
    ctl.dr = 0.5;
    ctl.dr_max = 2.0;
    ctl.dr_min = 1e-12;
    ctl.eps0 = 1e-8;
    ctl.kappa = 0.8;

    CHECK(solver::step_size_update(ctl, 1e-8, true) == doctest::Approx(0.4));  // err = eps0
    ctl.kappa = 1.0;
    CHECK(solver::step_size_update(ctl, 0.25e-8, true) == doctest::Approx(1.0));  // sqrt(4) = 2x
    CHECK(solver::step_size_update(ctl, 0.0, true) == 2.0);  // growth capped at dr_max
    ctl.dr = 1e-10;
    CHECK_THROWS_AS(solver::step_size_update(ctl, 1.0, false), NumericError);
    CHECK_THROWS_AS(solver::step_size_update(ctl, -1.0, true), NumericError);
}

TEST_CASE("vacuum embedded error decays as O(dr^3) (order check)") {
    const auto cfg = base_config();
    const Environment env = Environment::from_config(cfg);
    Engine engine(env, 1);
    engine.init_states();

    std::vector<double> drs, errs;
    double dr = 2.0;
    for (int k = 0; k < 5; ++k, dr *= 0.5) {
        const double err = engine.trial_step_error(60.0, dr);
        REQUIRE(err > 0.0);
        drs.push_back(std::log(dr));
        errs.push_back(std::log(err));
    }
    // least-squares slope of log(err) vs log(dr)
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < drs.size(); ++i) {
        mx += drs[i] / drs.size();
        my += errs[i] / errs.size();
    }
    double num = 0, den = 0;
    for (std::size_t i = 0; i < drs.size(); ++i) {
        num += (drs[i] - mx) * (errs[i] - my);
        den += (drs[i] - mx) * (drs[i] - mx);
    }
    const double slope = num / den;
    CHECK(slope >= 2.5);
    CHECK(slope <= 3.5);
}

TEST_CASE("trial steps never mutate the committed state") {
    const auto cfg = base_config();
    const Environment env = Environment::from_config(cfg);
    Engine engine(env, 1);
    engine.init_states();
    const auto before = state_bits(engine, env);
    engine.trial_step_error(60.0, 0.5);
    engine.trial_step_error(60.0, 0.25);
    CHECK(state_bits(engine, env) == before);
}

TEST_CASE("Rn = R0 terminates with zero iterations and a valid summary") {
    auto cfg = base_config();
    io::apply_override(cfg, "Rn=60");
    const Environment env = Environment::from_config(cfg);
    Engine engine(env, 1);
    engine.init_states();
    const auto s = engine.run(ctl_of(cfg));
    CHECK(s.iterations == 0);
    CHECK(s.final_r == 60.0);
    CHECK(s.termination == "radius");
}

TEST_CASE("Ts caps the loop iteration count exactly") {
    auto cfg = base_config();
    io::apply_override(cfg, "Ts=100");
    io::apply_override(cfg, "Rn=1000");
    io::apply_override(cfg, "max_dr=1e-2");  // cannot reach Rn in 100 steps
    const Environment env = Environment::from_config(cfg);
    Engine engine(env, 1);
    engine.init_states();
    const auto s = engine.run(ctl_of(cfg));
    CHECK(s.iterations == 100);
    CHECK(s.accepted + s.rejected == 100);
    CHECK(s.termination == "iterations");
}

TEST_CASE("infinite tolerance accepts everything and walks at max_dr") {
    auto cfg = base_config();
    io::apply_override(cfg, "eps0=1e30");
    io::apply_override(cfg, "max_dr=0.5");
    io::apply_override(cfg, "Rn=70");
    const Environment env = Environment::from_config(cfg);
    Engine engine(env, 1);
    engine.init_states();
    const auto s = engine.run(ctl_of(cfg));
    CHECK(s.rejected == 0);
    // 10 km at 0.5 km per step, the first step still being the initial dr
    CHECK(s.final_r == doctest::Approx(70.0));
    CHECK(s.iterations == doctest::Approx(21).epsilon(0.2));
}

TEST_CASE("tiny tolerance collapses the step with a fatal error") {
    auto cfg = base_config();
    io::apply_override(cfg, "eps0=1e-280");
    io::apply_override(cfg, "min_dr=1e-6");
    const Environment env = Environment::from_config(cfg);
    Engine engine(env, 1);
    engine.init_states();
    CHECK_THROWS_AS(engine.run(ctl_of(cfg)), NumericError);
}

TEST_CASE("single-angle vacuum run matches the closed-form survival") {
    auto cfg = base_config();
    io::apply_override(cfg, "model=sa");
    io::apply_override(cfg, "Abins=1");
    io::apply_override(cfg, "R0=50");
    io::apply_override(cfg, "Rn=250");
    io::apply_override(cfg, "Ebins=16");
    const Environment env = Environment::from_config(cfg);
    Engine engine(env, 1);
    engine.init_states();
    const auto s = engine.run(ctl_of(cfg));
    CHECK(s.final_r == doctest::Approx(250.0));

    const double L = 200.0;
    const auto& beam = engine.state().at(0, Species::NuE);
    for (int e = 0; e < env.ebins; ++e) {
        const double E = 0.0 + (e + 0.5) * 80.0 / 16.0;
        const double delta = units::vacuum_delta_per_km(-3e-3, E);
        const double want = testutil::vacuum_survival(delta, 0.1, L);
        const double got =
            beam.ar()[e] * beam.ar()[e] + beam.ai()[e] * beam.ai()[e];
        CHECK(got == doctest::Approx(want).epsilon(1e-8));
    }
    CHECK(s.final_max_norm_dev <= 1e-11);
}

TEST_CASE("tiny steps match a series matrix exponential with constant matter") {
    // single-angle, mu = 0, near-constant exponential matter profile
    auto cfg = base_config();
    io::apply_override(cfg, "model=sa");
    io::apply_override(cfg, "Abins=1");
    io::apply_override(cfg, "R0=15");
    io::apply_override(cfg, "Rn=15.5");
    io::apply_override(cfg, "max_dr=0.01");
    io::apply_override(cfg, "hasMatter=1");
    io::apply_override(cfg, "matterProfile=exp");
    io::apply_override(cfg, "Ye=0.4");
    io::apply_override(cfg, "nb0=1e30");
    io::apply_override(cfg, "hNS=1e15");
    io::apply_override(cfg, "Ebins=4");
    const Environment env = Environment::from_config(cfg);
    Engine engine(env, 1);
    engine.init_states();
    engine.run(ctl_of(cfg));

    const double A = matter::matter_potential(15.0, env.matt);
    for (const Species sp : {Species::NuE, Species::NuEBar}) {
        const auto& beam = engine.state().at(0, sp);
        for (int e = 0; e < env.ebins; ++e) {
            const Ham2 h = geom::full_bin_ham(env.vacuum, e, Ham2{}, A, sp);
            const auto want = testutil::evolve_expm(
                h, 0.5, {is_e_flavor(sp) ? 1.0 : 0.0, 0.0, is_e_flavor(sp) ? 0.0 : 1.0, 0.0});
            CHECK(std::fabs(beam.ar()[e] - want[0]) <= 1e-9);
            CHECK(std::fabs(beam.ai()[e] - want[1]) <= 1e-9);
            CHECK(std::fabs(beam.br()[e] - want[2]) <= 1e-9);
            CHECK(std::fabs(beam.bi()[e] - want[3]) <= 1e-9);
        }
    }
}

TEST_CASE("collective run stays unitary and accepted errors stay within eps0") {
    auto cfg = base_config();
    io::apply_override(cfg, "Lve=1e51");
    io::apply_override(cfg, "Lvae=1e51");
    io::apply_override(cfg, "Lvt=1e51");
    io::apply_override(cfg, "Lvat=1e51");
    io::apply_override(cfg, "Abins=8");
    io::apply_override(cfg, "R0=50");
    io::apply_override(cfg, "Rn=55");
    io::apply_override(cfg, "Ts=400");
    const Environment env = Environment::from_config(cfg);
    Engine engine(env, 1);
    engine.init_states();
    const auto s = engine.run(ctl_of(cfg));
    CHECK(s.accepted > 10);
    CHECK(s.final_max_norm_dev <= 1e-10);
}

TEST_CASE("worker-count invariance: identical bits for 1 and 2 lanes") {
    auto cfg = base_config();
    io::apply_override(cfg, "Lve=1e51");
    io::apply_override(cfg, "Lvae=1e51");
    io::apply_override(cfg, "Lvt=1e51");
    io::apply_override(cfg, "Lvat=1e51");
    io::apply_override(cfg, "Abins=9");  // uneven split across 2 lanes
    io::apply_override(cfg, "R0=50");
    io::apply_override(cfg, "Rn=52");
    const Environment env = Environment::from_config(cfg);

    std::vector<double> bits1, bits2;
    {
        Engine e1(env, 1);
        e1.init_states();
        e1.run(ctl_of(cfg));
        bits1 = state_bits(e1, env);
    }
    {
        Engine e2(env, 2);
        e2.init_states();
        e2.run(ctl_of(cfg));
        bits2 = state_bits(e2, env);
    }
    CHECK(bits1 == bits2);  // bit-identical, not just within tolerance
}

TEST_CASE("run - dump - resume reproduces the uninterrupted run exactly") {
    namespace fs = std::filesystem;
    const fs::path tmp = fs::temp_directory_path() / "oscflat_resume_test";
    fs::remove_all(tmp);
    fs::create_directories(tmp);

    auto cfg = base_config();
    io::apply_override(cfg, "Lve=1e51");
    io::apply_override(cfg, "Lvae=1e51");
    io::apply_override(cfg, "Lvt=1e51");
    io::apply_override(cfg, "Lvat=1e51");
    io::apply_override(cfg, "Abins=6");
    io::apply_override(cfg, "R0=50");
    io::apply_override(cfg, "Rn=53");
    const Environment env = Environment::from_config(cfg);
    const std::uint64_t hash = io::config_hash(cfg);

    // uninterrupted run, dumping every 8 accepted iterations
    const io::SnapshotDims dims{env.grid.abins, env.grid.pbins, 4, 4, env.ebins};
    io::SnapshotFileWriter writer(tmp.string(), "resume", 1, 0, /*new_file_step=*/1, 1,
                                  dims, env.spectra_header(), hash);
    io::DumpMarks mark{50.0, 0.0, 0};
    Engine a(env, 1);
    a.init_states();
    a.run(ctl_of(cfg), [&](const solver::HookInfo& info, const BeamSet& set) {
        if (!io::should_dump({0, 0, 8}, info.r, info.t_wall, info.iter, mark)) return;
        mark = {info.r, info.t_wall, info.iter};
        std::vector<double> payload;
        solver::extract_mode1(set, env.grid, payload);
        writer.append({info.iter, info.r, info.dr, info.t_wall}, payload);
    });
    writer.close();
    const auto final_bits = state_bits(a, env);
    REQUIRE(writer.files_written().size() >= 2);

    // resume from the second snapshot file and run to the same end
    const std::string mid_file = writer.files_written()[1];
    Engine b(env, 1);
    b.init_states();
    std::vector<std::string> warnings;
    const io::RecordMeta meta =
        solver::resume_from(mid_file, b.state(), env.grid, hash, &warnings);
    CHECK(warnings.empty());
    auto ctl = ctl_of(cfg);
    ctl.r = meta.r;
    ctl.dr = meta.dr;
    ctl.iter = meta.iter;
    b.run(ctl);
    CHECK(state_bits(b, env) == final_bits);

    // dims mismatch is fatal
    auto cfg_wrong = cfg;
    io::apply_override(cfg_wrong, "Abins=7");
    const Environment env_wrong = Environment::from_config(cfg_wrong);
    Engine c(env_wrong, 1);
    c.init_states();
    CHECK_THROWS_AS(solver::resume_from(mid_file, c.state(), env_wrong.grid, hash, nullptr),
                    IoError);

    // config-hash mismatch only warns
    Engine d(env, 1);
    d.init_states();
    warnings.clear();
    solver::resume_from(mid_file, d.state(), env.grid, hash + 1, &warnings);
    CHECK(warnings.size() == 1);

    fs::remove_all(tmp);
}

TEST_CASE("single-angle rejects multi-lane execution") {
    auto cfg = base_config();
    io::apply_override(cfg, "model=sa");
    io::apply_override(cfg, "Abins=1");
    const Environment env = Environment::from_config(cfg);
    CHECK_THROWS_AS(Engine(env, 2), ConfigError);
}

TEST_CASE("summary renders machine-readable key=value lines") {
    solver::RunSummary s;
    s.final_r = 250.0;
    s.iterations = 42;
    s.termination = "radius";
    const std::string kv = s.to_kv();
    CHECK(kv.find("final_r= 250") != std::string::npos);
    CHECK(kv.find("iterations= 42") != std::string::npos);
    CHECK(kv.find("termination= radius") != std::string::npos);
}
