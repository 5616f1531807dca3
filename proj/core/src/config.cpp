#include "oscflat/config.hpp"

#include <charconv>
#include <cstdint>
#include <fstream>
#include <functional>
#include <sstream>

namespace oscflat::io {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

struct Key {
    const char* name;
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

template <typename T>
T parse_num(const std::string& v, const char* key) {
    try {
        if constexpr (std::is_same_v<T, double>) return std::stod(v);
        else if constexpr (std::is_same_v<T, std::uint64_t>) return std::stoull(v);
        else return static_cast<T>(std::stoll(v));
    } catch (const std::exception&) {
        throw ConfigError(std::string("bad value for '") + key + "': " + v);
    }
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}
std::string fmt(int v) { return std::to_string(v); }
std::string fmt(std::uint64_t v) { return std::to_string(v); }
std::string fmt(const std::string& v) { return v; }

#define NUM_KEY(name, field, type) \
    Key{name, [](RunConfig& c, const std::string& v) { c.field = parse_num<type>(v, name); }, \
        [](const RunConfig& c) { return fmt(c.field); }}
#define STR_KEY(name, field) \
    Key{name, [](RunConfig& c, const std::string& v) { c.field = v; }, \
        [](const RunConfig& c) { return fmt(c.field); }}

const std::vector<Key>& key_table() {
    static const std::vector<Key> keys = {
        NUM_KEY("dumpMode", dumpMode, int),
        STR_KEY("filePrefix", filePrefix),
        NUM_KEY("newFile_step", newFile_step, int),
        NUM_KEY("sync_step", sync_step, int),
        NUM_KEY("r_step1", r_step1, double),
        NUM_KEY("r_step2", r_step2, double),
        NUM_KEY("t_step1", t_step1, double),
        NUM_KEY("t_step2", t_step2, double),
        NUM_KEY("itr_step1", itr_step1, std::uint64_t),
        NUM_KEY("itr_step2", itr_step2, std::uint64_t),
        NUM_KEY("designatedWriter", designatedWriter, int),
        NUM_KEY("start_beam", start_beam, int),
        NUM_KEY("end_beam", end_beam, int),
        NUM_KEY("multiNodeBench", multiNodeBench, int),
        NUM_KEY("minNodes", minNodes, int),
        NUM_KEY("maxNodes", maxNodes, int),
        NUM_KEY("ratio_min", ratio_min, double),
        NUM_KEY("ratio_max", ratio_max, double),
        NUM_KEY("ratio_step", ratio_step, double),
        NUM_KEY("knee_threshold", knee_threshold, double),
        NUM_KEY("cpu_threads", cpu_threads, int),
        NUM_KEY("accel_threads", accel_threads, int),
        NUM_KEY("cpu_per_beam_us", cpu_per_beam_us, double),
        NUM_KEY("accel_per_beam_us", accel_per_beam_us, double),
        NUM_KEY("Tn", Tn, double),
        NUM_KEY("Ts", Ts, std::uint64_t),
        NUM_KEY("eps0", eps0, double),
        NUM_KEY("kappa", kappa, double),
        NUM_KEY("dr", dr, double),
        NUM_KEY("max_dr", max_dr, double),
        NUM_KEY("min_dr", min_dr, double),
        NUM_KEY("dm2", dm2, double),
        NUM_KEY("theta", theta, double),
        NUM_KEY("R0", R0, double),
        NUM_KEY("Rn", Rn, double),
        NUM_KEY("E0", E0, double),
        NUM_KEY("E1", E1, double),
        NUM_KEY("Abins", Abins, int),
        NUM_KEY("Pbins", Pbins, int),
        NUM_KEY("Ebins", Ebins, int),
        NUM_KEY("SPoints", SPoints, int),
        NUM_KEY("Flvs", Flvs, int),
        STR_KEY("model", model),
        NUM_KEY("hvvScale", hvvScale, double),
        NUM_KEY("perturb", perturb, double),
        NUM_KEY("lanes", lanes, int),
        NUM_KEY("hasMatter", hasMatter, int),
        STR_KEY("matterProfile", matterProfile),
        NUM_KEY("Ye", Ye, double),
        NUM_KEY("nb0", nb0, double),
        NUM_KEY("Rv", Rv, double),
        NUM_KEY("Mns", Mns, double),
        NUM_KEY("gs", gs, double),
        NUM_KEY("S", S, double),
        NUM_KEY("hNS", hNS, double),
        NUM_KEY("Lve", Lve, double),
        NUM_KEY("Lvae", Lvae, double),
        NUM_KEY("Lvt", Lvt, double),
        NUM_KEY("Lvat", Lvat, double),
        NUM_KEY("Tve", Tve, double),
        NUM_KEY("Tvae", Tvae, double),
        NUM_KEY("Tvt", Tvt, double),
        NUM_KEY("Tvat", Tvat, double),
        NUM_KEY("Eve", Eve, double),
        NUM_KEY("Evae", Evae, double),
        NUM_KEY("Evt", Evt, double),
        NUM_KEY("Evat", Evat, double),
        NUM_KEY("eta_ve", eta_ve, double),
        NUM_KEY("eta_vae", eta_vae, double),
        NUM_KEY("eta_vt", eta_vt, double),
        NUM_KEY("eta_vat", eta_vat, double),
    };
    return keys;
}

#undef NUM_KEY
#undef STR_KEY

const Key* find_key(const std::string& name) {
    for (const Key& k : key_table())
        if (name == k.name) return &k;
    return nullptr;
}

void parse_line(RunConfig& cfg, std::string line, int lineno) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) return;

    const auto eq = line.find('=');
    if (eq == std::string::npos)
        throw ConfigError("config line " + std::to_string(lineno) +
                          ": expected 'Keyword= value', got: " + line);
    const std::string name = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const Key* k = find_key(name);
    if (!k) {
        cfg.warnings.push_back("unknown keyword '" + name + "' (line " +
                               std::to_string(lineno) + ") ignored");
        return;
    }
    k->set(cfg, value);
    cfg.provided.insert(name);
}

}  // namespace

RunConfig parse_config(const std::string& text) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) parse_line(cfg, line, ++lineno);
    return cfg;
}

RunConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

void apply_override(RunConfig& cfg, const std::string& key_value) {
    const auto eq = key_value.find('=');
    if (eq == std::string::npos)
        throw ConfigError("override must be key=value, got: " + key_value);
    const std::string name = trim(key_value.substr(0, eq));
    const std::string value = trim(key_value.substr(eq + 1));
    const Key* k = find_key(name);
    if (!k) throw ConfigError("override: unknown keyword '" + name + "'");
    k->set(cfg, value);
    cfg.provided.insert(name);
}

std::string render_config(const RunConfig& cfg) {
    std::ostringstream os;
    for (const Key& k : key_table()) os << k.name << "= " << k.get(cfg) << "\n";
    return os.str();
}

std::uint64_t config_hash(const RunConfig& cfg) {
    const std::string s = render_config(cfg);
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

double RunConfig::L(Species s) const {
    switch (s) {
        case Species::NuE: return Lve;
        case Species::NuEBar: return Lvae;
        case Species::NuX: return Lvt;
        case Species::NuXBar: return Lvat;
    }
    return 0.0;
}
double RunConfig::T(Species s) const {
    switch (s) {
        case Species::NuE: return Tve;
        case Species::NuEBar: return Tvae;
        case Species::NuX: return Tvt;
        case Species::NuXBar: return Tvat;
    }
    return -1.0;
}
double RunConfig::Emean(Species s) const {
    switch (s) {
        case Species::NuE: return Eve;
        case Species::NuEBar: return Evae;
        case Species::NuX: return Evt;
        case Species::NuXBar: return Evat;
    }
    return -1.0;
}
double RunConfig::eta(Species s) const {
    switch (s) {
        case Species::NuE: return eta_ve;
        case Species::NuEBar: return eta_vae;
        case Species::NuX: return eta_vt;
        case Species::NuXBar: return eta_vat;
    }
    return 0.0;
}

geom::Model RunConfig::geometry_model() const {
    if (model == "sa" || model == "single-angle") return geom::Model::SingleAngle;
    if (model == "bulb") return geom::Model::Bulb;
    if (model == "ebulb" || model == "extended-bulb") return geom::Model::ExtendedBulb;
    throw ConfigError("model must be one of sa|bulb|ebulb, got: " + model);
}

matter::Profile RunConfig::matter_profile() const {
    if (hasMatter == 0) return matter::Profile::Off;
    if (matterProfile == "powerlaw") return matter::Profile::PowerLaw;
    if (matterProfile == "exp") return matter::Profile::Exponential;
    if (matterProfile == "sum") return matter::Profile::Sum;
    throw ConfigError("matterProfile must be powerlaw|exp|sum, got: " + matterProfile);
}

std::vector<std::string> missing_run_keys(const RunConfig& cfg) {
    std::vector<std::string> missing;
    auto need = [&](const char* k) {
        if (!cfg.provided.count(k)) missing.push_back(k);
    };
    for (const char* k : {"dm2", "theta", "R0", "Rn", "dr", "max_dr", "E0", "E1",
                          "Abins", "Ebins", "eps0", "kappa", "Rv",
                          "Lve", "Lvae", "Lvt", "Lvat"})
        need(k);
    // one of T or mean energy per species
    const char* temp[4] = {"Tve", "Tvae", "Tvt", "Tvat"};
    const char* mean[4] = {"Eve", "Evae", "Evt", "Evat"};
    for (int s = 0; s < 4; ++s)
        if (!cfg.provided.count(temp[s]) && !cfg.provided.count(mean[s]))
            missing.push_back(std::string(temp[s]) + "|" + mean[s]);
    if (cfg.hasMatter) {
        for (const char* k : {"Ye"}) need(k);
        const auto prof = cfg.matterProfile;
        if (prof == "exp" || prof == "sum")
            for (const char* k : {"nb0", "hNS"}) need(k);
        if (prof == "powerlaw" || prof == "sum")
            for (const char* k : {"Mns", "gs", "S"}) need(k);
    }
    return missing;
}

void require_runnable(const RunConfig& cfg) {
    const auto missing = missing_run_keys(cfg);
    if (!missing.empty()) {
        std::string msg = "config leaves required keys uninitialized:";
        for (const auto& k : missing) msg += " " + k;
        throw ConfigError(msg);
    }
    if (!(cfg.R0 < cfg.Rn)) throw ConfigError("config: need R0 < Rn");
    if (!(cfg.E0 < cfg.E1)) throw ConfigError("config: need E0 < E1");
    if (cfg.Abins < 1 || cfg.Pbins < 1 || cfg.Ebins < 1)
        throw ConfigError("config: Abins, Pbins, Ebins must be >= 1");
    if (cfg.Flvs != 2) throw ConfigError("config: only Flvs= 2 is supported");
    if (cfg.dumpMode < 0) throw ConfigError("config: dumpMode must be >= 0");
    if (!(cfg.kappa > 0.0) || cfg.kappa > 1.0)
        throw ConfigError("config: kappa must be in (0, 1]");
    if (!(cfg.eps0 > 0.0)) throw ConfigError("config: eps0 must be > 0");
    if (cfg.R0 < cfg.Rv) throw ConfigError("config: R0 must be >= Rv");
    cfg.geometry_model();
    cfg.matter_profile();
}

}  // namespace oscflat::io
