#include "vecfl/core/config_io.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "vecfl/core/validate.hpp"

namespace vecfl {

namespace {

using nlohmann::json;

// Strict object access: every key must be consumed.
class StrictObject {
public:
    StrictObject(const json& j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j.is_object()) throw ConfigError(where_ + ": expected an object");
    }
    ~StrictObject() = default;

    bool has(const char* key) {
        seen_.insert(key);
        return j_.contains(key);
    }
    const json& get(const char* key) {
        seen_.insert(key);
        if (!j_.contains(key)) throw ConfigError(where_ + ": missing field '" + key + "'");
        return j_.at(key);
    }
    const json* get_opt(const char* key) {
        seen_.insert(key);
        return j_.contains(key) ? &j_.at(key) : nullptr;
    }
    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it) {
            if (!seen_.count(it.key()))
                throw ConfigError(where_ + ": unknown field '" + it.key() + "'");
        }
    }

private:
    const json& j_;
    std::string where_;
    std::set<std::string> seen_;
};

double num(const json& j, const std::string& where) {
    if (!j.is_number()) throw ConfigError(where + ": expected a number");
    return j.get<double>();
}
int integer(const json& j, const std::string& where) {
    if (!j.is_number_integer()) throw ConfigError(where + ": expected an integer");
    return j.get<int>();
}

Point point(const json& j, const std::string& where) {
    if (!j.is_array() || j.size() != 2) throw ConfigError(where + ": expected [x, y]");
    return {num(j[0], where), num(j[1], where)};
}

TaskSpec parse_task(const json& j, int index) {
    std::string where = "tasks[" + std::to_string(index) + "]";
    StrictObject o(j, where);
    TaskSpec t;
    t.id = index;
    if (o.has("id") && integer(o.get("id"), where) != index + 1)
        throw ConfigError(where + ": ids must be 1..J in order");
    t.local_iters = integer(o.get("local_iters"), where);
    t.edge_iters = integer(o.get("edge_iters"), where);
    t.cloud_quorum = integer(o.get("cloud_quorum"), where);
    t.model_size_v2e = num(o.get("model_size_v2e"), where);
    t.model_size_e2c = num(o.get("model_size_e2c"), where);
    t.cycles_per_sample = num(o.get("cycles_per_sample"), where);
    t.setup_overhead = num(o.get("setup_overhead"), where);
    t.batch_size = integer(o.get("batch_size"), where);
    t.learning_rate = num(o.get("learning_rate"), where);
    t.blend_alpha = num(o.get("blend_alpha"), where);
    t.conv_threshold = num(o.get("conv_threshold"), where);
    if (const json* v = o.get_opt("weight_coeff")) t.weight_coeff = num(*v, where);
    if (const json* v = o.get_opt("model_dim")) t.model_dim = integer(*v, where);
    if (const json* v = o.get_opt("noise_sigma")) t.noise_sigma = num(*v, where);
    if (const json* v = o.get_opt("target_distance")) t.target_distance = num(*v, where);
    o.finish();
    return t;
}

VehicleSpec parse_vehicle(const json& j, int index) {
    std::string where = "vehicles[" + std::to_string(index) + "]";
    StrictObject o(j, where);
    VehicleSpec v;
    v.id = index;
    if (o.has("id") && integer(o.get("id"), where) != index + 1)
        throw ConfigError(where + ": ids must be 1..N in order");
    v.home_es = integer(o.get("home_es"), where) - 1;
    for (const json& f : o.get("cpu_freq")) v.cpu_freq.push_back(num(f, where));
    for (const json& d : o.get("dataset_size")) v.dataset_size.push_back(integer(d, where));
    v.initial_position = point(o.get("initial_position"), where);
    v.speed = num(o.get("speed"), where);
    v.heading = point(o.get("heading"), where);
    o.finish();
    return v;
}

EdgeServerSpec parse_es(const json& j, int index) {
    std::string where = "edge_servers[" + std::to_string(index) + "]";
    StrictObject o(j, where);
    EdgeServerSpec es;
    es.id = index;
    if (o.has("id") && integer(o.get("id"), where) != index + 1)
        throw ConfigError(where + ": ids must be 1..M in order");
    es.position = point(o.get("position"), where);
    es.coverage_radius = num(o.get("coverage_radius"), where);
    es.e2c_rate = num(o.get("e2c_rate"), where);
    o.finish();
    return es;
}

CrossoverPointPolicy crossover_policy_from(const std::string& s, const std::string& where) {
    if (s == "fixed") return CrossoverPointPolicy::kFixed;
    if (s == "uniform") return CrossoverPointPolicy::kUniformRandom;
    throw ConfigError(where + ": crossover_policy must be 'fixed' or 'uniform'");
}
PsiMode psi_mode_from(const std::string& s, const std::string& where) {
    if (s == "count") return PsiMode::kRunningCount;
    if (s == "binary") return PsiMode::kBinary;
    throw ConfigError(where + ": psi_mode must be 'count' or 'binary'");
}
StragglerPolicy straggler_from(const std::string& s, const std::string& where) {
    if (s == "discard") return StragglerPolicy::kDiscard;
    if (s == "buffer") return StragglerPolicy::kBufferNextRound;
    throw ConfigError(where + ": straggler_policy must be 'discard' or 'buffer'");
}

HyperParams parse_hyper(const json& j) {
    std::string where = "hyper";
    StrictObject o(j, where);
    HyperParams h;
    if (const json* v = o.get_opt("xi1")) h.xi1 = integer(*v, where);
    if (const json* v = o.get_opt("xi2")) h.xi2 = integer(*v, where);
    if (const json* v = o.get_opt("xi3")) h.xi3 = num(*v, where);
    if (const json* v = o.get_opt("xi4")) h.xi4 = num(*v, where);
    if (const json* v = o.get_opt("xi5")) h.xi5 = num(*v, where);
    if (const json* v = o.get_opt("xi6")) h.xi6 = num(*v, where);
    if (const json* v = o.get_opt("xi7")) h.xi7 = num(*v, where);
    if (const json* v = o.get_opt("chi")) h.chi = num(*v, where);
    if (const json* v = o.get_opt("pi_max")) h.pi_max = num(*v, where);
    if (const json* v = o.get_opt("pi_min")) h.pi_min = num(*v, where);
    if (const json* v = o.get_opt("particles")) h.particles = integer(*v, where);
    if (const json* v = o.get_opt("iterations")) h.iterations = integer(*v, where);
    if (const json* v = o.get_opt("phi_max")) h.phi_max = num(*v, where);
    if (const json* v = o.get_opt("v_max")) h.v_max = num(*v, where);
    if (const json* v = o.get_opt("crossover_policy"))
        h.crossover_policy = crossover_policy_from(v->get<std::string>(), where);
    if (const json* v = o.get_opt("crossover_point")) h.crossover_point = integer(*v, where);
    if (const json* v = o.get_opt("psi_mode")) h.psi_mode = psi_mode_from(v->get<std::string>(), where);
    if (const json* v = o.get_opt("tsso_max_attempts")) h.tsso_max_attempts = integer(*v, where);
    if (const json* v = o.get_opt("tournament_size")) h.tournament_size = integer(*v, where);
    if (const json* v = o.get_opt("ga_crossover_rate")) h.ga_crossover_rate = num(*v, where);
    if (const json* v = o.get_opt("stage2_particles")) h.stage2_particles = integer(*v, where);
    if (const json* v = o.get_opt("stage2_iterations")) h.stage2_iterations = integer(*v, where);
    if (const json* v = o.get_opt("straggler_policy"))
        h.straggler_policy = straggler_from(v->get<std::string>(), where);
    if (const json* v = o.get_opt("iteration_cap")) h.iteration_cap = integer(*v, where);
    o.finish();
    return h;
}

json task_to_json(const TaskSpec& t) {
    json j;
    j["id"] = t.id + 1;
    j["local_iters"] = t.local_iters;
    j["edge_iters"] = t.edge_iters;
    j["cloud_quorum"] = t.cloud_quorum;
    j["model_size_v2e"] = t.model_size_v2e;
    j["model_size_e2c"] = t.model_size_e2c;
    j["cycles_per_sample"] = t.cycles_per_sample;
    j["setup_overhead"] = t.setup_overhead;
    j["batch_size"] = t.batch_size;
    j["learning_rate"] = t.learning_rate;
    j["blend_alpha"] = t.blend_alpha;
    j["conv_threshold"] = t.conv_threshold;
    j["weight_coeff"] = t.weight_coeff;
    j["model_dim"] = t.model_dim;
    j["noise_sigma"] = t.noise_sigma;
    j["target_distance"] = t.target_distance;
    return j;
}

json vehicle_to_json(const VehicleSpec& v) {
    json j;
    j["id"] = v.id + 1;
    j["home_es"] = v.home_es + 1;
    j["cpu_freq"] = v.cpu_freq;
    j["dataset_size"] = v.dataset_size;
    j["initial_position"] = {v.initial_position.x, v.initial_position.y};
    j["speed"] = v.speed;
    j["heading"] = {v.heading.x, v.heading.y};
    return j;
}

json es_to_json(const EdgeServerSpec& es) {
    json j;
    j["id"] = es.id + 1;
    j["position"] = {es.position.x, es.position.y};
    j["coverage_radius"] = es.coverage_radius;
    j["e2c_rate"] = es.e2c_rate;
    return j;
}

json hyper_to_json(const HyperParams& h) {
    json j;
    j["xi1"] = h.xi1;
    j["xi2"] = h.xi2;
    j["xi3"] = h.xi3;
    j["xi4"] = h.xi4;
    j["xi5"] = h.xi5;
    j["xi6"] = h.xi6;
    j["xi7"] = h.xi7;
    j["chi"] = h.chi;
    j["pi_max"] = h.pi_max;
    j["pi_min"] = h.pi_min;
    j["particles"] = h.particles;
    j["iterations"] = h.iterations;
    j["phi_max"] = h.phi_max;
    j["v_max"] = h.v_max;
    j["crossover_policy"] =
        h.crossover_policy == CrossoverPointPolicy::kFixed ? "fixed" : "uniform";
    j["crossover_point"] = h.crossover_point;
    j["psi_mode"] = h.psi_mode == PsiMode::kRunningCount ? "count" : "binary";
    j["tsso_max_attempts"] = h.tsso_max_attempts;
    j["tournament_size"] = h.tournament_size;
    j["ga_crossover_rate"] = h.ga_crossover_rate;
    j["stage2_particles"] = h.stage2_particles;
    j["stage2_iterations"] = h.stage2_iterations;
    j["straggler_policy"] =
        h.straggler_policy == StragglerPolicy::kDiscard ? "discard" : "buffer";
    j["iteration_cap"] = h.iteration_cap;
    return j;
}

}  // namespace

SystemConfig parse_config(const std::string& json_text) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid JSON: ") + e.what());
    }
    StrictObject o(root, "config");
    SystemConfig cfg;
    if (!o.get("seed").is_number_unsigned() && !o.get("seed").is_number_integer())
        throw ConfigError("seed: expected an unsigned integer");
    cfg.seed = root.at("seed").get<std::uint64_t>();

    const json& tasks = o.get("tasks");
    if (!tasks.is_array()) throw ConfigError("tasks: expected an array");
    for (std::size_t i = 0; i < tasks.size(); ++i)
        cfg.tasks.push_back(parse_task(tasks[i], static_cast<int>(i)));

    const json& vehicles = o.get("vehicles");
    if (!vehicles.is_array()) throw ConfigError("vehicles: expected an array");
    for (std::size_t i = 0; i < vehicles.size(); ++i)
        cfg.vehicles.push_back(parse_vehicle(vehicles[i], static_cast<int>(i)));

    const json& servers = o.get("edge_servers");
    if (!servers.is_array()) throw ConfigError("edge_servers: expected an array");
    for (std::size_t i = 0; i < servers.size(); ++i)
        cfg.edge_servers.push_back(parse_es(servers[i], static_cast<int>(i)));

    {
        StrictObject ro(o.get("roads"), "roads");
        for (const json& s : ro.get("segments")) {
            if (!s.is_array() || s.size() != 4)
                throw ConfigError("roads.segments: expected [x1,y1,x2,y2]");
            cfg.roads.segments.push_back(
                {{num(s[0], "segment"), num(s[1], "segment")},
                 {num(s[2], "segment"), num(s[3], "segment")}});
        }
        if (const json* xs = ro.get_opt("intersections"))
            for (const json& p : *xs) cfg.roads.intersections.push_back(point(p, "intersections"));
        ro.finish();
    }
    {
        StrictObject co(o.get("channel"), "channel");
        cfg.channel.bandwidth = num(co.get("bandwidth"), "channel");
        cfg.channel.snr_ref = num(co.get("snr_ref"), "channel");
        cfg.channel.pathloss_exponent = num(co.get("pathloss_exponent"), "channel");
        co.finish();
    }
    if (const json* h = o.get_opt("hyper")) cfg.hyper = parse_hyper(*h);
    o.finish();

    ValidationResult vr = validate_config(cfg);
    if (!vr.ok()) {
        std::ostringstream oss;
        oss << "config validation failed:";
        for (const auto& v : vr.violations) oss << "\n  " << v.code << " (" << v.message << ")";
        throw ConfigError(oss.str());
    }
    return cfg;
}

SystemConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string serialize_config(const SystemConfig& cfg) {
    json j;
    j["seed"] = cfg.seed;
    j["tasks"] = json::array();
    for (const auto& t : cfg.tasks) j["tasks"].push_back(task_to_json(t));
    j["vehicles"] = json::array();
    for (const auto& v : cfg.vehicles) j["vehicles"].push_back(vehicle_to_json(v));
    j["edge_servers"] = json::array();
    for (const auto& es : cfg.edge_servers) j["edge_servers"].push_back(es_to_json(es));
    json segs = json::array();
    for (const auto& s : cfg.roads.segments) segs.push_back({s.a.x, s.a.y, s.b.x, s.b.y});
    j["roads"]["segments"] = segs;
    json xs = json::array();
    for (const auto& p : cfg.roads.intersections) xs.push_back({p.x, p.y});
    j["roads"]["intersections"] = xs;
    j["channel"]["bandwidth"] = cfg.channel.bandwidth;
    j["channel"]["snr_ref"] = cfg.channel.snr_ref;
    j["channel"]["pathloss_exponent"] = cfg.channel.pathloss_exponent;
    j["hyper"] = hyper_to_json(cfg.hyper);
    return j.dump(2);
}

std::uint64_t config_hash(const SystemConfig& cfg) {
    std::string s = serialize_config(cfg);
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

bool operator==(const SystemConfig& a, const SystemConfig& b) {
    return serialize_config(a) == serialize_config(b);
}

}  // namespace vecfl
