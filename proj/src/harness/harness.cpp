#include "vecfl/harness/harness.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "vecfl/core/config_io.hpp"
#include "vecfl/core/validate.hpp"
#include "vecfl/sched/baselines.hpp"
#include "vecfl/sim/simulator.hpp"

namespace vecfl {

namespace {

constexpr const char* kToolVersion = "vecfl 1.0.0";

std::string hex64(std::uint64_t v) {
    std::ostringstream o;
    o << "0x" << std::hex << v;
    return o.str();
}

std::string fmt(double v) {
    std::ostringstream o;
    o.precision(17);
    o << v;
    return o.str();
}

void write_file(const std::filesystem::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    out << content;
}

std::string csv_header(const std::string& schema, std::uint64_t hash, std::uint64_t seed) {
    std::ostringstream o;
    o << "# schema=" << schema << " config_hash=" << hex64(hash) << " seed=" << seed << "\n";
    return o.str();
}

// Wall-clock instant at which every task has met its distance target; -1 if
// any task never did.
double time_to_target(const ExperimentResult& r) {
    double worst = 0;
    for (std::size_t j = 0; j < r.target_time.size(); ++j) {
        if (!r.target_reached[j]) return -1.0;
        worst = std::max(worst, r.target_time[j]);
    }
    return worst;
}

}  // namespace

SystemConfig apply_overrides(SystemConfig cfg, const RunOptions& opts) {
    if (opts.tasks) {
        int want = *opts.tasks;
        int have = cfg.task_count();
        if (want < have) throw ConfigError("--tasks must not shrink the task list");
        if (want > have) {
            // Clone base tasks with varied data footprints; only
            // training-time parameters change.
            SeededRng rng = SeededRng::derive(cfg.seed, {stream::kInstance, 9});
            for (int t = have; t < want; ++t) {
                TaskSpec copy = cfg.tasks[t % have];
                copy.id = t;
                copy.cycles_per_sample *= rng.uniform(0.7, 1.4);
                copy.weight_coeff = 0;  // re-derived for the new instance
                cfg.tasks.push_back(copy);
                for (VehicleSpec& v : cfg.vehicles) {
                    double scale = rng.uniform(0.5, 1.5);
                    int base = v.dataset_size[t % have];
                    v.dataset_size.push_back(
                        std::max(copy.batch_size, static_cast<int>(base * scale)));
                    v.cpu_freq.push_back(v.cpu_freq[t % have]);
                }
            }
        }
    }
    if (opts.vehicles) {
        int want = *opts.vehicles;
        int have = cfg.vehicle_count();
        if (want < have) {
            cfg.vehicles.resize(want);
        } else if (want > have) {
            SeededRng rng = SeededRng::derive(cfg.seed, {stream::kInstance, 25});
            for (int n = have; n < want; ++n) {
                VehicleSpec v = cfg.vehicles[n % have];
                v.id = n;
                v.speed *= rng.uniform(0.8, 1.25);
                for (double& f : v.cpu_freq) f = rng.uniform(1e9, 1e10);
                cfg.vehicles.push_back(v);
            }
        }
    }
    ValidationResult vr = validate_config(cfg);
    if (!vr.ok()) {
        std::ostringstream oss;
        oss << "overrides produced an invalid config:";
        for (const auto& v : vr.violations) oss << " " << v.code;
        throw ConfigError(oss.str());
    }
    finalize_defaults(cfg);
    return cfg;
}

int run_experiment(const RunOptions& opts) {
    SystemConfig cfg;
    try {
        cfg = load_config(opts.config_path);
        cfg = apply_overrides(cfg, opts);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfigError;
    }

    std::vector<SchedulerKind> kinds;
    if (opts.scheduler == "all") {
        kinds = {SchedulerKind::kHeart, SchedulerKind::kTsso, SchedulerKind::kTspso,
                 SchedulerKind::kTsga, SchedulerKind::kTsgd};
    } else {
        auto k = scheduler_from_string(opts.scheduler);
        if (!k) {
            std::cerr << "config error: unknown scheduler '" << opts.scheduler << "'\n";
            return kExitConfigError;
        }
        kinds = {*k};
    }
    AggregationMode mode;
    if (opts.mode == "hybrid") {
        mode = AggregationMode::kHybrid;
    } else if (opts.mode == "full-sync") {
        mode = AggregationMode::kFullSync;
    } else {
        std::cerr << "config error: unknown mode '" << opts.mode << "'\n";
        return kExitConfigError;
    }

    std::filesystem::create_directories(opts.out_dir);
    std::uint64_t hash = config_hash(cfg);
    const int J = cfg.task_count();
    const int N = cfg.vehicle_count();

    std::ostringstream balance, convergence, makespan, ntt, hybrid_sync;
    balance << csv_header("vecfl.balance.v1", hash, opts.seed)
            << "scheduler,seed,round,task,count,lower,upper,within\n";
    convergence << csv_header("vecfl.convergence.v1", hash, opts.seed)
                << "scheduler,seed,task,complt,rounds,converged,target_time,target_reached,"
                   "final_distance\n";
    makespan << csv_header("vecfl.makespan.v1", hash, opts.seed)
             << "scheduler,seed,mode,total_makespan,time_to_target,rounds,cap_hit\n";
    ntt << csv_header("vecfl.ntt.v1", hash, opts.seed) << "scheduler,seed,round,es,antt,lntt\n";
    hybrid_sync << csv_header("vecfl.hybrid_vs_sync.v1", hash, opts.seed)
                << "scheduler,seed,hybrid_makespan,sync_makespan,hybrid_time_to_target,"
                   "sync_time_to_target,makespan_reduction_pct\n";

    bool cap_hit = false;
    for (SchedulerKind kind : kinds) {
        ExperimentResult main_run = run_until_convergence(cfg, kind, opts.seed, mode);
        ExperimentResult hybrid_run =
            mode == AggregationMode::kHybrid
                ? main_run
                : run_until_convergence(cfg, kind, opts.seed, AggregationMode::kHybrid);
        ExperimentResult sync_run =
            mode == AggregationMode::kFullSync
                ? main_run
                : run_until_convergence(cfg, kind, opts.seed, AggregationMode::kFullSync);
        cap_hit = cap_hit || main_run.iteration_cap_hit;

        const char* name = to_string(kind);
        for (const RoundRecord& rec : main_run.rounds) {
            int active = 0;
            for (bool a : rec.task_active)
                if (a) ++active;
            double target = active > 0 ? static_cast<double>(N) / active : 0;
            for (int j = 0; j < J; ++j) {
                if (!rec.task_active[j]) continue;
                balance << name << ',' << opts.seed << ',' << rec.g << ',' << j + 1 << ','
                        << rec.counts[j] << ',' << fmt(target - cfg.hyper.xi1) << ','
                        << fmt(target + cfg.hyper.xi2) << ',' << (rec.within_balance[j] ? 1 : 0)
                        << '\n';
            }
            for (std::size_t m = 0; m < rec.antt.size(); ++m) {
                ntt << name << ',' << opts.seed << ',' << rec.g << ',' << m + 1 << ','
                    << fmt(rec.antt[m]) << ',' << fmt(rec.lntt[m]) << '\n';
            }
        }
        for (int j = 0; j < J; ++j) {
            convergence << name << ',' << opts.seed << ',' << j + 1 << ','
                        << fmt(main_run.completion_time[j]) << ',' << main_run.rounds_used[j]
                        << ',' << (main_run.converged[j] ? 1 : 0) << ','
                        << fmt(main_run.target_time[j]) << ','
                        << (main_run.target_reached[j] ? 1 : 0) << ','
                        << fmt(main_run.final_distance[j]) << '\n';
        }
        makespan << name << ',' << opts.seed << ','
                 << (mode == AggregationMode::kHybrid ? "hybrid" : "full-sync") << ','
                 << fmt(main_run.total_makespan) << ',' << fmt(time_to_target(main_run)) << ','
                 << main_run.rounds.size() << ',' << (main_run.iteration_cap_hit ? 1 : 0) << '\n';
        double hm = hybrid_run.total_makespan;
        double sm = sync_run.total_makespan;
        double red = sm > 0 ? (sm - hm) / sm * 100.0 : 0.0;
        hybrid_sync << name << ',' << opts.seed << ',' << fmt(hm) << ',' << fmt(sm) << ','
                    << fmt(time_to_target(hybrid_run)) << ',' << fmt(time_to_target(sync_run))
                    << ',' << fmt(red) << '\n';

        if (opts.emit_events) {
            // One fully logged round per scheduler for debugging artifacts.
            SystemConfig live = cfg;
            MobilityModel mobility(live, opts.seed);
            SchedulerOutput out = run_scheduler(kind, live, mobility, 0.0, 1, opts.seed);
            TimelineReport rep = run_round(live, mobility, out.schedule, out.sequences, 1, 0.0,
                                           mode, nullptr, opts.seed);
            write_file(std::filesystem::path(opts.out_dir) /
                           (std::string("events-") + name + ".ndjson"),
                       events_to_ndjson(rep.events));
            write_file(std::filesystem::path(opts.out_dir) /
                           (std::string("round1-") + name + ".json"),
                       report_to_json(rep));
            write_file(std::filesystem::path(opts.out_dir) /
                           (std::string("cells-") + name + ".csv"),
                       cells_to_csv(rep.cells));
        }
    }

    std::filesystem::path dir(opts.out_dir);
    write_file(dir / "balance.csv", balance.str());
    write_file(dir / "convergence.csv", convergence.str());
    write_file(dir / "makespan.csv", makespan.str());
    write_file(dir / "ntt.csv", ntt.str());
    write_file(dir / "hybrid_vs_sync.csv", hybrid_sync.str());

    nlohmann::json run;
    run["schema"] = "vecfl.run.v1";
    run["config_hash"] = hex64(hash);
    run["seed"] = opts.seed;
    nlohmann::json ks = nlohmann::json::array();
    for (SchedulerKind k : kinds) ks.push_back(to_string(k));
    run["schedulers"] = ks;
    run["mode"] = opts.mode;
    run["vehicles"] = N;
    run["tasks"] = J;
    run["version"] = kToolVersion;
    write_file(dir / "run.json", run.dump(2) + "\n");

    return cap_hit ? kExitIterationCap : kExitOk;
}

namespace {

struct MakespanRow {
    std::string scheduler;
    std::uint64_t seed;
    std::string mode;
    double total_makespan;
    double time_to_target;
};

std::vector<MakespanRow> read_makespan_csv(const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) throw InstanceMismatch("missing makespan.csv in " + p.parent_path().string());
    std::vector<MakespanRow> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#' || line.rfind("scheduler,", 0) == 0) continue;
        std::istringstream ls(line);
        std::string field;
        MakespanRow r;
        std::getline(ls, r.scheduler, ',');
        std::getline(ls, field, ',');
        r.seed = std::stoull(field);
        std::getline(ls, r.mode, ',');
        std::getline(ls, field, ',');
        r.total_makespan = std::stod(field);
        std::getline(ls, field, ',');
        r.time_to_target = std::stod(field);
        rows.push_back(r);
    }
    return rows;
}

std::string read_hash(const std::filesystem::path& dir) {
    std::ifstream in(dir / "run.json");
    if (!in) throw InstanceMismatch("missing run.json in " + dir.string());
    nlohmann::json j;
    in >> j;
    return j.at("config_hash").get<std::string>();
}

}  // namespace

CompareResult compare(const std::vector<std::string>& report_dirs) {
    if (report_dirs.size() < 2)
        throw InstanceMismatch("compare needs at least two report directories");
    std::string hash0 = read_hash(report_dirs[0]);
    std::vector<std::vector<MakespanRow>> all;
    for (const std::string& d : report_dirs) {
        if (read_hash(d) != hash0)
            throw InstanceMismatch("instance hash mismatch between " + report_dirs[0] + " and " + d);
        all.push_back(read_makespan_csv(std::filesystem::path(d) / "makespan.csv"));
    }

    std::ostringstream out;
    out.precision(6);

    // Directory-vs-directory deltas on identical (scheduler, seed, mode) keys.
    const auto& base = all[0];
    for (std::size_t d = 1; d < all.size(); ++d) {
        int pairs = 0;
        double delta_mk = 0, delta_tt = 0, wins = 0;
        for (const MakespanRow& a : base) {
            for (const MakespanRow& b : all[d]) {
                if (a.scheduler != b.scheduler || a.seed != b.seed || a.mode != b.mode) continue;
                ++pairs;
                delta_mk += b.total_makespan - a.total_makespan;
                delta_tt += b.time_to_target - a.time_to_target;
                if (a.total_makespan < b.total_makespan)
                    wins += 1;
                else if (a.total_makespan == b.total_makespan)
                    wins += 0.5;
            }
        }
        out << "dir[0] vs dir[" << d << "]: paired_rows=" << pairs;
        if (pairs > 0) {
            out << " mean_makespan_delta=" << delta_mk / pairs
                << " mean_target_delta=" << delta_tt / pairs
                << " win_rate=" << wins / pairs * 100.0 << "%";
        }
        out << "\n";
    }

    // Scheduler-vs-scheduler win rates over the pooled rows, paired by seed.
    std::map<std::string, std::map<std::uint64_t, MakespanRow>> pooled;
    for (const auto& rows : all)
        for (const MakespanRow& r : rows) pooled[r.scheduler].emplace(r.seed, r);
    std::vector<std::string> names;
    for (const auto& [name, rows] : pooled) names.push_back(name);
    for (std::size_t a = 0; a < names.size(); ++a) {
        for (std::size_t b = a + 1; b < names.size(); ++b) {
            int pairs = 0;
            double wins_mk = 0, wins_tt = 0, delta_mk = 0;
            for (const auto& [seed, ra] : pooled[names[a]]) {
                auto it = pooled[names[b]].find(seed);
                if (it == pooled[names[b]].end()) continue;
                const MakespanRow& rb = it->second;
                ++pairs;
                delta_mk += rb.total_makespan - ra.total_makespan;
                wins_mk += ra.total_makespan < rb.total_makespan   ? 1.0
                           : ra.total_makespan == rb.total_makespan ? 0.5
                                                                    : 0.0;
                if (ra.time_to_target >= 0 && rb.time_to_target >= 0)
                    wins_tt += ra.time_to_target < rb.time_to_target   ? 1.0
                               : ra.time_to_target == rb.time_to_target ? 0.5
                                                                         : 0.0;
            }
            if (pairs == 0) continue;
            out << names[a] << " vs " << names[b] << ": seeds=" << pairs
                << " mean_makespan_delta=" << delta_mk / pairs
                << " makespan_win_rate=" << wins_mk / pairs * 100.0 << "%"
                << " target_win_rate=" << wins_tt / pairs * 100.0 << "%\n";
        }
    }

    CompareResult res;
    res.table = out.str();
    res.ok = true;
    return res;
}

}  // namespace vecfl
