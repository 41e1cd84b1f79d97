#include "vecfl/sched/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "vecfl/sched/stage1.hpp"
#include "vecfl/sched/stage2.hpp"
#include "vecfl/timeline/time_model.hpp"

namespace vecfl {

namespace {

int max_edge_iters(const SystemConfig& cfg) {
    int k = 1;
    for (const TaskSpec& t : cfg.tasks) k = std::max(k, t.edge_iters);
    return k;
}

// Sequences from per-(vehicle, task) sort keys: each vehicle trains its
// assigned tasks in ascending key order, per edge iteration (tasks that have
// finished their edge iterations drop out).
SequencePlan plan_from_keys(const SystemConfig& cfg, const Schedule& schedule,
                            const std::vector<std::vector<double>>& keys) {
    int max_k = max_edge_iters(cfg);
    SequencePlan plan(cfg.vehicle_count(), max_k);
    for (VehicleId n = 0; n < cfg.vehicle_count(); ++n) {
        if (!schedule.attached(n)) continue;
        std::vector<TaskId> tasks = schedule.tasks_of(n);
        std::sort(tasks.begin(), tasks.end(), [&](TaskId a, TaskId b) {
            if (keys[n][a] != keys[n][b]) return keys[n][a] < keys[n][b];
            return a < b;
        });
        for (int k = 1; k <= max_k; ++k) {
            TrainingSequence& seq = plan.at(n, k);
            for (TaskId j : tasks)
                if (cfg.tasks[j].edge_iters >= k) seq.order.push_back(j);
        }
    }
    return plan;
}

// Shared scoring for the random-key sequence optimizers: the same
// overlap/upload blend the greedy stage maximizes, evaluated on realized
// sequences of one (es, k) slot.
class KeySlotProblem {
public:
    KeySlotProblem(const SystemConfig& cfg, const MobilityModel& mobility,
                   const Schedule& schedule, EsId m, int k, double round_start)
        : cfg_(cfg), mobility_(mobility), schedule_(schedule), m_(m), k_(k),
          round_start_(round_start) {
        for (VehicleId n : schedule.covered_by(m)) {
            std::vector<TaskId> eligible;
            for (TaskId j : schedule.tasks_of(n))
                if (cfg.tasks[j].edge_iters >= k) eligible.push_back(j);
            if (eligible.empty()) continue;
            for (TaskId j : eligible) slots_.push_back({n, j});
            members_.push_back(n);
            double full = 0;
            for (TaskId j : eligible) full += task_training_time(cfg.tasks[j], cfg.vehicles[n]);
            full_pass_[n] = full;
        }
    }

    int dims() const { return static_cast<int>(slots_.size()); }
    bool empty() const { return slots_.empty(); }

    std::vector<TrainingSequence> decode(std::span<const double> keys) const {
        std::vector<TrainingSequence> seqs(cfg_.vehicle_count());
        for (VehicleId n : members_) {
            std::vector<std::pair<double, TaskId>> order;
            for (std::size_t i = 0; i < slots_.size(); ++i)
                if (slots_[i].first == n) order.push_back({keys[i], slots_[i].second});
            std::sort(order.begin(), order.end());
            for (auto& [key, j] : order) seqs[n].order.push_back(j);
        }
        return seqs;
    }

    double score(const std::vector<TrainingSequence>& seqs) const {
        double total = 0;
        for (TaskId j = 0; j < cfg_.task_count(); ++j) {
            if (cfg_.tasks[j].edge_iters < k_) continue;
            std::vector<VehicleId> holders = schedule_.vehicles_of(m_, j);
            if (holders.empty()) continue;
            int lap = 0;
            for (std::size_t a = 0; a < holders.size(); ++a)
                for (std::size_t b = a + 1; b < holders.size(); ++b)
                    if (seqs[holders[a]].contains(j) && seqs[holders[b]].contains(j) &&
                        seqs[holders[a]].position_of(j) == seqs[holders[b]].position_of(j))
                        ++lap;
            std::vector<double> ups;
            for (VehicleId n : holders) {
                if (!seqs[n].contains(j)) continue;
                double t_up = round_start_ + (k_ - 1) * full_pass_.at(n);
                for (TaskId jp : seqs[n].order) {
                    t_up += task_training_time(cfg_.tasks[jp], cfg_.vehicles[n]);
                    if (jp == j) break;
                }
                ups.push_back(upload_score(cfg_.tasks[j], mobility_.position_at(n, t_up),
                                           cfg_.edge_servers[m_], cfg_.channel, cfg_.hyper.xi6));
            }
            total += aggregate_score(lap, ups, cfg_.hyper.xi7);
        }
        return total;
    }

    double eval(std::span<const double> keys) const { return score(decode(keys)); }

    void write_seqs(std::span<const double> keys, SequencePlan& plan) const {
        std::vector<TrainingSequence> seqs = decode(keys);
        for (VehicleId n : members_) plan.at(n, k_) = std::move(seqs[n]);
    }

private:
    const SystemConfig& cfg_;
    const MobilityModel& mobility_;
    const Schedule& schedule_;
    EsId m_;
    int k_;
    double round_start_;
    std::vector<std::pair<VehicleId, TaskId>> slots_;
    std::vector<VehicleId> members_;
    std::map<VehicleId, double> full_pass_;
};

// Traditional real-valued PSO over sequence keys.
void key_pso(const KeySlotProblem& prob, const HyperParams& h, SeededRng& rng,
             SequencePlan& plan) {
    const int D = prob.dims();
    if (D == 0) return;
    const int P = h.stage2_particles;
    const double pi = 0.5 * (h.pi_max + h.pi_min);
    std::vector<std::vector<double>> x(P, std::vector<double>(D));
    std::vector<std::vector<double>> v(P, std::vector<double>(D));
    std::vector<std::vector<double>> lbest(P);
    std::vector<double> lfit(P, -std::numeric_limits<double>::infinity());
    std::vector<double> gbest;
    double gfit = -std::numeric_limits<double>::infinity();
    for (int p = 0; p < P; ++p) {
        for (int d = 0; d < D; ++d) x[p][d] = rng.uniform01();
        for (int d = 0; d < D; ++d) v[p][d] = rng.uniform(-0.25, 0.25);
        lbest[p] = x[p];
        lfit[p] = prob.eval(x[p]);
        if (lfit[p] > gfit) {
            gfit = lfit[p];
            gbest = x[p];
        }
    }
    for (int tau = 1; tau <= h.stage2_iterations; ++tau) {
        for (int p = 0; p < P; ++p) {
            double r1 = rng.uniform01();
            double r2 = rng.uniform01();
            for (int d = 0; d < D; ++d) {
                double vel = pi * v[p][d] + h.xi4 * r1 * (lbest[p][d] - x[p][d]) +
                             h.xi5 * r2 * (gbest[d] - x[p][d]);
                v[p][d] = std::clamp(vel, -0.5, 0.5);
                x[p][d] = std::clamp(x[p][d] + v[p][d], 0.0, 1.0);
            }
            double f = prob.eval(x[p]);
            if (f > lfit[p]) {
                lfit[p] = f;
                lbest[p] = x[p];
                if (f > gfit) {
                    gfit = f;
                    gbest = x[p];
                }
            }
        }
    }
    prob.write_seqs(gbest, plan);
}

// Generational GA over sequence keys (tournament, single-point crossover,
// gene resampling, one elite).
void key_ga(const KeySlotProblem& prob, const HyperParams& h, SeededRng& rng, SequencePlan& plan) {
    const int D = prob.dims();
    if (D == 0) return;
    const int P = std::max(2, h.stage2_particles);
    std::vector<std::vector<double>> pop(P, std::vector<double>(D));
    std::vector<double> fit(P);
    for (int p = 0; p < P; ++p) {
        for (int d = 0; d < D; ++d) pop[p][d] = rng.uniform01();
        fit[p] = prob.eval(pop[p]);
    }
    auto tournament = [&]() -> int {
        int best = static_cast<int>(rng.uniform_int(P));
        for (int t = 1; t < h.tournament_size; ++t) {
            int c = static_cast<int>(rng.uniform_int(P));
            if (fit[c] > fit[best]) best = c;
        }
        return best;
    };
    std::vector<double> best_ever;
    double best_fit = -std::numeric_limits<double>::infinity();
    for (int p = 0; p < P; ++p)
        if (fit[p] > best_fit) {
            best_fit = fit[p];
            best_ever = pop[p];
        }
    for (int gen = 1; gen <= h.stage2_iterations; ++gen) {
        std::vector<std::vector<double>> next;
        next.push_back(best_ever);  // elite
        while (static_cast<int>(next.size()) < P) {
            std::vector<double> c1 = pop[tournament()];
            std::vector<double> c2 = pop[tournament()];
            if (D >= 2 && rng.bernoulli(h.ga_crossover_rate)) {
                int r = 1 + static_cast<int>(rng.uniform_int(D - 1));
                for (int d = r; d < D; ++d) std::swap(c1[d], c2[d]);
            }
            for (int d = 0; d < D; ++d)
                if (rng.bernoulli(h.phi_max)) c1[d] = rng.uniform01();
            next.push_back(std::move(c1));
            if (static_cast<int>(next.size()) < P) {
                for (int d = 0; d < D; ++d)
                    if (rng.bernoulli(h.phi_max)) c2[d] = rng.uniform01();
                next.push_back(std::move(c2));
            }
        }
        pop = std::move(next);
        for (int p = 0; p < P; ++p) {
            fit[p] = prob.eval(pop[p]);
            if (fit[p] > best_fit) {
                best_fit = fit[p];
                best_ever = pop[p];
            }
        }
    }
    prob.write_seqs(best_ever, plan);
}

SequencePlan key_optimized_plan(const SystemConfig& cfg, const MobilityModel& mobility,
                                const Schedule& schedule, double round_start, int g,
                                std::uint64_t seed, bool use_ga) {
    SequencePlan plan(cfg.vehicle_count(), max_edge_iters(cfg));
    for (EsId m = 0; m < cfg.es_count(); ++m) {
        for (int k = 1; k <= plan.max_edge_iters(); ++k) {
            KeySlotProblem prob(cfg, mobility, schedule, m, k, round_start);
            if (prob.empty()) continue;
            SeededRng rng = SeededRng::derive(
                seed, {stream::kStage2, static_cast<std::uint64_t>(g),
                       static_cast<std::uint64_t>(m), static_cast<std::uint64_t>(k),
                       use_ga ? 2ull : 1ull});
            if (use_ga)
                key_ga(prob, cfg.hyper, rng, plan);
            else
                key_pso(prob, cfg.hyper, rng, plan);
        }
    }
    return plan;
}

}  // namespace

SchedulerOutput heart(const SystemConfig& cfg, const MobilityModel& mobility, double round_start,
                      int g, std::uint64_t seed) {
    Stage1Result s1 = run_stage1(cfg, mobility, round_start, g, seed);
    SchedulerOutput out;
    out.sequences = build_sequence_plan(cfg, mobility, s1.schedule, round_start);
    out.schedule = std::move(s1.schedule);
    out.vehicle_fitness = std::move(s1.vehicle_fitness);
    return out;
}

SchedulerOutput tsso(const SystemConfig& cfg, const MobilityModel& mobility, double round_start,
                     int g, std::uint64_t seed) {
    const int J = cfg.task_count();
    SchedulerOutput out;
    out.schedule = Schedule(cfg.vehicle_count(), J);
    SeededRng rng =
        SeededRng::derive(seed, {stream::kBaseline, static_cast<std::uint64_t>(g), 1ull});
    for (VehicleId n = 0; n < cfg.vehicle_count(); ++n) {
        EsId m = mobility.covering_es(n, round_start);
        if (m < 0) continue;
        out.schedule.attach(n, m);
        double dwell = mobility.dwell_time(n, cfg.edge_servers[m], round_start);
        std::vector<double> est = scheduling_time_estimates(cfg, n);
        std::vector<std::uint8_t> pick(J, 0);
        bool ok = false;
        for (int attempt = 0; attempt < cfg.hyper.tsso_max_attempts && !ok; ++attempt) {
            double load = 0;
            for (int j = 0; j < J; ++j) {
                pick[j] = rng.bernoulli(0.5) ? 1 : 0;
                if (pick[j]) load += est[j];
            }
            ok = fits_dwell(load, dwell);
        }
        if (!ok) pick = repair(std::move(pick), est, dwell);
        for (int j = 0; j < J; ++j) out.schedule.set(n, j, pick[j] != 0);
    }
    // Training rank from one random key per task, shared by all vehicles.
    std::vector<std::vector<double>> keys(cfg.vehicle_count(), std::vector<double>(J, 0.0));
    std::vector<double> task_key(J);
    for (int j = 0; j < J; ++j) task_key[j] = rng.uniform01();
    for (auto& row : keys) row = task_key;
    out.sequences = plan_from_keys(cfg, out.schedule, keys);
    return out;
}

SchedulerOutput tspso(const SystemConfig& cfg, const MobilityModel& mobility, double round_start,
                      int g, std::uint64_t seed) {
    Stage1Options opts;
    opts.use_ga = false;
    opts.adaptive_inertia = false;
    Stage1Result s1 = run_stage1(cfg, mobility, round_start, g,
                                 seed ^ 0x7350736f00000000ull, opts);
    SchedulerOutput out;
    out.sequences =
        key_optimized_plan(cfg, mobility, s1.schedule, round_start, g, seed, /*use_ga=*/false);
    out.schedule = std::move(s1.schedule);
    out.vehicle_fitness = std::move(s1.vehicle_fitness);
    return out;
}

SchedulerOutput tsga(const SystemConfig& cfg, const MobilityModel& mobility, double round_start,
                     int g, std::uint64_t seed) {
    const int J = cfg.task_count();
    const HyperParams& h = cfg.hyper;
    SchedulerOutput out;
    out.schedule = Schedule(cfg.vehicle_count(), J);
    out.vehicle_fitness.assign(cfg.vehicle_count(), 0.0);
    std::vector<int> counts(J, 0);
    std::vector<double> rho(J);
    for (TaskId j = 0; j < J; ++j) rho[j] = cfg.tasks[j].weight_coeff;

    for (VehicleId n = 0; n < cfg.vehicle_count(); ++n) {
        EsId m = mobility.covering_es(n, round_start);
        if (m < 0) continue;
        out.schedule.attach(n, m);
        double dwell = mobility.dwell_time(n, cfg.edge_servers[m], round_start);
        std::vector<double> est = scheduling_time_estimates(cfg, n);
        FitnessContext ctx{est, rho, counts, h.xi3, h.chi, dwell, h.psi_mode};
        SeededRng rng = SeededRng::derive(
            seed, {stream::kBaseline, static_cast<std::uint64_t>(g), 3ull,
                   static_cast<std::uint64_t>(n)});

        const int P = std::max(2, h.particles);
        std::vector<std::vector<std::uint8_t>> pop(P);
        std::vector<double> fit(P);
        std::vector<std::uint8_t> best;
        double best_fit = kInfeasibleFitness;
        for (int p = 0; p < P; ++p) {
            pop[p].resize(J);
            for (int j = 0; j < J; ++j) pop[p][j] = rng.bernoulli(0.5) ? 1 : 0;
            pop[p] = repair(std::move(pop[p]), est, dwell);
            fit[p] = fitness(pop[p], ctx);
            if (fit[p] > best_fit) {
                best_fit = fit[p];
                best = pop[p];
            }
        }
        auto tournament = [&]() -> int {
            int b = static_cast<int>(rng.uniform_int(P));
            for (int t = 1; t < h.tournament_size; ++t) {
                int c = static_cast<int>(rng.uniform_int(P));
                if (fit[c] > fit[b]) b = c;
            }
            return b;
        };
        for (int gen = 1; gen <= h.iterations; ++gen) {
            std::vector<std::vector<std::uint8_t>> next;
            next.push_back(best);  // elite
            while (static_cast<int>(next.size()) < P) {
                std::vector<std::uint8_t> c1 = pop[tournament()];
                std::vector<std::uint8_t> c2 = pop[tournament()];
                if (J >= 3 && rng.bernoulli(h.ga_crossover_rate)) {
                    int r = 2 + static_cast<int>(rng.uniform_int(J - 2));
                    auto [o1, o2] = crossover(c1, c2, r);
                    c1 = std::move(o1);
                    c2 = std::move(o2);
                }
                for (int j = 0; j < J; ++j) c1[j] = mutate(c1[j], rng.uniform01(), h.phi_max);
                next.push_back(repair(std::move(c1), est, dwell));
                if (static_cast<int>(next.size()) < P) {
                    for (int j = 0; j < J; ++j) c2[j] = mutate(c2[j], rng.uniform01(), h.phi_max);
                    next.push_back(repair(std::move(c2), est, dwell));
                }
            }
            pop = std::move(next);
            for (int p = 0; p < P; ++p) {
                fit[p] = fitness(pop[p], ctx);
                if (fit[p] > best_fit) {
                    best_fit = fit[p];
                    best = pop[p];
                }
            }
        }
        for (int j = 0; j < J; ++j) {
            out.schedule.set(n, j, best[j] != 0);
            if (best[j]) ++counts[j];
        }
        out.vehicle_fitness[n] = best_fit;
    }
    out.sequences =
        key_optimized_plan(cfg, mobility, out.schedule, round_start, g, seed, /*use_ga=*/true);
    return out;
}

SchedulerOutput tsgd(const SystemConfig& cfg, const MobilityModel& mobility, double round_start,
                     int g, std::uint64_t seed) {
    (void)seed;
    const int J = cfg.task_count();
    SchedulerOutput out;
    out.schedule = Schedule(cfg.vehicle_count(), J);
    std::vector<int> counts(J, 0);
    for (VehicleId n = 0; n < cfg.vehicle_count(); ++n) {
        EsId m = mobility.covering_es(n, round_start);
        if (m < 0) continue;
        out.schedule.attach(n, m);
        double dwell = mobility.dwell_time(n, cfg.edge_servers[m], round_start);
        std::vector<double> est = scheduling_time_estimates(cfg, n);
        std::vector<bool> taken(J, false);
        double load = 0;
        for (;;) {
            // Highest weight/(1+count) among tasks that still fit; counts are
            // re-read after every pick.
            TaskId pick = -1;
            double best = -1;
            for (TaskId j = 0; j < J; ++j) {
                if (taken[j] || !fits_dwell(load + est[j], dwell)) continue;
                double score = cfg.tasks[j].weight_coeff / (1.0 + counts[j]);
                if (score > best) {
                    best = score;
                    pick = j;
                }
            }
            if (pick < 0) break;
            taken[pick] = true;
            load += est[pick];
            ++counts[pick];
            out.schedule.set(n, pick, true);
        }
    }
    out.sequences = build_sequence_plan(cfg, mobility, out.schedule, round_start);
    return out;
}

SchedulerOutput run_scheduler(SchedulerKind kind, const SystemConfig& cfg,
                              const MobilityModel& mobility, double round_start, int g,
                              std::uint64_t seed) {
    switch (kind) {
        case SchedulerKind::kHeart: return heart(cfg, mobility, round_start, g, seed);
        case SchedulerKind::kTsso: return tsso(cfg, mobility, round_start, g, seed);
        case SchedulerKind::kTspso: return tspso(cfg, mobility, round_start, g, seed);
        case SchedulerKind::kTsga: return tsga(cfg, mobility, round_start, g, seed);
        case SchedulerKind::kTsgd: return tsgd(cfg, mobility, round_start, g, seed);
    }
    throw std::logic_error("unknown scheduler kind");
}

std::optional<SchedulerKind> scheduler_from_string(const std::string& name) {
    if (name == "heart") return SchedulerKind::kHeart;
    if (name == "tsso") return SchedulerKind::kTsso;
    if (name == "tspso") return SchedulerKind::kTspso;
    if (name == "tsga") return SchedulerKind::kTsga;
    if (name == "tsgd") return SchedulerKind::kTsgd;
    return std::nullopt;
}

}  // namespace vecfl
