#include "vecfl/sched/stage1.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "vecfl/timeline/time_model.hpp"

namespace vecfl {

std::vector<double> scheduling_time_estimates(const SystemConfig& cfg, VehicleId n) {
    std::vector<double> est(cfg.task_count());
    for (TaskId j = 0; j < cfg.task_count(); ++j)
        est[j] = cfg.tasks[j].edge_iters * task_training_time(cfg.tasks[j], cfg.vehicles[n]);
    return est;
}

bool fits_dwell(double total_time, double dwell) {
    return total_time == 0.0 || total_time < dwell;
}

double fitness(std::span<const std::uint8_t> assignment, const FitnessContext& ctx) {
    const std::size_t J = assignment.size();
    double load = 0;
    int assigned = 0;
    for (std::size_t j = 0; j < J; ++j) {
        if (assignment[j]) {
            load += ctx.est_times[j];
            ++assigned;
        }
    }
    if (!fits_dwell(load, ctx.dwell)) return kInfeasibleFitness;
    double imbalance = 0;
    double weighted = 0;
    for (std::size_t j = 0; j < J; ++j) {
        double psi = ctx.psi_mode == PsiMode::kRunningCount
                         ? static_cast<double>(ctx.counts[j]) + (assignment[j] ? 1.0 : 0.0)
                         : (assignment[j] ? 1.0 : 0.0);
        double dev = std::abs(psi - ctx.chi);
        imbalance += dev;
        weighted += ctx.rho[j] * dev;
    }
    return assigned - (ctx.xi3 * imbalance - weighted);
}

double inertia(int tau, const HyperParams& hyper) {
    if (hyper.iterations <= 0) return hyper.pi_max;
    return hyper.pi_max -
           (hyper.pi_max - hyper.pi_min) * static_cast<double>(tau) / hyper.iterations;
}

std::vector<double> velocity_update(std::span<const double> velocity,
                                    std::span<const std::uint8_t> position,
                                    std::span<const std::uint8_t> local_best,
                                    std::span<const std::uint8_t> global_best, double pi_tau,
                                    double xi4, double xi5, double v_max) {
    std::vector<double> out(velocity.size());
    for (std::size_t j = 0; j < velocity.size(); ++j) {
        double v = pi_tau * velocity[j] + xi4 * (local_best[j] - static_cast<double>(position[j])) +
                   xi5 * (global_best[j] - static_cast<double>(position[j]));
        out[j] = std::clamp(v, -v_max, v_max);
    }
    return out;
}

double assignment_prob(double velocity) {
    return 1.0 / (1.0 + std::exp(-velocity));
}

std::uint8_t binarize(double prob, double e1) {
    return e1 <= prob ? 1 : 0;
}

std::pair<std::vector<std::uint8_t>, std::vector<std::uint8_t>> crossover(
    std::span<const std::uint8_t> a, std::span<const std::uint8_t> b, int r) {
    const int J = static_cast<int>(a.size());
    if (r <= 1 || r >= J) throw InvalidCrossoverPoint();
    std::vector<std::uint8_t> c1(a.begin(), a.begin() + r);
    c1.insert(c1.end(), b.begin() + r, b.end());
    std::vector<std::uint8_t> c2(b.begin(), b.begin() + r);
    c2.insert(c2.end(), a.begin() + r, a.end());
    return {std::move(c1), std::move(c2)};
}

double mutation_rate(int tau, double phi_max) {
    return phi_max / (1.0 + std::log1p(static_cast<double>(tau)));
}

std::uint8_t mutate(std::uint8_t bit, double e2, double phi_tau) {
    return e2 < phi_tau ? static_cast<std::uint8_t>(1 - bit) : bit;
}

std::vector<std::uint8_t> repair(std::vector<std::uint8_t> assignment,
                                 std::span<const double> est_times, double dwell) {
    for (;;) {
        double load = 0;
        for (std::size_t j = 0; j < assignment.size(); ++j)
            if (assignment[j]) load += est_times[j];
        if (fits_dwell(load, dwell)) return assignment;
        // Drop the assigned task with the longest training time.
        int worst = -1;
        for (std::size_t j = 0; j < assignment.size(); ++j) {
            if (!assignment[j]) continue;
            if (worst < 0 || est_times[j] > est_times[worst]) worst = static_cast<int>(j);
        }
        if (worst < 0) return assignment;  // empty and dwell <= 0
        assignment[worst] = 0;
    }
}

namespace {

struct Particle {
    std::vector<std::uint8_t> position;
    std::vector<double> velocity;
    std::vector<std::uint8_t> local_best;
    double local_best_fitness;
};

// Fitness memo per vehicle (counts are fixed during one vehicle's swarm
// run, so the assignment bits fully key the value).
class FitnessCache {
public:
    FitnessCache(const FitnessContext& ctx) : ctx_(ctx) {}
    double eval(std::span<const std::uint8_t> a) {
        if (a.size() <= 63) {
            std::uint64_t key = 0;
            for (std::size_t j = 0; j < a.size(); ++j)
                if (a[j]) key |= 1ull << j;
            auto [it, fresh] = memo_.try_emplace(key, 0.0);
            if (fresh) it->second = fitness(a, ctx_);
            return it->second;
        }
        return fitness(a, ctx_);
    }

private:
    const FitnessContext& ctx_;
    std::map<std::uint64_t, double> memo_;
};

}  // namespace

Stage1Result run_stage1(const SystemConfig& cfg, const MobilityModel& mobility, double round_start,
                        int g, std::uint64_t seed, const Stage1Options& opts, Stage1Trace* trace) {
    const int J = cfg.task_count();
    const HyperParams& h = cfg.hyper;

    Stage1Result result;
    result.schedule = Schedule(cfg.vehicle_count(), J);
    result.vehicle_fitness.assign(cfg.vehicle_count(), 0.0);
    result.final_counts.assign(J, 0);
    std::vector<int>& counts = result.final_counts;

    std::vector<double> rho(J);
    for (TaskId j = 0; j < J; ++j) rho[j] = cfg.tasks[j].weight_coeff;

    // Vehicles are handled strictly in ascending id so the shared counts are
    // reproducible. Draw order per vehicle: initialization (per particle:
    // J assignment bits, then J velocity components), then per iteration and
    // particle J binarization draws, then the GA pass (optional crossover
    // point, then J mutation draws per offspring).
    for (VehicleId n = 0; n < cfg.vehicle_count(); ++n) {
        EsId m = mobility.covering_es(n, round_start);
        if (m < 0) continue;  // outside every coverage this round
        result.schedule.attach(n, m);

        double dwell = mobility.dwell_time(n, cfg.edge_servers[m], round_start);
        std::vector<double> est = scheduling_time_estimates(cfg, n);
        FitnessContext ctx{est, rho, counts, h.xi3, h.chi, dwell, h.psi_mode};
        FitnessCache cache(ctx);

        SeededRng rng = SeededRng::derive(
            seed, {stream::kStage1, static_cast<std::uint64_t>(g), static_cast<std::uint64_t>(n)});

        std::vector<Particle> swarm(h.particles);
        std::vector<std::uint8_t> global_best;
        double global_best_fitness = kInfeasibleFitness;
        for (Particle& p : swarm) {
            p.position.resize(J);
            for (int j = 0; j < J; ++j) p.position[j] = rng.bernoulli(0.5) ? 1 : 0;
            p.position = repair(std::move(p.position), est, dwell);
            p.velocity.resize(J);
            for (int j = 0; j < J; ++j) p.velocity[j] = rng.uniform(-h.v_max, h.v_max);
            p.local_best = p.position;
            p.local_best_fitness = cache.eval(p.position);
            if (p.local_best_fitness > global_best_fitness) {
                global_best_fitness = p.local_best_fitness;
                global_best = p.position;
            }
        }

        std::vector<double> series;
        for (int tau = 1; tau <= h.iterations; ++tau) {
            double pi_tau = opts.adaptive_inertia ? inertia(tau - 1, h)
                                                  : 0.5 * (h.pi_max + h.pi_min);
            for (Particle& p : swarm) {
                p.velocity = velocity_update(p.velocity, p.position, p.local_best, global_best,
                                             pi_tau, h.xi4, h.xi5, h.v_max);
                for (int j = 0; j < J; ++j)
                    p.position[j] = binarize(assignment_prob(p.velocity[j]), rng.uniform01());
                double f = cache.eval(p.position);
                if (f > p.local_best_fitness) {
                    p.local_best = p.position;
                    p.local_best_fitness = f;
                    if (f > global_best_fitness) {
                        global_best = p.position;
                        global_best_fitness = f;
                    }
                }
            }

            if (opts.use_ga) {
                double phi = mutation_rate(tau, h.phi_max);
                for (int p = 0; p + 1 < h.particles; ++p) {
                    std::vector<std::uint8_t> c1 = swarm[p].position;
                    std::vector<std::uint8_t> c2 = swarm[p + 1].position;
                    if (J >= 3) {
                        int r = h.crossover_point;
                        if (h.crossover_policy == CrossoverPointPolicy::kUniformRandom)
                            r = 2 + static_cast<int>(rng.uniform_int(J - 2));
                        auto [o1, o2] = crossover(c1, c2, r);
                        c1 = std::move(o1);
                        c2 = std::move(o2);
                    }
                    for (int j = 0; j < J; ++j) c1[j] = mutate(c1[j], rng.uniform01(), phi);
                    for (int j = 0; j < J; ++j) c2[j] = mutate(c2[j], rng.uniform01(), phi);
                    swarm[p].position = repair(std::move(c1), est, dwell);
                    swarm[p + 1].position = repair(std::move(c2), est, dwell);
                }
            }
            if (trace) series.push_back(global_best_fitness);
        }

        for (int j = 0; j < J; ++j) {
            result.schedule.set(n, j, global_best[j] != 0);
            if (global_best[j]) ++counts[j];
        }
        result.vehicle_fitness[n] = global_best_fitness;
        if (trace) {
            trace->vehicles.push_back(n);
            trace->best_fitness.push_back(std::move(series));
        }
    }
    return result;
}

}  // namespace vecfl
