#include "spadsim/explore.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <limits>
#include <thread>

#include "spadsim/errors.hpp"

namespace spadsim {

namespace {

// Runs fn(i) for i in [0, n) across up to `threads` workers. Exceptions
// propagate from the first failing index.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
    int workers = std::max(1, threads);
    if (workers == 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (;;) {
                std::size_t i = next.fetch_add(1);
                if (i >= n) return;
                try {
                    fn(i);
                } catch (...) {
                    errors[static_cast<std::size_t>(w)] = std::current_exception();
                    return;
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

} // namespace

// --- dse ---------------------------------------------------------------------

namespace {

template <typename T>
std::vector<T> axis_or(const std::vector<T>& axis, T base) {
    return axis.empty() ? std::vector<T>{base} : axis;
}

bool same_area_features(const ChipSpec& a, const ChipSpec& b) {
    return a.core_count == b.core_count && a.vector_width == b.vector_width &&
           a.systolic_h == b.systolic_h && a.systolic_w == b.systolic_w &&
           a.l1_kb_per_core == b.l1_kb_per_core && a.l2_mb == b.l2_mb;
}

} // namespace

std::vector<DesignPoint> dse_chips(const MachineSpec& base, const DseGrid& grid,
                                   const ModelSpec& model, const ParallelismSpec& par,
                                   const PhaseWork& work, const PerfParams& perf,
                                   const CostParams& cost) {
    auto cores = axis_or(grid.core_counts, base.chip.core_count);
    auto widths = axis_or(grid.vector_widths, base.chip.vector_width);
    auto systolics = axis_or(grid.systolics, {base.chip.systolic_h, base.chip.systolic_w});
    auto l1s = axis_or(grid.l1_kbs, base.chip.l1_kb_per_core);
    auto l2s = axis_or(grid.l2_mbs, base.chip.l2_mb);
    auto bws = axis_or(grid.bandwidths_gbs, memory_bandwidth_gbs(base.chip));
    if (cores.empty() || widths.empty() || systolics.empty())
        throw InvalidSpec("dse_chips: empty grid");

    std::vector<DesignPoint> points;
    for (int c : cores)
        for (int vw : widths)
            for (auto [sh, sw] : systolics)
                for (double l1 : l1s)
                    for (double l2 : l2s)
                        for (double bw : bws) {
                            ChipSpec chip = base.chip;
                            chip.core_count = c;
                            chip.vector_width = vw;
                            chip.systolic_h = sh;
                            chip.systolic_w = sw;
                            chip.l1_kb_per_core = l1;
                            chip.l2_mb = l2;
                            chip.bandwidth_override_gbs = bw;
                            chip.validate();
                            chip.die_area_mm2 = same_area_features(chip, base.chip)
                                                    ? base.chip.die_area_mm2
                                                    : estimate_die_area_mm2(chip);
                            chip.name = base.chip.name + "/c" + std::to_string(c) + "v" +
                                        std::to_string(vw) + "s" + std::to_string(sh) + "x" +
                                        std::to_string(sw);
                            MachineSpec m = base;
                            m.chip = chip;
                            DesignPoint pt;
                            pt.chip = chip;
                            pt.latency_s = phase_latency(model, m, par, work, perf).total();
                            pt.die_area_mm2 = chip.die_area_mm2;
                            pt.cost_usd = chip_cost(chip, cost).total_usd;
                            pt.tdp_w = chip_tdp(chip, cost);
                            points.push_back(std::move(pt));
                        }

    for (auto& p : points) {
        p.pareto = true;
        for (const auto& q : points) {
            bool dominates = q.latency_s <= p.latency_s && q.cost_usd <= p.cost_usd &&
                             (q.latency_s < p.latency_s || q.cost_usd < p.cost_usd);
            if (dominates) {
                p.pareto = false;
                break;
            }
        }
    }
    return points;
}

// --- provision ------------------------------------------------------------------

namespace {

ClusterConfig cell_cluster(const ProvisionSpec& spec, int n_prefill, int n_decode) {
    ClusterConfig cfg;
    if (spec.scheduler.kind == SchedulerKind::Colocated) {
        PoolConfig pool;
        pool.role = PoolRole::Mixed;
        pool.machine = spec.prefill_type.machine;
        pool.count = n_prefill;
        pool.deployment = spec.prefill_type.deployment;
        cfg.pools.push_back(pool);
    } else {
        PoolConfig p;
        p.role = PoolRole::Prefill;
        p.machine = spec.prefill_type.machine;
        p.count = n_prefill;
        p.deployment = spec.prefill_type.deployment;
        cfg.pools.push_back(p);
        PoolConfig d;
        d.role = PoolRole::Decode;
        d.machine = spec.decode_type.machine;
        d.count = n_decode;
        d.deployment = spec.decode_type.deployment;
        cfg.pools.push_back(d);
    }
    cfg.baseline = spec.baseline;
    return cfg;
}

std::vector<MachineCount> cell_machines(const ProvisionSpec& spec, int n_prefill, int n_decode) {
    std::vector<MachineCount> ms;
    ms.push_back(MachineCount{spec.prefill_type.machine.chip,
                              spec.prefill_type.machine.chips_per_machine, n_prefill});
    if (spec.scheduler.kind != SchedulerKind::Colocated)
        ms.push_back(MachineCount{spec.decode_type.machine.chip,
                                  spec.decode_type.machine.chips_per_machine, n_decode});
    return ms;
}

} // namespace

bool ProvisionResult::feasible(const ProvisionCell& c) const {
    switch (tier) {
    case SloTier::Loose: return c.pass_loose;
    case SloTier::Normal: return c.pass_normal;
    case SloTier::Tight: return c.pass_tight;
    }
    return false;
}

const ProvisionCell& ProvisionResult::best() const {
    if (frontier.empty()) throw NoFeasiblePoint("provisioning grid has no feasible cell");
    return cells[frontier.front()];
}

ProvisionResult provision(const ProvisionSpec& spec, const Trace& trace) {
    if (spec.max_prefill < 1) throw InvalidSpec("provision: max_prefill must be >= 1");
    if (spec.scheduler.kind != SchedulerKind::Colocated && spec.max_decode < 1)
        throw InvalidSpec("provision: max_decode must be >= 1");
    if (!(spec.target_rate_rps > 0)) throw InvalidSpec("provision: target rate must be > 0");

    Trace scaled = scale_to_rate(trace, spec.target_rate_rps);
    auto baselines = compute_baselines(scaled, spec.prefill_type.deployment.model, spec.baseline,
                                       spec.perf);

    ProvisionResult result;
    result.target_rate_rps = spec.target_rate_rps;
    result.tier = spec.tier;

    bool colocated = spec.scheduler.kind == SchedulerKind::Colocated;
    for (int p = 1; p <= spec.max_prefill; ++p) {
        if (colocated) {
            ProvisionCell cell;
            cell.n_prefill = p;
            result.cells.push_back(std::move(cell));
        } else {
            for (int d = 1; d <= spec.max_decode; ++d) {
                ProvisionCell cell;
                cell.n_prefill = p;
                cell.n_decode = d;
                result.cells.push_back(std::move(cell));
            }
        }
    }

    parallel_for(result.cells.size(), spec.threads, [&](std::size_t i) {
        ProvisionCell& cell = result.cells[i];
        ClusterCost cc = cluster_cost(cell_machines(spec, cell.n_prefill, cell.n_decode), spec.cost);
        cell.norm_cost = cc.norm_cost;
        cell.norm_tdp = cc.norm_tdp;
        try {
            ClusterConfig cfg = cell_cluster(spec, cell.n_prefill, cell.n_decode);
            SimMetrics metrics = simulate(cfg, spec.scheduler, scaled, spec.perf, 0);
            cell.simulated = true;
            cell.pass_loose = evaluate_slo(metrics, baselines, slo_thresholds(SloTier::Loose)).pass;
            cell.pass_normal =
                evaluate_slo(metrics, baselines, slo_thresholds(SloTier::Normal)).pass;
            cell.pass_tight = evaluate_slo(metrics, baselines, slo_thresholds(SloTier::Tight)).pass;
            cell.eval = evaluate_slo(metrics, baselines, slo_thresholds(spec.tier));
        } catch (const SpadError& e) {
            cell.error = e.what();
        }
    });

    double best_cost = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < result.cells.size(); ++i) {
        const ProvisionCell& c = result.cells[i];
        if (c.error.empty() && c.simulated && result.feasible(c))
            best_cost = std::min(best_cost, c.norm_cost);
    }
    if (!std::isfinite(best_cost))
        throw NoFeasiblePoint("no (n_prefill, n_decode) cell meets the " +
                              std::string(to_string(spec.tier)) + " SLOs at " +
                              std::to_string(spec.target_rate_rps) + " req/s");
    for (std::size_t i = 0; i < result.cells.size(); ++i) {
        const ProvisionCell& c = result.cells[i];
        if (c.error.empty() && c.simulated && result.feasible(c) && c.norm_cost <= best_cost)
            result.frontier.push_back(i);
    }
    return result;
}

// --- reallocate -------------------------------------------------------------------

namespace {

struct RateProbe {
    const ReallocateSpec& spec;
    const Trace& trace;
    const ClusterConfig& cfg;
    const ModelSpec& model;

    bool feasible(double rate) const {
        try {
            Trace scaled = scale_to_rate(trace, rate);
            auto baselines = compute_baselines(scaled, model, spec.baseline, spec.perf);
            SimMetrics metrics = simulate(cfg, spec.scheduler, scaled, spec.perf, 0);
            return evaluate_slo(metrics, baselines, slo_thresholds(spec.tier)).pass;
        } catch (const SpadError&) {
            return false;
        }
    }
};

// Geometric bracket-and-bisect: returns the highest feasible rate such that
// rate*(1+tol) is infeasible (within bracketing limits).
double max_rate_search(const RateProbe& probe, double initial, double tol) {
    double lo = 0.0, hi = 0.0;
    double r = initial;
    if (probe.feasible(r)) {
        lo = r;
        for (int i = 0; i < 24; ++i) {
            r *= 2.0;
            if (!probe.feasible(r)) {
                hi = r;
                break;
            }
            lo = r;
        }
        if (hi == 0.0) return lo; // never found an infeasible ceiling; report last good
    } else {
        hi = r;
        for (int i = 0; i < 24; ++i) {
            r /= 2.0;
            if (probe.feasible(r)) {
                lo = r;
                break;
            }
            hi = r;
        }
        if (lo == 0.0) return 0.0; // infeasible all the way down
    }
    while (hi / lo > 1.0 + tol) {
        double mid = std::sqrt(lo * hi);
        if (probe.feasible(mid)) lo = mid;
        else hi = mid;
    }
    // batch formation makes feasibility slightly non-monotone in rate; walk
    // forward until one tolerance step above is genuinely infeasible
    for (int i = 0; i < 200 && probe.feasible(lo * (1.0 + tol)); ++i) lo *= 1.0 + tol;
    return lo;
}

} // namespace

ReallocateResult reallocate(const ReallocateSpec& spec, const Trace& trace) {
    if (spec.inventory.empty()) throw InvalidSpec("reallocate: empty inventory");
    if (!(spec.rate_tolerance > 0)) throw InvalidSpec("reallocate: rate_tolerance must be > 0");
    const ModelSpec& model = spec.inventory.front().type.deployment.model;
    double initial = spec.initial_rate_rps > 0 ? spec.initial_rate_rps : trace.offered_rate_rps();

    // enumerate per-type prefill-role counts
    std::vector<AssignmentResult> assignments;
    std::vector<int> counts(spec.inventory.size(), 0);
    for (;;) {
        int total_prefill = 0, total_decode = 0;
        for (std::size_t i = 0; i < counts.size(); ++i) {
            total_prefill += counts[i];
            total_decode += spec.inventory[i].count - counts[i];
        }
        if (total_prefill >= 1 && total_decode >= 1) {
            AssignmentResult a;
            a.to_prefill = counts;
            assignments.push_back(std::move(a));
        }
        // odometer increment
        std::size_t k = 0;
        while (k < counts.size() && counts[k] == spec.inventory[k].count) {
            counts[k] = 0;
            ++k;
        }
        if (k == counts.size()) break;
        ++counts[k];
    }
    if (assignments.empty())
        throw InvalidSpec("reallocate: inventory cannot form both a prefill and a decode pool");

    parallel_for(assignments.size(), spec.threads, [&](std::size_t i) {
        AssignmentResult& a = assignments[i];
        ClusterConfig cfg;
        cfg.baseline = spec.baseline;
        for (std::size_t t = 0; t < spec.inventory.size(); ++t) {
            const InventoryItem& item = spec.inventory[t];
            if (a.to_prefill[t] > 0) {
                PoolConfig p;
                p.role = PoolRole::Prefill;
                p.machine = item.type.machine;
                p.count = a.to_prefill[t];
                p.deployment = item.type.deployment;
                cfg.pools.push_back(p);
            }
            int decode_count = item.count - a.to_prefill[t];
            if (decode_count > 0) {
                PoolConfig d;
                d.role = PoolRole::Decode;
                d.machine = item.type.machine;
                d.count = decode_count;
                d.deployment = item.type.deployment;
                cfg.pools.push_back(d);
            }
        }
        try {
            cfg.validate();
        } catch (const SpadError& e) {
            a.error = e.what();
            return;
        }
        RateProbe probe{spec, trace, cfg, model};
        a.max_rate_rps = max_rate_search(probe, initial, spec.rate_tolerance);
    });

    ReallocateResult result;
    result.assignments = std::move(assignments);
    bool any_valid = false;
    for (const auto& a : result.assignments) any_valid = any_valid || a.error.empty();
    if (!any_valid)
        throw InfeasibleDeployment("reallocate: the model fits no role assignment: " +
                                   result.assignments.front().error);
    result.best = 0;
    for (std::size_t i = 1; i < result.assignments.size(); ++i)
        if (result.assignments[i].max_rate_rps > result.assignments[result.best].max_rate_rps)
            result.best = i;
    return result;
}

} // namespace spadsim
