#pragma once

#include <string>
#include <vector>

#include "spadsim/clustersim.hpp"
#include "spadsim/econ.hpp"
#include "spadsim/perf.hpp"

namespace spadsim {

// --- chip design-space exploration -------------------------------------------

// Axis value lists; empty lists keep the base chip's value.
struct DseGrid {
    std::vector<int> core_counts;
    std::vector<int> vector_widths;
    std::vector<std::pair<int, int>> systolics; // (h, w)
    std::vector<double> l1_kbs;
    std::vector<double> l2_mbs;
    std::vector<double> bandwidths_gbs;
};

struct DesignPoint {
    ChipSpec chip;
    double latency_s = 0.0;
    double die_area_mm2 = 0.0;
    double cost_usd = 0.0;
    double tdp_w = 0.0;
    bool pareto = false; // not dominated in (latency, cost)
};

// Evaluates every grid candidate at the workload point. Candidates that keep
// all area-relevant parameters of the base chip keep its measured area;
// otherwise the crude linear estimator prices them.
std::vector<DesignPoint> dse_chips(const MachineSpec& base, const DseGrid& grid,
                                   const ModelSpec& model, const ParallelismSpec& par,
                                   const PhaseWork& work, const PerfParams& perf,
                                   const CostParams& cost);

// --- cluster provisioning -----------------------------------------------------

struct MachineTypeSpec {
    std::string name;
    MachineSpec machine;
    DeploymentSpec deployment;
};

struct ProvisionSpec {
    SchedulerSpec scheduler;
    MachineTypeSpec prefill_type; // the only type for colocated grids
    MachineTypeSpec decode_type;  // ignored for colocated
    int max_prefill = 8;
    int max_decode = 8;
    SloTier tier = SloTier::Normal;
    double target_rate_rps = 1.0;
    BaselineDeployment baseline;
    PerfParams perf;
    CostParams cost;
    int threads = 1;
};

struct ProvisionCell {
    int n_prefill = 0;
    int n_decode = 0; // 0 for colocated grids
    bool simulated = false;
    bool pass_loose = false, pass_normal = false, pass_tight = false;
    SloEval eval; // at the requested tier
    double norm_cost = 0.0;
    double norm_tdp = 0.0;
    std::string error; // infeasible deployment / capacity deadlock note
};

struct ProvisionResult {
    double target_rate_rps = 0.0;
    SloTier tier = SloTier::Normal;
    std::vector<ProvisionCell> cells;    // sorted by (n_prefill, n_decode)
    std::vector<std::size_t> frontier;   // min-cost feasible cells at the tier

    bool feasible(const ProvisionCell& c) const;
    const ProvisionCell& best() const; // first frontier cell
};

// Scales the trace to the target rate and sweeps the machine-count grid
// exhaustively. Throws NoFeasiblePoint when nothing passes the tier.
ProvisionResult provision(const ProvisionSpec& spec, const Trace& trace);

// --- reallocation ---------------------------------------------------------------

struct InventoryItem {
    MachineTypeSpec type;
    int count = 0;
};

struct ReallocateSpec {
    std::vector<InventoryItem> inventory;
    SchedulerSpec scheduler;
    SloTier tier = SloTier::Normal;
    BaselineDeployment baseline;
    PerfParams perf;
    double rate_tolerance = 0.02; // binary search stops at hi/lo <= 1+tol
    double initial_rate_rps = 0.0; // 0 = trace's own offered rate
    int threads = 1;
};

struct AssignmentResult {
    std::vector<int> to_prefill; // per inventory item, machines given the prefill role
    double max_rate_rps = 0.0;   // highest feasible rate found (0 = never feasible)
    std::string error;
};

struct ReallocateResult {
    std::vector<AssignmentResult> assignments; // canonical order
    std::size_t best = 0;                      // argmax max_rate, ties to lowest index
};

// Enumerates whole-machine role assignments (each type may serve either
// role), binary-searching the max supported rate for each.
ReallocateResult reallocate(const ReallocateSpec& spec, const Trace& trace);

} // namespace spadsim
