#pragma once

#include <vector>

#include "spadsim/chip.hpp"

namespace spadsim {

struct CostParams {
    double wafer_cost_usd = 20000.0;
    double wafer_diameter_mm = 300.0;
    double gddr_usd_per_gb = 3.0;
    double hbm_usd_per_gb = 9.0; // sweepable {6, 9, 12}
    ChipSpec ref_chip = reference_h100();
    double ref_tdp_w = 700.0;
    double overhead_frac = 0.10; // VRM loss and peripherals, applied as /(1-overhead)
    double hbm_pkg_power_w = 30.0;
    double gddr_pj_per_bit = 4.5;

    void validate() const;
};

// Circular-wafer approximation, not floored:
//   pi (d/2)^2 / A  -  pi d / sqrt(2 A)
double dies_per_wafer(double area_mm2, double diameter_mm);

struct ChipCost {
    double die_usd = 0.0;
    double mem_usd = 0.0;
    double total_usd = 0.0; // die + mem, or the spec's cost override
};

ChipCost chip_cost(const ChipSpec& chip, const CostParams& params);

// Die power scales with area at the reference chip's power density; memory
// power is per-package for HBM and pJ/bit * bandwidth for GDDR. Honors
// tdp_override_w when the spec pins a published number.
double chip_tdp(const ChipSpec& chip, const CostParams& params);

// Cost/TDP of one chip relative to the reference chip.
double normalized_cost(const ChipSpec& chip, const CostParams& params);
double normalized_tdp(const ChipSpec& chip, const CostParams& params);

struct MachineCount {
    ChipSpec chip;
    int chips_per_machine = 8;
    int count = 0;
};

struct ClusterCost {
    double total_usd = 0.0;
    double total_tdp_w = 0.0;
    double norm_cost = 0.0; // in units of reference 8-chip machines
    double norm_tdp = 0.0;
};

// Sums machine costs/TDPs and normalizes by an 8-ref-chip machine.
ClusterCost cluster_cost(const std::vector<MachineCount>& machines, const CostParams& params);

// Crude linear die-area estimator for design-space candidates without a
// measured area: interpolates three known (spec, area) points on
// core*(systolic + lanes*vector) and total cache features. Plumbing only.
double estimate_die_area_mm2(const ChipSpec& chip);

} // namespace spadsim
