#include "spadsim/econ.hpp"

#include <cmath>

#include "spadsim/errors.hpp"

namespace spadsim {

void CostParams::validate() const {
    if (!(wafer_cost_usd > 0) || !(wafer_diameter_mm > 0) || !(gddr_usd_per_gb > 0) ||
        !(hbm_usd_per_gb > 0) || !(ref_tdp_w > 0) || !(hbm_pkg_power_w > 0) ||
        !(gddr_pj_per_bit > 0))
        throw InvalidSpec("CostParams: all rates must be positive");
    if (overhead_frac < 0.0 || overhead_frac >= 0.5)
        throw InvalidSpec("CostParams.overhead_frac must be in [0, 0.5)");
    ref_chip.validate();
}

double dies_per_wafer(double area_mm2, double diameter_mm) {
    double wafer_area = M_PI * (diameter_mm / 2.0) * (diameter_mm / 2.0);
    if (!(area_mm2 > 0) || area_mm2 >= wafer_area)
        throw DomainError("dies_per_wafer: die area must be in (0, wafer area)");
    return wafer_area / area_mm2 - M_PI * diameter_mm / std::sqrt(2.0 * area_mm2);
}

namespace {

double memory_cost_usd(const ChipSpec& chip, const CostParams& p) {
    double gb = static_cast<double>(chip.mem_packages) * chip.gb_per_package;
    double rate = chip.mem_protocol == MemProtocol::GDDR7 ? p.gddr_usd_per_gb : p.hbm_usd_per_gb;
    return gb * rate;
}

} // namespace

ChipCost chip_cost(const ChipSpec& chip, const CostParams& params) {
    params.validate();
    ChipCost c;
    c.die_usd = params.wafer_cost_usd / dies_per_wafer(chip.die_area_mm2, params.wafer_diameter_mm);
    c.mem_usd = memory_cost_usd(chip, params);
    c.total_usd = chip.cost_override_usd ? *chip.cost_override_usd : c.die_usd + c.mem_usd;
    return c;
}

double chip_tdp(const ChipSpec& chip, const CostParams& params) {
    params.validate();
    if (chip.tdp_override_w) return *chip.tdp_override_w;
    double usable = 1.0 - params.overhead_frac;
    double ref_mem_power = params.hbm_pkg_power_w * params.ref_chip.mem_packages;
    double density =
        (params.ref_tdp_w * usable - ref_mem_power) / params.ref_chip.die_area_mm2; // W/mm^2
    double mem_power;
    if (chip.mem_protocol == MemProtocol::GDDR7) {
        double bits_per_s = memory_bandwidth_gbs(chip) * 1e9 * 8.0;
        mem_power = params.gddr_pj_per_bit * 1e-12 * bits_per_s;
    } else {
        mem_power = params.hbm_pkg_power_w * chip.mem_packages;
    }
    return (chip.die_area_mm2 * density + mem_power) / usable;
}

double normalized_cost(const ChipSpec& chip, const CostParams& params) {
    return chip_cost(chip, params).total_usd / chip_cost(params.ref_chip, params).total_usd;
}

double normalized_tdp(const ChipSpec& chip, const CostParams& params) {
    return chip_tdp(chip, params) / chip_tdp(params.ref_chip, params);
}

ClusterCost cluster_cost(const std::vector<MachineCount>& machines, const CostParams& params) {
    params.validate();
    ClusterCost out;
    for (const auto& m : machines) {
        if (m.count < 0) throw InvalidSpec("cluster_cost: machine count must be >= 0");
        out.total_usd += chip_cost(m.chip, params).total_usd * m.chips_per_machine * m.count;
        out.total_tdp_w += chip_tdp(m.chip, params) * m.chips_per_machine * m.count;
    }
    double ref_machine_usd = chip_cost(params.ref_chip, params).total_usd * 8.0;
    double ref_machine_w = chip_tdp(params.ref_chip, params) * 8.0;
    out.norm_cost = out.total_usd / ref_machine_usd;
    out.norm_tdp = out.total_tdp_w / ref_machine_w;
    return out;
}

double estimate_die_area_mm2(const ChipSpec& chip) {
    // 3-point interpolation over (compute area, cache area, fixed) features.
    double compute = static_cast<double>(chip.core_count) *
                     (static_cast<double>(chip.systolic_h) * chip.systolic_w +
                      static_cast<double>(chip.lanes_per_core) * chip.vector_width);
    double cache_mb = chip.l2_mb + chip.core_count * chip.l1_kb_per_core / 1024.0;
    return 9.13605697e-4 * compute + 7.27736132 * cache_mb + 132.797601;
}

} // namespace spadsim
