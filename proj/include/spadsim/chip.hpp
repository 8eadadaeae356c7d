#pragma once

#include <optional>
#include <string>

#include <json.hpp>

namespace spadsim {

enum class MemProtocol { GDDR7, HBM3, Custom };

const char* to_string(MemProtocol p);
MemProtocol mem_protocol_from_string(const std::string& s);

// Microarchitectural description of one accelerator chip. Peak rates are
// derived, not stored, so a spec file stays a single source of truth.
struct ChipSpec {
    std::string name;
    int core_count = 0;
    int lanes_per_core = 0;
    int vector_width = 0;   // FP32 lanes per vector unit
    int systolic_h = 0;     // systolic array rows
    int systolic_w = 0;     // systolic array cols
    double l1_kb_per_core = 0.0; // KiB
    double l2_mb = 0.0;          // MiB
    MemProtocol mem_protocol = MemProtocol::HBM3;
    int mem_bus_bits = 0;
    double pin_gbps = 0.0;       // Gb/s per pin
    int mem_packages = 0;
    double gb_per_package = 0.0; // GB (decimal)
    double clock_tensor_ghz = 0.0;
    double clock_vector_ghz = 0.0;
    double die_area_mm2 = 0.0;
    std::optional<double> bandwidth_override_gbs; // GB/s, wins over bus*pin/8
    double tensor_flops_scale_fp8 = 2.0;
    // Plumbing for baseline chips whose published cost/TDP is taken as-is
    // instead of being derived (A100, power-capped H100).
    std::optional<double> cost_override_usd;
    std::optional<double> tdp_override_w;

    void validate() const; // throws InvalidSpec
};

// Scale-up = within a machine (NVLink-class), scale-out = across machines
// (Infiniband-class). Both are totals per chip.
struct InterconnectSpec {
    double scaleup_gbs_per_chip = 900.0;
    double scaleout_gbs_per_chip = 50.0;

    void validate() const;
};

struct MachineSpec {
    ChipSpec chip;
    int chips_per_machine = 8;
    InterconnectSpec interconnect;

    void validate() const;
};

// core_count * lanes_per_core * systolic_h * systolic_w * 2 * clock_tensor,
// doubled again for FP8 (elem_bytes == 1).
double peak_tensor_flops(const ChipSpec& chip, int elem_bytes);

// core_count * lanes_per_core * vector_width * 2 * clock_vector (FP32).
double peak_vector_flops(const ChipSpec& chip);

// GB/s: the override when present, else mem_bus_bits * pin_gbps / 8.
double memory_bandwidth_gbs(const ChipSpec& chip);

double memory_capacity_bytes(const ChipSpec& chip);

// The reference H100 used for cost/TDP normalization and SLO baselines.
// Matches data/chips/h100.json.
ChipSpec reference_h100();

ChipSpec chip_from_json(const nlohmann::json& j);
nlohmann::ordered_json chip_to_json(const ChipSpec& chip);
ChipSpec load_chip_spec(const std::string& path);

InterconnectSpec interconnect_from_json(const nlohmann::json& j);

} // namespace spadsim
