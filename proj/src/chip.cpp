#include "spadsim/chip.hpp"

#include <fstream>

#include "spadsim/errors.hpp"

namespace spadsim {

const char* to_string(MemProtocol p) {
    switch (p) {
    case MemProtocol::GDDR7: return "GDDR7";
    case MemProtocol::HBM3: return "HBM3";
    case MemProtocol::Custom: return "custom";
    }
    return "custom";
}

MemProtocol mem_protocol_from_string(const std::string& s) {
    if (s == "GDDR7" || s == "gddr7") return MemProtocol::GDDR7;
    if (s == "HBM3" || s == "hbm3") return MemProtocol::HBM3;
    if (s == "custom") return MemProtocol::Custom;
    throw InvalidSpec("unknown mem_protocol: " + s);
}

void ChipSpec::validate() const {
    auto positive = [&](double v, const char* field) {
        if (!(v > 0)) throw InvalidSpec(name + ": " + field + " must be positive");
    };
    positive(core_count, "core_count");
    positive(lanes_per_core, "lanes_per_core");
    positive(vector_width, "vector_width");
    positive(systolic_h, "systolic_h");
    positive(systolic_w, "systolic_w");
    positive(l1_kb_per_core, "l1_kb_per_core");
    positive(l2_mb, "l2_mb");
    positive(mem_bus_bits, "mem_bus_bits");
    positive(pin_gbps, "pin_gbps");
    positive(mem_packages, "mem_packages");
    positive(gb_per_package, "gb_per_package");
    positive(clock_tensor_ghz, "clock_tensor_ghz");
    positive(clock_vector_ghz, "clock_vector_ghz");
    positive(die_area_mm2, "die_area_mm2");
    if (bandwidth_override_gbs && !(*bandwidth_override_gbs > 0))
        throw InvalidSpec(name + ": bandwidth_override_gbs must be positive");
    if (!(tensor_flops_scale_fp8 > 0))
        throw InvalidSpec(name + ": tensor_flops_scale_fp8 must be positive");
}

void InterconnectSpec::validate() const {
    if (!(scaleup_gbs_per_chip > 0) || !(scaleout_gbs_per_chip > 0))
        throw InvalidSpec("interconnect bandwidths must be positive");
}

void MachineSpec::validate() const {
    chip.validate();
    interconnect.validate();
    if (chips_per_machine < 1) throw InvalidSpec("chips_per_machine must be >= 1");
}

double peak_tensor_flops(const ChipSpec& chip, int elem_bytes) {
    if (elem_bytes != 1 && elem_bytes != 2)
        throw InvalidSpec("peak_tensor_flops: elem_bytes must be 1 or 2");
    double peak = static_cast<double>(chip.core_count) * chip.lanes_per_core *
                  chip.systolic_h * chip.systolic_w * 2.0 * chip.clock_tensor_ghz * 1e9;
    if (elem_bytes == 1) peak *= chip.tensor_flops_scale_fp8;
    return peak;
}

double peak_vector_flops(const ChipSpec& chip) {
    return static_cast<double>(chip.core_count) * chip.lanes_per_core * chip.vector_width *
           2.0 * chip.clock_vector_ghz * 1e9;
}

double memory_bandwidth_gbs(const ChipSpec& chip) {
    if (chip.bandwidth_override_gbs) return *chip.bandwidth_override_gbs;
    return static_cast<double>(chip.mem_bus_bits) * chip.pin_gbps / 8.0;
}

double memory_capacity_bytes(const ChipSpec& chip) {
    return static_cast<double>(chip.mem_packages) * chip.gb_per_package * 1e9;
}

ChipSpec reference_h100() {
    ChipSpec c;
    c.name = "h100";
    c.core_count = 132;
    c.lanes_per_core = 4;
    c.vector_width = 32;
    c.systolic_h = 16;
    c.systolic_w = 32;
    c.l1_kb_per_core = 256;
    c.l2_mb = 50;
    c.mem_protocol = MemProtocol::HBM3;
    c.mem_bus_bits = 5120;
    c.pin_gbps = 5.2;
    c.mem_packages = 5;
    c.gb_per_package = 16;
    c.clock_tensor_ghz = 1.83;
    c.clock_vector_ghz = 1.98;
    c.die_area_mm2 = 814;
    c.bandwidth_override_gbs = 3352; // 5120b * 5.2 Gb/s/8 = 3328; datasheet says 3352
    return c;
}

namespace {

template <typename T>
T require(const nlohmann::json& j, const char* field) {
    if (!j.contains(field)) throw InvalidSpec(std::string("chip spec missing field: ") + field);
    try {
        return j.at(field).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw InvalidSpec(std::string("chip spec field ") + field + ": " + e.what());
    }
}

} // namespace

ChipSpec chip_from_json(const nlohmann::json& j) {
    ChipSpec c;
    c.name = require<std::string>(j, "name");
    c.core_count = require<int>(j, "core_count");
    c.lanes_per_core = require<int>(j, "lanes_per_core");
    c.vector_width = require<int>(j, "vector_width");
    c.systolic_h = require<int>(j, "systolic_h");
    c.systolic_w = require<int>(j, "systolic_w");
    c.l1_kb_per_core = require<double>(j, "l1_kb_per_core");
    c.l2_mb = require<double>(j, "l2_mb");
    c.mem_protocol = mem_protocol_from_string(require<std::string>(j, "mem_protocol"));
    c.mem_bus_bits = require<int>(j, "mem_bus_bits");
    c.pin_gbps = require<double>(j, "pin_gbps");
    c.mem_packages = require<int>(j, "mem_packages");
    c.gb_per_package = require<double>(j, "gb_per_package");
    c.clock_tensor_ghz = require<double>(j, "clock_tensor_ghz");
    c.clock_vector_ghz = require<double>(j, "clock_vector_ghz");
    c.die_area_mm2 = require<double>(j, "die_area_mm2");
    if (j.contains("bandwidth_override_gbs")) c.bandwidth_override_gbs = j.at("bandwidth_override_gbs").get<double>();
    if (j.contains("tensor_flops_scale_fp8")) c.tensor_flops_scale_fp8 = j.at("tensor_flops_scale_fp8").get<double>();
    if (j.contains("cost_override_usd")) c.cost_override_usd = j.at("cost_override_usd").get<double>();
    if (j.contains("tdp_override_w")) c.tdp_override_w = j.at("tdp_override_w").get<double>();
    c.validate();
    return c;
}

nlohmann::ordered_json chip_to_json(const ChipSpec& c) {
    nlohmann::ordered_json j;
    j["name"] = c.name;
    j["core_count"] = c.core_count;
    j["lanes_per_core"] = c.lanes_per_core;
    j["vector_width"] = c.vector_width;
    j["systolic_h"] = c.systolic_h;
    j["systolic_w"] = c.systolic_w;
    j["l1_kb_per_core"] = c.l1_kb_per_core;
    j["l2_mb"] = c.l2_mb;
    j["mem_protocol"] = to_string(c.mem_protocol);
    j["mem_bus_bits"] = c.mem_bus_bits;
    j["pin_gbps"] = c.pin_gbps;
    j["mem_packages"] = c.mem_packages;
    j["gb_per_package"] = c.gb_per_package;
    j["clock_tensor_ghz"] = c.clock_tensor_ghz;
    j["clock_vector_ghz"] = c.clock_vector_ghz;
    j["die_area_mm2"] = c.die_area_mm2;
    if (c.bandwidth_override_gbs) j["bandwidth_override_gbs"] = *c.bandwidth_override_gbs;
    if (c.tensor_flops_scale_fp8 != 2.0) j["tensor_flops_scale_fp8"] = c.tensor_flops_scale_fp8;
    if (c.cost_override_usd) j["cost_override_usd"] = *c.cost_override_usd;
    if (c.tdp_override_w) j["tdp_override_w"] = *c.tdp_override_w;
    return j;
}

ChipSpec load_chip_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open chip spec: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("bad JSON in " + path + ": " + e.what());
    }
    return chip_from_json(j);
}

InterconnectSpec interconnect_from_json(const nlohmann::json& j) {
    InterconnectSpec ic;
    if (j.contains("scaleup_gbs_per_chip")) ic.scaleup_gbs_per_chip = j.at("scaleup_gbs_per_chip").get<double>();
    if (j.contains("scaleout_gbs_per_chip")) ic.scaleout_gbs_per_chip = j.at("scaleout_gbs_per_chip").get<double>();
    ic.validate();
    return ic;
}

} // namespace spadsim
