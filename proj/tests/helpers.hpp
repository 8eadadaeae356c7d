#pragma once

#include <string>

#include "spadsim/clustersim.hpp"
#include "spadsim/model.hpp"
#include "spadsim/perf.hpp"

namespace spadsim::test {

inline std::string data_dir() { return SPADSIM_DATA_DIR; }
inline std::string chip_path(const std::string& name) { return data_dir() + "/chips/" + name + ".json"; }
inline std::string model_path(const std::string& name) { return data_dir() + "/models/" + name + ".json"; }

inline PerfParams ideal_params() {
    PerfParams p;
    p.dram_efficiency = 1.0;
    p.tensor_efficiency = 1.0;
    p.vector_efficiency = 1.0;
    p.kernel_launch_us = 0.0;
    return p;
}

inline MachineSpec h100_machine(int chips = 8) {
    MachineSpec m;
    m.chip = reference_h100();
    m.chips_per_machine = chips;
    return m;
}

// Small dense transformer for fast cluster-sim property tests.
inline ModelSpec toy_model() {
    ModelSpec m;
    m.name = "toy-2l";
    m.num_layers = 2;
    m.hidden_dim = 64;
    m.num_heads = 4;
    m.num_kv_heads = 4;
    m.head_dim = 16;
    m.ffn_intermediate = 128;
    m.vocab_size = 256;
    m.weight_bytes_per_param = 2;
    m.kv_bytes_per_elem = 2;
    return m;
}

// Single-chip machine sized so a toy deployment holds a few thousand KV
// tokens.
inline MachineSpec toy_machine(double mem_gb = 0.004) {
    MachineSpec m;
    ChipSpec c;
    c.name = "toy-chip";
    c.core_count = 4;
    c.lanes_per_core = 2;
    c.vector_width = 8;
    c.systolic_h = 8;
    c.systolic_w = 8;
    c.l1_kb_per_core = 64;
    c.l2_mb = 1;
    c.mem_protocol = MemProtocol::GDDR7;
    c.mem_bus_bits = 64;
    c.pin_gbps = 16;
    c.mem_packages = 1;
    c.gb_per_package = mem_gb;
    c.clock_tensor_ghz = 1.0;
    c.clock_vector_ghz = 1.0;
    c.die_area_mm2 = 100;
    m.chip = c;
    m.chips_per_machine = 1;
    return m;
}

inline ClusterConfig toy_cluster(int n_prefill, int n_decode, double mem_gb = 0.004) {
    ClusterConfig cfg;
    DeploymentSpec dep{toy_model(), ParallelismSpec{1, 1, 1}, 0.9};
    PoolConfig p;
    p.role = PoolRole::Prefill;
    p.machine = toy_machine(mem_gb);
    p.count = n_prefill;
    p.deployment = dep;
    cfg.pools.push_back(p);
    PoolConfig d;
    d.role = PoolRole::Decode;
    d.machine = toy_machine(mem_gb);
    d.count = n_decode;
    d.deployment = dep;
    cfg.pools.push_back(d);
    cfg.baseline.machine = toy_machine(mem_gb);
    cfg.baseline.par = dep.par;
    return cfg;
}

} // namespace spadsim::test
