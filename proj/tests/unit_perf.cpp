#include <doctest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "spadsim/errors.hpp"
#include "spadsim/perf.hpp"

using namespace spadsim;
using namespace spadsim::test;

TEST_CASE("gemm roofline matches hand-computed values on the h100") {
    ChipSpec h100 = reference_h100();
    PerfParams ideal = ideal_params();
    double peak = peak_tensor_flops(h100, 2);
    double bw = 3352e9;

    // 8192^3 square: compute-bound
    double m = 8192, n = 8192, k = 8192;
    double t = gemm_latency(h100, m, n, k, 2, 0.0, ideal);
    double t_compute = 2 * m * n * k / peak;
    double t_mem = 3 * m * n * 2 / bw;
    CHECK(t == doctest::Approx(std::max(t_compute, t_mem)).epsilon(1e-12));
    CHECK(t == doctest::Approx(1.112e-3).epsilon(0.001));
    CHECK(t_mem == doctest::Approx(0.120e-3).epsilon(0.001));

    // decode-shaped FFN shard: memory-bound
    m = 64;
    n = k = 14336;
    t = gemm_latency(h100, m, n, k, 2, 0.0, ideal);
    t_compute = 2 * m * n * k / peak;
    t_mem = (n * k + m * k + m * n) * 2 / bw;
    CHECK(t == doctest::Approx(t_mem).epsilon(1e-12));
    CHECK(t_compute == doctest::Approx(26.6e-6).epsilon(0.01));
    CHECK(t > 4 * t_compute); // firmly memory-bound
}

TEST_CASE("tile quantization: a 1-row gemm runs at the full-tile rate") {
    ChipSpec c = reference_h100();
    c.systolic_h = 32;
    c.systolic_w = 32;
    c.bandwidth_override_gbs = 1e9; // compute-bound regardless of m
    PerfParams ideal = ideal_params();
    double t1 = gemm_latency(c, 1, 4096, 4096, 2, 0.0, ideal);
    double t32 = gemm_latency(c, 32, 4096, 4096, 2, 0.0, ideal);
    CHECK(t1 == doctest::Approx(t32).epsilon(1e-12)); // both cost one tile row
    CHECK(tile_utilization(1, 4096, 32, 32) == doctest::Approx(1.0 / 32).epsilon(1e-12));
    CHECK(tile_utilization(33, 33, 32, 32) == doctest::Approx((33.0 / 64) * (33.0 / 64)).epsilon(1e-12));
    CHECK(tile_utilization(64, 64, 32, 32) == 1.0);
}

TEST_CASE("vector op roofline: softmax example, zero elements, bandwidth linearity") {
    ChipSpec h100 = reference_h100();
    PerfParams ideal = ideal_params();

    Operator softmax;
    softmax.kind = OpKind::Softmax;
    softmax.elements = 1e9;
    softmax.flops = 5e9;
    softmax.dram_bytes = 3 * 1e9 * 2;
    softmax.elem_bytes = 2;
    double t = vector_op_latency(h100, softmax, ideal);
    CHECK(t == doctest::Approx(6e9 / 3352e9).epsilon(1e-12)); // 1.79 ms, memory-bound
    CHECK(5e9 / peak_vector_flops(h100) == doctest::Approx(0.0747e-3).epsilon(0.01));

    Operator empty;
    empty.kind = OpKind::LayerNorm;
    PerfParams with_launch = ideal_params();
    with_launch.kernel_launch_us = 2.0;
    CHECK(vector_op_latency(h100, empty, with_launch) == doctest::Approx(2e-6).epsilon(1e-12));

    ChipSpec half = h100;
    half.bandwidth_override_gbs = 3352.0 / 2;
    CHECK(vector_op_latency(half, softmax, ideal) == doctest::Approx(2 * t).epsilon(1e-12));
}

TEST_CASE("ring all-reduce formula") {
    InterconnectSpec ic; // 900 GB/s scale-up
    CHECK(allreduce_latency(100e6, 1, ic) == 0.0);
    CHECK(allreduce_latency(100e6, 8, ic) == doctest::Approx(2.0 * 7 / 8 * 100e6 / 900e9).epsilon(1e-12));
    CHECK(allreduce_latency(100e6, 8, ic) == doctest::Approx(194e-6).epsilon(0.01));
    CHECK(allreduce_latency(0.0, 8, ic) == 0.0);
    CHECK_THROWS_AS(allreduce_latency(1.0, 0, ic), InvalidSpec);
}

TEST_CASE("phase latency is the sum of its operator latencies (single stage)") {
    ModelSpec toy = toy_model();
    toy.num_layers = 1;
    MachineSpec machine = toy_machine();
    ParallelismSpec par{1, 1, 1};
    PhaseWork work{Phase::Decode, {17}};
    PerfParams params; // defaults

    auto stages = build_ops(toy, par, work);
    REQUIRE(stages.size() == 1);
    double layer_weights = 0;
    for (const auto& op : stages[0].ops) layer_weights += op.weight_bytes;
    // the final logits gemm prices its own residency, everything else shares
    // the block's weight total
    double manual = 0;
    const Operator& logit = stages[0].ops.back();
    for (std::size_t i = 0; i + 1 < stages[0].ops.size(); ++i) {
        const Operator& op = stages[0].ops[i];
        double frac = op.weight_bytes > 0
                          ? weight_resident_frac(machine.chip, layer_weights - logit.weight_bytes,
                                                 op.dram_bytes - op.weight_bytes)
                          : 0.0;
        manual += operator_latency(machine.chip, machine.interconnect, op, frac, params);
    }
    manual += operator_latency(machine.chip, machine.interconnect, logit,
                               weight_resident_frac(machine.chip, logit.weight_bytes,
                                                    logit.dram_bytes - logit.weight_bytes),
                               params);
    LatencyBreakdown b = phase_latency(toy, machine, par, work, params);
    CHECK(b.total() == doctest::Approx(manual).epsilon(1e-12));
    CHECK(b.total() == b.gemm + b.attention + b.softmax_norm_act + b.communication + b.other);
}

TEST_CASE("phase latency is monotone in bandwidth, cores, systolic area, vector width") {
    ModelSpec bloom = load_model_spec(model_path("bloom-176b"));
    MachineSpec base = h100_machine();
    ParallelismSpec par{8, 1, 1};
    PerfParams params;
    PhaseWork prefill{Phase::Prefill, {1024, 1024}};
    PhaseWork decode{Phase::Decode, std::vector<int>(64, 1024)};

    for (const PhaseWork& work : {prefill, decode}) {
        double prev = 1e99;
        for (double bw : {1000.0, 2000.0, 3352.0, 5000.0}) {
            MachineSpec m = base;
            m.chip.bandwidth_override_gbs = bw;
            double t = phase_latency(bloom, m, par, work, params).total();
            CHECK(t <= prev + 1e-15);
            prev = t;
        }
        prev = 1e99;
        for (int cores : {44, 66, 108, 132, 160}) {
            MachineSpec m = base;
            m.chip.core_count = cores;
            double t = phase_latency(bloom, m, par, work, params).total();
            CHECK(t <= prev + 1e-15);
            prev = t;
        }
        prev = 1e99;
        for (int sw : {8, 16, 32, 64}) {
            MachineSpec m = base;
            m.chip.systolic_w = sw;
            double t = phase_latency(bloom, m, par, work, params).total();
            CHECK(t <= prev + 1e-15);
            prev = t;
        }
        prev = 1e99;
        for (int vw : {8, 16, 32, 64}) {
            MachineSpec m = base;
            m.chip.vector_width = vw;
            double t = phase_latency(bloom, m, par, work, params).total();
            CHECK(t <= prev + 1e-15);
            prev = t;
        }
    }
}

TEST_CASE("bandwidth and core-count trend bands match the reported shapes") {
    ModelSpec bloom = load_model_spec(model_path("bloom-176b"));
    MachineSpec base = h100_machine();
    ParallelismSpec par{8, 1, 1};
    PerfParams params;

    PhaseWork prefill{Phase::Prefill, {1024, 1024}};
    auto sweep = sensitivity_sweep(base, SweepKnob::Bandwidth, {2048, 3352}, bloom, par, prefill, params);
    CHECK(sweep[0].breakdown.total() <= 1.30 * sweep[1].breakdown.total());
    double nt_ratio = sweep[0].breakdown.softmax_norm_act / sweep[1].breakdown.softmax_norm_act;
    CHECK(std::abs(nt_ratio / (3352.0 / 2048.0) - 1.0) <= 0.05);

    PhaseWork decode{Phase::Decode, std::vector<int>(64, 1024)};
    auto cores = sensitivity_sweep(base, SweepKnob::CoreCount, {66, 108, 132}, bloom, par, decode, params);
    CHECK(cores[0].breakdown.total() <= 1.30 * cores[2].breakdown.total());
    CHECK(cores[1].breakdown.total() <= 1.10 * cores[2].breakdown.total());
    // non-increasing in the knob
    CHECK(cores[0].breakdown.total() >= cores[1].breakdown.total());
    CHECK(cores[1].breakdown.total() >= cores[2].breakdown.total());

    auto single = sensitivity_sweep(base, SweepKnob::Bandwidth, {3352}, bloom, par, prefill, params);
    CHECK(single.size() == 1);
}

TEST_CASE("chip-vs-chip orderings at the reference workload points") {
    ModelSpec bloom = load_model_spec(model_path("bloom-176b"));
    ParallelismSpec par{8, 1, 1};
    PerfParams params;
    MachineSpec h100 = h100_machine();
    MachineSpec pc = h100_machine();
    pc.chip = load_chip_spec(chip_path("spad-prefill"));
    MachineSpec dc = h100_machine();
    dc.chip = load_chip_spec(chip_path("spad-decode"));

    PhaseWork prefill{Phase::Prefill, {1024, 1024}};
    CHECK(phase_latency(bloom, pc, par, prefill, params).total() <
          phase_latency(bloom, h100, par, prefill, params).total());

    PhaseWork decode64{Phase::Decode, std::vector<int>(64, 1024)};
    double dc64 = phase_latency(bloom, dc, par, decode64, params).total();
    double h64 = phase_latency(bloom, h100, par, decode64, params).total();
    CHECK(dc64 <= 1.10 * h64);

    PhaseWork decode256{Phase::Decode, std::vector<int>(256, 1024)};
    CHECK(phase_latency(bloom, dc, par, decode256, params).total() >
          phase_latency(bloom, h100, par, decode256, params).total());
}

TEST_CASE("bottleneck shifting: short prefills and large decode batches") {
    ModelSpec bloom = load_model_spec(model_path("bloom-176b"));
    MachineSpec base = h100_machine();
    ParallelismSpec par{8, 1, 1};
    PerfParams params;

    auto bw_sensitivity = [&](int seq) {
        PhaseWork w{Phase::Prefill, {seq, seq}};
        auto s = sensitivity_sweep(base, SweepKnob::Bandwidth, {1000, 4000}, bloom, par, w, params);
        return s[0].breakdown.total() / s[1].breakdown.total();
    };
    CHECK(bw_sensitivity(64) > bw_sensitivity(1024));

    auto core_sensitivity = [&](int batch) {
        PhaseWork w{Phase::Decode, std::vector<int>(batch, 1024)};
        auto s = sensitivity_sweep(base, SweepKnob::CoreCount, {66, 132}, bloom, par, w, params);
        return s[0].breakdown.total() / s[1].breakdown.total();
    };
    CHECK(core_sensitivity(256) > core_sensitivity(64));
}

TEST_CASE("tp=8 and tp=4/pp=2 decode latencies stay within 2x of each other") {
    ModelSpec bloom = load_model_spec(model_path("bloom-176b"));
    PerfParams params;
    PhaseWork decode{Phase::Decode, std::vector<int>(64, 1024)};
    double t_tp8 = phase_latency(bloom, h100_machine(), {8, 1, 1}, decode, params).total();
    double t_tp4pp2 = phase_latency(bloom, h100_machine(), {4, 2, 1}, decode, params).total();
    double ratio = std::max(t_tp8, t_tp4pp2) / std::min(t_tp8, t_tp4pp2);
    CHECK(ratio <= 2.0);
}

TEST_CASE("roofline lower bounds hold for random gemms at ideal efficiency") {
    ChipSpec chip = reference_h100();
    PerfParams ideal = ideal_params();
    std::mt19937_64 rng(7);
    for (int i = 0; i < 200; ++i) {
        double m = 1 + static_cast<double>(rng() % 4096);
        double n = 1 + static_cast<double>(rng() % 8192);
        double k = 1 + static_cast<double>(rng() % 8192);
        double t = gemm_latency(chip, m, n, k, 2, 0.0, ideal);
        CHECK(t >= 2 * m * n * k / peak_tensor_flops(chip, 2) - 1e-18);
        CHECK(t >= (n * k + m * k + m * n) * 2 / 3352e9 - 1e-18);
    }
}

TEST_CASE("core-count knob scales both tensor and vector peaks, fixed l2") {
    ChipSpec base = reference_h100();
    ChipSpec half = with_knob(base, SweepKnob::CoreCount, 66);
    CHECK(peak_tensor_flops(half, 2) == doctest::Approx(peak_tensor_flops(base, 2) / 2));
    CHECK(peak_vector_flops(half) == doctest::Approx(peak_vector_flops(base) / 2));
    CHECK(half.l2_mb == base.l2_mb);
    CHECK(half.l1_kb_per_core == base.l1_kb_per_core);
    ChipSpec bw = with_knob(base, SweepKnob::Bandwidth, 2048);
    CHECK(memory_bandwidth_gbs(bw) == 2048.0);
    CHECK(peak_tensor_flops(bw, 2) == peak_tensor_flops(base, 2));
}

TEST_CASE("perf params are validated") {
    PerfParams p;
    p.dram_efficiency = 0.0;
    CHECK_THROWS_AS(p.validate(), InvalidSpec);
    p = PerfParams{};
    p.l2_gbs_multiplier = 0.5;
    CHECK_THROWS_AS(p.validate(), InvalidSpec);
    CHECK_THROWS_AS(gemm_latency(reference_h100(), 0, 1, 1, 2, 0.0, PerfParams{}), InvalidSpec);
}

TEST_CASE("gqa and mla/moe deployments produce sane breakdowns") {
    PerfParams params;

    ModelSpec llama = load_model_spec(model_path("llama3-70b"));
    ParallelismSpec par4{4, 1, 1};
    MachineSpec h100 = h100_machine(4);
    PhaseWork prefill{Phase::Prefill, {1024, 1024}};
    LatencyBreakdown lb = phase_latency(llama, h100, par4, prefill, params);
    CHECK(lb.gemm > 0);
    CHECK(lb.attention > 0);
    CHECK(lb.communication > 0);
    CHECK(lb.other == 0.0); // dense model: no routing work

    ModelSpec ds = load_model_spec(model_path("deepseek-v2"));
    ParallelismSpec par8{8, 1, 8};
    MachineSpec h100x8 = h100_machine(8);
    PhaseWork decode{Phase::Decode, std::vector<int>(32, 800)};
    LatencyBreakdown db = phase_latency(ds, h100x8, par8, decode, params);
    CHECK(db.other > 0); // expert routing
    CHECK(db.communication > 0); // all-reduce + all-to-all
    CHECK(db.total() == db.gemm + db.attention + db.softmax_norm_act + db.communication + db.other);

    // both stay monotone in bandwidth
    for (const ModelSpec* mm : {&llama, &ds}) {
        ParallelismSpec par = mm == &llama ? par4 : par8;
        MachineSpec base = mm == &llama ? h100 : h100x8;
        PhaseWork w{Phase::Decode, std::vector<int>(16, 500)};
        double prev = 1e99;
        for (double bw : {1000.0, 2000.0, 4000.0}) {
            MachineSpec mspec = base;
            mspec.chip.bandwidth_override_gbs = bw;
            double t = phase_latency(*mm, mspec, par, w, params).total();
            CHECK(t <= prev + 1e-15);
            prev = t;
        }
    }
}

TEST_CASE("every operator respects the roofline lower bounds at ideal settings") {
    ModelSpec bloom = load_model_spec(model_path("bloom-176b"));
    ParallelismSpec par{8, 1, 1};
    ChipSpec chip = reference_h100();
    InterconnectSpec ic;
    PerfParams ideal = ideal_params();
    double bw = memory_bandwidth_gbs(chip) * 1e9;

    std::vector<ReqWork> work;
    for (int i = 0; i < 8; ++i) work.push_back(ReqWork{i % 2 ? 1 : 300, 700 + 13 * i});
    for (const Operator& op : build_block_ops(bloom, par, work)) {
        double t = operator_latency(chip, ic, op, /*frac=*/0.0, ideal);
        double peak = peak_tensor_flops(chip, op.elem_bytes == 1 ? 1 : 2);
        if (op.kind == OpKind::Softmax || op.kind == OpKind::LayerNorm ||
            op.kind == OpKind::Activation || op.kind == OpKind::MoERoute)
            peak = peak_vector_flops(chip);
        if (op.flops > 0) CHECK(t >= op.flops / peak - 1e-18);
        if (op.dram_bytes > 0) CHECK(t >= op.dram_bytes / bw - 1e-18);
    }
}
