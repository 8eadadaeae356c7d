#include "spadsim/perf.hpp"

#include <algorithm>
#include <cmath>

#include "spadsim/errors.hpp"

namespace spadsim {

void PerfParams::validate() const {
    auto frac = [](double v, const char* field) {
        if (!(v > 0.0) || v > 1.0)
            throw InvalidSpec(std::string("PerfParams.") + field + " must be in (0, 1]");
    };
    frac(dram_efficiency, "dram_efficiency");
    frac(tensor_efficiency, "tensor_efficiency");
    frac(vector_efficiency, "vector_efficiency");
    if (l2_gbs_multiplier < 1.0) throw InvalidSpec("PerfParams.l2_gbs_multiplier must be >= 1");
    if (kernel_launch_us < 0.0) throw InvalidSpec("PerfParams.kernel_launch_us must be >= 0");
}

LatencyBreakdown& LatencyBreakdown::operator+=(const LatencyBreakdown& o) {
    gemm += o.gemm;
    attention += o.attention;
    softmax_norm_act += o.softmax_norm_act;
    communication += o.communication;
    other += o.other;
    return *this;
}

LatencyBreakdown& LatencyBreakdown::operator*=(double k) {
    gemm *= k;
    attention *= k;
    softmax_norm_act *= k;
    communication *= k;
    other *= k;
    return *this;
}

double tile_utilization(double m, double n, int systolic_h, int systolic_w) {
    if (m <= 0 || n <= 0) return 1.0;
    double mq = std::ceil(m / systolic_h) * systolic_h;
    double nq = std::ceil(n / systolic_w) * systolic_w;
    return (m / mq) * (n / nq);
}

namespace {

double launch_s(const PerfParams& p) { return p.kernel_launch_us * 1e-6; }

// Shared roofline core: tensor-unit work with quantization against DRAM and
// L2 bandwidth levels.
double matmul_roofline(const ChipSpec& chip, double flops, double util, double dram_bytes,
                       double total_bytes, int elem_bytes, const PerfParams& params,
                       bool counts_launch = true) {
    double peak = peak_tensor_flops(chip, elem_bytes) * params.tensor_efficiency * util;
    double bw = memory_bandwidth_gbs(chip) * 1e9 * params.dram_efficiency;
    double t_compute = flops > 0 ? flops / peak : 0.0;
    double t_dram = dram_bytes / bw;
    double t_l2 = total_bytes / (bw * params.l2_gbs_multiplier);
    return std::max(t_compute, std::max(t_dram, t_l2)) + (counts_launch ? launch_s(params) : 0.0);
}

} // namespace

double gemm_latency(const ChipSpec& chip, double m, double n, double k, int elem_bytes,
                    double weight_resident_frac_, const PerfParams& params) {
    if (m < 1 || n < 1 || k < 1) throw InvalidSpec("gemm_latency: dims must be >= 1");
    double frac = std::clamp(weight_resident_frac_, 0.0, 1.0);
    double flops = 2.0 * m * n * k;
    double weight = k * n * elem_bytes;
    double acts = (m * k + m * n) * elem_bytes;
    double util = tile_utilization(m, n, chip.systolic_h, chip.systolic_w);
    return matmul_roofline(chip, flops, util, weight * (1.0 - frac) + acts, weight + acts,
                           elem_bytes, params);
}

double vector_op_latency(const ChipSpec& chip, const Operator& op, const PerfParams& params) {
    double peak = peak_vector_flops(chip) * params.vector_efficiency;
    double bw = memory_bandwidth_gbs(chip) * 1e9 * params.dram_efficiency;
    double t_compute = op.flops / peak;
    double t_mem = op.dram_bytes / bw;
    return std::max(t_compute, t_mem) + launch_s(params);
}

double allreduce_latency(double bytes, int n_chips, const InterconnectSpec& interconnect) {
    if (n_chips < 1) throw InvalidSpec("allreduce_latency: n_chips must be >= 1");
    if (n_chips == 1) return 0.0;
    double n = n_chips;
    return 2.0 * (n - 1.0) / n * bytes / (interconnect.scaleup_gbs_per_chip * 1e9);
}

double operator_latency(const ChipSpec& chip, const InterconnectSpec& interconnect,
                        const Operator& op, double frac, const PerfParams& params) {
    switch (op.kind) {
    case OpKind::Gemm:
    case OpKind::AttentionScore:
    case OpKind::AttentionContext: {
        double util = tile_utilization(op.tile_m, op.tile_n, chip.systolic_h, chip.systolic_w);
        // attention reads activations and KV only, so residency never applies
        double resident = op.weight_bytes * std::clamp(frac, 0.0, 1.0);
        return matmul_roofline(chip, op.flops, util, op.dram_bytes - resident, op.dram_bytes,
                               op.elem_bytes, params, op.counts_launch);
    }
    case OpKind::Softmax:
    case OpKind::LayerNorm:
    case OpKind::Activation:
    case OpKind::MoERoute:
        return vector_op_latency(chip, op, params);
    case OpKind::AllReduce:
        return allreduce_latency(op.comm_bytes, static_cast<int>(op.tile_m), interconnect);
    case OpKind::AllToAll: {
        double n = std::max(1.0, op.tile_m);
        if (n <= 1.0) return 0.0;
        return (n - 1.0) / n * op.comm_bytes / (interconnect.scaleup_gbs_per_chip * 1e9);
    }
    case OpKind::P2P:
        return op.comm_bytes / (interconnect.scaleup_gbs_per_chip * 1e9);
    }
    return 0.0;
}

namespace {

void add_to_bucket(LatencyBreakdown& b, OpKind kind, double seconds) {
    switch (kind) {
    case OpKind::Gemm: b.gemm += seconds; break;
    case OpKind::AttentionScore:
    case OpKind::AttentionContext: b.attention += seconds; break;
    case OpKind::Softmax:
    case OpKind::LayerNorm:
    case OpKind::Activation: b.softmax_norm_act += seconds; break;
    case OpKind::AllReduce:
    case OpKind::AllToAll:
    case OpKind::P2P: b.communication += seconds; break;
    case OpKind::MoERoute: b.other += seconds; break;
    }
}

} // namespace

LatencyBreakdown operator_breakdown(const ChipSpec& chip, const InterconnectSpec& interconnect,
                                    const Operator& op, double frac, const PerfParams& params) {
    LatencyBreakdown b;
    add_to_bucket(b, op.kind, operator_latency(chip, interconnect, op, frac, params));
    return b;
}

double weight_resident_frac(const ChipSpec& chip, double layer_weight_bytes,
                            double op_activation_bytes) {
    if (layer_weight_bytes <= 0) return 0.0;
    double l2_bytes = chip.l2_mb * 1024.0 * 1024.0;
    double available = l2_bytes - op_activation_bytes;
    return std::clamp(available / layer_weight_bytes, 0.0, 1.0);
}

namespace {

// Sum of one block's operator latencies, with per-op residency derived from
// the block's total weight bytes.
LatencyBreakdown block_breakdown(const ChipSpec& chip, const InterconnectSpec& ic,
                                 const std::vector<Operator>& ops, const PerfParams& params) {
    double layer_weights = 0.0;
    for (const auto& op : ops) layer_weights += op.weight_bytes;
    LatencyBreakdown b;
    for (const auto& op : ops) {
        double frac = op.weight_bytes > 0
                          ? weight_resident_frac(chip, layer_weights,
                                                 op.dram_bytes - op.weight_bytes)
                          : 0.0;
        add_to_bucket(b, op.kind, operator_latency(chip, ic, op, frac, params));
    }
    return b;
}

LatencyBreakdown single_op_breakdown(const ChipSpec& chip, const InterconnectSpec& ic,
                                     const Operator& op, const PerfParams& params) {
    double frac = op.weight_bytes > 0
                      ? weight_resident_frac(chip, op.weight_bytes,
                                             op.dram_bytes - op.weight_bytes)
                      : 0.0;
    return operator_breakdown(chip, ic, op, frac, params);
}

// Pipeline combinator: per-microbatch block breakdowns are already built;
// the returned total models (stages + microbatches - 1) executions of the
// slowest per-microbatch stage.
LatencyBreakdown pipeline_total(const ModelSpec& model, const ParallelismSpec& par,
                                const std::vector<LatencyBreakdown>& microbatch_blocks,
                                const std::vector<LatencyBreakdown>& microbatch_p2p,
                                const LatencyBreakdown& logit, int microbatches) {
    int max_layers = layers_in_stage(model, par, 0);
    int last_layers = layers_in_stage(model, par, par.pp - 1);

    LatencyBreakdown slowest;
    double slowest_total = -1.0;
    for (int mb = 0; mb < microbatches; ++mb) {
        // interior stage: most layers plus its P2P send
        LatencyBreakdown interior = microbatch_blocks[mb];
        interior *= static_cast<double>(max_layers);
        if (par.pp > 1) interior += microbatch_p2p[mb];
        // final stage: fewest layers plus the logits projection
        LatencyBreakdown final_stage = microbatch_blocks[mb];
        final_stage *= static_cast<double>(last_layers);
        final_stage += logit;
        const LatencyBreakdown& worse =
            interior.total() >= final_stage.total() ? interior : final_stage;
        if (worse.total() > slowest_total) {
            slowest_total = worse.total();
            slowest = worse;
        }
    }
    slowest *= static_cast<double>(par.pp + microbatches - 1);
    return slowest;
}

} // namespace

LatencyBreakdown iteration_latency(const ModelSpec& model, const MachineSpec& machine,
                                   const ParallelismSpec& par, const std::vector<ReqWork>& reqs,
                                   int logit_rows, const PerfParams& params) {
    params.validate();
    const ChipSpec& chip = machine.chip;
    const InterconnectSpec& ic = machine.interconnect;

    LatencyBreakdown logit =
        single_op_breakdown(chip, ic, build_logit_op(model, par, logit_rows), params);

    if (par.pp == 1) {
        LatencyBreakdown block = block_breakdown(chip, ic, build_block_ops(model, par, reqs), params);
        block *= static_cast<double>(model.num_layers);
        block += logit;
        return block;
    }
    int tokens = 0;
    for (const auto& r : reqs) tokens += r.q_len;
    std::vector<LatencyBreakdown> blocks = {
        block_breakdown(chip, ic, build_block_ops(model, par, reqs), params)};
    std::vector<LatencyBreakdown> p2ps = {
        operator_breakdown(chip, ic, build_p2p_op(model, par, tokens), 0.0, params)};
    return pipeline_total(model, par, blocks, p2ps, logit, 1);
}

LatencyBreakdown phase_latency(const ModelSpec& model, const MachineSpec& machine,
                               const ParallelismSpec& par, const PhaseWork& work,
                               const PerfParams& params) {
    model.validate();
    par.validate(model);
    work.validate();
    params.validate();
    const ChipSpec& chip = machine.chip;
    const InterconnectSpec& ic = machine.interconnect;

    std::vector<ReqWork> all;
    all.reserve(work.seq_lens.size());
    for (int i = 0; i < work.batch(); ++i)
        all.push_back(ReqWork{work.new_tokens(i), work.seq_lens[i]});

    LatencyBreakdown logit =
        single_op_breakdown(chip, ic, build_logit_op(model, par, work.batch()), params);

    if (par.pp == 1) {
        LatencyBreakdown block = block_breakdown(chip, ic, build_block_ops(model, par, all), params);
        block *= static_cast<double>(model.num_layers);
        block += logit;
        return block;
    }

    if (work.phase == Phase::Decode) {
        // whole batch moves through the pipeline as one microbatch
        int tokens = work.batch();
        std::vector<LatencyBreakdown> blocks = {
            block_breakdown(chip, ic, build_block_ops(model, par, all), params)};
        std::vector<LatencyBreakdown> p2ps = {
            operator_breakdown(chip, ic, build_p2p_op(model, par, tokens), 0.0, params)};
        return pipeline_total(model, par, blocks, p2ps, logit, 1);
    }

    // prefill: one microbatch per request
    std::vector<LatencyBreakdown> blocks;
    std::vector<LatencyBreakdown> p2ps;
    blocks.reserve(all.size());
    p2ps.reserve(all.size());
    for (const auto& r : all) {
        blocks.push_back(block_breakdown(chip, ic, build_block_ops(model, par, {r}), params));
        p2ps.push_back(operator_breakdown(chip, ic, build_p2p_op(model, par, r.q_len), 0.0, params));
    }
    return pipeline_total(model, par, blocks, p2ps, logit, static_cast<int>(all.size()));
}

ChipSpec with_knob(const ChipSpec& base, SweepKnob knob, double value) {
    ChipSpec c = base;
    switch (knob) {
    case SweepKnob::Bandwidth:
        c.bandwidth_override_gbs = value;
        break;
    case SweepKnob::CoreCount:
        c.core_count = static_cast<int>(value);
        break;
    }
    c.validate();
    return c;
}

std::vector<SweepPoint> sensitivity_sweep(const MachineSpec& base, SweepKnob knob,
                                          const std::vector<double>& values,
                                          const ModelSpec& model, const ParallelismSpec& par,
                                          const PhaseWork& work, const PerfParams& params) {
    if (values.empty()) throw InvalidSpec("sensitivity_sweep: values must be non-empty");
    std::vector<SweepPoint> out;
    out.reserve(values.size());
    for (double v : values) {
        MachineSpec m = base;
        m.chip = with_knob(base.chip, knob, v);
        out.push_back(SweepPoint{v, phase_latency(model, m, par, work, params)});
    }
    return out;
}

} // namespace spadsim
