#pragma once

#include <vector>

#include "spadsim/chip.hpp"
#include "spadsim/model.hpp"

namespace spadsim {

// Calibration knobs for the roofline. Efficiencies derate theoretical peaks;
// the overlap policy is max(compute, memory) per operator with no
// inter-operator overlap.
struct PerfParams {
    double dram_efficiency = 0.85;
    double tensor_efficiency = 0.9;
    double vector_efficiency = 0.8;
    double l2_gbs_multiplier = 4.0; // L2 bandwidth as a multiple of DRAM bandwidth
    double kernel_launch_us = 2.0;  // fixed per-operator overhead

    void validate() const;
};

// Per-operator-kind seconds. total() is the exact sum of the parts.
struct LatencyBreakdown {
    double gemm = 0.0;
    double attention = 0.0;
    double softmax_norm_act = 0.0;
    double communication = 0.0;
    double other = 0.0;

    double total() const { return gemm + attention + softmax_norm_act + communication + other; }
    LatencyBreakdown& operator+=(const LatencyBreakdown& o);
    LatencyBreakdown& operator*=(double k);
};

// Fraction of throughput lost to padding m x n output tiles up to the
// systolic array dimensions.
double tile_utilization(double m, double n, int systolic_h, int systolic_w);

// max(t_compute, t_mem) + launch. t_compute includes tile quantization;
// weight bytes are discounted by weight_resident_frac for L2 residency
// across steps, and an L2-bandwidth term forms the second roofline level.
double gemm_latency(const ChipSpec& chip, double m, double n, double k, int elem_bytes,
                    double weight_resident_frac, const PerfParams& params);

// Softmax / LayerNorm / Activation on the vector units: 5/4/2 flops per
// element against 3/3/2 memory passes.
double vector_op_latency(const ChipSpec& chip, const Operator& op, const PerfParams& params);

// Ring all-reduce: 2(n-1)/n * bytes / scaleup bandwidth; zero for one chip.
double allreduce_latency(double bytes, int n_chips, const InterconnectSpec& interconnect);

// Latency of any single operator on one chip of the deployment.
double operator_latency(const ChipSpec& chip, const InterconnectSpec& interconnect,
                        const Operator& op, double weight_resident_frac,
                        const PerfParams& params);

LatencyBreakdown operator_breakdown(const ChipSpec& chip, const InterconnectSpec& interconnect,
                                    const Operator& op, double weight_resident_frac,
                                    const PerfParams& params);

// L2 bytes left after this operator's activation working set, as a fraction
// of the surrounding block's weight bytes. Captures cross-step weight
// residency; clamped to [0, 1].
double weight_resident_frac(const ChipSpec& chip, double layer_weight_bytes,
                            double op_activation_bytes);

// One full iteration (all layers of the slowest pipeline stage). pp > 1 runs
// microbatches through the pipeline: (stages + microbatches - 1) * max stage
// time, with one microbatch per request for prefill and a single whole-batch
// microbatch for decode.
LatencyBreakdown phase_latency(const ModelSpec& model, const MachineSpec& machine,
                               const ParallelismSpec& par, const PhaseWork& work,
                               const PerfParams& params);

// Same for an explicit per-request work mix (chunked prefill + decode in one
// iteration). Pipeline treats the mix as a single microbatch.
LatencyBreakdown iteration_latency(const ModelSpec& model, const MachineSpec& machine,
                                   const ParallelismSpec& par, const std::vector<ReqWork>& reqs,
                                   int logit_rows, const PerfParams& params);

enum class SweepKnob { Bandwidth, CoreCount };

struct SweepPoint {
    double value = 0.0;
    LatencyBreakdown breakdown;
};

// Re-derives the chip per knob value and evaluates the workload point.
// Core count scales tensor and vector peaks together (per-core L1 fixed,
// L2 fixed); bandwidth swaps the memory system only.
std::vector<SweepPoint> sensitivity_sweep(const MachineSpec& base, SweepKnob knob,
                                          const std::vector<double>& values,
                                          const ModelSpec& model, const ParallelismSpec& par,
                                          const PhaseWork& work, const PerfParams& params);

ChipSpec with_knob(const ChipSpec& base, SweepKnob knob, double value);

} // namespace spadsim
