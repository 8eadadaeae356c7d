#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace spadsim {

enum class Phase { Prefill, Decode };
enum class AttentionVariant { MHA, GQA, MLA };

const char* to_string(Phase p);
const char* to_string(AttentionVariant v);

struct MoeSpec {
    int num_routed_experts = 0;
    int num_shared_experts = 0;
    int top_k = 0;
    int expert_intermediate = 0;
};

// Transformer architecture description. No tensors are ever materialized;
// this only drives FLOP and byte accounting.
struct ModelSpec {
    std::string name;
    int num_layers = 0;
    int hidden_dim = 0;
    int num_heads = 0;
    int num_kv_heads = 0; // == num_heads for MHA, fewer for GQA
    int head_dim = 0;     // hidden_dim / num_heads unless the release says otherwise
    int ffn_intermediate = 0;
    AttentionVariant attention_variant = AttentionVariant::MHA;
    int kv_latent_dim = 0; // MLA only: compressed KV elements per token per layer
    std::optional<MoeSpec> moe;
    bool ffn_gated = false; // 3-matrix SwiGLU-style FFN vs classic 2-matrix
    int weight_bytes_per_param = 2; // 2 = FP16, 1 = FP8 (activations follow)
    int kv_bytes_per_elem = 2;
    long long vocab_size = 0;

    void validate() const; // throws InvalidSpec
};

struct ParallelismSpec {
    int tp = 1;
    int pp = 1;
    int ep = 1;

    int chips() const { return tp * pp; }
    // Checks degree invariants and that every sharded dimension divides evenly.
    void validate(const ModelSpec& model) const;
};

// One iteration's worth of work for a single phase. seq_lens carries each
// request's context length (prefill: prompt length; decode: current KV
// length); the new-token count per request is implied by the phase.
struct PhaseWork {
    Phase phase = Phase::Prefill;
    std::vector<int> seq_lens;

    int batch() const { return static_cast<int>(seq_lens.size()); }
    int new_tokens(int i) const { return phase == Phase::Prefill ? seq_lens[i] : 1; }
    void validate() const;
};

// Generalized per-request work item: lets the colocated scheduler mix decode
// steps with prefill chunks in one iteration. q_len new tokens attending to
// kv_len cached tokens (q_len <= kv_len).
struct ReqWork {
    int q_len = 1;
    int kv_len = 1;
};

enum class OpKind {
    Gemm,
    AttentionScore,
    AttentionContext,
    Softmax,
    LayerNorm,
    Activation,
    MoERoute,
    AllReduce,
    AllToAll,
    P2P,
};

const char* to_string(OpKind k);

// One unit of modeled work on one chip. flops/dram_bytes are raw streaming
// totals; weight_bytes is the slice of dram_bytes eligible for L2 residency
// across steps. tile_m/tile_n are the per-instance GEMM output dims used for
// systolic tile quantization (0 when not a matmul-shaped op).
struct Operator {
    OpKind kind = OpKind::Gemm;
    double flops = 0.0;
    double dram_bytes = 0.0;
    double weight_bytes = 0.0;
    int elem_bytes = 2;
    double tile_m = 0.0;
    double tile_n = 0.0;
    double elements = 0.0;   // vector ops
    double comm_bytes = 0.0; // per-chip payload for communication ops
    // Per-request attention ops fuse into one batched kernel per layer; only
    // the first of each group carries the launch overhead.
    bool counts_launch = true;
};

// Ops for one pipeline stage of one chip (chips within a stage are symmetric).
struct StageOps {
    int layers = 0;
    std::vector<Operator> ops;
};

// --- footprints ------------------------------------------------------------

// Total parameter bytes divided across tp*pp chips (MoE routed experts
// divided by ep, replicated across the tp/ep chips of each expert group).
double weight_bytes(const ModelSpec& model, const ParallelismSpec& par);

// Whole-model KV bytes contributed by one cached token (all layers).
double kv_bytes_per_token(const ModelSpec& model);

// Tokens of KV a machine can hold after reserving memory and placing weights.
// Throws InfeasibleDeployment when the weights alone do not fit.
long long kv_capacity_tokens(double machine_mem_bytes, const ModelSpec& model,
                             const ParallelismSpec& par, double reserve_frac);

// --- operator expansion -----------------------------------------------------

// Ops for one transformer block on one chip, for an arbitrary mix of
// per-request work items. Building block for both phases and for mixed
// (chunked-prefill + decode) iterations.
std::vector<Operator> build_block_ops(const ModelSpec& model, const ParallelismSpec& par,
                                      const std::vector<ReqWork>& reqs);

// Final-stage logits projection (one row per request).
Operator build_logit_op(const ModelSpec& model, const ParallelismSpec& par, int batch);

// Inter-stage activation handoff for one microbatch (per-chip share).
Operator build_p2p_op(const ModelSpec& model, const ParallelismSpec& par, int tokens);

// Full expansion: per pipeline stage, all block ops materialized
// layers-per-stage times, plus P2P on non-final stages and the logits GEMM on
// the final stage. Stage s of pp stages holds layers_in_stage(s) layers.
std::vector<StageOps> build_ops(const ModelSpec& model, const ParallelismSpec& par,
                                const PhaseWork& work);

// Layer distribution across pipeline stages: num_layers/pp, remainder spread
// over the leading stages.
int layers_in_stage(const ModelSpec& model, const ParallelismSpec& par, int stage);

// FLOPs per DRAM byte over the expanded operator list, summed across chips
// and stages. GEMMs always count; the toggle adds the attention score/context
// ops (their inclusion in published intensity figures is convention-dependent).
double arithmetic_intensity(const ModelSpec& model, const ParallelismSpec& par,
                            const PhaseWork& work, bool include_attention);

// --- spec file IO -----------------------------------------------------------

ModelSpec model_from_json(const nlohmann::json& j);
ModelSpec load_model_spec(const std::string& path);

} // namespace spadsim
