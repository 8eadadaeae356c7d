#include "spadsim/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "spadsim/errors.hpp"

namespace spadsim {

const char* to_string(Phase p) { return p == Phase::Prefill ? "prefill" : "decode"; }

const char* to_string(AttentionVariant v) {
    switch (v) {
    case AttentionVariant::MHA: return "MHA";
    case AttentionVariant::GQA: return "GQA";
    case AttentionVariant::MLA: return "MLA";
    }
    return "MHA";
}

const char* to_string(OpKind k) {
    switch (k) {
    case OpKind::Gemm: return "gemm";
    case OpKind::AttentionScore: return "attention_score";
    case OpKind::AttentionContext: return "attention_context";
    case OpKind::Softmax: return "softmax";
    case OpKind::LayerNorm: return "layernorm";
    case OpKind::Activation: return "activation";
    case OpKind::MoERoute: return "moe_route";
    case OpKind::AllReduce: return "allreduce";
    case OpKind::AllToAll: return "alltoall";
    case OpKind::P2P: return "p2p";
    }
    return "gemm";
}

void ModelSpec::validate() const {
    auto positive = [&](long long v, const char* field) {
        if (v <= 0) throw InvalidSpec(name + ": " + field + " must be positive");
    };
    positive(num_layers, "num_layers");
    positive(hidden_dim, "hidden_dim");
    positive(num_heads, "num_heads");
    positive(num_kv_heads, "num_kv_heads");
    positive(head_dim, "head_dim");
    positive(ffn_intermediate, "ffn_intermediate");
    positive(vocab_size, "vocab_size");
    auto byte_width = [&](int v, const char* field) {
        if (v != 1 && v != 2 && v != 4)
            throw InvalidSpec(name + ": " + field + " must be 1, 2 or 4");
    };
    byte_width(weight_bytes_per_param, "weight_bytes_per_param");
    byte_width(kv_bytes_per_elem, "kv_bytes_per_elem");
    if (num_heads % num_kv_heads != 0)
        throw InvalidSpec(name + ": num_heads must be a multiple of num_kv_heads");
    if (attention_variant == AttentionVariant::MLA && kv_latent_dim <= 0)
        throw InvalidSpec(name + ": MLA requires kv_latent_dim > 0");
    if (moe) {
        positive(moe->num_routed_experts, "moe.num_routed_experts");
        positive(moe->top_k, "moe.top_k");
        positive(moe->expert_intermediate, "moe.expert_intermediate");
        if (moe->num_shared_experts < 0)
            throw InvalidSpec(name + ": moe.num_shared_experts must be >= 0");
        if (moe->top_k > moe->num_routed_experts)
            throw InvalidSpec(name + ": moe.top_k exceeds num_routed_experts");
    }
}

void ParallelismSpec::validate(const ModelSpec& m) const {
    if (tp < 1 || pp < 1 || ep < 1) throw InvalidSpec("parallelism degrees must be >= 1");
    if (pp > m.num_layers) throw InvalidSpec("pp exceeds num_layers");
    auto divides = [&](long long dim, const char* what) {
        if (dim % tp != 0)
            throw InvalidSpec(m.name + ": tp=" + std::to_string(tp) + " must divide " + what);
    };
    divides(m.num_heads, "num_heads");
    divides(m.hidden_dim, "hidden_dim");
    divides(m.vocab_size, "vocab_size");
    if (m.attention_variant != AttentionVariant::MLA) divides(m.num_kv_heads, "num_kv_heads");
    if (!m.moe) {
        divides(m.ffn_intermediate, "ffn_intermediate");
    } else {
        if (m.moe->num_routed_experts % ep != 0)
            throw InvalidSpec(m.name + ": ep must divide num_routed_experts");
        if (ep > tp * pp) throw InvalidSpec(m.name + ": ep exceeds chip count tp*pp");
        if (m.moe->num_shared_experts > 0) {
            long long shared_i =
                static_cast<long long>(m.moe->num_shared_experts) * m.moe->expert_intermediate;
            divides(shared_i, "num_shared_experts*expert_intermediate");
        }
    }
}

void PhaseWork::validate() const {
    if (seq_lens.empty()) throw InvalidSpec("PhaseWork: empty batch");
    for (int len : seq_lens)
        if (len < 1) throw InvalidSpec("PhaseWork: sequence lengths must be >= 1");
}

namespace {

// Parameter counts per transformer block (attention + FFN/MoE + norms),
// biases excluded (<0.01% of the published totals).
struct BlockParams {
    double attention = 0;     // projections, sharded by tp
    double dense_ffn = 0;     // dense FFN or MoE shared experts, sharded by tp
    double routed_experts = 0; // MoE routed experts, divided by ep, replicated in-group
    double router = 0;
    double norms = 0;
};

BlockParams block_params(const ModelSpec& m) {
    BlockParams p;
    double h = m.hidden_dim;
    double qkv_out = static_cast<double>(m.num_heads) * m.head_dim;
    switch (m.attention_variant) {
    case AttentionVariant::MHA:
    case AttentionVariant::GQA: {
        double kv_out = static_cast<double>(m.num_kv_heads) * m.head_dim;
        p.attention = h * qkv_out + 2.0 * h * kv_out + qkv_out * h;
        break;
    }
    case AttentionVariant::MLA:
        // down-projection to the latent, up-projections back to heads
        p.attention = h * qkv_out + h * m.kv_latent_dim + 2.0 * m.kv_latent_dim * qkv_out +
                      qkv_out * h;
        break;
    }
    double ffn_mats = m.ffn_gated ? 3.0 : 2.0;
    if (m.moe) {
        double per_expert = ffn_mats * h * m.moe->expert_intermediate;
        p.routed_experts = m.moe->num_routed_experts * per_expert;
        p.dense_ffn = m.moe->num_shared_experts * per_expert;
        p.router = h * m.moe->num_routed_experts;
    } else {
        p.dense_ffn = ffn_mats * h * m.ffn_intermediate;
    }
    p.norms = 2.0 * 2.0 * h; // two layernorms, scale + bias each
    return p;
}

} // namespace

double weight_bytes(const ModelSpec& model, const ParallelismSpec& par) {
    model.validate();
    par.validate(model);
    BlockParams bp = block_params(model);
    double chips = par.chips();
    double sharded_per_layer = bp.attention + bp.dense_ffn + bp.router + bp.norms;
    double sharded = sharded_per_layer * model.num_layers +
                     static_cast<double>(model.vocab_size) * model.hidden_dim + // embeddings, once
                     2.0 * model.hidden_dim;                                    // final norm
    double per_chip = sharded / chips + bp.routed_experts * model.num_layers / par.ep;
    return per_chip * model.weight_bytes_per_param;
}

double kv_bytes_per_token(const ModelSpec& model) {
    model.validate();
    switch (model.attention_variant) {
    case AttentionVariant::MHA:
        return 2.0 * model.num_layers * model.num_heads * model.head_dim * model.kv_bytes_per_elem;
    case AttentionVariant::GQA:
        return 2.0 * model.num_layers * model.num_kv_heads * model.head_dim *
               model.kv_bytes_per_elem;
    case AttentionVariant::MLA:
        return static_cast<double>(model.num_layers) * model.kv_latent_dim *
               model.kv_bytes_per_elem;
    }
    return 0.0;
}

long long kv_capacity_tokens(double machine_mem_bytes, const ModelSpec& model,
                             const ParallelismSpec& par, double reserve_frac) {
    if (!(reserve_frac > 0.0) || reserve_frac > 1.0)
        throw InvalidSpec("reserve_frac must be in (0, 1]");
    double weights_on_machine = weight_bytes(model, par) * par.chips();
    double budget = machine_mem_bytes * reserve_frac - weights_on_machine;
    if (budget < 0)
        throw InfeasibleDeployment(model.name + ": weights (" + std::to_string(weights_on_machine) +
                                   " B) exceed reserved machine memory (" +
                                   std::to_string(machine_mem_bytes * reserve_frac) + " B)");
    return static_cast<long long>(std::floor(budget / kv_bytes_per_token(model)));
}

namespace {

Operator make_gemm(double m, double n, double k, int wb) {
    Operator op;
    op.kind = OpKind::Gemm;
    op.flops = 2.0 * m * n * k;
    op.weight_bytes = k * n * wb;
    op.dram_bytes = op.weight_bytes + (m * k + m * n) * wb;
    op.elem_bytes = wb;
    op.tile_m = m;
    op.tile_n = n;
    return op;
}

Operator make_vector(OpKind kind, double elements, double flops_per_elem, double passes, int act) {
    Operator op;
    op.kind = kind;
    op.elements = elements;
    op.flops = flops_per_elem * elements;
    op.dram_bytes = passes * elements * act;
    op.elem_bytes = act;
    return op;
}

Operator make_comm(OpKind kind, double bytes, int chips) {
    Operator op;
    op.kind = kind;
    op.comm_bytes = bytes;
    op.tile_m = chips; // carries the group size for the ring/all-to-all factor
    return op;
}

} // namespace

std::vector<Operator> build_block_ops(const ModelSpec& model, const ParallelismSpec& par,
                                      const std::vector<ReqWork>& reqs) {
    const int wb = model.weight_bytes_per_param; // activation precision follows weights
    const int kvb = model.kv_bytes_per_elem;
    const double h = model.hidden_dim;
    const double hd = model.head_dim;
    const double heads_l = static_cast<double>(model.num_heads) / par.tp;
    const bool mla = model.attention_variant == AttentionVariant::MLA;
    const double kvh_l = mla ? 0.0 : static_cast<double>(model.num_kv_heads) / par.tp;

    double m = 0;
    for (const auto& r : reqs) m += r.q_len;

    std::vector<Operator> ops;
    ops.reserve(12 + 2 * reqs.size());

    // vector ops are sequence/head-sharded across tp, keeping total FLOPs
    // invariant under parallelism
    ops.push_back(make_vector(OpKind::LayerNorm, m * h / par.tp, 4, 3, wb));

    if (!mla) {
        ops.push_back(make_gemm(m, (heads_l + 2.0 * kvh_l) * hd, h, wb));
    } else {
        ops.push_back(make_gemm(m, heads_l * hd, h, wb));           // q projection
        ops.push_back(make_gemm(m, model.kv_latent_dim, h / par.tp, wb)); // kv down (row-parallel)
        ops.push_back(make_gemm(m, heads_l * hd, model.kv_latent_dim, wb)); // k up
        ops.push_back(make_gemm(m, heads_l * hd, model.kv_latent_dim, wb)); // v up
    }

    double softmax_elems = 0;
    for (const auto& r : reqs) {
        double q = r.q_len, kv = r.kv_len;
        double kv_read = mla ? kv * model.kv_latent_dim * kvb : kv * hd * kvh_l * kvb;
        Operator score;
        score.kind = OpKind::AttentionScore;
        score.flops = 2.0 * heads_l * q * kv * hd;
        score.dram_bytes = q * hd * heads_l * wb + kv_read + q * kv * heads_l * wb;
        score.elem_bytes = wb;
        score.tile_m = q;
        score.tile_n = kv;
        score.counts_launch = &r == &reqs.front();
        ops.push_back(score);
        softmax_elems += heads_l * q * kv;
    }
    ops.push_back(make_vector(OpKind::Softmax, softmax_elems, 5, 3, wb));
    for (const auto& r : reqs) {
        double q = r.q_len, kv = r.kv_len;
        double kv_read = mla ? kv * model.kv_latent_dim * kvb : kv * hd * kvh_l * kvb;
        Operator ctx;
        ctx.kind = OpKind::AttentionContext;
        ctx.flops = 2.0 * heads_l * q * kv * hd;
        ctx.dram_bytes = q * kv * heads_l * wb + kv_read + q * hd * heads_l * wb;
        ctx.elem_bytes = wb;
        ctx.tile_m = q;
        ctx.tile_n = hd;
        ctx.counts_launch = &r == &reqs.front();
        ops.push_back(ctx);
    }

    ops.push_back(make_gemm(m, h, heads_l * hd, wb)); // output projection, row-parallel
    if (par.tp > 1) ops.push_back(make_comm(OpKind::AllReduce, m * h * wb, par.tp));

    ops.push_back(make_vector(OpKind::LayerNorm, m * h / par.tp, 4, 3, wb));

    if (!model.moe) {
        double ffn_l = static_cast<double>(model.ffn_intermediate) / par.tp;
        if (model.ffn_gated) ops.push_back(make_gemm(m, ffn_l, h, wb)); // gate
        ops.push_back(make_gemm(m, ffn_l, h, wb));                      // up
        ops.push_back(make_vector(OpKind::Activation, m * ffn_l, 2, 2, wb));
        ops.push_back(make_gemm(m, h, ffn_l, wb)); // down
    } else {
        const MoeSpec& moe = *model.moe;
        Operator route;
        route.kind = OpKind::MoERoute;
        route.elements = m * moe.num_routed_experts;
        route.flops = 2.0 * m * moe.num_routed_experts * (h / par.tp);
        route.weight_bytes = (h / par.tp) * moe.num_routed_experts * wb;
        route.dram_bytes = route.weight_bytes + m * (h / par.tp) * wb + route.elements * 4.0;
        route.elem_bytes = wb;
        ops.push_back(route);

        if (moe.num_shared_experts > 0) {
            double shared_l =
                static_cast<double>(moe.num_shared_experts) * moe.expert_intermediate / par.tp;
            if (model.ffn_gated) ops.push_back(make_gemm(m, shared_l, h, wb));
            ops.push_back(make_gemm(m, shared_l, h, wb));
            ops.push_back(make_vector(OpKind::Activation, m * shared_l, 2, 2, wb));
            ops.push_back(make_gemm(m, h, shared_l, wb));
        }

        // Uniform routing: token-expert pairs spread over all chips; each chip
        // holds its expert group's full-width weights and streams each touched
        // expert's weights once per step.
        double pairs = m * moe.top_k / par.tp;
        double experts_per_chip = static_cast<double>(moe.num_routed_experts) / par.ep;
        double touched = std::min(pairs, experts_per_chip);
        double rows_per_expert = touched > 0 ? pairs / touched : 0.0;
        double ei = moe.expert_intermediate;
        double f_up = model.ffn_gated ? 2.0 : 1.0;

        ops.push_back(make_comm(OpKind::AllToAll, pairs * h * wb, par.ep)); // dispatch

        Operator up;
        up.kind = OpKind::Gemm;
        up.flops = 2.0 * pairs * h * ei * f_up;
        up.weight_bytes = touched * h * ei * f_up * wb;
        up.dram_bytes = up.weight_bytes + (pairs * h + pairs * ei * f_up) * wb;
        up.elem_bytes = wb;
        up.tile_m = rows_per_expert;
        up.tile_n = ei;
        ops.push_back(up);

        ops.push_back(make_vector(OpKind::Activation, pairs * ei, 2, 2, wb));

        Operator down;
        down.kind = OpKind::Gemm;
        down.flops = 2.0 * pairs * ei * h;
        down.weight_bytes = touched * ei * h * wb;
        down.dram_bytes = down.weight_bytes + (pairs * ei + pairs * h) * wb;
        down.elem_bytes = wb;
        down.tile_m = rows_per_expert;
        down.tile_n = h;
        ops.push_back(down);

        ops.push_back(make_comm(OpKind::AllToAll, pairs * h * wb, par.ep)); // combine
    }
    if (par.tp > 1) ops.push_back(make_comm(OpKind::AllReduce, m * h * wb, par.tp));
    return ops;
}

Operator build_logit_op(const ModelSpec& model, const ParallelismSpec& par, int batch) {
    return make_gemm(batch, static_cast<double>(model.vocab_size) / par.tp, model.hidden_dim,
                     model.weight_bytes_per_param);
}

Operator build_p2p_op(const ModelSpec& model, const ParallelismSpec& par, int tokens) {
    double bytes =
        static_cast<double>(tokens) * model.hidden_dim * model.weight_bytes_per_param / par.tp;
    return make_comm(OpKind::P2P, bytes, 2);
}

int layers_in_stage(const ModelSpec& model, const ParallelismSpec& par, int stage) {
    int base = model.num_layers / par.pp;
    int extra = stage < (model.num_layers % par.pp) ? 1 : 0;
    return base + extra;
}

std::vector<StageOps> build_ops(const ModelSpec& model, const ParallelismSpec& par,
                                const PhaseWork& work) {
    model.validate();
    par.validate(model);
    work.validate();

    std::vector<ReqWork> reqs;
    reqs.reserve(work.seq_lens.size());
    for (int i = 0; i < work.batch(); ++i)
        reqs.push_back(ReqWork{work.new_tokens(i), work.seq_lens[i]});
    std::vector<Operator> block = build_block_ops(model, par, reqs);

    int tokens = 0;
    for (const auto& r : reqs) tokens += r.q_len;

    std::vector<StageOps> stages(par.pp);
    for (int s = 0; s < par.pp; ++s) {
        stages[s].layers = layers_in_stage(model, par, s);
        stages[s].ops.reserve(block.size() * stages[s].layers + 1);
        for (int l = 0; l < stages[s].layers; ++l)
            stages[s].ops.insert(stages[s].ops.end(), block.begin(), block.end());
        if (s < par.pp - 1) stages[s].ops.push_back(build_p2p_op(model, par, tokens));
    }
    stages.back().ops.push_back(build_logit_op(model, par, work.batch()));
    return stages;
}

double arithmetic_intensity(const ModelSpec& model, const ParallelismSpec& par,
                            const PhaseWork& work, bool include_attention) {
    double flops = 0.0, bytes = 0.0;
    for (const auto& stage : build_ops(model, par, work)) {
        for (const auto& op : stage.ops) {
            bool counted = op.kind == OpKind::Gemm ||
                           (include_attention && (op.kind == OpKind::AttentionScore ||
                                                  op.kind == OpKind::AttentionContext));
            if (!counted) continue;
            flops += op.flops;
            bytes += op.dram_bytes;
        }
    }
    if (bytes <= 0) throw InvalidSpec("arithmetic_intensity: no counted bytes");
    return flops / bytes;
}

namespace {

template <typename T>
T require(const nlohmann::json& j, const char* field) {
    if (!j.contains(field)) throw InvalidSpec(std::string("model spec missing field: ") + field);
    try {
        return j.at(field).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw InvalidSpec(std::string("model spec field ") + field + ": " + e.what());
    }
}

} // namespace

ModelSpec model_from_json(const nlohmann::json& j) {
    ModelSpec m;
    m.name = require<std::string>(j, "name");
    m.num_layers = require<int>(j, "num_layers");
    m.hidden_dim = require<int>(j, "hidden_dim");
    m.num_heads = require<int>(j, "num_heads");
    m.num_kv_heads = j.contains("num_kv_heads") ? j.at("num_kv_heads").get<int>() : m.num_heads;
    if (j.contains("head_dim")) {
        m.head_dim = j.at("head_dim").get<int>();
    } else {
        if (m.num_heads == 0 || m.hidden_dim % m.num_heads != 0)
            throw InvalidSpec(m.name + ": head_dim omitted but hidden_dim not divisible by num_heads");
        m.head_dim = m.hidden_dim / m.num_heads;
    }
    m.ffn_intermediate = require<int>(j, "ffn_intermediate");

    const auto& av = j.at("attention_variant");
    if (av.is_string()) {
        std::string s = av.get<std::string>();
        if (s == "MHA") m.attention_variant = AttentionVariant::MHA;
        else if (s == "GQA") m.attention_variant = AttentionVariant::GQA;
        else throw InvalidSpec(m.name + ": unknown attention_variant " + s);
    } else if (av.is_object() && av.contains("MLA")) {
        m.attention_variant = AttentionVariant::MLA;
        m.kv_latent_dim = av.at("MLA").at("kv_latent_dim").get<int>();
    } else {
        throw InvalidSpec(m.name + ": attention_variant must be \"MHA\", \"GQA\" or {\"MLA\": {...}}");
    }

    if (j.contains("moe") && !j.at("moe").is_null()) {
        const auto& mj = j.at("moe");
        MoeSpec moe;
        moe.num_routed_experts = mj.at("num_routed_experts").get<int>();
        moe.num_shared_experts = mj.value("num_shared_experts", 0);
        moe.top_k = mj.at("top_k").get<int>();
        moe.expert_intermediate = mj.at("expert_intermediate").get<int>();
        m.moe = moe;
    }
    m.ffn_gated = j.value("ffn_gated", false);
    m.weight_bytes_per_param = require<int>(j, "weight_bytes_per_param");
    m.kv_bytes_per_elem = require<int>(j, "kv_bytes_per_elem");
    m.vocab_size = require<long long>(j, "vocab_size");
    m.validate();
    return m;
}

ModelSpec load_model_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open model spec: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("bad JSON in " + path + ": " + e.what());
    }
    return model_from_json(j);
}

} // namespace spadsim
