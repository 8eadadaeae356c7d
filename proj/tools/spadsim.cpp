// spadsim: desk-scale simulator and design-space explorer for disaggregated
// LLM inference serving. Subcommands cover chip inspection, roofline latency
// estimates, chip economics, trace synthesis, cluster simulation, and the
// provisioning/DSE/reallocation sweeps.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "spadsim/clustersim.hpp"
#include "spadsim/econ.hpp"
#include "spadsim/errors.hpp"
#include "spadsim/explore.hpp"
#include "spadsim/manifest.hpp"
#include "spadsim/perf.hpp"
#include "spadsim/workload.hpp"

namespace {

using namespace spadsim;

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), f, v);
    return std::string(buf);
}

std::string fs(double v) { return fmt("%.9g", v); } // seconds and ratios

void write_output(const std::string& out_path, const std::string& content) {
    if (out_path.empty() || out_path == "-") {
        std::cout << content;
        return;
    }
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw SpadError("cannot write output file: " + out_path);
    out << content;
}

int resolve_threads(int flag_value) {
    if (flag_value > 0) return flag_value;
    if (const char* env = std::getenv("SPADSIM_THREADS")) {
        int v = std::atoi(env);
        if (v > 0) return v;
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

std::vector<double> parse_double_list(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(std::stod(item));
    }
    return out;
}

std::vector<int> parse_int_list(const std::string& csv) {
    std::vector<int> out;
    for (double v : parse_double_list(csv)) out.push_back(static_cast<int>(v));
    return out;
}

PerfParams load_perf_params(const std::string& path) {
    PerfParams p;
    if (path.empty()) return p;
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open perf params: " + path);
    nlohmann::json j;
    in >> j;
    p.dram_efficiency = j.value("dram_efficiency", p.dram_efficiency);
    p.tensor_efficiency = j.value("tensor_efficiency", p.tensor_efficiency);
    p.vector_efficiency = j.value("vector_efficiency", p.vector_efficiency);
    p.l2_gbs_multiplier = j.value("l2_gbs_multiplier", p.l2_gbs_multiplier);
    p.kernel_launch_us = j.value("kernel_launch_us", p.kernel_launch_us);
    p.validate();
    return p;
}

// --- chip show ---------------------------------------------------------------

struct ChipShowOpts {
    std::vector<std::string> chips;
    std::string out;
};

int run_chip_show(const ChipShowOpts& o, RunManifest manifest) {
    std::ostringstream csv;
    csv << "name,core_count,vector_width,systolic,l1_kb_per_core,l2_mb,"
           "tensor_pflops_fp16,vector_tflops_fp32,bandwidth_gbs,capacity_gb,die_area_mm2\n";
    for (std::size_t i = 0; i < o.chips.size(); ++i) {
        manifest.add_input("chip" + std::to_string(i), o.chips[i]);
        ChipSpec c = load_chip_spec(o.chips[i]);
        csv << c.name << "," << c.core_count << "," << c.vector_width << "," << c.systolic_h
            << "x" << c.systolic_w << "," << fs(c.l1_kb_per_core) << "," << fs(c.l2_mb) << ","
            << fmt("%.2f", peak_tensor_flops(c, 2) / 1e15) << ","
            << fmt("%.1f", peak_vector_flops(c) / 1e12) << ","
            << fmt("%.0f", memory_bandwidth_gbs(c)) << ","
            << fmt("%.0f", memory_capacity_bytes(c) / 1e9) << "," << fs(c.die_area_mm2) << "\n";
    }
    write_output(o.out, manifest.csv_comment_block() + csv.str());
    return 0;
}

// --- perf ----------------------------------------------------------------------

struct PerfOpts {
    std::string chip, model, phase = "prefill", perf_params, out;
    int batch = 1, seq = 1024, tp = 1, pp = 1, ep = 1;
    std::string sweep_bandwidth, sweep_cores;
};

void append_perf_row(std::ostringstream& csv, const std::string& config_id, const PerfOpts& o,
                     const LatencyBreakdown& b) {
    csv << config_id << "," << o.phase << "," << o.batch << "," << o.seq << "," << fs(b.gemm)
        << "," << fs(b.attention) << "," << fs(b.softmax_norm_act) << "," << fs(b.communication)
        << "," << fs(b.total()) << "\n";
}

int run_perf(const PerfOpts& o, RunManifest manifest) {
    manifest.add_input("chip", o.chip);
    manifest.add_input("model", o.model);
    MachineSpec machine;
    machine.chip = load_chip_spec(o.chip);
    machine.chips_per_machine = o.tp * o.pp;
    ModelSpec model = load_model_spec(o.model);
    ParallelismSpec par{o.tp, o.pp, o.ep};
    Phase phase = o.phase == "decode" ? Phase::Decode : Phase::Prefill;
    PhaseWork work{phase, std::vector<int>(static_cast<std::size_t>(o.batch), o.seq)};
    PerfParams params = load_perf_params(o.perf_params);

    std::ostringstream csv;
    csv << "config_id,phase,batch,seq,gemm_s,attention_s,vector_s,comm_s,total_s\n";
    if (!o.sweep_bandwidth.empty() || !o.sweep_cores.empty()) {
        SweepKnob knob = !o.sweep_bandwidth.empty() ? SweepKnob::Bandwidth : SweepKnob::CoreCount;
        auto values = parse_double_list(!o.sweep_bandwidth.empty() ? o.sweep_bandwidth : o.sweep_cores);
        const char* knob_name = knob == SweepKnob::Bandwidth ? "bw" : "cores";
        for (const auto& pt : sensitivity_sweep(machine, knob, values, model, par, work, params))
            append_perf_row(csv, machine.chip.name + "@" + knob_name + "=" + fmt("%.6g", pt.value),
                            o, pt.breakdown);
    } else {
        append_perf_row(csv, machine.chip.name, o, phase_latency(model, machine, par, work, params));
    }
    write_output(o.out, manifest.csv_comment_block() + csv.str());
    return 0;
}

// --- cost ----------------------------------------------------------------------

struct CostOpts {
    std::vector<std::string> chips;
    std::string cost_params;
    double hbm_usd_per_gb = 9.0, gddr_usd_per_gb = 3.0, wafer_cost = 20000.0;
    bool hbm_set = false, gddr_set = false, wafer_set = false;
    std::string out;
};

CostParams load_cost_params(const std::string& path) {
    CostParams p;
    if (path.empty()) return p;
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open cost params: " + path);
    nlohmann::json j;
    in >> j;
    p.wafer_cost_usd = j.value("wafer_cost_usd", p.wafer_cost_usd);
    p.wafer_diameter_mm = j.value("wafer_diameter_mm", p.wafer_diameter_mm);
    p.gddr_usd_per_gb = j.value("gddr_usd_per_gb", p.gddr_usd_per_gb);
    p.hbm_usd_per_gb = j.value("hbm_usd_per_gb", p.hbm_usd_per_gb);
    p.ref_tdp_w = j.value("ref_tdp_w", p.ref_tdp_w);
    p.overhead_frac = j.value("overhead_frac", p.overhead_frac);
    p.hbm_pkg_power_w = j.value("hbm_pkg_power_w", p.hbm_pkg_power_w);
    p.gddr_pj_per_bit = j.value("gddr_pj_per_bit", p.gddr_pj_per_bit);
    if (j.contains("ref_chip")) p.ref_chip = chip_from_json(j.at("ref_chip"));
    p.validate();
    return p;
}

int run_cost(const CostOpts& o, RunManifest manifest) {
    if (!o.cost_params.empty()) manifest.add_input("cost_params", o.cost_params);
    CostParams params = load_cost_params(o.cost_params);
    if (o.hbm_set) params.hbm_usd_per_gb = o.hbm_usd_per_gb;
    if (o.gddr_set) params.gddr_usd_per_gb = o.gddr_usd_per_gb;
    if (o.wafer_set) params.wafer_cost_usd = o.wafer_cost;
    std::ostringstream csv;
    csv << "name,area_mm2,die_usd,mem_usd,total_usd,tdp_w,norm_cost,norm_tdp\n";
    for (std::size_t i = 0; i < o.chips.size(); ++i) {
        manifest.add_input("chip" + std::to_string(i), o.chips[i]);
        ChipSpec c = load_chip_spec(o.chips[i]);
        ChipCost cc = chip_cost(c, params);
        csv << c.name << "," << fs(c.die_area_mm2) << "," << fmt("%.0f", cc.die_usd) << ","
            << fmt("%.0f", cc.mem_usd) << "," << fmt("%.0f", cc.total_usd) << ","
            << fmt("%.0f", chip_tdp(c, params)) << "," << fmt("%.2f", normalized_cost(c, params))
            << "," << fmt("%.2f", normalized_tdp(c, params)) << "\n";
    }
    write_output(o.out, manifest.csv_comment_block() + csv.str());
    return 0;
}

// --- trace synth ------------------------------------------------------------------

struct SynthOpts {
    std::string profile = "coding";
    double rate = 1.0;
    long long n = 1000;
    std::string out;
};

int run_trace_synth(const SynthOpts& o, RunManifest manifest) {
    Trace t = synth_trace(o.rate, o.n, trace_profile_from_string(o.profile), manifest.seed);
    std::ostringstream body;
    write_trace(t, body);
    // manifest comments stay parseable: parse_trace skips '#' lines after the
    // header, so embed them after it
    std::string csv = body.str();
    std::size_t header_end = csv.find('\n');
    std::string with_manifest = csv.substr(0, header_end + 1) + manifest.csv_comment_block() +
                                csv.substr(header_end + 1);
    write_output(o.out, with_manifest);
    return 0;
}

// --- simulate ----------------------------------------------------------------------

struct SimulateOpts {
    std::string cluster, scheduler, trace, slo = "normal", perf_params;
    std::string out, per_request;
};

int run_simulate(const SimulateOpts& o, RunManifest manifest) {
    manifest.add_input("cluster", o.cluster);
    manifest.add_input("scheduler", o.scheduler);
    manifest.add_input("trace", o.trace);
    ClusterConfig cluster = load_cluster_config(o.cluster);
    SchedulerSpec scheduler = load_scheduler_spec(o.scheduler);
    Trace trace = load_trace(o.trace);
    PerfParams params = load_perf_params(o.perf_params);
    SloSpec slo = slo_thresholds(slo_tier_from_string(o.slo));

    SimMetrics metrics = simulate(cluster, scheduler, trace, params, manifest.seed);

    nlohmann::ordered_json j;
    j["manifest"] = manifest.to_json();
    nlohmann::ordered_json agg;
    agg["requests"] = metrics.per_request.size();
    long long completed = 0;
    for (const auto& r : metrics.per_request) completed += r.finished ? 1 : 0;
    agg["completed"] = completed;
    agg["queued_at_horizon"] = static_cast<long long>(metrics.per_request.size()) - completed;
    auto opt = [](const std::optional<double>& v) {
        return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
    };
    agg["p50_ttft_s"] = opt(metrics.p50_ttft_s);
    agg["p90_ttft_s"] = opt(metrics.p90_ttft_s);
    agg["p99_ttft_s"] = opt(metrics.p99_ttft_s);
    agg["p50_tbt_s"] = opt(metrics.p50_tbt_s);
    agg["p90_tbt_s"] = opt(metrics.p90_tbt_s);
    agg["p99_tbt_s"] = opt(metrics.p99_tbt_s);
    agg["throughput_rps"] = metrics.throughput_rps;
    agg["horizon_s"] = metrics.horizon_s;
    agg["kv_bytes_transferred"] = metrics.kv_bytes_transferred;
    j["aggregates"] = agg;

    nlohmann::ordered_json machines = nlohmann::ordered_json::array();
    for (const auto& m : metrics.machines)
        machines.push_back({{"pool", m.pool},
                            {"index", m.index_in_pool},
                            {"busy_frac", m.busy_frac},
                            {"kv_capacity_tokens", m.kv_capacity_tokens},
                            {"max_resident_kv_tokens", m.max_resident_kv_tokens}});
    j["machines"] = machines;

    if (!metrics.per_request.empty()) {
        const ModelSpec& model = cluster.pools.front().deployment.model;
        auto baselines = compute_baselines(trace, model, cluster.baseline, params);
        SloEval eval = evaluate_slo(metrics, baselines, slo);
        nlohmann::ordered_json sj;
        sj["tier"] = to_string(slo.tier);
        sj["pass"] = eval.pass;
        sj["margin_p90_tbt"] = eval.margin_p90_tbt;
        sj["margin_p90_ttft"] = eval.margin_p90_ttft;
        sj["margin_p99_tbt"] = eval.margin_p99_tbt;
        sj["margin_p99_ttft"] = eval.margin_p99_ttft;
        j["slo"] = sj;
    } else {
        j["slo"] = nullptr;
    }

    write_output(o.out, j.dump(2) + "\n");

    if (!o.per_request.empty()) {
        std::ostringstream csv;
        csv << manifest.csv_comment_block()
            << "id,arrival_s,ttft_s,e2e_s,tbt_count,tbt_mean_s,finished\n";
        for (const auto& r : metrics.per_request) {
            double tbt_mean = 0;
            for (double s : r.tbt_samples_s) tbt_mean += s;
            if (!r.tbt_samples_s.empty()) tbt_mean /= static_cast<double>(r.tbt_samples_s.size());
            csv << r.id << "," << fs(r.arrival_s) << "," << fs(r.ttft_s) << "," << fs(r.e2e_s)
                << "," << r.tbt_samples_s.size() << "," << fs(tbt_mean) << ","
                << (r.finished ? 1 : 0) << "\n";
        }
        write_output(o.per_request, csv.str());
    }
    return 0;
}

// --- provision ---------------------------------------------------------------------

struct ProvisionOpts {
    std::string scheduler, prefill_chip, decode_chip, model, trace, slo = "normal", perf_params;
    int tp = 8, pp = 1, ep = 1;
    double rate = 1.0, reserve_frac = 0.9;
    int max_prefill = 8, max_decode = 8, threads = 0;
    std::string out;
};

MachineTypeSpec machine_type(const std::string& chip_path, const ModelSpec& model,
                             const ParallelismSpec& par, double reserve_frac) {
    MachineTypeSpec t;
    t.machine.chip = load_chip_spec(chip_path);
    t.machine.chips_per_machine = par.chips();
    t.name = t.machine.chip.name;
    t.deployment = DeploymentSpec{model, par, reserve_frac};
    return t;
}

int run_provision(const ProvisionOpts& o, RunManifest manifest) {
    manifest.add_input("scheduler", o.scheduler);
    manifest.add_input("prefill_chip", o.prefill_chip);
    manifest.add_input("model", o.model);
    manifest.add_input("trace", o.trace);

    ProvisionSpec spec;
    spec.scheduler = load_scheduler_spec(o.scheduler);
    ModelSpec model = load_model_spec(o.model);
    ParallelismSpec par{o.tp, o.pp, o.ep};
    spec.prefill_type = machine_type(o.prefill_chip, model, par, o.reserve_frac);
    if (spec.scheduler.kind != SchedulerKind::Colocated) {
        manifest.add_input("decode_chip", o.decode_chip);
        spec.decode_type = machine_type(o.decode_chip, model, par, o.reserve_frac);
    } else {
        spec.decode_type = spec.prefill_type;
    }
    spec.max_prefill = o.max_prefill;
    spec.max_decode = o.max_decode;
    spec.tier = slo_tier_from_string(o.slo);
    spec.target_rate_rps = o.rate;
    spec.baseline.machine.chip = reference_h100();
    spec.baseline.machine.chips_per_machine = par.chips();
    spec.baseline.par = par;
    spec.perf = load_perf_params(o.perf_params);
    spec.threads = resolve_threads(o.threads);

    Trace trace = load_trace(o.trace);
    ProvisionResult result = provision(spec, trace);

    std::ostringstream csv;
    csv << "n_prefill,n_decode,norm_cost,norm_tdp,pass_loose,pass_normal,pass_tight,"
           "margin_p90_tbt,margin_p90_ttft,margin_p99_tbt,margin_p99_ttft,frontier,error\n";
    std::vector<bool> on_frontier(result.cells.size(), false);
    for (std::size_t i : result.frontier) on_frontier[i] = true;
    for (std::size_t i = 0; i < result.cells.size(); ++i) {
        const ProvisionCell& c = result.cells[i];
        csv << c.n_prefill << "," << c.n_decode << "," << fmt("%.4f", c.norm_cost) << ","
            << fmt("%.4f", c.norm_tdp) << "," << c.pass_loose << "," << c.pass_normal << ","
            << c.pass_tight << "," << fs(c.eval.margin_p90_tbt) << ","
            << fs(c.eval.margin_p90_ttft) << "," << fs(c.eval.margin_p99_tbt) << ","
            << fs(c.eval.margin_p99_ttft) << "," << (on_frontier[i] ? 1 : 0) << ","
            << (c.error.empty() ? "" : "infeasible") << "\n";
    }
    write_output(o.out, manifest.csv_comment_block() + csv.str());
    return 0;
}

// --- dse ----------------------------------------------------------------------------

struct DseOpts {
    std::string base_chip, model, phase = "prefill", perf_params;
    int batch = 2, seq = 1024, tp = 8, pp = 1, ep = 1;
    std::string cores, vector_widths, systolics, l1_kbs, l2_mbs, bandwidths;
    std::string out;
};

int run_dse(const DseOpts& o, RunManifest manifest) {
    manifest.add_input("base_chip", o.base_chip);
    manifest.add_input("model", o.model);
    MachineSpec base;
    base.chip = load_chip_spec(o.base_chip);
    base.chips_per_machine = o.tp * o.pp;
    ModelSpec model = load_model_spec(o.model);
    ParallelismSpec par{o.tp, o.pp, o.ep};
    Phase phase = o.phase == "decode" ? Phase::Decode : Phase::Prefill;
    PhaseWork work{phase, std::vector<int>(static_cast<std::size_t>(o.batch), o.seq)};

    DseGrid grid;
    grid.core_counts = parse_int_list(o.cores);
    grid.vector_widths = parse_int_list(o.vector_widths);
    if (!o.systolics.empty()) {
        std::stringstream ss(o.systolics);
        std::string item;
        while (std::getline(ss, item, ',')) {
            auto x = item.find('x');
            if (x == std::string::npos) throw SpadError("systolic dims must look like 16x32");
            grid.systolics.emplace_back(std::stoi(item.substr(0, x)), std::stoi(item.substr(x + 1)));
        }
    }
    grid.l1_kbs = parse_double_list(o.l1_kbs);
    grid.l2_mbs = parse_double_list(o.l2_mbs);
    grid.bandwidths_gbs = parse_double_list(o.bandwidths);

    CostParams cost;
    auto points = dse_chips(base, grid, model, par, work, load_perf_params(o.perf_params), cost);

    std::ostringstream csv;
    csv << "name,cores,vector_width,systolic,l1_kb,l2_mb,bandwidth_gbs,latency_s,die_area_mm2,"
           "cost_usd,tdp_w,pareto\n";
    for (const auto& p : points) {
        csv << p.chip.name << "," << p.chip.core_count << "," << p.chip.vector_width << ","
            << p.chip.systolic_h << "x" << p.chip.systolic_w << "," << fs(p.chip.l1_kb_per_core)
            << "," << fs(p.chip.l2_mb) << "," << fmt("%.0f", memory_bandwidth_gbs(p.chip)) << ","
            << fs(p.latency_s) << "," << fmt("%.1f", p.die_area_mm2) << ","
            << fmt("%.0f", p.cost_usd) << "," << fmt("%.0f", p.tdp_w) << "," << (p.pareto ? 1 : 0)
            << "\n";
    }
    write_output(o.out, manifest.csv_comment_block() + csv.str());
    return 0;
}

// --- reallocate --------------------------------------------------------------------

struct ReallocateOpts {
    std::string inventory; // chip.json:count,chip.json:count
    std::string scheduler, model, trace, slo = "normal", perf_params;
    int tp = 8, pp = 1, ep = 1, threads = 0;
    double reserve_frac = 0.9, tol = 0.02, initial_rate = 0.0;
    std::string out;
};

int run_reallocate(const ReallocateOpts& o, RunManifest manifest) {
    manifest.add_input("scheduler", o.scheduler);
    manifest.add_input("model", o.model);
    manifest.add_input("trace", o.trace);

    ReallocateSpec spec;
    spec.scheduler = load_scheduler_spec(o.scheduler);
    ModelSpec model = load_model_spec(o.model);
    ParallelismSpec par{o.tp, o.pp, o.ep};

    std::stringstream ss(o.inventory);
    std::string item;
    int idx = 0;
    while (std::getline(ss, item, ',')) {
        auto colon = item.rfind(':');
        if (colon == std::string::npos)
            throw SpadError("inventory items must look like chip.json:count");
        std::string path = item.substr(0, colon);
        int count = std::stoi(item.substr(colon + 1));
        manifest.add_input("inventory" + std::to_string(idx++), path);
        spec.inventory.push_back(
            InventoryItem{machine_type(path, model, par, o.reserve_frac), count});
    }
    spec.tier = slo_tier_from_string(o.slo);
    spec.baseline.machine.chip = reference_h100();
    spec.baseline.machine.chips_per_machine = par.chips();
    spec.baseline.par = par;
    spec.perf = load_perf_params(o.perf_params);
    spec.rate_tolerance = o.tol;
    spec.initial_rate_rps = o.initial_rate;
    spec.threads = resolve_threads(o.threads);

    Trace trace = load_trace(o.trace);
    ReallocateResult result = reallocate(spec, trace);

    std::ostringstream csv;
    csv << "assignment";
    for (const auto& item2 : spec.inventory)
        csv << "," << item2.type.name << "_prefill," << item2.type.name << "_decode";
    csv << ",max_rate_rps,best,error\n";
    for (std::size_t i = 0; i < result.assignments.size(); ++i) {
        const AssignmentResult& a = result.assignments[i];
        csv << i;
        for (std::size_t t = 0; t < spec.inventory.size(); ++t)
            csv << "," << a.to_prefill[t] << "," << (spec.inventory[t].count - a.to_prefill[t]);
        csv << "," << fs(a.max_rate_rps) << "," << (i == result.best ? 1 : 0) << ","
            << (a.error.empty() ? "" : "infeasible") << "\n";
    }
    write_output(o.out, manifest.csv_comment_block() + csv.str());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"spadsim: disaggregated LLM serving simulator and design explorer"};
    app.require_subcommand(1);
    app.fallthrough(); // global flags like --seed work after the subcommand too
    std::uint64_t seed = 0;
    app.add_option("--seed", seed, "seed for all randomness")->capture_default_str();

    ChipShowOpts chip_opts;
    auto* chip_cmd = app.add_subcommand("chip", "chip spec tools");
    chip_cmd->require_subcommand(1);
    auto* chip_show = chip_cmd->add_subcommand("show", "derive peak rates from chip specs");
    chip_show->add_option("--chip", chip_opts.chips, "chip spec JSON file(s)")->required();
    chip_show->add_option("--out", chip_opts.out, "output CSV path (default stdout)");

    PerfOpts perf_opts;
    auto* perf_cmd = app.add_subcommand("perf", "roofline latency for one workload point");
    perf_cmd->add_option("--chip", perf_opts.chip)->required();
    perf_cmd->add_option("--model", perf_opts.model)->required();
    perf_cmd->add_option("--phase", perf_opts.phase)->check(CLI::IsMember({"prefill", "decode"}));
    perf_cmd->add_option("--batch", perf_opts.batch);
    perf_cmd->add_option("--seq", perf_opts.seq);
    perf_cmd->add_option("--tp", perf_opts.tp);
    perf_cmd->add_option("--pp", perf_opts.pp);
    perf_cmd->add_option("--ep", perf_opts.ep);
    perf_cmd->add_option("--sweep-bandwidth", perf_opts.sweep_bandwidth, "GB/s values, comma-separated");
    perf_cmd->add_option("--sweep-cores", perf_opts.sweep_cores, "core counts, comma-separated");
    perf_cmd->add_option("--perf-params", perf_opts.perf_params, "perf params JSON");
    perf_cmd->add_option("--out", perf_opts.out);

    CostOpts cost_opts;
    auto* cost_cmd = app.add_subcommand("cost", "die/memory cost and TDP per chip");
    cost_cmd->add_option("--chip", cost_opts.chips, "chip spec JSON file(s)")->required();
    cost_cmd->add_option("--cost-params", cost_opts.cost_params, "cost params JSON file");
    auto* hbm_opt = cost_cmd->add_option("--hbm-usd-per-gb", cost_opts.hbm_usd_per_gb)->capture_default_str();
    auto* gddr_opt = cost_cmd->add_option("--gddr-usd-per-gb", cost_opts.gddr_usd_per_gb)->capture_default_str();
    auto* wafer_opt = cost_cmd->add_option("--wafer-cost", cost_opts.wafer_cost)->capture_default_str();
    cost_cmd->add_option("--out", cost_opts.out);

    SynthOpts synth_opts;
    auto* trace_cmd = app.add_subcommand("trace", "trace tools");
    trace_cmd->require_subcommand(1);
    auto* synth_cmd = trace_cmd->add_subcommand("synth", "synthesize a Poisson trace");
    synth_cmd->add_option("--profile", synth_opts.profile)
        ->check(CLI::IsMember({"coding", "conversation"}));
    synth_cmd->add_option("--rate", synth_opts.rate, "arrival rate, req/s")->required();
    synth_cmd->add_option("--n", synth_opts.n, "request count")->required();
    synth_cmd->add_option("--out", synth_opts.out);

    SimulateOpts sim_opts;
    auto* sim_cmd = app.add_subcommand("simulate", "replay a trace through the cluster simulator");
    sim_cmd->add_option("--cluster", sim_opts.cluster)->required();
    sim_cmd->add_option("--scheduler", sim_opts.scheduler)->required();
    sim_cmd->add_option("--trace", sim_opts.trace)->required();
    sim_cmd->add_option("--slo", sim_opts.slo)->check(CLI::IsMember({"loose", "normal", "tight"}));
    sim_cmd->add_option("--perf-params", sim_opts.perf_params);
    sim_cmd->add_option("--out", sim_opts.out, "results JSON path");
    sim_cmd->add_option("--per-request", sim_opts.per_request, "per-request CSV dump path");

    ProvisionOpts prov_opts;
    auto* prov_cmd = app.add_subcommand("provision", "sweep machine counts against SLOs");
    prov_cmd->add_option("--scheduler", prov_opts.scheduler)->required();
    prov_cmd->add_option("--prefill-chip", prov_opts.prefill_chip)->required();
    prov_cmd->add_option("--decode-chip", prov_opts.decode_chip);
    prov_cmd->add_option("--model", prov_opts.model)->required();
    prov_cmd->add_option("--trace", prov_opts.trace)->required();
    prov_cmd->add_option("--rate", prov_opts.rate, "target request rate, req/s")->required();
    prov_cmd->add_option("--slo", prov_opts.slo)->check(CLI::IsMember({"loose", "normal", "tight"}));
    prov_cmd->add_option("--tp", prov_opts.tp);
    prov_cmd->add_option("--pp", prov_opts.pp);
    prov_cmd->add_option("--ep", prov_opts.ep);
    prov_cmd->add_option("--reserve-frac", prov_opts.reserve_frac);
    prov_cmd->add_option("--max-prefill", prov_opts.max_prefill);
    prov_cmd->add_option("--max-decode", prov_opts.max_decode);
    prov_cmd->add_option("--threads", prov_opts.threads, "0 = SPADSIM_THREADS or hardware");
    prov_cmd->add_option("--perf-params", prov_opts.perf_params);
    prov_cmd->add_option("--out", prov_opts.out);

    DseOpts dse_opts;
    auto* dse_cmd = app.add_subcommand("dse", "chip design-space exploration");
    dse_cmd->add_option("--base-chip", dse_opts.base_chip)->required();
    dse_cmd->add_option("--model", dse_opts.model)->required();
    dse_cmd->add_option("--phase", dse_opts.phase)->check(CLI::IsMember({"prefill", "decode"}));
    dse_cmd->add_option("--batch", dse_opts.batch);
    dse_cmd->add_option("--seq", dse_opts.seq);
    dse_cmd->add_option("--tp", dse_opts.tp);
    dse_cmd->add_option("--pp", dse_opts.pp);
    dse_cmd->add_option("--ep", dse_opts.ep);
    dse_cmd->add_option("--cores", dse_opts.cores, "comma-separated core counts");
    dse_cmd->add_option("--vector-widths", dse_opts.vector_widths);
    dse_cmd->add_option("--systolics", dse_opts.systolics, "e.g. 16x16,32x32");
    dse_cmd->add_option("--l1-kbs", dse_opts.l1_kbs);
    dse_cmd->add_option("--l2-mbs", dse_opts.l2_mbs);
    dse_cmd->add_option("--bandwidths", dse_opts.bandwidths, "GB/s values");
    dse_cmd->add_option("--perf-params", dse_opts.perf_params);
    dse_cmd->add_option("--out", dse_opts.out);

    ReallocateOpts re_opts;
    auto* re_cmd = app.add_subcommand("reallocate", "search role assignments for an inventory");
    re_cmd->add_option("--inventory", re_opts.inventory, "chip.json:count,chip.json:count")->required();
    re_cmd->add_option("--scheduler", re_opts.scheduler)->required();
    re_cmd->add_option("--model", re_opts.model)->required();
    re_cmd->add_option("--trace", re_opts.trace)->required();
    re_cmd->add_option("--slo", re_opts.slo)->check(CLI::IsMember({"loose", "normal", "tight"}));
    re_cmd->add_option("--tp", re_opts.tp);
    re_cmd->add_option("--pp", re_opts.pp);
    re_cmd->add_option("--ep", re_opts.ep);
    re_cmd->add_option("--reserve-frac", re_opts.reserve_frac);
    re_cmd->add_option("--tol", re_opts.tol, "rate search tolerance")->capture_default_str();
    re_cmd->add_option("--initial-rate", re_opts.initial_rate, "0 = trace offered rate");
    re_cmd->add_option("--threads", re_opts.threads);
    re_cmd->add_option("--perf-params", re_opts.perf_params);
    re_cmd->add_option("--out", re_opts.out);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e); // prints usage/help; 0 only for --help
        return code == 0 ? 0 : 1;
    }

    RunManifest manifest;
    manifest.seed = seed;
    try {
        if (chip_show->parsed()) {
            manifest.subcommand = "chip show";
            return run_chip_show(chip_opts, manifest);
        }
        if (perf_cmd->parsed()) {
            manifest.subcommand = "perf";
            return run_perf(perf_opts, manifest);
        }
        if (cost_cmd->parsed()) {
            manifest.subcommand = "cost";
            cost_opts.hbm_set = hbm_opt->count() > 0;
            cost_opts.gddr_set = gddr_opt->count() > 0;
            cost_opts.wafer_set = wafer_opt->count() > 0;
            return run_cost(cost_opts, manifest);
        }
        if (synth_cmd->parsed()) {
            manifest.subcommand = "trace synth";
            manifest.add_param("profile", synth_opts.profile);
            manifest.add_param("rate", fs(synth_opts.rate));
            manifest.add_param("n", std::to_string(synth_opts.n));
            return run_trace_synth(synth_opts, manifest);
        }
        if (sim_cmd->parsed()) {
            manifest.subcommand = "simulate";
            return run_simulate(sim_opts, manifest);
        }
        if (prov_cmd->parsed()) {
            manifest.subcommand = "provision";
            manifest.add_param("rate", fs(prov_opts.rate));
            manifest.add_param("slo", prov_opts.slo);
            return run_provision(prov_opts, manifest);
        }
        if (dse_cmd->parsed()) {
            manifest.subcommand = "dse";
            return run_dse(dse_opts, manifest);
        }
        if (re_cmd->parsed()) {
            manifest.subcommand = "reallocate";
            manifest.add_param("slo", re_opts.slo);
            return run_reallocate(re_opts, manifest);
        }
        std::cerr << "no subcommand\n";
        return 1;
    } catch (const SpadError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
