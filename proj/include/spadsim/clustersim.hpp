#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "spadsim/chip.hpp"
#include "spadsim/model.hpp"
#include "spadsim/perf.hpp"
#include "spadsim/workload.hpp"

namespace spadsim {

enum class PoolRole { Prefill, Decode, Mixed };

const char* to_string(PoolRole r);
PoolRole pool_role_from_string(const std::string& s);

struct DeploymentSpec {
    ModelSpec model;
    ParallelismSpec par;
    double reserve_frac = 0.9;
};

struct PoolConfig {
    PoolRole role = PoolRole::Prefill;
    MachineSpec machine;
    int count = 0;
    DeploymentSpec deployment;
};

// Reference deployment for SLO baselines: the same request on an unloaded
// machine of this type, no batching or contention.
struct BaselineDeployment {
    MachineSpec machine;
    ParallelismSpec par;
};

struct ClusterConfig {
    std::vector<PoolConfig> pools;
    BaselineDeployment baseline; // defaulted to 8x reference H100 by loaders

    // One replica per machine (tp*pp == chips_per_machine), at least one
    // prefill-capable and one decode-capable machine, weights fit everywhere.
    void validate() const;
};

enum class SchedulerKind { Disaggregated, Colocated };

struct SchedulerSpec {
    SchedulerKind kind = SchedulerKind::Disaggregated;
    // disaggregated: prefill FIFO whole-prompt batching, decode most-free-KV
    bool overlap_kv_transfer = true;
    long long max_batch_tokens = 16384;
    // colocated: one prefill chunk mixed into each decode iteration
    int chunk_tokens = 512;

    void validate() const;
};

struct RequestMetrics {
    long long id = 0;
    double arrival_s = 0.0;
    double ttft_s = 0.0;
    double e2e_s = 0.0;
    std::vector<double> tbt_samples_s;
    bool finished = false;
};

struct MachineUsage {
    int pool = 0;
    int index_in_pool = 0;
    double busy_frac = 0.0;
    long long kv_capacity_tokens = 0;
    long long max_resident_kv_tokens = 0; // peak actual KV occupancy observed
};

struct SimMetrics {
    std::vector<RequestMetrics> per_request;
    std::optional<double> p50_ttft_s, p90_ttft_s, p99_ttft_s;
    std::optional<double> p50_tbt_s, p90_tbt_s, p99_tbt_s;
    double throughput_rps = 0.0;
    double horizon_s = 0.0; // last processed event or last arrival, whichever is later
    double kv_bytes_transferred = 0.0;
    std::vector<MachineUsage> machines;
};

// Unbatched single-request latencies on the baseline deployment:
// ttft0 = prefill of the whole prompt, tbt0 = one decode step at the midpoint
// context (input + output/2).
std::pair<double, double> baseline_latency(const Request& request, const ModelSpec& model,
                                           const BaselineDeployment& baseline,
                                           const PerfParams& params);

// Per-request (ttft0, tbt0), memoized over identical (input, output) shapes.
std::vector<std::pair<double, double>> compute_baselines(const Trace& trace,
                                                         const ModelSpec& model,
                                                         const BaselineDeployment& baseline,
                                                         const PerfParams& params);

// Deterministic discrete-event simulation of the trace on the cluster.
// Ties break by lowest machine index then request id; two runs with the
// same inputs are bit-identical.
SimMetrics simulate(const ClusterConfig& cluster, const SchedulerSpec& scheduler,
                    const Trace& trace, const PerfParams& params, std::uint64_t seed);

struct SloEval {
    bool pass = false;
    // achieved normalized percentile / allowed multiplier; > 1 means violated
    double margin_p90_tbt = 0.0;
    double margin_p90_ttft = 0.0;
    double margin_p99_tbt = 0.0;
    double margin_p99_ttft = 0.0;
};

SloEval evaluate_slo(const SimMetrics& metrics,
                     const std::vector<std::pair<double, double>>& baselines, const SloSpec& slo);

// --- config file IO ---------------------------------------------------------

// Relative chip/model paths inside the file resolve against its directory.
ClusterConfig load_cluster_config(const std::string& path);
SchedulerSpec load_scheduler_spec(const std::string& path);
SchedulerSpec scheduler_from_json(const nlohmann::json& j);

} // namespace spadsim
