#include "spadsim/clustersim.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <queue>

#include "spadsim/errors.hpp"
#include "spadsim/stats.hpp"

namespace spadsim {

const char* to_string(PoolRole r) {
    switch (r) {
    case PoolRole::Prefill: return "prefill";
    case PoolRole::Decode: return "decode";
    case PoolRole::Mixed: return "mixed";
    }
    return "prefill";
}

PoolRole pool_role_from_string(const std::string& s) {
    if (s == "prefill") return PoolRole::Prefill;
    if (s == "decode") return PoolRole::Decode;
    if (s == "mixed") return PoolRole::Mixed;
    throw InvalidSpec("unknown pool role: " + s);
}

void ClusterConfig::validate() const {
    if (pools.empty()) throw InvalidSpec("cluster has no pools");
    bool prefill_capable = false, decode_capable = false;
    for (const auto& p : pools) {
        p.machine.validate();
        p.deployment.model.validate();
        p.deployment.par.validate(p.deployment.model);
        if (p.count < 0) throw InvalidSpec("pool count must be >= 0");
        if (p.deployment.par.chips() != p.machine.chips_per_machine)
            throw InvalidSpec("pool deployment tp*pp must equal chips_per_machine");
        if (!(p.deployment.reserve_frac > 0.0) || p.deployment.reserve_frac > 1.0)
            throw InvalidSpec("reserve_frac must be in (0, 1]");
        if (p.count > 0) {
            if (p.role != PoolRole::Decode) prefill_capable = true;
            if (p.role != PoolRole::Prefill) decode_capable = true;
        }
        // weights must fit; throws InfeasibleDeployment otherwise
        kv_capacity_tokens(memory_capacity_bytes(p.machine.chip) * p.machine.chips_per_machine,
                           p.deployment.model, p.deployment.par, p.deployment.reserve_frac);
    }
    if (!prefill_capable || !decode_capable)
        throw InvalidSpec("cluster needs at least one prefill-capable and one decode-capable machine");
    baseline.machine.validate();
}

void SchedulerSpec::validate() const {
    if (max_batch_tokens < 1) throw InvalidSpec("max_batch_tokens must be >= 1");
    if (kind == SchedulerKind::Colocated && chunk_tokens < 1)
        throw InvalidSpec("chunk_tokens must be >= 1");
}

std::pair<double, double> baseline_latency(const Request& request, const ModelSpec& model,
                                           const BaselineDeployment& baseline,
                                           const PerfParams& params) {
    if (request.input_tokens < 1 || request.output_tokens < 1)
        throw InvalidSpec("baseline_latency: request tokens must be >= 1");
    PhaseWork prefill{Phase::Prefill, {request.input_tokens}};
    double ttft0 = phase_latency(model, baseline.machine, baseline.par, prefill, params).total();
    int mid_ctx = request.input_tokens + request.output_tokens / 2;
    PhaseWork decode{Phase::Decode, {mid_ctx}};
    double tbt0 = phase_latency(model, baseline.machine, baseline.par, decode, params).total();
    return {ttft0, tbt0};
}

std::vector<std::pair<double, double>> compute_baselines(const Trace& trace,
                                                         const ModelSpec& model,
                                                         const BaselineDeployment& baseline,
                                                         const PerfParams& params) {
    std::map<std::pair<int, int>, std::pair<double, double>> memo;
    std::vector<std::pair<double, double>> out;
    out.reserve(trace.requests.size());
    for (const auto& r : trace.requests) {
        auto key = std::make_pair(r.input_tokens, r.output_tokens);
        auto it = memo.find(key);
        if (it == memo.end())
            it = memo.emplace(key, baseline_latency(r, model, baseline, params)).first;
        out.push_back(it->second);
    }
    return out;
}

namespace {

enum class EvType : int { PrefillDone = 0, IterDone = 1, DecodeReady = 2, IterStart = 3, Arrival = 4 };

struct Event {
    double t = 0.0;
    EvType type = EvType::Arrival;
    int machine = -1;
    long long req = -1;
};

struct EventLater {
    bool operator()(const Event& a, const Event& b) const {
        if (a.t != b.t) return a.t > b.t;
        if (a.type != b.type) return static_cast<int>(a.type) > static_cast<int>(b.type);
        if (a.machine != b.machine) return a.machine > b.machine;
        return a.req > b.req;
    }
};

struct ReqState {
    const Request* req = nullptr;
    double ttft = std::numeric_limits<double>::quiet_NaN();
    double e2e = std::numeric_limits<double>::quiet_NaN();
    double decode_ready_t = 0.0; // when the first token was out and KV was in place
    std::vector<double> tbt;
    int kv_len = 0;
    int decode_remaining = 0;
    double prefill_service = 0.0;
    bool finished = false;

    long long commit_tokens() const {
        return static_cast<long long>(req->input_tokens) + req->output_tokens;
    }
};

struct MachineState {
    int pool = 0;
    int index_in_pool = 0;
    PoolRole role = PoolRole::Prefill;
    const PoolConfig* cfg = nullptr;
    long long kv_capacity = 0;

    // prefill side
    std::deque<long long> prefill_queue;
    long long outstanding_prompt_tokens = 0;
    bool busy = false;
    std::vector<long long> running_batch;
    double service_s = 0.0;

    // decode side
    std::vector<long long> residents;
    std::vector<long long> pending_join;
    long long committed_tokens = 0;

    // colocated chunked-prefill head
    long long active_prefill = -1;
    int prefill_progress = 0;
    int iter_chunk = 0;

    double busy_s = 0.0;
    double iter_start_t = 0.0;
    long long max_kv_tokens = 0;

    long long free_kv() const { return kv_capacity - committed_tokens; }
    bool prefill_capable() const { return role != PoolRole::Decode; }
    bool decode_capable() const { return role != PoolRole::Prefill; }
};

class Simulation {
public:
    Simulation(const ClusterConfig& cluster, const SchedulerSpec& sched, const Trace& trace,
               const PerfParams& params)
        : cluster_(cluster), sched_(sched), trace_(trace), params_(params) {
        cluster_.validate();
        sched_.validate();
        params_.validate();

        for (int p = 0; p < static_cast<int>(cluster_.pools.size()); ++p) {
            const PoolConfig& pool = cluster_.pools[p];
            long long cap = kv_capacity_tokens(
                memory_capacity_bytes(pool.machine.chip) * pool.machine.chips_per_machine,
                pool.deployment.model, pool.deployment.par, pool.deployment.reserve_frac);
            for (int i = 0; i < pool.count; ++i) {
                MachineState m;
                m.pool = p;
                m.index_in_pool = i;
                m.role = sched_.kind == SchedulerKind::Colocated ? PoolRole::Mixed : pool.role;
                m.cfg = &pool;
                m.kv_capacity = cap;
                machines_.push_back(std::move(m));
            }
        }

        states_.resize(trace_.requests.size());
        double last_arrival = 0.0;
        for (std::size_t i = 0; i < trace_.requests.size(); ++i) {
            states_[i].req = &trace_.requests[i];
            states_[i].decode_remaining = trace_.requests[i].output_tokens - 1;
            events_.push(Event{trace_.requests[i].arrival_s, EvType::Arrival, -1,
                               static_cast<long long>(i)});
            last_arrival = std::max(last_arrival, trace_.requests[i].arrival_s);
        }
        // horizon = trace span + a bounded drain; whatever is still unfinished
        // then counts as an SLO failure
        cutoff_ = last_arrival + std::max(kMinDrainS, kDrainSpanFrac * last_arrival);
    }

    SimMetrics run() {
        long long budget = 2'000'000 + 4'000 * static_cast<long long>(trace_.requests.size() + 1);
        long long processed = 0;
        while (!events_.empty()) {
            Event ev = events_.top();
            events_.pop();
            if (ev.t < now_ - 1e-12) throw SpadError("event processed out of order");
            if (ev.t > cutoff_) break; // horizon reached; stragglers stay unfinished
            now_ = std::max(now_, ev.t);
            if (++processed > budget) throw SpadError("simulation exceeded event budget");
            switch (ev.type) {
            case EvType::Arrival: on_arrival(ev); break;
            case EvType::PrefillDone: on_prefill_done(ev); break;
            case EvType::DecodeReady: on_decode_ready(ev); break;
            case EvType::IterStart: on_iter_start(ev); break;
            case EvType::IterDone: on_iter_done(ev); break;
            }
        }
        return collect();
    }

private:
    // -- shared helpers --

    const DeploymentSpec& deploy(const MachineState& m) const { return m.cfg->deployment; }

    double prefill_service_s(const MachineState& m, const std::vector<long long>& batch) {
        PhaseWork work{Phase::Prefill, {}};
        work.seq_lens.reserve(batch.size());
        for (long long r : batch) work.seq_lens.push_back(states_[r].req->input_tokens);
        return phase_latency(deploy(m).model, m.cfg->machine, deploy(m).par, work, params_).total();
    }

    double decode_service_s(const MachineState& m) {
        PhaseWork work{Phase::Decode, {}};
        work.seq_lens.reserve(m.residents.size());
        for (long long r : m.residents) work.seq_lens.push_back(states_[r].kv_len);
        return phase_latency(deploy(m).model, m.cfg->machine, deploy(m).par, work, params_).total();
    }

    // Outstanding work for arrival placement. Dedicated prefill machines
    // count queued + running prompt tokens; colocated machines also count the
    // decode tokens still owed by their residents.
    long long placement_load(const MachineState& m) const {
        long long load = m.outstanding_prompt_tokens;
        if (sched_.kind == SchedulerKind::Colocated) {
            for (long long r : m.residents) load += states_[r].decode_remaining;
            for (long long r : m.pending_join) load += states_[r].decode_remaining;
        }
        return load;
    }

    int pick_prefill_machine() const {
        int best = -1;
        long long best_tokens = std::numeric_limits<long long>::max();
        for (int i = 0; i < static_cast<int>(machines_.size()); ++i) {
            const MachineState& m = machines_[i];
            if (!m.prefill_capable()) continue;
            long long load = placement_load(m);
            if (load < best_tokens) {
                best_tokens = load;
                best = i;
            }
        }
        return best;
    }

    int pick_decode_machine() const {
        int best = -1;
        long long best_free = std::numeric_limits<long long>::min();
        for (int i = 0; i < static_cast<int>(machines_.size()); ++i) {
            const MachineState& m = machines_[i];
            if (!m.decode_capable()) continue;
            if (m.free_kv() > best_free) {
                best_free = m.free_kv();
                best = i;
            }
        }
        return best;
    }

    long long max_decode_capacity() const {
        long long cap = 0;
        for (const auto& m : machines_)
            if (m.decode_capable()) cap = std::max(cap, m.kv_capacity);
        return cap;
    }

    // -- disaggregated --

    void on_arrival(const Event& ev) {
        long long r = ev.req;
        int mi = pick_prefill_machine();
        MachineState& m = machines_[mi];
        m.prefill_queue.push_back(r);
        m.outstanding_prompt_tokens += states_[r].req->input_tokens;
        if (!m.busy) {
            if (sched_.kind == SchedulerKind::Colocated) kick(mi);
            else start_prefill_batch(mi);
        }
    }

    // Iteration starts are deferred behind the events of the same instant so
    // that everything ready at time t joins the same batch.
    void kick(int mi) { events_.push(Event{now_, EvType::IterStart, mi, -1}); }

    void on_iter_start(const Event& ev) {
        MachineState& m = machines_[ev.machine];
        if (m.busy) return; // an earlier kick at this instant already started it
        if (sched_.kind == SchedulerKind::Colocated) start_mixed_iter(ev.machine);
        else start_decode_iter(ev.machine);
    }

    void start_prefill_batch(int mi) {
        MachineState& m = machines_[mi];
        if (m.prefill_queue.empty()) {
            m.busy = false;
            return;
        }
        m.running_batch.clear();
        long long tokens = 0;
        while (!m.prefill_queue.empty()) {
            long long r = m.prefill_queue.front();
            long long in = states_[r].req->input_tokens;
            if (!m.running_batch.empty() && tokens + in > sched_.max_batch_tokens) break;
            m.prefill_queue.pop_front();
            m.running_batch.push_back(r);
            tokens += in;
        }
        m.service_s = prefill_service_s(m, m.running_batch);
        m.busy = true;
        m.busy_s += m.service_s;
        events_.push(Event{now_ + m.service_s, EvType::PrefillDone, mi, m.running_batch.front()});
    }

    void on_prefill_done(const Event& ev) {
        MachineState& m = machines_[ev.machine];
        const DeploymentSpec& dep = deploy(m);
        double kv_per_token = kv_bytes_per_token(dep.model);
        for (long long r : m.running_batch) {
            ReqState& rs = states_[r];
            m.outstanding_prompt_tokens -= rs.req->input_tokens;
            rs.prefill_service = m.service_s;
            if (rs.req->output_tokens == 1) {
                rs.ttft = now_ - rs.req->arrival_s;
                rs.e2e = rs.ttft;
                rs.finished = true;
                continue;
            }
            double kv_bytes = rs.req->input_tokens * kv_per_token;
            double rate = dep.par.tp * m.cfg->machine.interconnect.scaleout_gbs_per_chip * 1e9;
            double transfer = kv_bytes / rate;
            double ready = sched_.overlap_kv_transfer
                               ? now_ + std::max(0.0, transfer - m.service_s)
                               : now_ + transfer;
            rs.ttft = ready - rs.req->arrival_s;
            kv_bytes_transferred_ += kv_bytes;
            events_.push(Event{ready, EvType::DecodeReady, -1, r});
        }
        m.running_batch.clear();
        start_prefill_batch(ev.machine);
    }

    void on_decode_ready(const Event& ev) {
        long long r = ev.req;
        states_[r].decode_ready_t = now_;
        if (!try_admit(r)) {
            if (states_[r].commit_tokens() > max_decode_capacity())
                throw CapacityDeadlock("request " + std::to_string(states_[r].req->id) +
                                       " can never fit an empty decode machine (" +
                                       std::to_string(states_[r].commit_tokens()) + " tokens)");
            decode_wait_.push_back(r);
        }
    }

    bool try_admit(long long r) {
        int mi = pick_decode_machine();
        if (mi < 0) return false;
        MachineState& m = machines_[mi];
        if (states_[r].commit_tokens() > m.free_kv()) return false;
        m.committed_tokens += states_[r].commit_tokens();
        states_[r].kv_len = states_[r].req->input_tokens;
        m.pending_join.push_back(r);
        if (!m.busy) kick(mi);
        return true;
    }

    void start_decode_iter(int mi) {
        MachineState& m = machines_[mi];
        m.residents.insert(m.residents.end(), m.pending_join.begin(), m.pending_join.end());
        m.pending_join.clear();
        if (m.residents.empty()) {
            m.busy = false;
            return;
        }
        long long resident_tokens = 0;
        for (long long r : m.residents) resident_tokens += states_[r].kv_len;
        m.max_kv_tokens = std::max(m.max_kv_tokens, resident_tokens);
        m.iter_start_t = now_;
        m.service_s = decode_service_s(m);
        m.busy = true;
        m.busy_s += m.service_s;
        events_.push(Event{now_ + m.service_s, EvType::IterDone, mi, m.residents.front()});
    }

    void on_iter_done(const Event& ev) {
        if (sched_.kind == SchedulerKind::Colocated) {
            on_mixed_iter_done(ev);
            return;
        }
        MachineState& m = machines_[ev.machine];
        std::vector<long long> still_resident;
        still_resident.reserve(m.residents.size());
        for (long long r : m.residents) {
            ReqState& rs = states_[r];
            // the first emission gap also covers any wait for this boundary
            rs.tbt.push_back(rs.tbt.empty()
                                 ? (m.iter_start_t - rs.decode_ready_t) + m.service_s
                                 : m.service_s);
            rs.kv_len += 1;
            rs.decode_remaining -= 1;
            if (rs.decode_remaining == 0) {
                rs.e2e = now_ - rs.req->arrival_s;
                rs.finished = true;
                m.committed_tokens -= rs.commit_tokens();
            } else {
                still_resident.push_back(r);
            }
        }
        m.residents = std::move(still_resident);
        m.busy = false;
        drain_decode_wait();
        kick(ev.machine);
    }

    void drain_decode_wait() {
        while (!decode_wait_.empty()) {
            long long head = decode_wait_.front();
            if (!try_admit(head)) break; // FIFO: head blocks the line
            decode_wait_.pop_front();
        }
    }

    // -- colocated (chunked prefill mixed into decode iterations) --

    void start_mixed_iter(int mi) {
        MachineState& m = machines_[mi];
        m.residents.insert(m.residents.end(), m.pending_join.begin(), m.pending_join.end());
        m.pending_join.clear();

        if (m.active_prefill < 0 && !m.prefill_queue.empty()) {
            long long head = m.prefill_queue.front();
            long long commit = states_[head].commit_tokens();
            if (commit <= m.free_kv()) {
                m.prefill_queue.pop_front();
                m.active_prefill = head;
                m.prefill_progress = 0;
                m.committed_tokens += commit;
            } else if (commit > m.kv_capacity) {
                throw CapacityDeadlock("request " + std::to_string(states_[head].req->id) +
                                       " can never fit an empty machine (" +
                                       std::to_string(commit) + " tokens)");
            }
        }

        std::vector<ReqWork> work;
        work.reserve(m.residents.size() + 1);
        for (long long r : m.residents) work.push_back(ReqWork{1, states_[r].kv_len});
        m.iter_chunk = 0;
        int logit_rows = static_cast<int>(m.residents.size());
        if (m.active_prefill >= 0) {
            const ReqState& rs = states_[m.active_prefill];
            long long room = sched_.max_batch_tokens - static_cast<long long>(m.residents.size());
            int chunk = static_cast<int>(std::min<long long>(
                {sched_.chunk_tokens, rs.req->input_tokens - m.prefill_progress,
                 std::max<long long>(room, 1)}));
            m.iter_chunk = chunk;
            work.push_back(ReqWork{chunk, m.prefill_progress + chunk});
            if (m.prefill_progress + chunk == rs.req->input_tokens) logit_rows += 1;
        }
        if (work.empty()) {
            m.busy = false;
            return;
        }
        long long resident_tokens = 0;
        for (long long r : m.residents) resident_tokens += states_[r].kv_len;
        if (m.active_prefill >= 0) resident_tokens += m.prefill_progress + m.iter_chunk;
        m.max_kv_tokens = std::max(m.max_kv_tokens, resident_tokens);
        m.iter_start_t = now_;
        m.service_s = iteration_latency(deploy(m).model, m.cfg->machine, deploy(m).par, work,
                                        std::max(logit_rows, 1), params_)
                          .total();
        m.busy = true;
        m.busy_s += m.service_s;
        events_.push(Event{now_ + m.service_s, EvType::IterDone, mi, 0});
    }

    void on_mixed_iter_done(const Event& ev) {
        MachineState& m = machines_[ev.machine];
        std::vector<long long> still_resident;
        still_resident.reserve(m.residents.size());
        for (long long r : m.residents) {
            ReqState& rs = states_[r];
            rs.tbt.push_back(rs.tbt.empty()
                                 ? (m.iter_start_t - rs.decode_ready_t) + m.service_s
                                 : m.service_s);
            rs.kv_len += 1;
            rs.decode_remaining -= 1;
            if (rs.decode_remaining == 0) {
                rs.e2e = now_ - rs.req->arrival_s;
                rs.finished = true;
                m.committed_tokens -= rs.commit_tokens();
            } else {
                still_resident.push_back(r);
            }
        }
        m.residents = std::move(still_resident);

        if (m.active_prefill >= 0 && m.iter_chunk > 0) {
            long long r = m.active_prefill;
            ReqState& rs = states_[r];
            m.prefill_progress += m.iter_chunk;
            if (m.prefill_progress == rs.req->input_tokens) {
                m.outstanding_prompt_tokens -= rs.req->input_tokens;
                rs.ttft = now_ - rs.req->arrival_s;
                rs.prefill_service = rs.ttft; // no separate transfer step
                m.active_prefill = -1;
                if (rs.req->output_tokens == 1) {
                    rs.e2e = rs.ttft;
                    rs.finished = true;
                    m.committed_tokens -= rs.commit_tokens();
                } else {
                    rs.kv_len = rs.req->input_tokens;
                    rs.decode_ready_t = now_;
                    m.pending_join.push_back(r);
                }
            }
        }
        m.busy = false;
        start_mixed_iter(ev.machine);
    }

    // -- results --

    SimMetrics collect() const {
        SimMetrics out;
        out.per_request.reserve(states_.size());
        double last_arrival = 0.0;
        long long finished = 0;
        std::vector<double> ttfts, tbts;
        for (const auto& rs : states_) {
            RequestMetrics rm;
            rm.id = rs.req->id;
            rm.arrival_s = rs.req->arrival_s;
            rm.ttft_s = rs.ttft;
            rm.e2e_s = rs.e2e;
            rm.tbt_samples_s = rs.tbt;
            rm.finished = rs.finished;
            out.per_request.push_back(std::move(rm));
            last_arrival = std::max(last_arrival, rs.req->arrival_s);
            if (rs.finished) ++finished;
            if (!std::isnan(rs.ttft)) ttfts.push_back(rs.ttft);
            for (double s : rs.tbt) tbts.push_back(s);
        }
        out.horizon_s = std::max(now_, last_arrival);
        out.throughput_rps = out.horizon_s > 0 ? finished / out.horizon_s : 0.0;
        std::sort(ttfts.begin(), ttfts.end());
        std::sort(tbts.begin(), tbts.end());
        out.p50_ttft_s = percentile_sorted(ttfts, 50);
        out.p90_ttft_s = percentile_sorted(ttfts, 90);
        out.p99_ttft_s = percentile_sorted(ttfts, 99);
        out.p50_tbt_s = percentile_sorted(tbts, 50);
        out.p90_tbt_s = percentile_sorted(tbts, 90);
        out.p99_tbt_s = percentile_sorted(tbts, 99);
        out.kv_bytes_transferred = kv_bytes_transferred_;
        for (const auto& m : machines_) {
            MachineUsage u;
            u.pool = m.pool;
            u.index_in_pool = m.index_in_pool;
            u.busy_frac = out.horizon_s > 0 ? m.busy_s / out.horizon_s : 0.0;
            u.kv_capacity_tokens = m.kv_capacity;
            u.max_resident_kv_tokens = m.max_kv_tokens;
            out.machines.push_back(u);
        }
        return out;
    }

    ClusterConfig cluster_;
    SchedulerSpec sched_;
    const Trace& trace_;
    PerfParams params_;

    std::vector<MachineState> machines_;
    std::vector<ReqState> states_;
    std::priority_queue<Event, std::vector<Event>, EventLater> events_;
    std::deque<long long> decode_wait_;
    double now_ = 0.0;
    double cutoff_ = 0.0;
    double kv_bytes_transferred_ = 0.0;

    static constexpr double kMinDrainS = 60.0;
    static constexpr double kDrainSpanFrac = 0.5;
};

} // namespace

SimMetrics simulate(const ClusterConfig& cluster, const SchedulerSpec& scheduler,
                    const Trace& trace, const PerfParams& params, std::uint64_t /*seed*/) {
    Simulation sim(cluster, scheduler, trace, params);
    return sim.run();
}

SloEval evaluate_slo(const SimMetrics& metrics,
                     const std::vector<std::pair<double, double>>& baselines, const SloSpec& slo) {
    slo.validate();
    if (metrics.per_request.empty()) throw EmptyMetrics("evaluate_slo: no requests");
    if (baselines.size() != metrics.per_request.size())
        throw InvalidSpec("evaluate_slo: baselines/metrics size mismatch");

    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> norm_ttft, norm_tbt;
    norm_ttft.reserve(metrics.per_request.size());
    for (std::size_t i = 0; i < metrics.per_request.size(); ++i) {
        const RequestMetrics& rm = metrics.per_request[i];
        double ttft0 = baselines[i].first;
        double tbt0 = baselines[i].second;
        norm_ttft.push_back(rm.finished ? rm.ttft_s / ttft0 : inf);
        if (!rm.finished) {
            norm_tbt.push_back(inf);
            continue;
        }
        for (double s : rm.tbt_samples_s) norm_tbt.push_back(s / tbt0);
    }
    std::sort(norm_ttft.begin(), norm_ttft.end());
    std::sort(norm_tbt.begin(), norm_tbt.end());

    SloEval eval;
    eval.margin_p90_ttft = percentile_sorted(norm_ttft, 90).value() / slo.p90_ttft;
    eval.margin_p99_ttft = percentile_sorted(norm_ttft, 99).value() / slo.p99_ttft;
    // a trace with no second tokens has no TBT distribution to violate
    eval.margin_p90_tbt = norm_tbt.empty() ? 0.0 : *percentile_sorted(norm_tbt, 90) / slo.p90_tbt;
    eval.margin_p99_tbt = norm_tbt.empty() ? 0.0 : *percentile_sorted(norm_tbt, 99) / slo.p99_tbt;
    eval.pass = eval.margin_p90_ttft <= 1.0 && eval.margin_p99_ttft <= 1.0 &&
                eval.margin_p90_tbt <= 1.0 && eval.margin_p99_tbt <= 1.0;
    return eval;
}

namespace {

nlohmann::json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open config: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("bad JSON in " + path + ": " + e.what());
    }
    return j;
}

std::string resolve(const std::string& base_dir, const std::string& path) {
    std::filesystem::path p(path);
    if (p.is_absolute()) return path;
    return (std::filesystem::path(base_dir) / p).string();
}

} // namespace

ClusterConfig load_cluster_config(const std::string& path) {
    nlohmann::json j = load_json(path);
    std::string dir = std::filesystem::path(path).parent_path().string();

    ClusterConfig cfg;
    if (!j.contains("pools") || !j.at("pools").is_array())
        throw InvalidSpec("cluster config needs a pools array: " + path);
    for (const auto& pj : j.at("pools")) {
        PoolConfig pool;
        pool.role = pool_role_from_string(pj.at("role").get<std::string>());
        pool.count = pj.at("count").get<int>();
        const auto& mj = pj.at("machine");
        pool.machine.chip = load_chip_spec(resolve(dir, mj.at("chip").get<std::string>()));
        pool.machine.chips_per_machine = mj.value("chips_per_machine", 8);
        if (mj.contains("interconnect"))
            pool.machine.interconnect = interconnect_from_json(mj.at("interconnect"));
        const auto& dj = pj.at("deployment");
        pool.deployment.model = load_model_spec(resolve(dir, dj.at("model").get<std::string>()));
        pool.deployment.par.tp = dj.value("tp", 1);
        pool.deployment.par.pp = dj.value("pp", 1);
        pool.deployment.par.ep = dj.value("ep", 1);
        pool.deployment.reserve_frac = dj.value("reserve_frac", 0.9);
        cfg.pools.push_back(std::move(pool));
    }

    cfg.baseline.machine.chip = reference_h100();
    cfg.baseline.machine.chips_per_machine = 8;
    cfg.baseline.par = cfg.pools.front().deployment.par;
    if (j.contains("baseline")) {
        const auto& bj = j.at("baseline");
        if (bj.contains("chip"))
            cfg.baseline.machine.chip = load_chip_spec(resolve(dir, bj.at("chip").get<std::string>()));
        cfg.baseline.machine.chips_per_machine = bj.value("chips_per_machine", 8);
        if (bj.contains("interconnect"))
            cfg.baseline.machine.interconnect = interconnect_from_json(bj.at("interconnect"));
        cfg.baseline.par.tp = bj.value("tp", cfg.baseline.par.tp);
        cfg.baseline.par.pp = bj.value("pp", cfg.baseline.par.pp);
        cfg.baseline.par.ep = bj.value("ep", cfg.baseline.par.ep);
    }
    cfg.validate();
    return cfg;
}

SchedulerSpec scheduler_from_json(const nlohmann::json& j) {
    SchedulerSpec s;
    std::string kind = j.at("kind").get<std::string>();
    if (kind == "disaggregated") s.kind = SchedulerKind::Disaggregated;
    else if (kind == "colocated") s.kind = SchedulerKind::Colocated;
    else throw InvalidSpec("unknown scheduler kind: " + kind);
    s.overlap_kv_transfer = j.value("overlap_kv_transfer", true);
    s.max_batch_tokens = j.value("max_batch_tokens", 16384LL);
    s.chunk_tokens = j.value("chunk_tokens", 512);
    s.validate();
    return s;
}

SchedulerSpec load_scheduler_spec(const std::string& path) {
    return scheduler_from_json(load_json(path));
}

} // namespace spadsim
