#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace spadsim {

struct Request {
    long long id = 0;
    double arrival_s = 0.0;
    int input_tokens = 0;
    int output_tokens = 0;

    bool operator==(const Request&) const = default;
};

// Ordered request stream; arrivals are non-decreasing after normalization.
struct Trace {
    std::vector<Request> requests;

    bool operator==(const Trace&) const = default;
    // Mean offered rate (n-1 inter-arrival gaps over the span). Requires a
    // positive span.
    double offered_rate_rps() const;
};

enum class SloTier { Loose, Normal, Tight };

const char* to_string(SloTier t);
SloTier slo_tier_from_string(const std::string& s);

// Slowdown multipliers against the unbatched reference-chip baseline.
struct SloSpec {
    SloTier tier = SloTier::Normal;
    double p90_tbt = 0.0;
    double p90_ttft = 0.0;
    double p99_tbt = 0.0;
    double p99_ttft = 0.0;

    void validate() const;
};

SloSpec slo_thresholds(SloTier tier);

// Accepts the native format (header arrival_s,input_tokens,output_tokens) and
// the public Azure column names (TIMESTAMP,ContextTokens,GeneratedTokens with
// ISO-8601 or epoch timestamps, normalized to seconds from trace start).
// Out-of-order arrivals are stably sorted; ids follow the sorted order.
Trace parse_trace(std::istream& in, const std::string& source_name = "<stream>");
Trace load_trace(const std::string& path);

void write_trace(const Trace& trace, std::ostream& out);
void save_trace(const Trace& trace, const std::string& path);

enum class TraceProfile { Coding, Conversation };

const char* to_string(TraceProfile p);
TraceProfile trace_profile_from_string(const std::string& s);

// Poisson arrivals, lognormal token lengths (sigma = 1.0) around the
// profile's published medians, clamped to [1, 16384]. Bit-deterministic for
// a given seed on any platform (samplers are hand-rolled).
Trace synth_trace(double rate_rps, long long n_requests, TraceProfile profile,
                  std::uint64_t seed);

// Compresses arrival timestamps by base_rate/target_rate, preserving
// burstiness.
Trace scale_to_rate(const Trace& trace, double target_rate_rps);

} // namespace spadsim
