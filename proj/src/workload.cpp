#include "spadsim/workload.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <random>
#include <sstream>

#include "spadsim/errors.hpp"

namespace spadsim {

double Trace::offered_rate_rps() const {
    if (requests.empty()) throw InvalidSpec("offered_rate_rps needs a non-empty trace");
    double last = requests.back().arrival_s;
    if (!(last > 0)) throw InvalidSpec("offered_rate_rps needs a positive arrival span");
    return static_cast<double>(requests.size()) / last;
}

const char* to_string(SloTier t) {
    switch (t) {
    case SloTier::Loose: return "loose";
    case SloTier::Normal: return "normal";
    case SloTier::Tight: return "tight";
    }
    return "normal";
}

SloTier slo_tier_from_string(const std::string& s) {
    if (s == "loose" || s == "Loose") return SloTier::Loose;
    if (s == "normal" || s == "Normal") return SloTier::Normal;
    if (s == "tight" || s == "Tight") return SloTier::Tight;
    throw InvalidSpec("unknown SLO tier: " + s);
}

void SloSpec::validate() const {
    if (!(p90_tbt > 1.0) || !(p90_ttft > 1.0) || !(p99_tbt > 1.0) || !(p99_ttft > 1.0))
        throw InvalidSpec("SLO multipliers must be > 1");
    if (p99_tbt < p90_tbt || p99_ttft < p90_ttft)
        throw InvalidSpec("P99 multipliers must be >= P90 multipliers");
}

SloSpec slo_thresholds(SloTier tier) {
    SloSpec s;
    s.tier = tier;
    switch (tier) {
    case SloTier::Loose: s.p90_tbt = 2.5; s.p90_ttft = 4.0; s.p99_tbt = 6.0; s.p99_ttft = 8.0; break;
    case SloTier::Normal: s.p90_tbt = 2.0; s.p90_ttft = 3.0; s.p99_tbt = 5.0; s.p99_ttft = 6.0; break;
    case SloTier::Tight: s.p90_tbt = 1.5; s.p90_ttft = 2.0; s.p99_tbt = 3.0; s.p99_ttft = 4.0; break;
    }
    return s;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    for (auto& f : out) {
        std::size_t a = f.find_first_not_of(" \t");
        std::size_t b = f.find_last_not_of(" \t");
        f = a == std::string::npos ? "" : f.substr(a, b - a + 1);
    }
    return out;
}

// ISO-8601-ish "YYYY-MM-DD[T ]HH:MM:SS[.frac][Z]" to epoch seconds (UTC), or
// a plain float.
double parse_timestamp(const std::string& s, long line_no) {
    if (s.find('-') == std::string::npos || s.find(':') == std::string::npos) {
        try {
            std::size_t pos = 0;
            double v = std::stod(s, &pos);
            if (pos != s.size()) throw std::invalid_argument(s);
            return v;
        } catch (const std::exception&) {
            throw ParseError("bad timestamp '" + s + "'", line_no);
        }
    }
    std::tm tm{};
    int year, mon, day, hh, mm;
    double sec;
    char sep;
    if (std::sscanf(s.c_str(), "%d-%d-%d%c%d:%d:%lf", &year, &mon, &day, &sep, &hh, &mm, &sec) != 7)
        throw ParseError("bad timestamp '" + s + "'", line_no);
    tm.tm_year = year - 1900;
    tm.tm_mon = mon - 1;
    tm.tm_mday = day;
    tm.tm_hour = hh;
    tm.tm_min = mm;
    tm.tm_sec = 0;
    std::time_t base = timegm(&tm);
    return static_cast<double>(base) + sec;
}

int parse_tokens(const std::string& s, const char* what, long line_no) {
    long v;
    try {
        std::size_t pos = 0;
        v = std::stol(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
    } catch (const std::exception&) {
        throw ParseError(std::string("bad ") + what + " '" + s + "'", line_no);
    }
    if (v < 1) throw InvalidRow(std::string(what) + " must be >= 1, got " + s, line_no);
    if (v > 1'000'000) throw InvalidRow(std::string(what) + " implausibly large: " + s, line_no);
    return static_cast<int>(v);
}

} // namespace

Trace parse_trace(std::istream& in, const std::string& source_name) {
    std::string line;
    long line_no = 0;
    if (!std::getline(in, line)) throw ParseError("empty trace file: " + source_name, 1);
    ++line_no;
    auto header = split_csv_line(line);
    int col_arrival = -1, col_in = -1, col_out = -1;
    bool azure = false;
    for (int i = 0; i < static_cast<int>(header.size()); ++i) {
        const std::string& h = header[i];
        if (h == "arrival_s") col_arrival = i;
        else if (h == "input_tokens") col_in = i;
        else if (h == "output_tokens") col_out = i;
        else if (h == "TIMESTAMP") { col_arrival = i; azure = true; }
        else if (h == "ContextTokens") col_in = i;
        else if (h == "GeneratedTokens") col_out = i;
    }
    if (col_arrival < 0 || col_in < 0 || col_out < 0)
        throw ParseError("trace header must name arrival_s,input_tokens,output_tokens "
                         "or TIMESTAMP,ContextTokens,GeneratedTokens: " + source_name, 1);

    Trace trace;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r" || line[0] == '#') continue;
        auto fields = split_csv_line(line);
        std::size_t need = static_cast<std::size_t>(std::max({col_arrival, col_in, col_out})) + 1;
        if (fields.size() < need) throw ParseError("too few columns", line_no);
        Request r;
        r.arrival_s = parse_timestamp(fields[col_arrival], line_no);
        r.input_tokens = parse_tokens(fields[col_in], "input_tokens", line_no);
        r.output_tokens = parse_tokens(fields[col_out], "output_tokens", line_no);
        trace.requests.push_back(r);
    }
    std::stable_sort(trace.requests.begin(), trace.requests.end(),
                     [](const Request& a, const Request& b) { return a.arrival_s < b.arrival_s; });
    double t0 = azure && !trace.requests.empty() ? trace.requests.front().arrival_s : 0.0;
    for (std::size_t i = 0; i < trace.requests.size(); ++i) {
        trace.requests[i].id = static_cast<long long>(i);
        trace.requests[i].arrival_s -= t0;
    }
    return trace;
}

Trace load_trace(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open trace: " + path);
    return parse_trace(in, path);
}

void write_trace(const Trace& trace, std::ostream& out) {
    out << "arrival_s,input_tokens,output_tokens\n";
    char buf[64];
    for (const auto& r : trace.requests) {
        std::snprintf(buf, sizeof(buf), "%.17g", r.arrival_s);
        out << buf << "," << r.input_tokens << "," << r.output_tokens << "\n";
    }
}

void save_trace(const Trace& trace, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot write trace: " + path);
    write_trace(trace, out);
}

const char* to_string(TraceProfile p) {
    return p == TraceProfile::Coding ? "coding" : "conversation";
}

TraceProfile trace_profile_from_string(const std::string& s) {
    if (s == "coding") return TraceProfile::Coding;
    if (s == "conversation") return TraceProfile::Conversation;
    throw InvalidSpec("unknown trace profile: " + s);
}

namespace {

// Uniform in (0, 1), never exactly 0, stable across platforms.
double next_uniform(std::mt19937_64& rng) {
    return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

double next_exponential(std::mt19937_64& rng, double rate) {
    return -std::log(next_uniform(rng)) / rate;
}

// Box-Muller on explicit uniforms; one draw pair per call keeps the stream
// layout fixed.
double next_normal(std::mt19937_64& rng) {
    double u1 = next_uniform(rng);
    double u2 = next_uniform(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

int next_token_count(std::mt19937_64& rng, double median, double sigma) {
    double v = median * std::exp(sigma * next_normal(rng));
    double clamped = std::clamp(std::round(v), 1.0, 16384.0);
    return static_cast<int>(clamped);
}

} // namespace

Trace synth_trace(double rate_rps, long long n_requests, TraceProfile profile,
                  std::uint64_t seed) {
    if (!(rate_rps > 0)) throw InvalidSpec("synth_trace: rate must be > 0");
    if (n_requests < 0) throw InvalidSpec("synth_trace: n_requests must be >= 0");
    double median_in = profile == TraceProfile::Coding ? 1500.0 : 1020.0;
    double median_out = profile == TraceProfile::Coding ? 13.0 : 129.0;
    const double sigma = 1.0;

    std::mt19937_64 rng(seed);
    Trace trace;
    trace.requests.reserve(static_cast<std::size_t>(n_requests));
    double t = 0.0;
    for (long long i = 0; i < n_requests; ++i) {
        t += next_exponential(rng, rate_rps);
        Request r;
        r.id = i;
        r.arrival_s = t;
        r.input_tokens = next_token_count(rng, median_in, sigma);
        r.output_tokens = next_token_count(rng, median_out, sigma);
        trace.requests.push_back(r);
    }
    return trace;
}

Trace scale_to_rate(const Trace& trace, double target_rate_rps) {
    if (!(target_rate_rps > 0)) throw InvalidSpec("scale_to_rate: target rate must be > 0");
    double factor = trace.offered_rate_rps() / target_rate_rps;
    Trace out = trace;
    for (auto& r : out.requests) r.arrival_s *= factor;
    return out;
}

} // namespace spadsim
