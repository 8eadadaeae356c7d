#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace spadsim {

inline constexpr const char* kToolVersion = "0.1.0";

// FNV-1a 64-bit content hash, printed as 16 hex digits.
std::uint64_t fnv1a64(const void* data, std::size_t len);
std::string fnv1a64_hex(const std::string& bytes);
std::string digest_file(const std::string& path); // throws ParseError if unreadable

// Provenance block embedded in every output. Two outputs with equal
// manifests are byte-identical: nothing time- or host-dependent goes in here.
struct RunManifest {
    std::string tool = "spadsim";
    std::string version = kToolVersion;
    std::string subcommand;
    std::uint64_t seed = 0;
    // (label, path, content digest) for each input file
    std::vector<std::tuple<std::string, std::string, std::string>> inputs;
    // flat key=value parameters, insertion order preserved
    std::vector<std::pair<std::string, std::string>> params;

    void add_input(const std::string& label, const std::string& path);
    void add_param(const std::string& key, const std::string& value);

    nlohmann::ordered_json to_json() const;
    // '#'-prefixed header lines for CSV outputs
    std::string csv_comment_block() const;
};

} // namespace spadsim
