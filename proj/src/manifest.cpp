#include "spadsim/manifest.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "spadsim/errors.hpp"

namespace spadsim {

std::uint64_t fnv1a64(const void* data, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

std::string fnv1a64_hex(const std::string& bytes) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(bytes.data(), bytes.size())));
    return std::string(buf);
}

std::string digest_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open file for digest: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return fnv1a64_hex(ss.str());
}

void RunManifest::add_input(const std::string& label, const std::string& path) {
    inputs.emplace_back(label, path, digest_file(path));
}

void RunManifest::add_param(const std::string& key, const std::string& value) {
    params.emplace_back(key, value);
}

nlohmann::ordered_json RunManifest::to_json() const {
    nlohmann::ordered_json j;
    j["tool"] = tool;
    j["version"] = version;
    j["subcommand"] = subcommand;
    j["seed"] = seed;
    nlohmann::ordered_json ins = nlohmann::ordered_json::array();
    for (const auto& [label, path, digest] : inputs) {
        ins.push_back({{"label", label}, {"path", path}, {"fnv1a64", digest}});
    }
    j["inputs"] = ins;
    nlohmann::ordered_json ps = nlohmann::ordered_json::object();
    for (const auto& [k, v] : params) ps[k] = v;
    j["params"] = ps;
    return j;
}

std::string RunManifest::csv_comment_block() const {
    std::ostringstream out;
    out << "# " << tool << "/" << version << " subcommand=" << subcommand << " seed=" << seed << "\n";
    for (const auto& [label, path, digest] : inputs) {
        out << "# input " << label << "=" << path << " fnv1a64=" << digest << "\n";
    }
    if (!params.empty()) {
        out << "#";
        for (const auto& [k, v] : params) out << " " << k << "=" << v;
        out << "\n";
    }
    return out.str();
}

} // namespace spadsim
