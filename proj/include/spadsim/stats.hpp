#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

namespace spadsim {

// Nearest-rank percentile on a sorted ascending sample: the smallest element
// whose rank covers q percent of the distribution. No interpolation, so the
// result is always an observed sample.
inline std::optional<double> percentile_sorted(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) return std::nullopt;
    std::size_t rank = static_cast<std::size_t>(std::ceil(q / 100.0 * static_cast<double>(sorted.size())));
    if (rank == 0) rank = 1;
    if (rank > sorted.size()) rank = sorted.size();
    return sorted[rank - 1];
}

inline std::optional<double> percentile(std::vector<double> samples, double q) {
    std::sort(samples.begin(), samples.end());
    return percentile_sorted(samples, q);
}

} // namespace spadsim
