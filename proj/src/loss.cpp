#include "mvr/loss.hpp"

#include <algorithm>

namespace mvr {

double quantile_linear(std::vector<double> values, double q) {
    if (values.empty()) throw ConfigError("quantile: empty input");
    if (q < 0.0 || q > 1.0) throw ConfigError("quantile: q must be in [0, 1]");
    std::sort(values.begin(), values.end());
    const double h = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(h);
    if (lo + 1 >= values.size()) return values.back();
    const double frac = h - static_cast<double>(lo);
    return values[lo] + frac * (values[lo + 1] - values[lo]);
}

std::vector<char> hard_mining_select(const std::vector<double>& distances, double k_pct) {
    if (distances.empty()) throw ConfigError("hard mining: empty batch");
    const double threshold = quantile_linear(distances, k_pct);
    std::vector<char> mask(distances.size());
    for (std::size_t i = 0; i < distances.size(); ++i) {
        mask[i] = distances[i] < threshold ? 1 : 0;
    }
    return mask;
}

}  // namespace mvr
