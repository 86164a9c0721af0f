#include "mvr/nn/config.hpp"

namespace mvr {

std::vector<int> default_taps(int depth) {
    if (depth < 1) throw ConfigError("encoder: depth must be >= 1");
    const int lo = depth / 4;
    const int hi = (3 * depth + 3) / 4;  // ceil(3*depth/4)
    std::vector<int> taps;
    for (int i = lo; i < hi; ++i) taps.push_back(i);
    return taps;
}

void EncoderConfig::validate() const {
    if (image_size < 1 || patch_size < 1) throw ConfigError("encoder: sizes must be >= 1");
    if (image_size % patch_size != 0) {
        throw ConfigError("encoder: image size must be divisible by the patch size");
    }
    if (embed_dim < 1 || depth < 1 || heads < 1) {
        throw ConfigError("encoder: dims, depth and heads must be >= 1");
    }
    if (embed_dim % heads != 0) {
        throw ConfigError("encoder: embed dim must be divisible by the head count");
    }
    if (tap_layers.empty()) throw ConfigError("encoder: at least one tap layer is required");
    int prev = -1;
    for (const int tap : tap_layers) {
        if (tap <= prev) throw ConfigError("encoder: tap layers must be strictly increasing");
        if (tap < 0 || tap >= depth) {
            throw ConfigError("encoder: tap layer " + std::to_string(tap) +
                              " is outside [0, depth)");
        }
        prev = tap;
    }
}

}  // namespace mvr
