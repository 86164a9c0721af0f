#pragma once

#include <vector>

#include "mvr/common.hpp"

namespace mvr {

// The contiguous middle half of the encoder: layers in
// [floor(depth/4), ceil(3*depth/4)). Depth 16 gives the paper's 8 taps;
// the desk default depth 6 gives [1, 2, 3, 4].
std::vector<int> default_taps(int depth);

struct EncoderConfig {
    int image_size = 224;
    int patch_size = 14;
    int embed_dim = 128;
    int depth = 6;
    int heads = 4;
    std::vector<int> tap_layers = default_taps(6);  // layer indices whose outputs are collected

    int grid_size() const { return image_size / patch_size; }
    int tokens() const { return grid_size() * grid_size(); }
    int taps() const { return static_cast<int>(tap_layers.size()); }
    int mlp_hidden() const { return 4 * embed_dim; }
    void validate() const;
};

}  // namespace mvr
