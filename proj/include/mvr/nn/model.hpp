#pragma once

#include <string>
#include <vector>

#include "mvr/nn/config.hpp"
#include "mvr/nn/ops.hpp"
#include "mvr/nn/weights.hpp"

// Teacher/student towers assembled from the primitives in ops.hpp. The
// teacher is a frozen pre-norm ViT with softmax attention; the student is a
// bottleneck MLP feeding a linear-attention decoder whose per-block outputs
// are paired with the teacher's tap layers in forward order.

namespace mvr {

template <class T>
struct MlpParams {
    MatX<T> fc1_w;
    VecX<T> fc1_b;
    MatX<T> fc2_w;
    VecX<T> fc2_b;
};

template <class T>
struct BlockParams {
    VecX<T> norm1_w, norm1_b;
    AttentionParams<T> attn;
    VecX<T> norm2_w, norm2_b;
    MlpParams<T> mlp;
};

template <class T>
struct EncoderParams {
    PatchEmbedParams<T> patch;
    std::vector<BlockParams<T>> blocks;
};

template <class T>
struct StudentParams {
    MlpParams<T> bottleneck;
    std::vector<BlockParams<T>> blocks;
};

// ------------------------------------------------------- zero factories ---

template <class T>
BlockParams<T> zero_block(int dim, int hidden) {
    BlockParams<T> b;
    b.norm1_w = VecX<T>::Zero(dim);
    b.norm1_b = VecX<T>::Zero(dim);
    b.attn.qkv_w = MatX<T>::Zero(3 * dim, dim);
    b.attn.qkv_b = VecX<T>::Zero(3 * dim);
    b.attn.proj_w = MatX<T>::Zero(dim, dim);
    b.attn.proj_b = VecX<T>::Zero(dim);
    b.norm2_w = VecX<T>::Zero(dim);
    b.norm2_b = VecX<T>::Zero(dim);
    b.mlp.fc1_w = MatX<T>::Zero(hidden, dim);
    b.mlp.fc1_b = VecX<T>::Zero(hidden);
    b.mlp.fc2_w = MatX<T>::Zero(dim, hidden);
    b.mlp.fc2_b = VecX<T>::Zero(dim);
    return b;
}

template <class T>
StudentParams<T> zero_student(const EncoderConfig& cfg) {
    StudentParams<T> s;
    s.bottleneck.fc1_w = MatX<T>::Zero(cfg.embed_dim, cfg.embed_dim);
    s.bottleneck.fc1_b = VecX<T>::Zero(cfg.embed_dim);
    s.bottleneck.fc2_w = MatX<T>::Zero(cfg.embed_dim, cfg.embed_dim);
    s.bottleneck.fc2_b = VecX<T>::Zero(cfg.embed_dim);
    for (int l = 0; l < cfg.taps(); ++l) {
        s.blocks.push_back(zero_block<T>(cfg.embed_dim, cfg.mlp_hidden()));
    }
    return s;
}

// ------------------------------------------------------- teacher forward ---

template <class T>
MatX<T> block_forward_softmax(const MatX<T>& x, const BlockParams<T>& b, int heads) {
    const MatX<T> t1 = layernorm_forward<T>(x, b.norm1_w, b.norm1_b, nullptr);
    const MatX<T> x1 = x + softmax_attention_forward<T>(t1, b.attn, heads, nullptr);
    const MatX<T> t2 = layernorm_forward<T>(x1, b.norm2_w, b.norm2_b, nullptr);
    const MatX<T> h = gelu_forward<T>(linear_forward<T>(t2, b.mlp.fc1_w, b.mlp.fc1_b));
    return x1 + linear_forward<T>(h, b.mlp.fc2_w, b.mlp.fc2_b);
}

// Returns the post-block token grids at each tap layer, in tap order.
template <class T>
std::vector<MatX<T>> encoder_forward(const MatX<T>& image, const EncoderParams<T>& w,
                                     const EncoderConfig& cfg) {
    if (image.rows() != cfg.image_size || image.cols() != cfg.image_size) {
        throw ConfigError("encoder: image dims do not match config");
    }
    if (static_cast<int>(w.blocks.size()) != cfg.depth) {
        throw ConfigError("encoder: block count does not match config depth");
    }
    const MatX<T> patches = patchify(image, cfg.patch_size);
    MatX<T> x = patch_embed_forward(patches, w.patch);
    std::vector<MatX<T>> taps;
    taps.reserve(static_cast<std::size_t>(cfg.taps()));
    std::size_t next_tap = 0;
    const auto& tap_layers = cfg.tap_layers;
    for (int i = 0; i < cfg.depth; ++i) {
        x = block_forward_softmax(x, w.blocks[static_cast<std::size_t>(i)], cfg.heads);
        if (next_tap < tap_layers.size() && tap_layers[next_tap] == i) {
            taps.push_back(x);
            ++next_tap;
        }
    }
    return taps;
}

// Mean of the tapped maps: the bottleneck's input and, downstream, the
// teacher-side aggregate the student is scored against.
template <class T>
MatX<T> teacher_features(const MatX<T>& image, const EncoderParams<T>& w,
                         const EncoderConfig& cfg) {
    return aggregate_layers(encoder_forward(image, w, cfg));
}

// Token-wise mean over the tap maps, then the MLP applied per token.
template <class T>
MatX<T> bottleneck_forward(const std::vector<MatX<T>>& taps, const MlpParams<T>& mlp) {
    const MatX<T> fused = aggregate_layers(taps);
    const MatX<T> g = gelu_forward<T>(linear_forward<T>(fused, mlp.fc1_w, mlp.fc1_b));
    return linear_forward<T>(g, mlp.fc2_w, mlp.fc2_b);
}

// ------------------------------------------------------- student forward ---

template <class T>
struct StudentBlockTape {
    LayerNormCache<T> ln1;
    LinearAttnCache<T> attn;
    LayerNormCache<T> ln2;
    MatX<T> ln2_out;
    MatX<T> fc1_out;   // pre-activation
    MatX<T> gelu_out;
};

template <class T>
struct StudentTape {
    MatX<T> input;     // fused teacher taps
    MatX<T> fc1_out;   // bottleneck pre-activation
    MatX<T> gelu_out;
    std::vector<StudentBlockTape<T>> blocks;
    mutable bool consumed = false;  // a tape backs exactly one backward pass
};

template <class T>
MatX<T> block_forward_linear(const MatX<T>& x, const BlockParams<T>& b, int heads,
                             StudentBlockTape<T>* tape) {
    MatX<T> t1 = layernorm_forward<T>(x, b.norm1_w, b.norm1_b, tape ? &tape->ln1 : nullptr);
    const MatX<T> x1 =
        x + linear_attention_forward<T>(t1, b.attn, heads, tape ? &tape->attn : nullptr);
    MatX<T> t2 = layernorm_forward<T>(x1, b.norm2_w, b.norm2_b, tape ? &tape->ln2 : nullptr);
    MatX<T> f1 = linear_forward<T>(t2, b.mlp.fc1_w, b.mlp.fc1_b);
    MatX<T> g = gelu_forward<T>(f1);
    MatX<T> y = x1 + linear_forward<T>(g, b.mlp.fc2_w, b.mlp.fc2_b);
    if (tape) {
        tape->ln2_out = std::move(t2);
        tape->fc1_out = std::move(f1);
        tape->gelu_out = std::move(g);
    }
    return y;
}

template <class T>
MatX<T> block_backward_linear(const MatX<T>& dy, const BlockParams<T>& b, int heads,
                              const StudentBlockTape<T>& tape, BlockParams<T>& grads) {
    // y = x1 + fc2(gelu(fc1(ln2(x1)))), x1 = x + attn(ln1(x)).
    const MatX<T> dg =
        linear_backward<T>(dy, tape.gelu_out, b.mlp.fc2_w, grads.mlp.fc2_w, grads.mlp.fc2_b);
    const MatX<T> df1 = gelu_backward<T>(dg, tape.fc1_out);
    const MatX<T> dt2 =
        linear_backward<T>(df1, tape.ln2_out, b.mlp.fc1_w, grads.mlp.fc1_w, grads.mlp.fc1_b);
    const MatX<T> dx1 =
        dy + layernorm_backward<T>(dt2, b.norm2_w, tape.ln2, grads.norm2_w, grads.norm2_b);
    const MatX<T> dt1 = linear_attention_backward<T>(dx1, b.attn, heads, tape.attn, grads.attn);
    return dx1 + layernorm_backward<T>(dt1, b.norm1_w, tape.ln1, grads.norm1_w, grads.norm1_b);
}

// Bottleneck (mean of taps → MLP) then the decoder blocks; returns one map
// per block, in forward order. `fused` must already be the token-wise mean
// over the teacher's tap maps.
template <class T>
std::vector<MatX<T>> student_forward(const MatX<T>& fused, const StudentParams<T>& w, int heads,
                                     StudentTape<T>* tape) {
    MatX<T> f1 = linear_forward<T>(fused, w.bottleneck.fc1_w, w.bottleneck.fc1_b);
    MatX<T> g = gelu_forward<T>(f1);
    MatX<T> x = linear_forward<T>(g, w.bottleneck.fc2_w, w.bottleneck.fc2_b);
    if (tape) {
        tape->input = fused;
        tape->fc1_out = std::move(f1);
        tape->gelu_out = std::move(g);
        tape->blocks.resize(w.blocks.size());
    }
    std::vector<MatX<T>> maps;
    maps.reserve(w.blocks.size());
    for (std::size_t l = 0; l < w.blocks.size(); ++l) {
        x = block_forward_linear<T>(x, w.blocks[l], heads, tape ? &tape->blocks[l] : nullptr);
        maps.push_back(x);
    }
    return maps;
}

// dmaps holds one gradient per student map; returns the gradient with
// respect to the fused input (needed only for gradient checks — the teacher
// is frozen). Parameter gradients accumulate into `grads`.
template <class T>
MatX<T> student_backward(const std::vector<MatX<T>>& dmaps, const StudentParams<T>& w, int heads,
                         const StudentTape<T>& tape, StudentParams<T>& grads) {
    if (dmaps.size() != w.blocks.size()) {
        throw ConfigError("student backward: one output gradient per decoder block required");
    }
    if (tape.consumed) throw LogicError("student backward: tape already consumed");
    tape.consumed = true;
    MatX<T> dx = MatX<T>::Zero(tape.input.rows(), tape.input.cols());
    for (std::size_t l = w.blocks.size(); l-- > 0;) {
        dx += dmaps[l];
        dx = block_backward_linear<T>(dx, w.blocks[l], heads, tape.blocks[l], grads.blocks[l]);
    }
    const MatX<T> dg = linear_backward<T>(dx, tape.gelu_out, w.bottleneck.fc2_w,
                                          grads.bottleneck.fc2_w, grads.bottleneck.fc2_b);
    const MatX<T> df1 = gelu_backward<T>(dg, tape.fc1_out);
    return linear_backward<T>(df1, tape.input, w.bottleneck.fc1_w, grads.bottleneck.fc1_w,
                              grads.bottleneck.fc1_b);
}

// ------------------------------------------------- archive conversions ----

EncoderParams<float> encoder_params_from_archive(const WeightArchive& archive,
                                                 const std::string& prefix,
                                                 const EncoderConfig& cfg);
StudentParams<float> student_params_from_archive(const WeightArchive& archive,
                                                 const EncoderConfig& cfg);
// Overwrites the student.* tensors of `archive` with the current parameter
// values (shapes per the checkpoint schema).
void write_student_params(WeightArchive& archive, const StudentParams<float>& params,
                          const EncoderConfig& cfg);

}  // namespace mvr
