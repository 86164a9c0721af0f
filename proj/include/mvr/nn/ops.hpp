#pragma once

#include <cmath>
#include <vector>

#include "mvr/common.hpp"
#include "mvr/mat.hpp"

// Forward and exact reverse-mode primitives, templated on the scalar so the
// runtime uses float32 while gradient checks run in float64. Every forward
// that training needs to reverse returns its intermediates through a cache
// struct; backwards accumulate (+=) into parameter gradients so per-view
// contributions can be reduced in a fixed order.

namespace mvr {

// ---------------------------------------------------------------- linear ---
// y = x·wᵀ + b with w stored (out, in) — the layout pre-trained ViT
// checkpoints use.

template <class T>
MatX<T> linear_forward(const MatX<T>& x, const MatX<T>& w, const VecX<T>& b) {
    MatX<T> y = x * w.transpose();
    y.rowwise() += b.transpose();
    return y;
}

template <class T>
MatX<T> linear_backward(const MatX<T>& dy, const MatX<T>& x, const MatX<T>& w, MatX<T>& dw,
                        VecX<T>& db) {
    dw += dy.transpose() * x;
    db += dy.colwise().sum().transpose();
    return dy * w;
}

// ------------------------------------------------------------ layer norm ---

inline constexpr double kLayerNormEps = 1e-6;

template <class T>
struct LayerNormCache {
    MatX<T> xhat;        // normalized rows
    VecX<T> inv_std;     // per row
};

template <class T>
MatX<T> layernorm_forward(const MatX<T>& x, const VecX<T>& gamma, const VecX<T>& beta,
                          LayerNormCache<T>* cache) {
    const auto n = static_cast<T>(x.cols());
    MatX<T> xhat(x.rows(), x.cols());
    VecX<T> inv_std(x.rows());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        const T mean = x.row(r).mean();
        const T var = (x.row(r).array() - mean).square().sum() / n;
        const T is = T(1) / std::sqrt(var + static_cast<T>(kLayerNormEps));
        xhat.row(r) = ((x.row(r).array() - mean) * is).matrix();
        inv_std(r) = is;
    }
    MatX<T> y = (xhat.array().rowwise() * gamma.transpose().array()).matrix();
    y.array().rowwise() += beta.transpose().array();
    if (cache) {
        cache->xhat = std::move(xhat);
        cache->inv_std = std::move(inv_std);
    }
    return y;
}

template <class T>
MatX<T> layernorm_backward(const MatX<T>& dy, const VecX<T>& gamma,
                           const LayerNormCache<T>& cache, VecX<T>& dgamma, VecX<T>& dbeta) {
    dgamma += (dy.array() * cache.xhat.array()).colwise().sum().matrix().transpose();
    dbeta += dy.colwise().sum().transpose();
    const MatX<T> dxhat = (dy.array().rowwise() * gamma.transpose().array()).matrix();
    const auto n = static_cast<T>(dy.cols());
    MatX<T> dx(dy.rows(), dy.cols());
    for (Eigen::Index r = 0; r < dy.rows(); ++r) {
        const T mean_dxhat = dxhat.row(r).mean();
        const T mean_dxhat_xhat = (dxhat.row(r).array() * cache.xhat.row(r).array()).sum() / n;
        dx.row(r) = (cache.inv_std(r) *
                     (dxhat.row(r).array() - mean_dxhat -
                      cache.xhat.row(r).array() * mean_dxhat_xhat))
                        .matrix();
    }
    return dx;
}

// ------------------------------------------------------------------ GELU ---
// Exact (erf) form: x·Φ(x).

template <class T>
MatX<T> gelu_forward(const MatX<T>& x) {
    return x.unaryExpr([](T v) {
        return static_cast<T>(T(0.5) * v * (T(1) + std::erf(v * static_cast<T>(M_SQRT1_2))));
    });
}

template <class T>
MatX<T> gelu_backward(const MatX<T>& dy, const MatX<T>& x) {
    constexpr double inv_sqrt_2pi = 0.3989422804014326779399461;
    const MatX<T> grad = x.unaryExpr([](T v) {
        const T phi = T(0.5) * (T(1) + std::erf(v * static_cast<T>(M_SQRT1_2)));
        const T pdf = static_cast<T>(inv_sqrt_2pi) * std::exp(T(-0.5) * v * v);
        return phi + v * pdf;
    });
    return (dy.array() * grad.array()).matrix();
}

// ------------------------------------------------------------- attention ---

template <class T>
struct AttentionParams {
    MatX<T> qkv_w;   // (3C, C)
    VecX<T> qkv_b;   // (3C)
    MatX<T> proj_w;  // (C, C)
    VecX<T> proj_b;  // (C)
};

template <class T>
void check_finite(const MatX<T>& m, const char* where) {
    if (!m.allFinite()) {
        throw NumericError(std::string(where) + ": non-finite values (training divergence)");
    }
}

// Standard scaled-dot-product multi-head attention with a fused qkv
// projection. Cache stores the row-stochastic attention matrices per head.
template <class T>
struct SoftmaxAttnCache {
    MatX<T> x;
    MatX<T> qkv;
    std::vector<MatX<T>> attn;  // per head, N×N
    MatX<T> concat;             // pre-projection head outputs, N×C
};

template <class T>
MatX<T> softmax_attention_forward(const MatX<T>& x, const AttentionParams<T>& p, int heads,
                                  SoftmaxAttnCache<T>* cache) {
    const Eigen::Index n = x.rows();
    const Eigen::Index channels = x.cols();
    if (n < 1) throw ConfigError("attention: token count must be >= 1");
    if (channels % heads != 0) throw ConfigError("attention: channels not divisible by heads");
    const Eigen::Index d = channels / heads;
    const T scale = T(1) / std::sqrt(static_cast<T>(d));

    const MatX<T> qkv = linear_forward(x, p.qkv_w, p.qkv_b);  // N×3C
    MatX<T> concat(n, channels);
    std::vector<MatX<T>> attn(static_cast<std::size_t>(heads));
    for (int h = 0; h < heads; ++h) {
        const auto q = qkv.block(0, h * d, n, d);
        const auto k = qkv.block(0, channels + h * d, n, d);
        const auto v = qkv.block(0, 2 * channels + h * d, n, d);
        MatX<T> logits = q * k.transpose() * scale;
        for (Eigen::Index r = 0; r < n; ++r) {
            const T row_max = logits.row(r).maxCoeff();
            logits.row(r) = (logits.row(r).array() - row_max).exp().matrix();
            logits.row(r) /= logits.row(r).sum();
        }
        concat.block(0, h * d, n, d) = logits * v;
        attn[static_cast<std::size_t>(h)] = std::move(logits);
    }
    MatX<T> out = linear_forward(concat, p.proj_w, p.proj_b);
    check_finite(out, "softmax attention");
    if (cache) {
        cache->x = x;
        cache->qkv = qkv;
        cache->attn = std::move(attn);
        cache->concat = std::move(concat);
    }
    return out;
}

template <class T>
MatX<T> softmax_attention_backward(const MatX<T>& dy, const AttentionParams<T>& p, int heads,
                                   const SoftmaxAttnCache<T>& cache, AttentionParams<T>& grads) {
    const Eigen::Index n = dy.rows();
    const Eigen::Index channels = dy.cols();
    const Eigen::Index d = channels / heads;
    const T scale = T(1) / std::sqrt(static_cast<T>(d));

    const MatX<T> dconcat =
        linear_backward(dy, cache.concat, p.proj_w, grads.proj_w, grads.proj_b);
    MatX<T> dqkv = MatX<T>::Zero(n, 3 * channels);
    for (int h = 0; h < heads; ++h) {
        const auto q = cache.qkv.block(0, h * d, n, d);
        const auto k = cache.qkv.block(0, channels + h * d, n, d);
        const auto v = cache.qkv.block(0, 2 * channels + h * d, n, d);
        const MatX<T>& a = cache.attn[static_cast<std::size_t>(h)];
        const auto dhead = dconcat.block(0, h * d, n, d);

        dqkv.block(0, 2 * channels + h * d, n, d) = a.transpose() * dhead;  // dV
        const MatX<T> da = dhead * v.transpose();
        // Softmax backward per row: dz = a ∘ (da − (da·a) 1ᵀ).
        MatX<T> dz(n, n);
        for (Eigen::Index r = 0; r < n; ++r) {
            const T dot = (da.row(r).array() * a.row(r).array()).sum();
            dz.row(r) = (a.row(r).array() * (da.row(r).array() - dot)).matrix();
        }
        dqkv.block(0, h * d, n, d) = dz * k * scale;                 // dQ
        dqkv.block(0, channels + h * d, n, d) = dz.transpose() * q * scale;  // dK
    }
    return linear_backward(dqkv, cache.x, p.qkv_w, grads.qkv_w, grads.qkv_b);
}

// Kernelized attention with φ(x) = elu(x) + 1:
//   out_i = φ(q_i)ᵀ·(Σ_j φ(k_j)·v_jᵀ) / (φ(q_i)·Σ_j φ(k_j)).
template <class T>
struct LinearAttnCache {
    MatX<T> x;
    MatX<T> qkv;                 // pre-kernel projections
    MatX<T> phi_q, phi_k;        // N×C, kernelized per head blocks
    std::vector<MatX<T>> s_mat;  // per head, d×d: φ(K)ᵀ·V
    std::vector<VecX<T>> s_vec;  // per head, d: φ(K)ᵀ·1
    MatX<T> numer;               // N×C pre-division head outputs
    std::vector<VecX<T>> denom;  // per head, N
    MatX<T> concat;              // post-division, pre-projection
};

template <class T>
T elu_plus_one(T v) {
    return v > T(0) ? v + T(1) : std::exp(v);
}

template <class T>
T elu_plus_one_grad(T v) {
    return v > T(0) ? T(1) : std::exp(v);
}

template <class T>
MatX<T> linear_attention_forward(const MatX<T>& x, const AttentionParams<T>& p, int heads,
                                 LinearAttnCache<T>* cache) {
    const Eigen::Index n = x.rows();
    const Eigen::Index channels = x.cols();
    if (n < 1) throw ConfigError("attention: token count must be >= 1");
    if (channels % heads != 0) throw ConfigError("attention: channels not divisible by heads");
    const Eigen::Index d = channels / heads;

    const MatX<T> qkv = linear_forward(x, p.qkv_w, p.qkv_b);
    MatX<T> phi_q(n, channels), phi_k(n, channels);
    for (Eigen::Index r = 0; r < n; ++r) {
        for (Eigen::Index c = 0; c < channels; ++c) {
            phi_q(r, c) = elu_plus_one(qkv(r, c));
            phi_k(r, c) = elu_plus_one(qkv(r, channels + c));
        }
    }
    MatX<T> numer(n, channels);
    MatX<T> concat(n, channels);
    std::vector<MatX<T>> s_mat(static_cast<std::size_t>(heads));
    std::vector<VecX<T>> s_vec(static_cast<std::size_t>(heads));
    std::vector<VecX<T>> denom(static_cast<std::size_t>(heads));
    for (int h = 0; h < heads; ++h) {
        const auto pq = phi_q.block(0, h * d, n, d);
        const auto pk = phi_k.block(0, h * d, n, d);
        const auto v = qkv.block(0, 2 * channels + h * d, n, d);
        MatX<T> s = pk.transpose() * v;                       // d×d
        VecX<T> sv = pk.colwise().sum().transpose();          // d
        numer.block(0, h * d, n, d) = pq * s;
        VecX<T> den = pq * sv;                                // N, strictly positive (φ > 0)
        concat.block(0, h * d, n, d) =
            (numer.block(0, h * d, n, d).array().colwise() / den.array()).matrix();
        s_mat[static_cast<std::size_t>(h)] = std::move(s);
        s_vec[static_cast<std::size_t>(h)] = std::move(sv);
        denom[static_cast<std::size_t>(h)] = std::move(den);
    }
    MatX<T> out = linear_forward(concat, p.proj_w, p.proj_b);
    check_finite(out, "linear attention");
    if (cache) {
        cache->x = x;
        cache->qkv = qkv;
        cache->phi_q = std::move(phi_q);
        cache->phi_k = std::move(phi_k);
        cache->s_mat = std::move(s_mat);
        cache->s_vec = std::move(s_vec);
        cache->numer = std::move(numer);
        cache->denom = std::move(denom);
        cache->concat = std::move(concat);
    }
    return out;
}

template <class T>
MatX<T> linear_attention_backward(const MatX<T>& dy, const AttentionParams<T>& p, int heads,
                                  const LinearAttnCache<T>& cache, AttentionParams<T>& grads) {
    const Eigen::Index n = dy.rows();
    const Eigen::Index channels = dy.cols();
    const Eigen::Index d = channels / heads;

    const MatX<T> dconcat =
        linear_backward(dy, cache.concat, p.proj_w, grads.proj_w, grads.proj_b);
    MatX<T> dqkv(n, 3 * channels);
    for (int h = 0; h < heads; ++h) {
        const auto pq = cache.phi_q.block(0, h * d, n, d);
        const auto pk = cache.phi_k.block(0, h * d, n, d);
        const auto v = cache.qkv.block(0, 2 * channels + h * d, n, d);
        const auto numer = cache.numer.block(0, h * d, n, d);
        const VecX<T>& den = cache.denom[static_cast<std::size_t>(h)];
        const auto dout = dconcat.block(0, h * d, n, d);

        // out = numer / den (rowwise).
        const MatX<T> dnumer = (dout.array().colwise() / den.array()).matrix();
        const VecX<T> dden = -((dout.array() * numer.array()).rowwise().sum() /
                               (den.array() * den.array()))
                                  .matrix();
        // numer = φq·S, den = φq·s.
        MatX<T> dphi_q = dnumer * cache.s_mat[static_cast<std::size_t>(h)].transpose();
        dphi_q += dden * cache.s_vec[static_cast<std::size_t>(h)].transpose();
        const MatX<T> ds = pq.transpose() * dnumer;
        const VecX<T> dsv = pq.transpose() * dden;
        // S = φkᵀ·V, s = φkᵀ·1.
        MatX<T> dphi_k = v * ds.transpose();
        dphi_k.rowwise() += dsv.transpose();
        dqkv.block(0, 2 * channels + h * d, n, d) = pk * ds;  // dV

        // Through the kernel φ.
        for (Eigen::Index r = 0; r < n; ++r) {
            for (Eigen::Index c = 0; c < d; ++c) {
                dqkv(r, h * d + c) =
                    dphi_q(r, c) * elu_plus_one_grad(cache.qkv(r, h * d + c));
                dqkv(r, channels + h * d + c) =
                    dphi_k(r, c) * elu_plus_one_grad(cache.qkv(r, channels + h * d + c));
            }
        }
    }
    return linear_backward(dqkv, cache.x, p.qkv_w, grads.qkv_w, grads.qkv_b);
}

// ----------------------------------------------------------- patch embed ---
// The weight keeps the (C, 3·p²) layout of a 3-channel ViT so converted
// checkpoints drop in; the three channel blocks see the same single-channel
// depth image.

template <class T>
struct PatchEmbedParams {
    MatX<T> weight;  // (C, 3·p·p)
    VecX<T> bias;    // (C)
    MatX<T> pos;     // (tokens, C) learned positional embedding
};

// Rows = tokens in row-major grid order; columns = patch pixels row-major.
template <class T>
MatX<T> patchify(const MatX<T>& image, int patch) {
    if (image.rows() % patch != 0 || image.cols() % patch != 0) {
        throw ConfigError("patch embed: image size not divisible by patch size");
    }
    const Eigen::Index grid_h = image.rows() / patch;
    const Eigen::Index grid_w = image.cols() / patch;
    MatX<T> out(grid_h * grid_w, patch * patch);
    for (Eigen::Index gr = 0; gr < grid_h; ++gr) {
        for (Eigen::Index gc = 0; gc < grid_w; ++gc) {
            Eigen::Index col = 0;
            for (int pr = 0; pr < patch; ++pr) {
                for (int pc = 0; pc < patch; ++pc) {
                    out(gr * grid_w + gc, col++) = image(gr * patch + pr, gc * patch + pc);
                }
            }
        }
    }
    return out;
}

template <class T>
MatX<T> patch_embed_forward(const MatX<T>& patches, const PatchEmbedParams<T>& p) {
    const Eigen::Index pixels = patches.cols();
    if (p.weight.cols() != 3 * pixels) {
        throw ConfigError("patch embed: weight does not match 3 channels of patch pixels");
    }
    if (p.pos.rows() != patches.rows()) {
        throw ConfigError("patch embed: positional embedding does not match token count");
    }
    // Identical channels: fold the three channel blocks into one matrix.
    const MatX<T> folded = p.weight.leftCols(pixels) + p.weight.middleCols(pixels, pixels) +
                           p.weight.rightCols(pixels);
    MatX<T> tokens = patches * folded.transpose();
    tokens.rowwise() += p.bias.transpose();
    tokens += p.pos;
    return tokens;
}

template <class T>
MatX<T> patch_embed_backward(const MatX<T>& dy, const MatX<T>& patches,
                             const PatchEmbedParams<T>& p, PatchEmbedParams<T>& grads) {
    const Eigen::Index pixels = patches.cols();
    const MatX<T> dw_block = dy.transpose() * patches;
    grads.weight.leftCols(pixels) += dw_block;
    grads.weight.middleCols(pixels, pixels) += dw_block;
    grads.weight.rightCols(pixels) += dw_block;
    grads.bias += dy.colwise().sum().transpose();
    grads.pos += dy;
    const MatX<T> folded = p.weight.leftCols(pixels) + p.weight.middleCols(pixels, pixels) +
                           p.weight.rightCols(pixels);
    return dy * folded;
}

// ------------------------------------------------------ layer aggregation ---
// Eq. (5)-(6): elementwise mean over j maps.

template <class T>
MatX<T> aggregate_layers(const std::vector<MatX<T>>& maps) {
    if (maps.empty()) throw ConfigError("aggregate: at least one map is required");
    MatX<T> out = maps[0];
    for (std::size_t l = 1; l < maps.size(); ++l) {
        if (maps[l].rows() != out.rows() || maps[l].cols() != out.cols()) {
            throw ConfigError("aggregate: maps must share dimensions");
        }
        out += maps[l];
    }
    return out / static_cast<T>(maps.size());
}

}  // namespace mvr
