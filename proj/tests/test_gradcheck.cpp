#include <functional>
#include <vector>

#include "doctest.h"
#include "mvr/nn/model.hpp"
#include "mvr/nn/ops.hpp"

// Central-difference verification of every manual backward. All checks run
// in float64 with epsilon 1e-3 and require relative error <= 1e-4 (with a
// small absolute floor for gradients that are themselves ~0).

using namespace mvr;

namespace {

constexpr double kEps = 1e-3;
constexpr double kRelTol = 1e-4;
constexpr double kAbsFloor = 1e-7;
constexpr int kInstances = 20;
constexpr int kCoordsPerTensor = 4;

MatXd random_mat(RandomStream& rng, Eigen::Index r, Eigen::Index c, double scale = 1.0) {
    MatXd m(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index j = 0; j < c; ++j) m(i, j) = scale * rng.normal();
    return m;
}

VecX<double> random_vec(RandomStream& rng, Eigen::Index n, double scale = 1.0) {
    VecX<double> v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = scale * rng.normal();
    return v;
}

bool grad_close(double analytic, double numeric) {
    const double err = std::abs(analytic - numeric);
    return err <= kRelTol * std::max(std::abs(analytic), std::abs(numeric)) + kAbsFloor;
}

// Checks d(loss)/d(coord) for a few random coordinates of one tensor.
// `loss` must re-run the forward pass from the (mutated) tensor.
template <class Tensor>
void check_tensor_grad(RandomStream& rng, Tensor& tensor, const Tensor& analytic,
                       const std::function<double()>& loss, double eps = kEps) {
    REQUIRE(tensor.size() == analytic.size());
    for (int k = 0; k < kCoordsPerTensor; ++k) {
        const auto idx =
            static_cast<Eigen::Index>(rng.index(static_cast<uint64_t>(tensor.size())));
        const double saved = tensor(idx);
        tensor(idx) = saved + eps;
        const double up = loss();
        tensor(idx) = saved - eps;
        const double down = loss();
        tensor(idx) = saved;
        const double numeric = (up - down) / (2.0 * eps);
        INFO("coord ", idx, " analytic ", analytic(idx), " numeric ", numeric);
        CHECK(grad_close(analytic(idx), numeric));
    }
}

AttentionParams<double> random_attention(RandomStream& rng, int dim, double scale = 0.4) {
    AttentionParams<double> p;
    p.qkv_w = random_mat(rng, 3 * dim, dim, scale);
    p.qkv_b = random_vec(rng, 3 * dim, scale);
    p.proj_w = random_mat(rng, dim, dim, scale);
    p.proj_b = random_vec(rng, dim, scale);
    return p;
}

AttentionParams<double> zero_attention(int dim) {
    AttentionParams<double> g;
    g.qkv_w = MatXd::Zero(3 * dim, dim);
    g.qkv_b = VecX<double>::Zero(3 * dim);
    g.proj_w = MatXd::Zero(dim, dim);
    g.proj_b = VecX<double>::Zero(dim);
    return g;
}

}  // namespace

TEST_CASE("gradcheck: linear") {
    for (int inst = 0; inst < kInstances; ++inst) {
        RandomStream rng(100 + static_cast<uint64_t>(inst));
        MatXd x = random_mat(rng, 3, 4);
        MatXd w = random_mat(rng, 5, 4);
        VecX<double> b = random_vec(rng, 5);
        const MatXd r = random_mat(rng, 3, 5);  // fixed cotangent

        const auto loss = [&] { return (linear_forward<double>(x, w, b).array() * r.array()).sum(); };
        MatXd dw = MatXd::Zero(5, 4);
        VecX<double> db = VecX<double>::Zero(5);
        const MatXd dx = linear_backward<double>(r, x, w, dw, db);

        check_tensor_grad(rng, x, dx, loss);
        check_tensor_grad(rng, w, dw, loss);
        check_tensor_grad(rng, b, db, loss);
    }
}

TEST_CASE("gradcheck: layer norm") {
    for (int inst = 0; inst < kInstances; ++inst) {
        RandomStream rng(200 + static_cast<uint64_t>(inst));
        MatXd x = random_mat(rng, 4, 6);
        VecX<double> gamma = random_vec(rng, 6, 0.7);
        VecX<double> beta = random_vec(rng, 6, 0.3);
        const MatXd r = random_mat(rng, 4, 6);

        const auto loss = [&] {
            return (layernorm_forward<double>(x, gamma, beta, nullptr).array() * r.array()).sum();
        };
        LayerNormCache<double> cache;
        layernorm_forward<double>(x, gamma, beta, &cache);
        VecX<double> dgamma = VecX<double>::Zero(6);
        VecX<double> dbeta = VecX<double>::Zero(6);
        const MatXd dx = layernorm_backward<double>(r, gamma, cache, dgamma, dbeta);

        check_tensor_grad(rng, x, dx, loss);
        check_tensor_grad(rng, gamma, dgamma, loss);
        check_tensor_grad(rng, beta, dbeta, loss);
    }
}

TEST_CASE("gradcheck: gelu") {
    for (int inst = 0; inst < kInstances; ++inst) {
        RandomStream rng(300 + static_cast<uint64_t>(inst));
        MatXd x = random_mat(rng, 4, 5, 1.5);
        const MatXd r = random_mat(rng, 4, 5);
        const auto loss = [&] { return (gelu_forward<double>(x).array() * r.array()).sum(); };
        const MatXd dx = gelu_backward<double>(r, x);
        check_tensor_grad(rng, x, dx, loss);
    }
}

TEST_CASE("gradcheck: softmax attention") {
    for (int inst = 0; inst < kInstances; ++inst) {
        RandomStream rng(400 + static_cast<uint64_t>(inst));
        const int dim = 8, heads = 2, tokens = 5;
        MatXd x = random_mat(rng, tokens, dim, 0.8);
        AttentionParams<double> p = random_attention(rng, dim);
        const MatXd r = random_mat(rng, tokens, dim);

        const auto loss = [&] {
            return (softmax_attention_forward<double>(x, p, heads, nullptr).array() * r.array())
                .sum();
        };
        SoftmaxAttnCache<double> cache;
        softmax_attention_forward<double>(x, p, heads, &cache);
        AttentionParams<double> g = zero_attention(dim);
        const MatXd dx = softmax_attention_backward<double>(r, p, heads, cache, g);

        check_tensor_grad(rng, x, dx, loss);
        check_tensor_grad(rng, p.qkv_w, g.qkv_w, loss);
        check_tensor_grad(rng, p.qkv_b, g.qkv_b, loss);
        check_tensor_grad(rng, p.proj_w, g.proj_w, loss);
        check_tensor_grad(rng, p.proj_b, g.proj_b, loss);
    }
}

TEST_CASE("gradcheck: linear attention") {
    for (int inst = 0; inst < kInstances; ++inst) {
        RandomStream rng(500 + static_cast<uint64_t>(inst));
        const int dim = 8, heads = 2, tokens = 5;
        MatXd x = random_mat(rng, tokens, dim, 0.8);
        AttentionParams<double> p = random_attention(rng, dim);
        const MatXd r = random_mat(rng, tokens, dim);

        const auto loss = [&] {
            return (linear_attention_forward<double>(x, p, heads, nullptr).array() * r.array())
                .sum();
        };
        LinearAttnCache<double> cache;
        linear_attention_forward<double>(x, p, heads, &cache);
        AttentionParams<double> g = zero_attention(dim);
        const MatXd dx = linear_attention_backward<double>(r, p, heads, cache, g);

        check_tensor_grad(rng, x, dx, loss);
        check_tensor_grad(rng, p.qkv_w, g.qkv_w, loss);
        check_tensor_grad(rng, p.qkv_b, g.qkv_b, loss);
        check_tensor_grad(rng, p.proj_w, g.proj_w, loss);
        check_tensor_grad(rng, p.proj_b, g.proj_b, loss);
    }
}

TEST_CASE("gradcheck: patch embedding") {
    for (int inst = 0; inst < kInstances; ++inst) {
        RandomStream rng(600 + static_cast<uint64_t>(inst));
        const int patch = 2, tokens = 4, dim = 3;
        MatXd patches = random_mat(rng, tokens, patch * patch);
        PatchEmbedParams<double> p;
        p.weight = random_mat(rng, dim, 3 * patch * patch, 0.5);
        p.bias = random_vec(rng, dim);
        p.pos = random_mat(rng, tokens, dim, 0.5);
        const MatXd r = random_mat(rng, tokens, dim);

        const auto loss = [&] {
            return (patch_embed_forward<double>(patches, p).array() * r.array()).sum();
        };
        PatchEmbedParams<double> g;
        g.weight = MatXd::Zero(dim, 3 * patch * patch);
        g.bias = VecX<double>::Zero(dim);
        g.pos = MatXd::Zero(tokens, dim);
        const MatXd dpatches = patch_embed_backward<double>(r, patches, p, g);

        check_tensor_grad(rng, patches, dpatches, loss);
        check_tensor_grad(rng, p.weight, g.weight, loss);
        check_tensor_grad(rng, p.bias, g.bias, loss);
        check_tensor_grad(rng, p.pos, g.pos, loss);
    }
}

TEST_CASE("gradcheck: layer aggregation") {
    for (int inst = 0; inst < kInstances; ++inst) {
        RandomStream rng(700 + static_cast<uint64_t>(inst));
        std::vector<MatXd> maps = {random_mat(rng, 3, 4), random_mat(rng, 3, 4),
                                   random_mat(rng, 3, 4)};
        const MatXd r = random_mat(rng, 3, 4);
        const auto loss = [&] { return (aggregate_layers(maps).array() * r.array()).sum(); };
        // d(mean)/d(map_l) = r / j.
        const MatXd dmap = r / 3.0;
        for (auto& m : maps) check_tensor_grad(rng, m, dmap, loss);
    }
}

TEST_CASE("gradcheck: full student tower (bottleneck MLP and decoder)") {
    EncoderConfig cfg;
    cfg.image_size = 8;
    cfg.patch_size = 4;
    cfg.embed_dim = 6;
    cfg.depth = 2;
    cfg.heads = 2;
    cfg.tap_layers = {0, 1};
    cfg.validate();
    for (int inst = 0; inst < kInstances; ++inst) {
        RandomStream rng(800 + static_cast<uint64_t>(inst));
        StudentParams<double> w = zero_student<double>(cfg);
        // Randomize every parameter; keep scales moderate so the linear
        // attention stays well-conditioned.
        w.bottleneck.fc1_w = random_mat(rng, 6, 6, 0.4);
        w.bottleneck.fc1_b = random_vec(rng, 6, 0.2);
        w.bottleneck.fc2_w = random_mat(rng, 6, 6, 0.4);
        w.bottleneck.fc2_b = random_vec(rng, 6, 0.2);
        for (auto& blk : w.blocks) {
            blk.norm1_w = (random_vec(rng, 6, 0.5).array() + 1.0).matrix();
            blk.norm1_b = random_vec(rng, 6, 0.2);
            blk.attn = random_attention(rng, 6, 0.4);
            blk.norm2_w = (random_vec(rng, 6, 0.5).array() + 1.0).matrix();
            blk.norm2_b = random_vec(rng, 6, 0.2);
            blk.mlp.fc1_w = random_mat(rng, cfg.mlp_hidden(), 6, 0.3);
            blk.mlp.fc1_b = random_vec(rng, cfg.mlp_hidden(), 0.2);
            blk.mlp.fc2_w = random_mat(rng, 6, cfg.mlp_hidden(), 0.3);
            blk.mlp.fc2_b = random_vec(rng, 6, 0.2);
        }
        MatXd fused = random_mat(rng, cfg.tokens(), 6, 0.8);
        std::vector<MatXd> cotangents = {random_mat(rng, cfg.tokens(), 6),
                                         random_mat(rng, cfg.tokens(), 6)};

        const auto loss = [&] {
            const auto maps = student_forward<double>(fused, w, cfg.heads, nullptr);
            double s = 0.0;
            for (std::size_t l = 0; l < maps.size(); ++l) {
                s += (maps[l].array() * cotangents[l].array()).sum();
            }
            return s;
        };
        StudentTape<double> tape;
        student_forward<double>(fused, w, cfg.heads, &tape);
        StudentParams<double> g = zero_student<double>(cfg);
        const MatXd dfused = student_backward<double>(cotangents, w, cfg.heads, tape, g);

        // The composed tower has far larger third derivatives than any single
        // layer; a smaller step keeps truncation below the same tolerance.
        const double eps = 1e-4;
        check_tensor_grad(rng, fused, dfused, loss, eps);
        check_tensor_grad(rng, w.bottleneck.fc1_w, g.bottleneck.fc1_w, loss, eps);
        check_tensor_grad(rng, w.bottleneck.fc1_b, g.bottleneck.fc1_b, loss, eps);
        check_tensor_grad(rng, w.bottleneck.fc2_w, g.bottleneck.fc2_w, loss, eps);
        check_tensor_grad(rng, w.bottleneck.fc2_b, g.bottleneck.fc2_b, loss, eps);
        for (std::size_t l = 0; l < w.blocks.size(); ++l) {
            check_tensor_grad(rng, w.blocks[l].norm1_w, g.blocks[l].norm1_w, loss, eps);
            check_tensor_grad(rng, w.blocks[l].norm1_b, g.blocks[l].norm1_b, loss, eps);
            check_tensor_grad(rng, w.blocks[l].attn.qkv_w, g.blocks[l].attn.qkv_w, loss, eps);
            check_tensor_grad(rng, w.blocks[l].attn.qkv_b, g.blocks[l].attn.qkv_b, loss, eps);
            check_tensor_grad(rng, w.blocks[l].attn.proj_w, g.blocks[l].attn.proj_w, loss, eps);
            check_tensor_grad(rng, w.blocks[l].attn.proj_b, g.blocks[l].attn.proj_b, loss, eps);
            check_tensor_grad(rng, w.blocks[l].norm2_w, g.blocks[l].norm2_w, loss, eps);
            check_tensor_grad(rng, w.blocks[l].norm2_b, g.blocks[l].norm2_b, loss, eps);
            check_tensor_grad(rng, w.blocks[l].mlp.fc1_w, g.blocks[l].mlp.fc1_w, loss, eps);
            check_tensor_grad(rng, w.blocks[l].mlp.fc1_b, g.blocks[l].mlp.fc1_b, loss, eps);
            check_tensor_grad(rng, w.blocks[l].mlp.fc2_w, g.blocks[l].mlp.fc2_w, loss, eps);
            check_tensor_grad(rng, w.blocks[l].mlp.fc2_b, g.blocks[l].mlp.fc2_b, loss, eps);
        }
    }
}
