#include "mvr/nn/model.hpp"

#include <cstring>

namespace mvr {

namespace {

const Tensor& find_tensor(const WeightArchive& archive, const std::string& name) {
    const auto it = archive.find(name);
    if (it == archive.end()) throw DataError("weights: missing tensor '" + name + "'");
    return it->second;
}

MatX<float> mat_from(const WeightArchive& archive, const std::string& name, Eigen::Index rows,
                     Eigen::Index cols) {
    const Tensor& t = find_tensor(archive, name);
    if (static_cast<Eigen::Index>(t.data.size()) != rows * cols) {
        throw DataError("weights: tensor '" + name + "' has wrong element count");
    }
    MatX<float> m(rows, cols);
    std::memcpy(m.data(), t.data.data(), t.data.size() * sizeof(float));
    return m;
}

VecX<float> vec_from(const WeightArchive& archive, const std::string& name, Eigen::Index n) {
    const Tensor& t = find_tensor(archive, name);
    if (static_cast<Eigen::Index>(t.data.size()) != n) {
        throw DataError("weights: tensor '" + name + "' has wrong element count");
    }
    VecX<float> v(n);
    std::memcpy(v.data(), t.data.data(), t.data.size() * sizeof(float));
    return v;
}

BlockParams<float> block_from(const WeightArchive& archive, const std::string& prefix, int dim,
                              int hidden) {
    BlockParams<float> b;
    b.norm1_w = vec_from(archive, prefix + ".norm1.weight", dim);
    b.norm1_b = vec_from(archive, prefix + ".norm1.bias", dim);
    b.attn.qkv_w = mat_from(archive, prefix + ".attn.qkv.weight", 3 * dim, dim);
    b.attn.qkv_b = vec_from(archive, prefix + ".attn.qkv.bias", 3 * dim);
    b.attn.proj_w = mat_from(archive, prefix + ".attn.proj.weight", dim, dim);
    b.attn.proj_b = vec_from(archive, prefix + ".attn.proj.bias", dim);
    b.norm2_w = vec_from(archive, prefix + ".norm2.weight", dim);
    b.norm2_b = vec_from(archive, prefix + ".norm2.bias", dim);
    b.mlp.fc1_w = mat_from(archive, prefix + ".mlp.fc1.weight", hidden, dim);
    b.mlp.fc1_b = vec_from(archive, prefix + ".mlp.fc1.bias", hidden);
    b.mlp.fc2_w = mat_from(archive, prefix + ".mlp.fc2.weight", dim, hidden);
    b.mlp.fc2_b = vec_from(archive, prefix + ".mlp.fc2.bias", dim);
    return b;
}

void set_tensor(WeightArchive& archive, const std::string& name,
                std::vector<std::uint64_t> dims, const float* data, std::size_t n) {
    Tensor t;
    t.dims = std::move(dims);
    t.data.assign(data, data + n);
    if (t.size() != n) throw DataError("weights: tensor '" + name + "' dims mismatch");
    archive[name] = std::move(t);
}

void set_block(WeightArchive& archive, const std::string& prefix, const BlockParams<float>& b) {
    const auto dim = static_cast<std::uint64_t>(b.attn.proj_w.rows());
    const auto hidden = static_cast<std::uint64_t>(b.mlp.fc1_w.rows());
    set_tensor(archive, prefix + ".norm1.weight", {dim}, b.norm1_w.data(), dim);
    set_tensor(archive, prefix + ".norm1.bias", {dim}, b.norm1_b.data(), dim);
    set_tensor(archive, prefix + ".attn.qkv.weight", {3 * dim, dim}, b.attn.qkv_w.data(),
               3 * dim * dim);
    set_tensor(archive, prefix + ".attn.qkv.bias", {3 * dim}, b.attn.qkv_b.data(), 3 * dim);
    set_tensor(archive, prefix + ".attn.proj.weight", {dim, dim}, b.attn.proj_w.data(),
               dim * dim);
    set_tensor(archive, prefix + ".attn.proj.bias", {dim}, b.attn.proj_b.data(), dim);
    set_tensor(archive, prefix + ".norm2.weight", {dim}, b.norm2_w.data(), dim);
    set_tensor(archive, prefix + ".norm2.bias", {dim}, b.norm2_b.data(), dim);
    set_tensor(archive, prefix + ".mlp.fc1.weight", {hidden, dim}, b.mlp.fc1_w.data(),
               hidden * dim);
    set_tensor(archive, prefix + ".mlp.fc1.bias", {hidden}, b.mlp.fc1_b.data(), hidden);
    set_tensor(archive, prefix + ".mlp.fc2.weight", {dim, hidden}, b.mlp.fc2_w.data(),
               dim * hidden);
    set_tensor(archive, prefix + ".mlp.fc2.bias", {dim}, b.mlp.fc2_b.data(), dim);
}

}  // namespace

EncoderParams<float> encoder_params_from_archive(const WeightArchive& archive,
                                                 const std::string& prefix,
                                                 const EncoderConfig& cfg) {
    require_tensors(archive, encoder_schema(cfg, prefix));
    EncoderParams<float> w;
    const int p2 = cfg.patch_size * cfg.patch_size;
    w.patch.weight = mat_from(archive, prefix + ".patch_embed.weight", cfg.embed_dim, 3 * p2);
    w.patch.bias = vec_from(archive, prefix + ".patch_embed.bias", cfg.embed_dim);
    w.patch.pos = mat_from(archive, prefix + ".pos_embed", cfg.tokens(), cfg.embed_dim);
    for (int i = 0; i < cfg.depth; ++i) {
        w.blocks.push_back(block_from(archive, prefix + ".blocks." + std::to_string(i),
                                      cfg.embed_dim, cfg.mlp_hidden()));
    }
    return w;
}

StudentParams<float> student_params_from_archive(const WeightArchive& archive,
                                                 const EncoderConfig& cfg) {
    const int depth = cfg.taps();
    require_tensors(archive, student_schema(cfg, depth));
    StudentParams<float> w;
    w.bottleneck.fc1_w =
        mat_from(archive, "student.bottleneck.fc1.weight", cfg.embed_dim, cfg.embed_dim);
    w.bottleneck.fc1_b = vec_from(archive, "student.bottleneck.fc1.bias", cfg.embed_dim);
    w.bottleneck.fc2_w =
        mat_from(archive, "student.bottleneck.fc2.weight", cfg.embed_dim, cfg.embed_dim);
    w.bottleneck.fc2_b = vec_from(archive, "student.bottleneck.fc2.bias", cfg.embed_dim);
    for (int l = 0; l < depth; ++l) {
        w.blocks.push_back(block_from(archive, "student.decoder.blocks." + std::to_string(l),
                                      cfg.embed_dim, cfg.mlp_hidden()));
    }
    return w;
}

void write_student_params(WeightArchive& archive, const StudentParams<float>& params,
                          const EncoderConfig& cfg) {
    const auto dim = static_cast<std::uint64_t>(cfg.embed_dim);
    set_tensor(archive, "student.bottleneck.fc1.weight", {dim, dim},
               params.bottleneck.fc1_w.data(), dim * dim);
    set_tensor(archive, "student.bottleneck.fc1.bias", {dim}, params.bottleneck.fc1_b.data(),
               dim);
    set_tensor(archive, "student.bottleneck.fc2.weight", {dim, dim},
               params.bottleneck.fc2_w.data(), dim * dim);
    set_tensor(archive, "student.bottleneck.fc2.bias", {dim}, params.bottleneck.fc2_b.data(),
               dim);
    for (std::size_t l = 0; l < params.blocks.size(); ++l) {
        set_block(archive, "student.decoder.blocks." + std::to_string(l), params.blocks[l]);
    }
}

}  // namespace mvr
