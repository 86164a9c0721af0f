#include "mvr/nn/weights.hpp"

#include <cstring>
#include <sstream>

namespace mvr {

namespace {

constexpr char kMagic[5] = {'M', 'V', 'R', 'W', '1'};

std::string dims_to_string(const std::vector<std::uint64_t>& dims) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < dims.size(); ++i) os << (i ? "x" : "") << dims[i];
    os << "]";
    return os.str();
}

void append_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t read_u64(const std::string& buf, std::size_t& off) {
    if (off + 8 > buf.size()) throw ParseError("weights: truncated file");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
        v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[off + i])) << (8 * i);
    }
    off += 8;
    return v;
}

void block_schema(std::vector<TensorSpec>& out, const std::string& prefix, std::uint64_t dim,
                  std::uint64_t hidden) {
    out.push_back({prefix + ".norm1.weight", {dim}});
    out.push_back({prefix + ".norm1.bias", {dim}});
    out.push_back({prefix + ".attn.qkv.weight", {3 * dim, dim}});
    out.push_back({prefix + ".attn.qkv.bias", {3 * dim}});
    out.push_back({prefix + ".attn.proj.weight", {dim, dim}});
    out.push_back({prefix + ".attn.proj.bias", {dim}});
    out.push_back({prefix + ".norm2.weight", {dim}});
    out.push_back({prefix + ".norm2.bias", {dim}});
    out.push_back({prefix + ".mlp.fc1.weight", {hidden, dim}});
    out.push_back({prefix + ".mlp.fc1.bias", {hidden}});
    out.push_back({prefix + ".mlp.fc2.weight", {dim, hidden}});
    out.push_back({prefix + ".mlp.fc2.bias", {dim}});
}

bool is_norm_weight(const std::string& name) {
    const auto pos = name.rfind('.');
    const std::string leaf = name.substr(0, pos);
    const auto leaf_pos = leaf.rfind('.');
    const std::string layer = leaf.substr(leaf_pos + 1);
    return layer == "norm1" || layer == "norm2";
}

}  // namespace

std::vector<TensorSpec> encoder_schema(const EncoderConfig& cfg, const std::string& prefix) {
    std::vector<TensorSpec> out;
    const auto dim = static_cast<std::uint64_t>(cfg.embed_dim);
    const auto patch = static_cast<std::uint64_t>(cfg.patch_size);
    out.push_back({prefix + ".patch_embed.weight", {dim, 3, patch, patch}});
    out.push_back({prefix + ".patch_embed.bias", {dim}});
    out.push_back({prefix + ".pos_embed", {static_cast<std::uint64_t>(cfg.tokens()), dim}});
    for (int i = 0; i < cfg.depth; ++i) {
        block_schema(out, prefix + ".blocks." + std::to_string(i), dim,
                     static_cast<std::uint64_t>(cfg.mlp_hidden()));
    }
    return out;
}

std::vector<TensorSpec> student_schema(const EncoderConfig& cfg, int decoder_depth) {
    std::vector<TensorSpec> out;
    const auto dim = static_cast<std::uint64_t>(cfg.embed_dim);
    out.push_back({"student.bottleneck.fc1.weight", {dim, dim}});
    out.push_back({"student.bottleneck.fc1.bias", {dim}});
    out.push_back({"student.bottleneck.fc2.weight", {dim, dim}});
    out.push_back({"student.bottleneck.fc2.bias", {dim}});
    for (int l = 0; l < decoder_depth; ++l) {
        block_schema(out, "student.decoder.blocks." + std::to_string(l), dim,
                     static_cast<std::uint64_t>(cfg.mlp_hidden()));
    }
    return out;
}

std::vector<TensorSpec> checkpoint_schema(const EncoderConfig& cfg, int decoder_depth) {
    std::vector<TensorSpec> out = encoder_schema(cfg, "teacher");
    auto student = student_schema(cfg, decoder_depth);
    out.insert(out.end(), student.begin(), student.end());
    return out;
}

WeightArchive init_weights(const std::vector<TensorSpec>& schema, RandomStream& rng) {
    WeightArchive archive;
    for (const auto& spec : schema) {
        Tensor t;
        t.dims = spec.dims;
        t.data.resize(t.size());
        const bool is_bias = spec.name.size() >= 5 &&
                             spec.name.compare(spec.name.size() - 5, 5, ".bias") == 0;
        if (is_bias) {
            std::fill(t.data.begin(), t.data.end(), 0.0f);
        } else if (is_norm_weight(spec.name)) {
            std::fill(t.data.begin(), t.data.end(), 1.0f);
        } else {
            for (auto& v : t.data) v = static_cast<float>(rng.truncated_normal(0.02));
        }
        archive.emplace(spec.name, std::move(t));
    }
    return archive;
}

void require_tensors(const WeightArchive& archive, const std::vector<TensorSpec>& schema) {
    for (const auto& spec : schema) {
        const auto it = archive.find(spec.name);
        if (it == archive.end()) {
            throw DataError("weights: missing tensor '" + spec.name + "'");
        }
        if (it->second.dims != spec.dims) {
            throw DataError("weights: tensor '" + spec.name + "' has shape " +
                            dims_to_string(it->second.dims) + ", expected " +
                            dims_to_string(spec.dims));
        }
    }
}

void validate_archive(const WeightArchive& archive, const std::vector<TensorSpec>& schema) {
    require_tensors(archive, schema);
    if (archive.size() != schema.size()) {
        std::map<std::string, bool> known;
        for (const auto& spec : schema) known[spec.name] = true;
        for (const auto& [name, tensor] : archive) {
            (void)tensor;
            if (!known.count(name)) {
                throw DataError("weights: unexpected tensor '" + name + "'");
            }
        }
    }
}

void save_weights(const std::string& path, const WeightArchive& archive) {
    std::string buf(kMagic, sizeof(kMagic));
    append_u64(buf, archive.size());
    for (const auto& [name, tensor] : archive) {
        append_u64(buf, name.size());
        buf.append(name);
        append_u64(buf, tensor.dims.size());
        for (auto d : tensor.dims) append_u64(buf, d);
        if (tensor.data.size() != tensor.size()) {
            throw DataError("weights: tensor '" + name + "' data does not match its dims");
        }
        const std::size_t bytes = tensor.data.size() * sizeof(float);
        const std::size_t at = buf.size();
        buf.resize(at + bytes);
        std::memcpy(buf.data() + at, tensor.data.data(), bytes);
    }
    atomic_write_file(path, buf);
}

WeightArchive load_weights(const std::string& path) {
    const std::string buf = read_file(path);
    if (buf.size() < sizeof(kMagic) || std::memcmp(buf.data(), kMagic, sizeof(kMagic)) != 0) {
        throw ParseError("weights: '" + path + "' is not a weight archive");
    }
    std::size_t off = sizeof(kMagic);
    const std::uint64_t count = read_u64(buf, off);
    WeightArchive archive;
    for (std::uint64_t i = 0; i < count; ++i) {
        const std::uint64_t name_len = read_u64(buf, off);
        if (off + name_len > buf.size()) throw ParseError("weights: truncated file");
        std::string name(buf.data() + off, name_len);
        off += name_len;
        Tensor t;
        const std::uint64_t rank = read_u64(buf, off);
        if (rank > 8) throw ParseError("weights: implausible tensor rank");
        t.dims.resize(rank);
        for (auto& d : t.dims) d = read_u64(buf, off);
        const std::size_t n = t.size();
        if (n > (1ull << 32)) throw ParseError("weights: implausible tensor size");
        const std::size_t bytes = n * sizeof(float);
        if (off + bytes > buf.size()) throw ParseError("weights: truncated file");
        t.data.resize(n);
        std::memcpy(t.data.data(), buf.data() + off, bytes);
        off += bytes;
        if (!archive.emplace(std::move(name), std::move(t)).second) {
            throw ParseError("weights: duplicate tensor name");
        }
    }
    if (off != buf.size()) throw ParseError("weights: trailing bytes after last tensor");
    return archive;
}

}  // namespace mvr
