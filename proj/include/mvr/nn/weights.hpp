#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mvr/common.hpp"
#include "mvr/nn/config.hpp"

namespace mvr {

// Flat float32 tensor with explicit dims; the archive is the single on-disk
// representation for teacher, student, and optimizer-free checkpoints.
struct Tensor {
    std::vector<std::uint64_t> dims;
    std::vector<float> data;

    std::size_t size() const {
        std::size_t n = 1;
        for (auto d : dims) n *= static_cast<std::size_t>(d);
        return n;
    }
};

using WeightArchive = std::map<std::string, Tensor>;

struct TensorSpec {
    std::string name;
    std::vector<std::uint64_t> dims;
};

// Fixed, documented tensor set for one encoder tower under `prefix.`
// (e.g. "teacher"). Order is the initialization-draw order.
std::vector<TensorSpec> encoder_schema(const EncoderConfig& cfg, const std::string& prefix);

// Bottleneck + decoder tensors under "student.".
std::vector<TensorSpec> student_schema(const EncoderConfig& cfg, int decoder_depth);

// Full checkpoint schema: teacher then student.
std::vector<TensorSpec> checkpoint_schema(const EncoderConfig& cfg, int decoder_depth);

// Draws every tensor of `schema` in order from `rng`: truncated-normal
// (sigma 0.02, resampling beyond two sigma) for weights and positional
// embeddings, zeros for biases, ones/zeros for norm scale/shift.
WeightArchive init_weights(const std::vector<TensorSpec>& schema, RandomStream& rng);

// Throws DataError naming the first missing or mis-shaped tensor; ignores
// tensors outside `schema` (an archive may bundle several towers).
void require_tensors(const WeightArchive& archive, const std::vector<TensorSpec>& schema);

// require_tensors plus a check that nothing outside the schema is present.
void validate_archive(const WeightArchive& archive, const std::vector<TensorSpec>& schema);

void save_weights(const std::string& path, const WeightArchive& archive);
WeightArchive load_weights(const std::string& path);

}  // namespace mvr
