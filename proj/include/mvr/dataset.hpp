#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mvr/point_cloud.hpp"
#include "mvr/synthetic.hpp"

// On-disk dataset: PLY clouds under train/ and test/, per-point label
// sidecars for test clouds, and a manifest.json tying them together.

namespace mvr {

struct SynthDatasetConfig {
    std::vector<ShapeFamily> families{ShapeFamily::Sphere, ShapeFamily::Box};
    int train_per_family = 20;
    int test_normal_per_family = 10;
    int test_anomalous_per_family = 10;
    std::size_t n_points = 16384;
    AnomalyKind anomaly = AnomalyKind::Dent;
    double anomaly_radius = 0.25;
    double anomaly_depth = 0.1;
    std::uint64_t seed = 0;

    void validate() const;
};

struct SampleRecord {
    std::string file;         // PLY path relative to the dataset root
    std::string labels_file;  // sidecar of raw per-point u8 labels; may be empty
    std::string category;     // shape family
    std::string split;        // "train" or "test"
    int object_label = 0;     // 1 = anomalous
    std::uint64_t seed = 0;   // per-sample generator seed
};

struct DatasetManifest {
    std::uint64_t seed = 0;
    std::size_t n_points = 0;
    std::string anomaly_kind;
    double anomaly_radius = 0.0;
    double anomaly_depth = 0.0;
    std::vector<SampleRecord> samples;

    std::vector<const SampleRecord*> split_of(const std::string& split) const;
};

// Generates and writes the full dataset; refuses a non-empty directory
// unless force. Every anomalous sample is checked to carry at least one
// labeled point. Returns the manifest it wrote.
DatasetManifest synthesize_dataset(const std::filesystem::path& dir,
                                   const SynthDatasetConfig& cfg, bool force = false);

DatasetManifest load_manifest(const std::filesystem::path& dir);

// Loads one sample's cloud, attaching sidecar labels when the record names
// them.
PointCloud load_sample(const std::filesystem::path& dir, const SampleRecord& record);

// Loads every sample of the manifest into memory.
DatasetSplit load_split(const std::filesystem::path& dir, const DatasetManifest& manifest);

}  // namespace mvr
