#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "btda/model.hpp"

namespace btda::harness {

struct BlobsConfig {
    Index classes = 3;
    Index dim = 2;
    /// Either one entry (applied to every class) or exactly `classes` entries.
    std::vector<Index> train_per_class = {10};
    std::vector<Index> test_per_class = {10};
    double separation = 4.0;  // minimum distance between class centers (feature units)
    double sigma = 1.0;       // isotropic cluster standard deviation (feature units)
    std::uint64_t data_seed = 0;
};

struct DatasetPair {
    WeightedDataset train;
    std::vector<Sample> test;
    Index input_dim = 0;
    Index num_classes = 0;
};

/// Gaussian class clusters with centers at mutual distance >= separation.
/// Deterministic in data_seed; all train weights start at 1.
DatasetPair generate_blobs(const BlobsConfig& config);

struct IdxConfig {
    std::filesystem::path image_path;
    std::filesystem::path label_path;
    Index per_class_train = 50;
    Index per_class_test = 50;
    Index downscale = 1;            // average-pool factor (1 = none)
    std::vector<int> keep_classes;  // empty = all classes in the file
    int max_label = 9;              // labels above this are malformed (MNIST family)
    std::uint64_t data_seed = 0;
};

/// Parses standard big-endian IDX containers, normalizes pixels to [0,1],
/// average-pools by the downscale factor, and subsamples per class
/// deterministically (train and test disjoint).
DatasetPair load_idx(const IdxConfig& config);

// Low-level parsers, exposed for the byte-level tests.
struct IdxImages {
    Index count = 0;
    Index rows = 0;
    Index cols = 0;
    std::vector<std::uint8_t> pixels;  // count * rows * cols
};

IdxImages read_idx_images(const std::filesystem::path& path);
std::vector<std::uint8_t> read_idx_labels(const std::filesystem::path& path);

}  // namespace btda::harness
