#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fliplog/tensor.hpp"

namespace fliplog {

/// Raw decoded IDX image payload (unsigned bytes, row-major).
struct IdxImages {
  std::int64_t count = 0;
  int rows = 0;
  int cols = 0;
  std::vector<std::uint8_t> pixels;
};

/// Parses a big-endian IDX image file (magic 0x00000803). Gzip-compressed
/// files are decompressed transparently. Images must be 28x28.
IdxImages load_idx_images(const std::string& path);

/// Parses a big-endian IDX label file (magic 0x00000801); labels must be 0-9.
std::vector<std::uint8_t> load_idx_labels(const std::string& path);

/// Images normalized to [0,1] (byte / 255) with integer labels.
struct ImageSet {
  Tensor images;            // [N, 1, 28, 28]
  std::vector<int> labels;  // length N
  std::string source;       // dataset id + split id, e.g. "mnist/train"

  std::int64_t size() const { return static_cast<std::int64_t>(labels.size()); }
};

ImageSet load_image_set(const std::string& images_path,
                        const std::string& labels_path, std::string source);

/// One-class protocol: train on a single normal class, score the whole test
/// split with binary labels (0 = normal class, 1 = anomalous).
struct AnomalyTask {
  std::string id;
  int normal_class = 0;
  ImageSet train_normal;
  ImageSet test_all;  // labels hold the binary relabeling
};

/// Builds the task for `normal_class`. With train_cap > 0 the normal-class
/// training images are reduced to a deterministic prefix of a seeded shuffle
/// (desk-scale runs); 0 keeps all of them.
AnomalyTask make_task(const ImageSet& train, const ImageSet& test,
                      int normal_class, std::int64_t train_cap = 0,
                      std::uint64_t cap_seed = 0x5eed);

/// Copies the selected samples into a new [n,1,28,28] set.
ImageSet gather(const ImageSet& set, const std::vector<std::int64_t>& indices);

/// Resolved on-disk locations for one dataset split layout. Each entry may
/// point at a plain IDX file or its .gz sibling.
struct DatasetPaths {
  std::string train_images;
  std::string train_labels;
  std::string test_images;
  std::string test_labels;
};

/// Locates the four IDX files for `dataset` ("mnist" or "fmnist") under
/// data_dir/<dataset>/, accepting gzipped or plain names. Throws FormatError
/// listing missing files.
DatasetPaths dataset_paths(const std::string& data_dir,
                           const std::string& dataset);

/// Loads both splits of a dataset.
struct DatasetSplits {
  ImageSet train;
  ImageSet test;
};
DatasetSplits load_dataset(const std::string& data_dir,
                           const std::string& dataset);

/// Downloads the four gzipped IDX files from `mirror_url` (http://host[:port]
/// [/prefix]) into data_dir/<dataset>/ and verifies the decompressed payload
/// lengths (60000 train / 10000 test samples of 28x28).
void fetch_dataset(const std::string& dataset, const std::string& data_dir,
                   const std::string& mirror_url);

/// Default mirror for a dataset id.
std::string default_mirror(const std::string& dataset);

}  // namespace fliplog
