// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "normlab/tensor.hpp"

namespace normlab {

// IDX container (big-endian), the interchange format of the classic digit
// corpus: magic 0x00000803 for u8 image stacks [count x rows x cols] and
// 0x00000801 for u8 label vectors. Malformed input raises DataError naming
// the offending file.
struct IdxImages {
  std::size_t count = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint8_t> pixels;  // count * rows * cols, row-major
};

IdxImages read_idx_images(const std::string& path);
std::vector<std::uint8_t> read_idx_labels(const std::string& path);

void write_idx_images(const std::string& path, const IdxImages& images);
void write_idx_labels(const std::string& path, const std::vector<std::uint8_t>& labels);

// Fixed-size supervised split: 60000 training records partitioned into
// 55000 train / 5000 validation by a seeded permutation, plus the 10000-case
// test set. Pixels are scaled to [0, 1]; labels are class indices in {0..9}.
struct MnistDataset {
  Tensor train_images;  // [55000 x 784]
  std::vector<int> train_labels;
  Tensor val_images;  // [5000 x 784]
  std::vector<int> val_labels;
  Tensor test_images;  // [10000 x 784]
  std::vector<int> test_labels;
};

// Expected filenames under dir:
//   train-images-idx3-ubyte  train-labels-idx1-ubyte
//   t10k-images-idx3-ubyte   t10k-labels-idx1-ubyte
MnistDataset load_mnist(const std::string& dir, std::uint64_t split_seed = 0);

}  // namespace normlab
