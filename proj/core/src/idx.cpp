// SPDX-License-Identifier: Apache-2.0
#include "normlab/idx.hpp"

#include <array>
#include <cstdio>
#include <fstream>

#include "normlab/errors.hpp"
#include "normlab/random.hpp"

namespace normlab {
namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::uint32_t read_be32(std::istream& in, const std::string& path, const char* what) {
  std::array<unsigned char, 4> buf{};
  if (!in.read(reinterpret_cast<char*>(buf.data()), 4)) {
    throw DataError(path + ": truncated while reading " + what);
  }
  return (std::uint32_t(buf[0]) << 24) | (std::uint32_t(buf[1]) << 16) |
         (std::uint32_t(buf[2]) << 8) | std::uint32_t(buf[3]);
}

void write_be32(std::ostream& out, std::uint32_t v) {
  std::array<unsigned char, 4> buf = {
      static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
      static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<const char*>(buf.data()), 4);
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path + ": cannot open for reading");
  return in;
}

}  // namespace

IdxImages read_idx_images(const std::string& path) {
  std::ifstream in = open_input(path);
  std::uint32_t magic = read_be32(in, path, "magic");
  if (magic != kImageMagic) {
    char hex[16];
    std::snprintf(hex, sizeof hex, "0x%08x", magic);
    throw DataError(path + ": bad image magic " + hex);
  }
  IdxImages out;
  out.count = read_be32(in, path, "image count");
  out.rows = read_be32(in, path, "row count");
  out.cols = read_be32(in, path, "column count");
  std::size_t n = out.count * out.rows * out.cols;
  out.pixels.resize(n);
  if (!in.read(reinterpret_cast<char*>(out.pixels.data()), static_cast<std::streamsize>(n))) {
    throw DataError(path + ": truncated pixel payload");
  }
  return out;
}

std::vector<std::uint8_t> read_idx_labels(const std::string& path) {
  std::ifstream in = open_input(path);
  std::uint32_t magic = read_be32(in, path, "magic");
  if (magic != kLabelMagic) {
    char hex[16];
    std::snprintf(hex, sizeof hex, "0x%08x", magic);
    throw DataError(path + ": bad label magic " + hex);
  }
  std::size_t count = read_be32(in, path, "label count");
  std::vector<std::uint8_t> labels(count);
  if (!in.read(reinterpret_cast<char*>(labels.data()), static_cast<std::streamsize>(count))) {
    throw DataError(path + ": truncated label payload");
  }
  return labels;
}

void write_idx_images(const std::string& path, const IdxImages& images) {
  if (images.pixels.size() != images.count * images.rows * images.cols) {
    throw std::invalid_argument("write_idx_images: pixel buffer does not match dimensions");
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(path + ": cannot open for writing");
  write_be32(out, kImageMagic);
  write_be32(out, static_cast<std::uint32_t>(images.count));
  write_be32(out, static_cast<std::uint32_t>(images.rows));
  write_be32(out, static_cast<std::uint32_t>(images.cols));
  out.write(reinterpret_cast<const char*>(images.pixels.data()),
            static_cast<std::streamsize>(images.pixels.size()));
  if (!out) throw DataError(path + ": write failed");
}

void write_idx_labels(const std::string& path, const std::vector<std::uint8_t>& labels) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(path + ": cannot open for writing");
  write_be32(out, kLabelMagic);
  write_be32(out, static_cast<std::uint32_t>(labels.size()));
  out.write(reinterpret_cast<const char*>(labels.data()),
            static_cast<std::streamsize>(labels.size()));
  if (!out) throw DataError(path + ": write failed");
}

namespace {

struct LabeledImages {
  Tensor images;  // [count x rows*cols] scaled to [0, 1]
  std::vector<int> labels;
};

LabeledImages load_pair(const std::string& image_path, const std::string& label_path,
                        std::size_t expected_count) {
  IdxImages raw = read_idx_images(image_path);
  std::vector<std::uint8_t> raw_labels = read_idx_labels(label_path);
  if (raw.count != raw_labels.size()) {
    throw DataError(image_path + " / " + label_path + ": count mismatch (" +
                    std::to_string(raw.count) + " images vs " +
                    std::to_string(raw_labels.size()) + " labels)");
  }
  if (raw.count != expected_count) {
    throw DataError(image_path + ": expected " + std::to_string(expected_count) +
                    " records, found " + std::to_string(raw.count));
  }
  std::size_t dim = raw.rows * raw.cols;
  if (dim != 784) {
    throw DataError(image_path + ": expected 28x28 images, found " + std::to_string(raw.rows) +
                    "x" + std::to_string(raw.cols));
  }
  LabeledImages out{Tensor(Shape{raw.count, dim}), std::vector<int>(raw.count)};
  for (std::size_t i = 0; i < raw.pixels.size(); ++i) {
    out.images.data()[i] = static_cast<double>(raw.pixels[i]) / 255.0;
  }
  for (std::size_t i = 0; i < raw_labels.size(); ++i) {
    if (raw_labels[i] > 9) {
      throw DataError(label_path + ": label " + std::to_string(int(raw_labels[i])) +
                      " out of range at record " + std::to_string(i));
    }
    out.labels[i] = static_cast<int>(raw_labels[i]);
  }
  return out;
}

}  // namespace

MnistDataset load_mnist(const std::string& dir, std::uint64_t split_seed) {
  const std::string sep = dir.empty() || dir.back() == '/' ? "" : "/";
  LabeledImages train_full =
      load_pair(dir + sep + "train-images-idx3-ubyte", dir + sep + "train-labels-idx1-ubyte", 60000);
  LabeledImages test =
      load_pair(dir + sep + "t10k-images-idx3-ubyte", dir + sep + "t10k-labels-idx1-ubyte", 10000);

  // Deterministic split: first 55000 of a seeded permutation train, rest validate.
  std::vector<std::size_t> perm(60000);
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  Rng rng = Rng(split_seed).fork(0x73706c6974);  // "split"
  rng.shuffle(perm);

  constexpr std::size_t kTrain = 55000;
  constexpr std::size_t kVal = 5000;
  MnistDataset out{Tensor(Shape{kTrain, 784}), std::vector<int>(kTrain),
                   Tensor(Shape{kVal, 784}),   std::vector<int>(kVal),
                   std::move(test.images),     std::move(test.labels)};
  for (std::size_t i = 0; i < kTrain + kVal; ++i) {
    std::size_t src = perm[i];
    bool is_train = i < kTrain;
    double* dst_row = (is_train ? out.train_images.data() + i * 784
                                : out.val_images.data() + (i - kTrain) * 784);
    const double* src_row = train_full.images.data() + src * 784;
    std::copy(src_row, src_row + 784, dst_row);
    (is_train ? out.train_labels[i] : out.val_labels[i - kTrain]) = train_full.labels[src];
  }
  return out;
}

}  // namespace normlab
