// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "normlab/errors.hpp"
#include "normlab/idx.hpp"
#include "normlab/random.hpp"

namespace fs = std::filesystem;

namespace normlab {
namespace {

class IdxIo : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / "normlab-idx-test";
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const char* name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

IdxImages random_images(std::size_t count, std::size_t rows, std::size_t cols,
                        std::uint64_t seed) {
  IdxImages imgs;
  imgs.count = count;
  imgs.rows = rows;
  imgs.cols = cols;
  imgs.pixels.resize(count * rows * cols);
  Rng rng(seed);
  for (auto& p : imgs.pixels) p = static_cast<std::uint8_t>(rng.uniform_index(256));
  // Make sure the extremes appear.
  if (!imgs.pixels.empty()) {
    imgs.pixels.front() = 0;
    imgs.pixels.back() = 255;
  }
  return imgs;
}

TEST_F(IdxIo, ImagesRoundTripBitwise) {
  IdxImages imgs = random_images(7, 4, 5, 1);
  write_idx_images(path("imgs"), imgs);
  IdxImages back = read_idx_images(path("imgs"));
  EXPECT_EQ(back.count, 7u);
  EXPECT_EQ(back.rows, 4u);
  EXPECT_EQ(back.cols, 5u);
  EXPECT_EQ(back.pixels, imgs.pixels);
}

TEST_F(IdxIo, AllZeroImageSurvives) {
  IdxImages imgs;
  imgs.count = 1;
  imgs.rows = 2;
  imgs.cols = 2;
  imgs.pixels = {0, 0, 0, 0};
  write_idx_images(path("zero"), imgs);
  EXPECT_EQ(read_idx_images(path("zero")).pixels, imgs.pixels);
}

TEST_F(IdxIo, LabelsRoundTrip) {
  std::vector<std::uint8_t> labels = {0, 9, 3, 3, 7, 0, 255};
  write_idx_labels(path("lbl"), labels);
  EXPECT_EQ(read_idx_labels(path("lbl")), labels);
}

TEST_F(IdxIo, BadMagicNamesTheFile) {
  write_idx_images(path("bad"), random_images(2, 3, 3, 2));
  {
    std::fstream f(path("bad"), std::ios::in | std::ios::out | std::ios::binary);
    const char junk[4] = {'\x12', '\x34', '\x56', '\x78'};
    f.write(junk, 4);
  }
  try {
    read_idx_images(path("bad"));
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    std::string what = e.what();
    EXPECT_NE(what.find("bad"), std::string::npos) << what;
    EXPECT_NE(what.find("magic"), std::string::npos) << what;
  }
}

TEST_F(IdxIo, LabelFileRejectedAsImages) {
  write_idx_labels(path("lbl"), {1, 2, 3});
  EXPECT_THROW(read_idx_images(path("lbl")), DataError);
  write_idx_images(path("img"), random_images(2, 2, 2, 3));
  EXPECT_THROW(read_idx_labels(path("img")), DataError);
}

TEST_F(IdxIo, TruncationDetected) {
  write_idx_images(path("trunc"), random_images(3, 4, 4, 4));
  fs::resize_file(path("trunc"), 16 + 3 * 16 / 2);  // header plus half the payload
  EXPECT_THROW(read_idx_images(path("trunc")), DataError);

  write_idx_images(path("hdr"), random_images(1, 2, 2, 5));
  fs::resize_file(path("hdr"), 6);
  EXPECT_THROW(read_idx_images(path("hdr")), DataError);

  EXPECT_THROW(read_idx_images(path("missing")), DataError);
}

void write_pair(const std::string& img_path, const std::string& lbl_path, std::size_t count,
                std::size_t label_count) {
  IdxImages imgs;
  imgs.count = count;
  imgs.rows = 28;
  imgs.cols = 28;
  imgs.pixels.assign(count * 28 * 28, 7);
  write_idx_images(img_path, imgs);
  std::vector<std::uint8_t> labels(label_count, 1);
  write_idx_labels(lbl_path, labels);
}

TEST_F(IdxIo, LoadRejectsCountMismatchBeforeSizeCheck) {
  write_pair(path("train-images-idx3-ubyte"), path("train-labels-idx1-ubyte"), 10, 9);
  write_pair(path("t10k-images-idx3-ubyte"), path("t10k-labels-idx1-ubyte"), 3, 3);
  try {
    load_mnist(dir_.string());
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("mismatch"), std::string::npos) << e.what();
  }
}

TEST_F(IdxIo, LoadRejectsWrongCorpusSize) {
  write_pair(path("train-images-idx3-ubyte"), path("train-labels-idx1-ubyte"), 10, 10);
  write_pair(path("t10k-images-idx3-ubyte"), path("t10k-labels-idx1-ubyte"), 3, 3);
  try {
    load_mnist(dir_.string());
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("60000"), std::string::npos) << e.what();
  }
}

TEST_F(IdxIo, LoadRejectsOutOfRangeLabel) {
  write_pair(path("t10k-images-idx3-ubyte"), path("t10k-labels-idx1-ubyte"), 10000, 10000);
  IdxImages imgs;
  imgs.count = 60000;
  imgs.rows = 28;
  imgs.cols = 28;
  imgs.pixels.assign(imgs.count * 784, 1);
  write_idx_images(path("train-images-idx3-ubyte"), imgs);
  std::vector<std::uint8_t> labels(60000, 2);
  labels[17] = 10;  // out of the digit range
  write_idx_labels(path("train-labels-idx1-ubyte"), labels);
  try {
    load_mnist(dir_.string());
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("label"), std::string::npos) << e.what();
  }
}

}  // namespace
}  // namespace normlab
