#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdio>
#include <fstream>
#include <vector>

#include "doctest.h"
#include "wctdef/idx.hpp"

using namespace wctdef;

namespace {

void write_be32(std::ofstream& out, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<char*>(b), 4);
}

struct Fixture {
  std::string images = "build/test_idx_images.bin";
  std::string labels = "build/test_idx_labels.bin";

  // two 2x2 images with known bytes
  void write(uint32_t img_magic = 0x803, uint32_t lab_magic = 0x801,
             uint32_t n_img = 2, uint32_t n_lab = 2, bool truncate = false) {
    std::ofstream fi(images, std::ios::binary);
    write_be32(fi, img_magic);
    write_be32(fi, n_img);
    write_be32(fi, 2);
    write_be32(fi, 2);
    const unsigned char pix[8] = {0, 51, 102, 255, 10, 20, 30, 40};
    fi.write(reinterpret_cast<const char*>(pix), truncate ? 5 : 8);
    fi.close();

    std::ofstream fl(labels, std::ios::binary);
    write_be32(fl, lab_magic);
    write_be32(fl, n_lab);
    const unsigned char lab[2] = {3, 7};
    fl.write(reinterpret_cast<const char*>(lab), n_lab);
    fl.close();
  }

  ~Fixture() {
    std::remove(images.c_str());
    std::remove(labels.c_str());
  }
};

}  // namespace

TEST_CASE("hand-built IDX fixture parses to bytes/255") {
  Fixture fx;
  fx.write();
  auto data = load_idx_dataset(fx.images, fx.labels);
  REQUIRE(data.size() == 2);
  CHECK(data.height == 2);
  CHECK(data.width == 2);
  CHECK(data.images[0] == std::vector<double>{0.0, 51 / 255.0, 102 / 255.0, 1.0});
  CHECK(data.images[1] ==
        std::vector<double>{10 / 255.0, 20 / 255.0, 30 / 255.0, 40 / 255.0});
  CHECK(data.labels == std::vector<int>{3, 7});
  CHECK(data.ids == std::vector<int>{0, 1});
}

TEST_CASE("bad magic numbers are rejected") {
  Fixture fx;
  fx.write(0x804);
  CHECK_THROWS_AS(load_idx_dataset(fx.images, fx.labels), IngestionError);
  fx.write(0x803, 0x802);
  CHECK_THROWS_AS(load_idx_dataset(fx.images, fx.labels), IngestionError);
}

TEST_CASE("truncated file reports an error, no partial dataset") {
  Fixture fx;
  fx.write(0x803, 0x801, 2, 2, /*truncate=*/true);
  CHECK_THROWS_WITH_AS(load_idx_dataset(fx.images, fx.labels),
                       doctest::Contains("truncated"), IngestionError);
}

TEST_CASE("image/label count mismatch is rejected") {
  Fixture fx;
  fx.write(0x803, 0x801, 2, 1);
  CHECK_THROWS_WITH_AS(load_idx_dataset(fx.images, fx.labels),
                       doctest::Contains("count mismatch"), IngestionError);
}

TEST_CASE("bundled MNIST fixture loads with expected geometry") {
  auto train = load_idx_dataset("data/mnist10k/train-images-idx3-ubyte",
                                "data/mnist10k/train-labels-idx1-ubyte");
  CHECK(train.size() == 7000);
  CHECK(train.height == 28);
  CHECK(train.width == 28);
  CHECK(train.num_classes() == 10);

  // class-interleaved layout: any prefix is balanced
  std::vector<int> counts(10, 0);
  for (size_t i = 0; i < 100; ++i) counts[train.labels[i]]++;
  for (int c : counts) CHECK(c == 10);

  for (double v : train.images[0]) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("save/load round trip") {
  auto orig = load_idx_dataset("data/mnist10k/t1k-images-idx3-ubyte",
                               "data/mnist10k/t1k-labels-idx1-ubyte");
  auto small = orig.take(5);
  save_idx_dataset(small, "build/test_idx_rt_images.bin",
                   "build/test_idx_rt_labels.bin");
  auto back = load_idx_dataset("build/test_idx_rt_images.bin",
                               "build/test_idx_rt_labels.bin");
  CHECK(back.images == small.images);
  CHECK(back.labels == small.labels);
  std::remove("build/test_idx_rt_images.bin");
  std::remove("build/test_idx_rt_labels.bin");
}
