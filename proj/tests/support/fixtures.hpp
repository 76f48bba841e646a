#pragma once

#include <cmath>
#include <vector>

#include "wctdef/dataset.hpp"
#include "wctdef/model.hpp"
#include "wctdef/rng.hpp"

// Desk fixtures: a 4-class synthetic blob dataset on 8x8 images and a small
// two-tap CNN that trains on it in well under a second.
namespace fixtures {

inline wctdef::ModelConfig tiny_config(uint64_t seed = 0) {
  using wctdef::LayerSpec;
  wctdef::ModelConfig cfg;
  cfg.in_channels = 1;
  cfg.in_height = 8;
  cfg.in_width = 8;
  cfg.n_classes = 4;
  cfg.seed = seed;
  cfg.layers = {
      LayerSpec::conv(4),  LayerSpec::relu(),
      LayerSpec::maxpool2(1),
      LayerSpec::conv(8),  LayerSpec::relu(),
      LayerSpec::maxpool2(2),
      LayerSpec::flatten(),
      LayerSpec::linear(16), LayerSpec::relu(),
      LayerSpec::linear(4),
  };
  cfg.validate();
  return cfg;
}

// Class c lights up quadrant c with a soft blob plus mild noise.
inline wctdef::Dataset blob_dataset(size_t n, uint64_t seed = 0) {
  wctdef::Dataset data;
  data.id = "blobs";
  data.channels = 1;
  data.height = 8;
  data.width = 8;
  for (size_t i = 0; i < n; ++i) {
    wctdef::Rng rng(wctdef::derive_seed(seed, "data.synth", i));
    const int label = static_cast<int>(i % 4);
    const double cy = (label / 2) * 4 + 2 + rng.uniform(-0.8, 0.8);
    const double cx = (label % 2) * 4 + 2 + rng.uniform(-0.8, 0.8);
    std::vector<double> img(64);
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x) {
        const double d2 = (y - cy) * (y - cy) + (x - cx) * (x - cx);
        double v = std::exp(-d2 / 3.0) + rng.uniform(0.0, 0.08);
        img[y * 8 + x] = std::min(1.0, std::max(0.0, v));
      }
    data.images.push_back(std::move(img));
    data.labels.push_back(label);
    data.ids.push_back(static_cast<int>(i));
  }
  return data;
}

// Trained-once checkpoint shared by a test binary.
inline const wctdef::Checkpoint& tiny_trained() {
  static wctdef::Checkpoint ckpt = [] {
    wctdef::TrainHyper hyper;
    hyper.epochs = 5;
    hyper.batch_size = 16;
    return wctdef::train(tiny_config(11), blob_dataset(160, 3), hyper);
  }();
  return ckpt;
}

}  // namespace fixtures
