#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "wctdef/dataset.hpp"
#include "wctdef/tensor.hpp"

namespace wctdef {

enum class LayerKind { Conv, Relu, MaxPool2, Flatten, Linear };

struct LayerSpec {
  LayerKind kind;
  size_t out_channels = 0;  // conv
  size_t kernel = 3;
  size_t padding = 1;
  size_t out_features = 0;  // linear
  int tap_id = 0;  // > 0 names this layer's output as a tap point

  static LayerSpec conv(size_t out_channels, size_t kernel = 3,
                        size_t padding = 1) {
    return {LayerKind::Conv, out_channels, kernel, padding, 0, 0};
  }
  static LayerSpec relu(int tap = 0) {
    return {LayerKind::Relu, 0, 0, 0, 0, tap};
  }
  static LayerSpec maxpool2(int tap = 0) {
    return {LayerKind::MaxPool2, 0, 0, 0, 0, tap};
  }
  static LayerSpec flatten() { return {LayerKind::Flatten, 0, 0, 0, 0, 0}; }
  static LayerSpec linear(size_t out_features) {
    return {LayerKind::Linear, 0, 0, 0, out_features, 0};
  }
};

struct ModelConfig {
  std::vector<LayerSpec> layers;
  size_t in_channels = 1, in_height = 28, in_width = 28;
  size_t n_classes = 10;
  uint64_t seed = 0;

  // Checks the shape chain, tap placement rules (taps only after relu or
  // maxpool, ids unique and strictly increasing with depth) and that the
  // last layer is linear(n_classes). Throws ConfigError.
  void validate() const;

  std::vector<int> tap_ids() const;

  // conv(32)-relu-conv(32)-relu-pool[1]-conv(64)-relu-pool[2]-
  // conv(128)-relu-pool[3]-flatten-linear(256)-relu-linear(n_classes)
  static ModelConfig vgg_mini(size_t in_c, size_t in_h, size_t in_w,
                              size_t n_classes, uint64_t seed);
};

struct TrainHyper {
  double lr = 0.01;
  int epochs = 10;
  size_t batch_size = 64;
  double momentum = 0.9;
};

struct TrainMeta {
  int epochs = 0;
  double final_train_accuracy = -1.0;
  double final_heldout_accuracy = -1.0;
  TrainHyper hyper;
};

// Immutable after training; safe to share across threads for inference.
struct Checkpoint {
  ModelConfig config;
  std::vector<std::string> param_names;
  std::vector<Tensor> params;
  TrainMeta meta;

  // Content fingerprint over config and parameter bytes (hex string).
  std::string hash() const;
};

constexpr int kImageTap = 0;  // phi_0: the image itself
constexpr int kRunToEnd = -1;

struct SegmentResult {
  Tensor output;  // activation at the stop tap, or logits for kRunToEnd
  std::map<int, Tensor> taps;  // detached copies of requested taps
};

// Runs the layers strictly after `from_tap`'s layer (kImageTap: from the
// input) up to and including the layer carrying `stop_tap` (kRunToEnd: the
// remainder of the network). Gradients flow through `output` when a tape is
// active; collected taps are always detached.
SegmentResult run_segment(const ModelConfig& config,
                          const std::vector<Tensor>& params, int from_tap,
                          const Tensor& input, int stop_tap,
                          const std::set<int>& collect);
SegmentResult run_segment(const Checkpoint& model, int from_tap,
                          const Tensor& input, int stop_tap,
                          const std::set<int>& collect);

struct ForwardResult {
  Tensor logits;
  std::map<int, Tensor> features;
};

ForwardResult forward_with_taps(const Checkpoint& model, const Tensor& image,
                                const std::set<int>& taps);
ForwardResult forward_from(const Checkpoint& model, int tap_id,
                           const Tensor& features,
                           const std::set<int>& taps = {});

// Fresh parameters (He-normal weights, zero biases), deterministic in
// config.seed.
Checkpoint init_checkpoint(const ModelConfig& config);

int predict(const Checkpoint& model, const Tensor& image);
double accuracy(const Checkpoint& model, const Dataset& data);

// SGD with momentum over shuffled minibatches; deterministic in config.seed
// regardless of thread count. Throws TrainingError (with the epoch index)
// if the loss goes non-finite.
Checkpoint train(const ModelConfig& config, const Dataset& data,
                 const TrainHyper& hyper, const Dataset* heldout = nullptr);

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace wctdef
