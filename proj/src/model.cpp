#include "wctdef/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "wctdef/ops.hpp"
#include "wctdef/parallel.hpp"
#include "wctdef/rng.hpp"
#include "wctdef/serialize.hpp"

namespace wctdef {

namespace {

struct ShapeState {
  bool flat = false;
  size_t c = 0, h = 0, w = 0;  // when !flat
  size_t n = 0;                // when flat

  Shape as_shape() const {
    return flat ? Shape{n} : Shape{c, h, w};
  }
};

// Output shape of every layer; throws ConfigError on a broken chain.
std::vector<ShapeState> shape_chain(const ModelConfig& cfg) {
  ShapeState s{false, cfg.in_channels, cfg.in_height, cfg.in_width, 0};
  std::vector<ShapeState> out;
  out.reserve(cfg.layers.size());
  for (size_t i = 0; i < cfg.layers.size(); ++i) {
    const LayerSpec& l = cfg.layers[i];
    std::ostringstream where;
    where << "layer " << i;
    switch (l.kind) {
      case LayerKind::Conv: {
        if (s.flat) throw ConfigError(where.str() + ": conv needs [C,H,W]");
        const size_t ph = s.h + 2 * l.padding, pw = s.w + 2 * l.padding;
        if (l.kernel > ph || l.kernel > pw || l.out_channels == 0)
          throw ConfigError(where.str() + ": bad conv geometry");
        s = ShapeState{false, l.out_channels, ph - l.kernel + 1,
                       pw - l.kernel + 1, 0};
        break;
      }
      case LayerKind::Relu:
        break;
      case LayerKind::MaxPool2:
        if (s.flat) throw ConfigError(where.str() + ": maxpool needs [C,H,W]");
        s.h = (s.h + 1) / 2;
        s.w = (s.w + 1) / 2;
        break;
      case LayerKind::Flatten:
        if (s.flat) throw ConfigError(where.str() + ": already flat");
        s = ShapeState{true, 0, 0, 0, s.c * s.h * s.w};
        break;
      case LayerKind::Linear:
        if (!s.flat) throw ConfigError(where.str() + ": linear needs flat input");
        if (l.out_features == 0)
          throw ConfigError(where.str() + ": linear with zero width");
        s.n = l.out_features;
        break;
    }
    out.push_back(s);
  }
  return out;
}

// Index into Checkpoint::params of each layer's weight (-1 if none).
std::vector<int> param_slots(const ModelConfig& cfg) {
  std::vector<int> slots(cfg.layers.size(), -1);
  int next = 0;
  for (size_t i = 0; i < cfg.layers.size(); ++i) {
    const LayerKind k = cfg.layers[i].kind;
    if (k == LayerKind::Conv || k == LayerKind::Linear) {
      slots[i] = next;
      next += 2;  // weight, bias
    }
  }
  return slots;
}

// Layer index carrying a tap id; -1 for kImageTap.
int tap_layer_index(const ModelConfig& cfg, int tap_id) {
  if (tap_id == kImageTap) return -1;
  for (size_t i = 0; i < cfg.layers.size(); ++i)
    if (cfg.layers[i].tap_id == tap_id) return static_cast<int>(i);
  throw ConfigError("unknown tap id " + std::to_string(tap_id));
}

}  // namespace

void ModelConfig::validate() const {
  if (layers.empty()) throw ConfigError("model has no layers");
  if (in_channels == 0 || in_height == 0 || in_width == 0 || n_classes == 0)
    throw ConfigError("model input/output dimensions must be positive");

  int last_tap = 0;
  for (size_t i = 0; i < layers.size(); ++i) {
    const LayerSpec& l = layers[i];
    if (l.tap_id != 0) {
      if (l.kind != LayerKind::Relu && l.kind != LayerKind::MaxPool2)
        throw ConfigError("tap " + std::to_string(l.tap_id) +
                          " must follow a relu or maxpool layer");
      if (l.tap_id <= last_tap)
        throw ConfigError("tap ids must be strictly increasing with depth");
      last_tap = l.tap_id;
    }
  }

  const LayerSpec& last = layers.back();
  if (last.kind != LayerKind::Linear || last.out_features != n_classes)
    throw ConfigError("last layer must be linear(n_classes)");

  shape_chain(*this);  // throws on inconsistent shapes
}

std::vector<int> ModelConfig::tap_ids() const {
  std::vector<int> out;
  for (const LayerSpec& l : layers)
    if (l.tap_id != 0) out.push_back(l.tap_id);
  return out;
}

ModelConfig ModelConfig::vgg_mini(size_t in_c, size_t in_h, size_t in_w,
                                  size_t n_classes, uint64_t seed) {
  ModelConfig cfg;
  cfg.in_channels = in_c;
  cfg.in_height = in_h;
  cfg.in_width = in_w;
  cfg.n_classes = n_classes;
  cfg.seed = seed;
  cfg.layers = {
      LayerSpec::conv(32),  LayerSpec::relu(),
      LayerSpec::conv(32),  LayerSpec::relu(),
      LayerSpec::maxpool2(1),
      LayerSpec::conv(64),  LayerSpec::relu(),
      LayerSpec::maxpool2(2),
      LayerSpec::conv(128), LayerSpec::relu(),
      LayerSpec::maxpool2(3),
      LayerSpec::flatten(),
      LayerSpec::linear(256), LayerSpec::relu(),
      LayerSpec::linear(n_classes),
  };
  cfg.validate();
  return cfg;
}

Checkpoint init_checkpoint(const ModelConfig& config) {
  config.validate();
  Checkpoint ckpt;
  ckpt.config = config;

  ShapeState s{false, config.in_channels, config.in_height, config.in_width, 0};
  const auto chain = shape_chain(config);
  size_t param_ordinal = 0;
  for (size_t i = 0; i < config.layers.size(); ++i) {
    const LayerSpec& l = config.layers[i];
    if (l.kind == LayerKind::Conv) {
      const size_t fan_in = s.c * l.kernel * l.kernel;
      Rng rng(derive_seed(config.seed, "model.init", param_ordinal));
      const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
      Tensor w = Tensor::zeros({l.out_channels, s.c, l.kernel, l.kernel});
      for (double& x : w.data()) x = rng.normal(0.0, stddev);
      ckpt.params.push_back(w);
      ckpt.param_names.push_back("conv" + std::to_string(i) + ".weight");
      ckpt.params.push_back(Tensor::zeros({l.out_channels}));
      ckpt.param_names.push_back("conv" + std::to_string(i) + ".bias");
      param_ordinal += 2;
    } else if (l.kind == LayerKind::Linear) {
      const size_t fan_in = s.flat ? s.n : s.c * s.h * s.w;
      Rng rng(derive_seed(config.seed, "model.init", param_ordinal));
      const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
      Tensor w = Tensor::zeros({l.out_features, fan_in});
      for (double& x : w.data()) x = rng.normal(0.0, stddev);
      ckpt.params.push_back(w);
      ckpt.param_names.push_back("linear" + std::to_string(i) + ".weight");
      ckpt.params.push_back(Tensor::zeros({l.out_features}));
      ckpt.param_names.push_back("linear" + std::to_string(i) + ".bias");
      param_ordinal += 2;
    }
    s = chain[i];
  }
  return ckpt;
}

SegmentResult run_segment(const ModelConfig& config,
                          const std::vector<Tensor>& params, int from_tap,
                          const Tensor& input, int stop_tap,
                          const std::set<int>& collect) {
  const auto chain = shape_chain(config);
  const auto slots = param_slots(config);
  const int start = tap_layer_index(config, from_tap) + 1;
  const int stop_layer =
      stop_tap == kRunToEnd ? static_cast<int>(config.layers.size()) - 1
                            : tap_layer_index(config, stop_tap);
  if (stop_layer < start)
    throw ConfigError("stop tap is not after the start tap");
  for (int t : collect) tap_layer_index(config, t);  // existence check

  const Shape expected = start == 0
                             ? Shape{config.in_channels, config.in_height,
                                     config.in_width}
                             : chain[start - 1].as_shape();
  if (input.shape() != expected)
    throw DimensionError("segment input shape does not match the tap");

  SegmentResult res;
  Tensor cur = input;
  for (int i = start; i <= stop_layer; ++i) {
    const LayerSpec& l = config.layers[i];
    switch (l.kind) {
      case LayerKind::Conv:
        cur = conv2d(cur, params[slots[i]], params[slots[i] + 1], l.padding);
        break;
      case LayerKind::Relu:
        cur = relu(cur);
        break;
      case LayerKind::MaxPool2:
        cur = maxpool2(cur);
        break;
      case LayerKind::Flatten:
        cur = reshape(cur, {cur.numel()});
        break;
      case LayerKind::Linear:
        cur = linear(params[slots[i]], cur, params[slots[i] + 1]);
        break;
    }
    if (l.tap_id != 0 && collect.count(l.tap_id)) res.taps[l.tap_id] = cur.detach();
  }
  res.output = cur;
  return res;
}

SegmentResult run_segment(const Checkpoint& model, int from_tap,
                          const Tensor& input, int stop_tap,
                          const std::set<int>& collect) {
  return run_segment(model.config, model.params, from_tap, input, stop_tap,
                     collect);
}

ForwardResult forward_with_taps(const Checkpoint& model, const Tensor& image,
                                const std::set<int>& taps) {
  auto seg = run_segment(model, kImageTap, image, kRunToEnd, taps);
  return {seg.output, std::move(seg.taps)};
}

ForwardResult forward_from(const Checkpoint& model, int tap_id,
                           const Tensor& features, const std::set<int>& taps) {
  auto seg = run_segment(model, tap_id, features, kRunToEnd, taps);
  return {seg.output, std::move(seg.taps)};
}

int predict(const Checkpoint& model, const Tensor& image) {
  auto seg = run_segment(model, kImageTap, image, kRunToEnd, {});
  const auto& logits = seg.output.data();
  size_t best = 0;
  for (size_t i = 1; i < logits.size(); ++i)
    if (logits[i] > logits[best]) best = i;
  return static_cast<int>(best);
}

double accuracy(const Checkpoint& model, const Dataset& data) {
  if (data.empty()) throw DataError("accuracy: empty dataset");
  std::vector<uint8_t> correct(data.size(), 0);
  parallel_for(data.size(), [&](size_t i) {
    correct[i] = predict(model, data.image_tensor(i)) == data.labels[i];
  });
  size_t hits = 0;
  for (uint8_t c : correct) hits += c;
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

namespace {

std::vector<Tensor> clone_params(const std::vector<Tensor>& params,
                                 bool requires_grad) {
  std::vector<Tensor> out;
  out.reserve(params.size());
  for (const Tensor& p : params) {
    Tensor c = p.detach();
    c.set_requires_grad(requires_grad);
    out.push_back(c);
  }
  return out;
}

constexpr size_t kGradStripes = 4;

}  // namespace

Checkpoint train(const ModelConfig& config, const Dataset& data,
                 const TrainHyper& hyper, const Dataset* heldout) {
  config.validate();
  if (data.empty()) throw DataError("train: empty dataset");
  for (const auto& img : data.images)
    for (double v : img)
      if (v < 0.0 || v > 1.0)
        throw DataError("train: images must be normalized to [0,1]");
  if (data.num_classes() > config.n_classes)
    throw ConfigError("train: dataset has more classes than the model");

  Checkpoint ckpt = init_checkpoint(config);
  std::vector<Tensor> master = clone_params(ckpt.params, false);
  std::vector<std::vector<double>> velocity(master.size());
  for (size_t p = 0; p < master.size(); ++p)
    velocity[p].assign(master[p].numel(), 0.0);

  // Per-stripe parameter replicas: gradients accumulate per stripe and are
  // reduced in stripe order, so results do not depend on thread scheduling.
  std::vector<std::vector<Tensor>> stripes;
  for (size_t s = 0; s < kGradStripes; ++s)
    stripes.push_back(clone_params(master, true));

  std::vector<size_t> order(data.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    Rng shuffle_rng(derive_seed(config.seed, "train.shuffle",
                                static_cast<uint64_t>(epoch)));
    for (size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[shuffle_rng.uniform_int(i)]);

    for (size_t batch_start = 0; batch_start < order.size();
         batch_start += hyper.batch_size) {
      const size_t batch_len =
          std::min(hyper.batch_size, order.size() - batch_start);

      std::vector<double> stripe_loss(kGradStripes, 0.0);
      parallel_for(
          kGradStripes,
          [&](size_t s) {
            auto& local = stripes[s];
            for (size_t p = 0; p < local.size(); ++p) {
              local[p].data() = master[p].data();
              local[p].zero_grad();
            }
            const size_t lo = batch_len * s / kGradStripes;
            const size_t hi = batch_len * (s + 1) / kGradStripes;
            for (size_t b = lo; b < hi; ++b) {
              const size_t idx = order[batch_start + b];
              Tape tape;
              auto seg = run_segment(config, local, kImageTap,
                                     data.image_tensor(idx), kRunToEnd, {});
              auto loss = softmax_xent(
                  seg.output, static_cast<size_t>(data.labels[idx]));
              stripe_loss[s] += loss.item();
              tape.backward(loss);
            }
          },
          static_cast<unsigned>(kGradStripes));

      double batch_loss = 0.0;
      for (double l : stripe_loss) batch_loss += l;
      if (!std::isfinite(batch_loss))
        throw TrainingError("training diverged (non-finite loss) at epoch " +
                                std::to_string(epoch),
                            epoch);

      const double scale = 1.0 / static_cast<double>(batch_len);
      for (size_t p = 0; p < master.size(); ++p) {
        auto& vel = velocity[p];
        auto& w = master[p].data();
        for (size_t i = 0; i < w.size(); ++i) {
          double g = 0.0;
          for (size_t s = 0; s < kGradStripes; ++s) {
            const auto& sp = stripes[s][p];
            if (sp.has_grad()) g += sp.grad()[i];
          }
          vel[i] = hyper.momentum * vel[i] + g * scale;
          w[i] -= hyper.lr * vel[i];
        }
      }
    }
  }

  ckpt.params = clone_params(master, false);
  ckpt.meta.epochs = hyper.epochs;
  ckpt.meta.hyper = hyper;
  ckpt.meta.final_train_accuracy = accuracy(ckpt, data);
  if (heldout && !heldout->empty())
    ckpt.meta.final_heldout_accuracy = accuracy(ckpt, *heldout);
  return ckpt;
}

namespace {

uint64_t hash_config_bytes(const ModelConfig& c) {
  std::ostringstream os;
  os << c.in_channels << '|' << c.in_height << '|' << c.in_width << '|'
     << c.n_classes << '|' << c.seed;
  for (const LayerSpec& l : c.layers)
    os << '|' << static_cast<int>(l.kind) << ',' << l.out_channels << ','
       << l.kernel << ',' << l.padding << ',' << l.out_features << ','
       << l.tap_id;
  return fnv1a64(os.str());
}

uint64_t hash_params(const std::vector<Tensor>& params, uint64_t h) {
  for (const Tensor& p : params)
    for (double v : p.data()) {
      uint64_t bits;
      static_assert(sizeof(bits) == sizeof(v));
      std::memcpy(&bits, &v, sizeof(bits));
      for (int i = 0; i < 8; ++i) {
        h ^= (bits >> (8 * i)) & 0xFF;
        h *= 0x100000001B3ull;
      }
    }
  return h;
}

}  // namespace

std::string Checkpoint::hash() const {
  uint64_t h = hash_params(params, hash_config_bytes(config));
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

static constexpr char kCkptMagic[9] = "WCTCKPT1";

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  BinaryWriter w(path);
  w.magic(kCkptMagic);
  w.u32(1);  // version

  const ModelConfig& c = ckpt.config;
  w.u64(c.in_channels);
  w.u64(c.in_height);
  w.u64(c.in_width);
  w.u64(c.n_classes);
  w.u64(c.seed);
  w.u64(c.layers.size());
  for (const LayerSpec& l : c.layers) {
    w.u8(static_cast<uint8_t>(l.kind));
    w.u64(l.out_channels);
    w.u64(l.kernel);
    w.u64(l.padding);
    w.u64(l.out_features);
    w.i32(l.tap_id);
  }

  w.i32(ckpt.meta.epochs);
  w.f64(ckpt.meta.final_train_accuracy);
  w.f64(ckpt.meta.final_heldout_accuracy);
  w.f64(ckpt.meta.hyper.lr);
  w.i32(ckpt.meta.hyper.epochs);
  w.u64(ckpt.meta.hyper.batch_size);
  w.f64(ckpt.meta.hyper.momentum);

  w.str(ckpt.hash());
  w.u64(ckpt.params.size());
  for (size_t p = 0; p < ckpt.params.size(); ++p) {
    w.str(ckpt.param_names[p]);
    const auto& shape = ckpt.params[p].shape();
    w.u64(shape.size());
    for (size_t d : shape) w.u64(d);
    w.f64_array(ckpt.params[p].data());
  }
  w.close();
}

Checkpoint load_checkpoint(const std::string& path) {
  BinaryReader r(path);
  r.expect_magic(kCkptMagic);
  const uint32_t version = r.u32();
  if (version != 1)
    throw IngestionError("unsupported checkpoint version in " + path);

  Checkpoint ckpt;
  ModelConfig& c = ckpt.config;
  c.in_channels = r.u64();
  c.in_height = r.u64();
  c.in_width = r.u64();
  c.n_classes = r.u64();
  c.seed = r.u64();
  const uint64_t n_layers = r.u64();
  for (uint64_t i = 0; i < n_layers; ++i) {
    LayerSpec l;
    l.kind = static_cast<LayerKind>(r.u8());
    l.out_channels = r.u64();
    l.kernel = r.u64();
    l.padding = r.u64();
    l.out_features = r.u64();
    l.tap_id = r.i32();
    c.layers.push_back(l);
  }

  ckpt.meta.epochs = r.i32();
  ckpt.meta.final_train_accuracy = r.f64();
  ckpt.meta.final_heldout_accuracy = r.f64();
  ckpt.meta.hyper.lr = r.f64();
  ckpt.meta.hyper.epochs = r.i32();
  ckpt.meta.hyper.batch_size = r.u64();
  ckpt.meta.hyper.momentum = r.f64();

  const std::string stored_hash = r.str();
  const uint64_t n_params = r.u64();
  for (uint64_t p = 0; p < n_params; ++p) {
    ckpt.param_names.push_back(r.str());
    const uint64_t ndim = r.u64();
    Shape shape(ndim);
    for (uint64_t d = 0; d < ndim; ++d) shape[d] = r.u64();
    ckpt.params.push_back(Tensor::from_data(shape, r.f64_array()));
  }

  c.validate();
  if (ckpt.hash() != stored_hash)
    throw IngestionError("checkpoint hash mismatch in " + path);
  return ckpt;
}

}  // namespace wctdef
