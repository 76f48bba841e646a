#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <vector>

#include "wctdef/errors.hpp"

namespace wctdef {

using Shape = std::vector<size_t>;

inline size_t shape_numel(const Shape& s) {
  size_t n = 1;
  for (size_t d : s) n *= d;
  return n;
}

struct TensorData {
  Shape shape;
  std::vector<double> data;
  bool requires_grad = false;
  std::vector<double> grad;  // empty until first backward touches it

  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
  }
};

// Shared-handle dense double tensor. Copying a Tensor aliases the storage;
// detach() makes an independent copy outside the gradient graph.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    return filled(std::move(shape), 0.0, requires_grad);
  }

  static Tensor filled(Shape shape, double value, bool requires_grad = false) {
    Tensor t;
    t.d_ = std::make_shared<TensorData>();
    t.d_->shape = std::move(shape);
    t.d_->data.assign(shape_numel(t.d_->shape), value);
    t.d_->requires_grad = requires_grad;
    return t;
  }

  static Tensor from_data(Shape shape, std::vector<double> values,
                          bool requires_grad = false) {
    if (shape_numel(shape) != values.size())
      throw DimensionError("tensor data length does not match shape");
    Tensor t;
    t.d_ = std::make_shared<TensorData>();
    t.d_->shape = std::move(shape);
    t.d_->data = std::move(values);
    t.d_->requires_grad = requires_grad;
    return t;
  }

  static Tensor scalar(double value, bool requires_grad = false) {
    return from_data({1}, {value}, requires_grad);
  }

  bool defined() const { return d_ != nullptr; }
  const Shape& shape() const { return d_->shape; }
  size_t numel() const { return d_->data.size(); }
  size_t dim(size_t i) const { return d_->shape.at(i); }
  size_t ndim() const { return d_->shape.size(); }

  std::vector<double>& data() { return d_->data; }
  const std::vector<double>& data() const { return d_->data; }
  double& at(size_t i) { return d_->data[i]; }
  double at(size_t i) const { return d_->data[i]; }

  double item() const {
    if (numel() != 1) throw ContractError("item() requires a 1-element tensor");
    return d_->data[0];
  }

  bool requires_grad() const { return d_->requires_grad; }
  void set_requires_grad(bool rg) { d_->requires_grad = rg; }

  bool has_grad() const { return !d_->grad.empty(); }
  std::vector<double>& grad() {
    d_->ensure_grad();
    return d_->grad;
  }
  const std::vector<double>& grad() const {
    d_->ensure_grad();
    return d_->grad;
  }
  void zero_grad() {
    if (!d_->grad.empty()) std::fill(d_->grad.begin(), d_->grad.end(), 0.0);
  }

  Tensor detach() const {
    Tensor t;
    t.d_ = std::make_shared<TensorData>();
    t.d_->shape = d_->shape;
    t.d_->data = d_->data;
    t.d_->requires_grad = false;
    return t;
  }

  TensorData* raw() const { return d_.get(); }
  std::shared_ptr<TensorData> storage() const { return d_; }

 private:
  std::shared_ptr<TensorData> d_;
};

// Define-by-run gradient tape. Constructing a Tape makes it the active tape
// for the current thread (RAII, nestable); ops record a backward closure for
// every tracked result while one is active. backward() replays the records
// in reverse execution order, which is a valid topological order, visiting
// each exactly once. One tape per thread; tapes never share tensors across
// threads except read-only leaves.
class Tape {
 public:
  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape* active();

  void record(std::function<void()> backward_step) {
    nodes_.push_back(std::move(backward_step));
  }

  size_t size() const { return nodes_.size(); }

  // Seeds d(out)/d(out) = 1 and accumulates grads for every requires_grad
  // tensor recorded on this tape. Caller resets leaf grads between passes.
  void backward(const Tensor& out);

 private:
  std::vector<std::function<void()>> nodes_;
  Tape* prev_ = nullptr;
};

// Convenience wrapper over the active tape.
void backward(const Tensor& out);

}  // namespace wctdef
