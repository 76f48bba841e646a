#include "wctdef/tensor.hpp"

namespace wctdef {

namespace {
thread_local Tape* g_active_tape = nullptr;
}

Tape::Tape() : prev_(g_active_tape) { g_active_tape = this; }

Tape::~Tape() { g_active_tape = prev_; }

Tape* Tape::active() { return g_active_tape; }

void Tape::backward(const Tensor& out) {
  if (!out.defined() || out.numel() != 1)
    throw ContractError("backward requires a scalar output");
  if (!out.requires_grad())
    throw ContractError("backward output is not on the tape");
  Tensor seed = out;
  seed.grad()[0] += 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
}

void backward(const Tensor& out) {
  Tape* tape = Tape::active();
  if (!tape) throw ContractError("backward called with no active tape");
  tape->backward(out);
}

}  // namespace wctdef
