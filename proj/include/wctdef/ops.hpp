#pragma once

#include "wctdef/tensor.hpp"

namespace wctdef {

// Elementwise; shapes must match exactly.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

Tensor add_scalar(const Tensor& a, double s);
Tensor mul_scalar(const Tensor& a, double s);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }

// [m,k] x [k,n] -> [m,n]
Tensor matmul(const Tensor& a, const Tensor& b);

// weight [out,in] * x [in] + bias [out] -> [out]
Tensor linear(const Tensor& weight, const Tensor& x, const Tensor& bias);

// Cross-correlation with zero padding.
// input [C_in,H,W], kernels [C_out,C_in,kh,kw], bias [C_out]
// -> [C_out, H + 2*padding - kh + 1, W + 2*padding - kw + 1]
Tensor conv2d(const Tensor& input, const Tensor& kernels, const Tensor& bias,
              size_t padding);

Tensor relu(const Tensor& x);
Tensor tanh(const Tensor& x);

// 2x2 stride-2 max pool over [C,H,W]; odd spatial dims are padded with -inf,
// so the output is [C, ceil(H/2), ceil(W/2)]. Gradient goes to the argmax,
// ties broken to the first position in row-major window order.
Tensor maxpool2(const Tensor& x);

// Same number of elements, new shape; gradient passes through.
Tensor reshape(const Tensor& x, Shape shape);

Tensor sum(const Tensor& x);

// Scalar pick of element i (flat index).
Tensor select(const Tensor& x, size_t i);

// Max over all elements except flat index i; gradient to the argmax,
// ties to the lowest index.
Tensor max_except(const Tensor& x, size_t i);

// Numerically stable cross-entropy: logsumexp(logits) - logits[label].
Tensor softmax_xent(const Tensor& logits, size_t label);

}  // namespace wctdef
