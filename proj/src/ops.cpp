#include "wctdef/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace wctdef {

namespace {

bool tracking(std::initializer_list<const Tensor*> inputs) {
  if (!Tape::active()) return false;
  for (const Tensor* t : inputs)
    if (t->requires_grad()) return true;
  return false;
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    std::ostringstream os;
    os << op << ": shape mismatch";
    throw DimensionError(os.str());
  }
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  Tensor out = Tensor::zeros(a.shape());
  const size_t n = a.numel();
  for (size_t i = 0; i < n; ++i) out.at(i) = a.at(i) + b.at(i);
  if (tracking({&a, &b})) {
    out.set_requires_grad(true);
    Tape::active()->record([a, b, out] {
      const auto& g = out.grad();
      if (a.requires_grad()) {
        auto& ga = const_cast<Tensor&>(a).grad();
        for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (b.requires_grad()) {
        auto& gb = const_cast<Tensor&>(b).grad();
        for (size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
      }
    });
  }
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  Tensor out = Tensor::zeros(a.shape());
  const size_t n = a.numel();
  for (size_t i = 0; i < n; ++i) out.at(i) = a.at(i) - b.at(i);
  if (tracking({&a, &b})) {
    out.set_requires_grad(true);
    Tape::active()->record([a, b, out] {
      const auto& g = out.grad();
      if (a.requires_grad()) {
        auto& ga = const_cast<Tensor&>(a).grad();
        for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (b.requires_grad()) {
        auto& gb = const_cast<Tensor&>(b).grad();
        for (size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
      }
    });
  }
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mul");
  Tensor out = Tensor::zeros(a.shape());
  const size_t n = a.numel();
  for (size_t i = 0; i < n; ++i) out.at(i) = a.at(i) * b.at(i);
  if (tracking({&a, &b})) {
    out.set_requires_grad(true);
    Tape::active()->record([a, b, out] {
      const auto& g = out.grad();
      if (a.requires_grad()) {
        auto& ga = const_cast<Tensor&>(a).grad();
        for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * b.at(i);
      }
      if (b.requires_grad()) {
        auto& gb = const_cast<Tensor&>(b).grad();
        for (size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * a.at(i);
      }
    });
  }
  return out;
}

Tensor add_scalar(const Tensor& a, double s) {
  Tensor out = Tensor::zeros(a.shape());
  for (size_t i = 0; i < a.numel(); ++i) out.at(i) = a.at(i) + s;
  if (tracking({&a})) {
    out.set_requires_grad(true);
    Tape::active()->record([a, out] {
      const auto& g = out.grad();
      auto& ga = const_cast<Tensor&>(a).grad();
      for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    });
  }
  return out;
}

Tensor mul_scalar(const Tensor& a, double s) {
  Tensor out = Tensor::zeros(a.shape());
  for (size_t i = 0; i < a.numel(); ++i) out.at(i) = a.at(i) * s;
  if (tracking({&a})) {
    out.set_requires_grad(true);
    Tape::active()->record([a, out, s] {
      const auto& g = out.grad();
      auto& ga = const_cast<Tensor&>(a).grad();
      for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * s;
    });
  }
  return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(0))
    throw DimensionError("matmul: inner dimensions do not agree");
  const size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor out = Tensor::zeros({m, n});
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  double* po = out.data().data();
  for (size_t i = 0; i < m; ++i) {
    for (size_t l = 0; l < k; ++l) {
      const double av = pa[i * k + l];
      const double* brow = pb + l * n;
      double* orow = po + i * n;
      for (size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
  if (tracking({&a, &b})) {
    out.set_requires_grad(true);
    Tape::active()->record([a, b, out, m, k, n] {
      const double* g = out.grad().data();
      if (a.requires_grad()) {
        double* ga = const_cast<Tensor&>(a).grad().data();
        const double* pb = b.data().data();
        for (size_t i = 0; i < m; ++i)
          for (size_t l = 0; l < k; ++l) {
            double acc = 0.0;
            const double* grow = g + i * n;
            const double* brow = pb + l * n;
            for (size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
            ga[i * k + l] += acc;
          }
      }
      if (b.requires_grad()) {
        double* gb = const_cast<Tensor&>(b).grad().data();
        const double* pa = a.data().data();
        for (size_t i = 0; i < m; ++i)
          for (size_t l = 0; l < k; ++l) {
            const double av = pa[i * k + l];
            const double* grow = g + i * n;
            double* gbrow = gb + l * n;
            for (size_t j = 0; j < n; ++j) gbrow[j] += av * grow[j];
          }
      }
    });
  }
  return out;
}

Tensor linear(const Tensor& weight, const Tensor& x, const Tensor& bias) {
  if (weight.ndim() != 2 || x.ndim() != 1 || bias.ndim() != 1)
    throw DimensionError("linear: expected weight [out,in], x [in], bias [out]");
  const size_t out_n = weight.dim(0), in_n = weight.dim(1);
  if (x.dim(0) != in_n || bias.dim(0) != out_n)
    throw DimensionError("linear: dimension mismatch");
  Tensor out = Tensor::zeros({out_n});
  const double* pw = weight.data().data();
  const double* px = x.data().data();
  for (size_t i = 0; i < out_n; ++i) {
    double acc = bias.at(i);
    const double* wrow = pw + i * in_n;
    for (size_t j = 0; j < in_n; ++j) acc += wrow[j] * px[j];
    out.at(i) = acc;
  }
  if (tracking({&weight, &x, &bias})) {
    out.set_requires_grad(true);
    Tape::active()->record([weight, x, bias, out, out_n, in_n] {
      const auto& g = out.grad();
      if (weight.requires_grad()) {
        double* gw = const_cast<Tensor&>(weight).grad().data();
        const double* px = x.data().data();
        for (size_t i = 0; i < out_n; ++i) {
          const double gi = g[i];
          double* gwrow = gw + i * in_n;
          for (size_t j = 0; j < in_n; ++j) gwrow[j] += gi * px[j];
        }
      }
      if (x.requires_grad()) {
        double* gx = const_cast<Tensor&>(x).grad().data();
        const double* pw = weight.data().data();
        for (size_t i = 0; i < out_n; ++i) {
          const double gi = g[i];
          const double* wrow = pw + i * in_n;
          for (size_t j = 0; j < in_n; ++j) gx[j] += gi * wrow[j];
        }
      }
      if (bias.requires_grad()) {
        auto& gb = const_cast<Tensor&>(bias).grad();
        for (size_t i = 0; i < out_n; ++i) gb[i] += g[i];
      }
    });
  }
  return out;
}

namespace {

// Copies [C,H,W] into a zero-padded [C,H+2p,W+2p] buffer.
std::vector<double> pad_chw(const double* src, size_t c, size_t h, size_t w,
                            size_t p) {
  const size_t ph = h + 2 * p, pw = w + 2 * p;
  std::vector<double> dst(c * ph * pw, 0.0);
  for (size_t ci = 0; ci < c; ++ci)
    for (size_t y = 0; y < h; ++y) {
      const double* s = src + (ci * h + y) * w;
      double* d = dst.data() + (ci * ph + y + p) * pw + p;
      std::copy(s, s + w, d);
    }
  return dst;
}

// out (oh x ow) += cross-correlation of one padded input plane with one 3x3
// kernel slice; all nine taps stay in registers.
void corr3x3_acc(const double* __restrict in, size_t pw,
                 const double* __restrict k9, double* __restrict out,
                 size_t oh, size_t ow) {
  const double k0 = k9[0], k1 = k9[1], k2 = k9[2];
  const double k3 = k9[3], k4 = k9[4], k5 = k9[5];
  const double k6 = k9[6], k7 = k9[7], k8 = k9[8];
  for (size_t oy = 0; oy < oh; ++oy) {
    const double* r0 = in + oy * pw;
    const double* r1 = r0 + pw;
    const double* r2 = r1 + pw;
    double* o = out + oy * ow;
    for (size_t ox = 0; ox < ow; ++ox) {
      o[ox] += k0 * r0[ox] + k1 * r0[ox + 1] + k2 * r0[ox + 2] +
               k3 * r1[ox] + k4 * r1[ox + 1] + k5 * r1[ox + 2] +
               k6 * r2[ox] + k7 * r2[ox + 1] + k8 * r2[ox + 2];
    }
  }
}

void corr_generic_acc(const double* __restrict in, size_t pw,
                      const double* __restrict k, size_t kh, size_t kw,
                      double* __restrict out, size_t oh, size_t ow) {
  for (size_t ky = 0; ky < kh; ++ky)
    for (size_t kx = 0; kx < kw; ++kx) {
      const double kv = k[ky * kw + kx];
      if (kv == 0.0) continue;
      for (size_t oy = 0; oy < oh; ++oy) {
        const double* irow = in + (oy + ky) * pw + kx;
        double* orow = out + oy * ow;
        for (size_t ox = 0; ox < ow; ++ox) orow[ox] += kv * irow[ox];
      }
    }
}

void corr_acc(const double* in, size_t pw, const double* k, size_t kh,
              size_t kw, double* out, size_t oh, size_t ow) {
  if (kh == 3 && kw == 3)
    corr3x3_acc(in, pw, k, out, oh, ow);
  else
    corr_generic_acc(in, pw, k, kh, kw, out, oh, ow);
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernels, const Tensor& bias,
              size_t padding) {
  if (input.ndim() != 3 || kernels.ndim() != 4 || bias.ndim() != 1)
    throw DimensionError("conv2d: expected input [C,H,W], kernels [O,C,kh,kw]");
  const size_t cin = input.dim(0), h = input.dim(1), w = input.dim(2);
  const size_t cout = kernels.dim(0), kh = kernels.dim(2), kw = kernels.dim(3);
  if (kernels.dim(1) != cin)
    throw DimensionError("conv2d: kernel channel count does not match input");
  if (bias.dim(0) != cout) throw DimensionError("conv2d: bias size mismatch");
  const size_t ph = h + 2 * padding, pw = w + 2 * padding;
  if (kh > ph || kw > pw)
    throw DimensionError("conv2d: kernel larger than padded input");
  const size_t oh = ph - kh + 1, ow = pw - kw + 1;

  auto padded = pad_chw(input.data().data(), cin, h, w, padding);
  Tensor out = Tensor::zeros({cout, oh, ow});
  const double* pk = kernels.data().data();
  double* po = out.data().data();
  for (size_t co = 0; co < cout; ++co) {
    double* omap = po + co * oh * ow;
    std::fill(omap, omap + oh * ow, bias.at(co));
    for (size_t ci = 0; ci < cin; ++ci)
      corr_acc(padded.data() + ci * ph * pw, pw, pk + (co * cin + ci) * kh * kw,
               kh, kw, omap, oh, ow);
  }

  if (tracking({&input, &kernels, &bias})) {
    out.set_requires_grad(true);
    auto saved_pad = std::make_shared<std::vector<double>>(std::move(padded));
    Tape::active()->record([input, kernels, bias, out, saved_pad, cin, h, w,
                            cout, kh, kw, padding, ph, pw, oh, ow] {
      const double* g = out.grad().data();
      if (bias.requires_grad()) {
        auto& gb = const_cast<Tensor&>(bias).grad();
        for (size_t co = 0; co < cout; ++co) {
          double acc = 0.0;
          const double* gmap = g + co * oh * ow;
          for (size_t i = 0; i < oh * ow; ++i) acc += gmap[i];
          gb[co] += acc;
        }
      }
      if (kernels.requires_grad()) {
        double* gk = const_cast<Tensor&>(kernels).grad().data();
        for (size_t co = 0; co < cout; ++co) {
          const double* gmap = g + co * oh * ow;
          for (size_t ci = 0; ci < cin; ++ci) {
            const double* imap = saved_pad->data() + ci * ph * pw;
            double* gslice = gk + (co * cin + ci) * kh * kw;
            for (size_t ky = 0; ky < kh; ++ky)
              for (size_t kx = 0; kx < kw; ++kx) {
                double acc = 0.0;
                for (size_t oy = 0; oy < oh; ++oy) {
                  const double* irow = imap + (oy + ky) * pw + kx;
                  const double* grow = gmap + oy * ow;
                  for (size_t ox = 0; ox < ow; ++ox) acc += grow[ox] * irow[ox];
                }
                gslice[ky * kw + kx] += acc;
              }
          }
        }
      }
      if (input.requires_grad()) {
        // input grad = full correlation of the output grad with the
        // 180-degree-rotated kernels
        const size_t gph = oh + 2 * (kh - 1), gpw = ow + 2 * (kw - 1);
        auto gfull = pad_chw(g, cout, oh, ow, kh - 1);
        std::vector<double> flipped(kh * kw);
        std::vector<double> gpad(cin * ph * pw, 0.0);
        const double* pk = kernels.data().data();
        for (size_t ci = 0; ci < cin; ++ci) {
          double* gimap = gpad.data() + ci * ph * pw;
          for (size_t co = 0; co < cout; ++co) {
            const double* kslice = pk + (co * cin + ci) * kh * kw;
            for (size_t i = 0; i < kh * kw; ++i)
              flipped[i] = kslice[kh * kw - 1 - i];
            corr_acc(gfull.data() + co * gph * gpw, gpw, flipped.data(), kh, kw,
                     gimap, ph, pw);
          }
        }
        double* gi = const_cast<Tensor&>(input).grad().data();
        for (size_t ci = 0; ci < cin; ++ci)
          for (size_t y = 0; y < h; ++y) {
            const double* s = gpad.data() + (ci * ph + y + padding) * pw + padding;
            double* d = gi + (ci * h + y) * w;
            for (size_t x = 0; x < w; ++x) d[x] += s[x];
          }
      }
    });
  }
  return out;
}

Tensor relu(const Tensor& x) {
  Tensor out = Tensor::zeros(x.shape());
  for (size_t i = 0; i < x.numel(); ++i) out.at(i) = x.at(i) > 0.0 ? x.at(i) : 0.0;
  if (tracking({&x})) {
    out.set_requires_grad(true);
    Tape::active()->record([x, out] {
      const auto& g = out.grad();
      auto& gx = const_cast<Tensor&>(x).grad();
      for (size_t i = 0; i < g.size(); ++i)
        if (x.at(i) > 0.0) gx[i] += g[i];
    });
  }
  return out;
}

Tensor tanh(const Tensor& x) {
  Tensor out = Tensor::zeros(x.shape());
  for (size_t i = 0; i < x.numel(); ++i) out.at(i) = std::tanh(x.at(i));
  if (tracking({&x})) {
    out.set_requires_grad(true);
    Tape::active()->record([x, out] {
      const auto& g = out.grad();
      auto& gx = const_cast<Tensor&>(x).grad();
      for (size_t i = 0; i < g.size(); ++i) {
        const double t = out.at(i);
        gx[i] += g[i] * (1.0 - t * t);
      }
    });
  }
  return out;
}

Tensor maxpool2(const Tensor& x) {
  if (x.ndim() != 3) throw DimensionError("maxpool2: expected [C,H,W]");
  const size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  const size_t oh = (h + 1) / 2, ow = (w + 1) / 2;
  Tensor out = Tensor::zeros({c, oh, ow});
  auto argmax = std::make_shared<std::vector<size_t>>(c * oh * ow);
  for (size_t ci = 0; ci < c; ++ci)
    for (size_t oy = 0; oy < oh; ++oy)
      for (size_t ox = 0; ox < ow; ++ox) {
        double best = -std::numeric_limits<double>::infinity();
        size_t best_idx = 0;
        for (size_t dy = 0; dy < 2; ++dy)
          for (size_t dx = 0; dx < 2; ++dx) {
            const size_t y = 2 * oy + dy, xx = 2 * ox + dx;
            if (y >= h || xx >= w) continue;  // -inf padding for odd dims
            const size_t idx = (ci * h + y) * w + xx;
            if (x.at(idx) > best) {
              best = x.at(idx);
              best_idx = idx;
            }
          }
        out.at((ci * oh + oy) * ow + ox) = best;
        (*argmax)[(ci * oh + oy) * ow + ox] = best_idx;
      }
  if (tracking({&x})) {
    out.set_requires_grad(true);
    Tape::active()->record([x, out, argmax] {
      const auto& g = out.grad();
      auto& gx = const_cast<Tensor&>(x).grad();
      for (size_t i = 0; i < g.size(); ++i) gx[(*argmax)[i]] += g[i];
    });
  }
  return out;
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel())
    throw DimensionError("reshape: element count mismatch");
  Tensor out = Tensor::from_data(std::move(shape), x.data());
  if (tracking({&x})) {
    out.set_requires_grad(true);
    Tape::active()->record([x, out] {
      const auto& g = out.grad();
      auto& gx = const_cast<Tensor&>(x).grad();
      for (size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    });
  }
  return out;
}

Tensor sum(const Tensor& x) {
  double acc = 0.0;
  for (size_t i = 0; i < x.numel(); ++i) acc += x.at(i);
  Tensor out = Tensor::scalar(acc);
  if (tracking({&x})) {
    out.set_requires_grad(true);
    Tape::active()->record([x, out] {
      const double g = out.grad()[0];
      auto& gx = const_cast<Tensor&>(x).grad();
      for (size_t i = 0; i < gx.size(); ++i) gx[i] += g;
    });
  }
  return out;
}

Tensor select(const Tensor& x, size_t i) {
  if (i >= x.numel()) throw IndexError("select: index out of range");
  Tensor out = Tensor::scalar(x.at(i));
  if (tracking({&x})) {
    out.set_requires_grad(true);
    Tape::active()->record([x, out, i] {
      const_cast<Tensor&>(x).grad()[i] += out.grad()[0];
    });
  }
  return out;
}

Tensor max_except(const Tensor& x, size_t skip) {
  if (skip >= x.numel()) throw IndexError("max_except: index out of range");
  if (x.numel() < 2)
    throw ContractError("max_except needs at least two elements");
  size_t best_idx = skip == 0 ? 1 : 0;
  for (size_t i = 0; i < x.numel(); ++i) {
    if (i == skip) continue;
    if (x.at(i) > x.at(best_idx)) best_idx = i;
  }
  Tensor out = Tensor::scalar(x.at(best_idx));
  if (tracking({&x})) {
    out.set_requires_grad(true);
    Tape::active()->record([x, out, best_idx] {
      const_cast<Tensor&>(x).grad()[best_idx] += out.grad()[0];
    });
  }
  return out;
}

Tensor softmax_xent(const Tensor& logits, size_t label) {
  if (logits.ndim() != 1)
    throw DimensionError("softmax_xent: logits must be 1-D");
  const size_t n = logits.numel();
  if (label >= n) throw IndexError("softmax_xent: label out of range");
  double mx = logits.at(0);
  for (size_t i = 1; i < n; ++i) mx = std::max(mx, logits.at(i));
  double sum_exp = 0.0;
  for (size_t i = 0; i < n; ++i) sum_exp += std::exp(logits.at(i) - mx);
  const double lse = mx + std::log(sum_exp);
  Tensor out = Tensor::scalar(lse - logits.at(label));
  if (tracking({&logits})) {
    out.set_requires_grad(true);
    auto probs = std::make_shared<std::vector<double>>(n);
    for (size_t i = 0; i < n; ++i)
      (*probs)[i] = std::exp(logits.at(i) - mx) / sum_exp;
    Tape::active()->record([logits, out, probs, label] {
      const double g = out.grad()[0];
      auto& gl = const_cast<Tensor&>(logits).grad();
      for (size_t i = 0; i < gl.size(); ++i) {
        double delta = (*probs)[i] - (i == label ? 1.0 : 0.0);
        gl[i] += g * delta;
      }
    });
  }
  return out;
}

}  // namespace wctdef
