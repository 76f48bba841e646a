#include "wctdef/wct.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "wctdef/model.hpp"

namespace wctdef {

FeatureMap FeatureMap::from_tensor(const Tensor& t) {
  if (t.ndim() != 3) throw DimensionError("FeatureMap expects a [C,H,W] tensor");
  FeatureMap f(t.dim(0), t.dim(1), t.dim(2));
  f.data = t.data();
  return f;
}

Tensor FeatureMap::to_tensor() const {
  return Tensor::from_data({channels, height, width}, data);
}

namespace {

double off_diagonal_norm(const SquareMatrix& a) {
  double acc = 0.0;
  for (size_t i = 0; i < a.n; ++i)
    for (size_t j = 0; j < a.n; ++j)
      if (i != j) acc += a.at(i, j) * a.at(i, j);
  return std::sqrt(acc);
}

// Phi diag(g(lambda_k)) Phi^T
template <typename F>
SquareMatrix spectral_transform(const SquareMatrix& vectors,
                                const std::vector<double>& values, F g) {
  const size_t n = vectors.n;
  SquareMatrix t(n);
  for (size_t k = 0; k < n; ++k) {
    const double gk = g(values[k]);
    if (gk == 0.0) continue;
    for (size_t i = 0; i < n; ++i) {
      const double cik = vectors.at(i, k) * gk;
      if (cik == 0.0) continue;
      for (size_t j = 0; j < n; ++j) t.at(i, j) += cik * vectors.at(j, k);
    }
  }
  return t;
}

// out[c] = sum_j m(c,j) * (in[j] - pre[j]) + post[c], per spatial position
FeatureMap channel_apply(const FeatureMap& in, const SquareMatrix& m,
                         const std::vector<double>& pre,
                         const std::vector<double>& post) {
  const size_t c = in.channels, ns = in.spatial();
  FeatureMap out(c, in.height, in.width);
  for (size_t i = 0; i < c; ++i) {
    double* orow = out.data.data() + i * ns;
    std::fill(orow, orow + ns, post.empty() ? 0.0 : post[i]);
    for (size_t j = 0; j < c; ++j) {
      const double w = m.at(i, j);
      if (w == 0.0) continue;
      const double offset = pre.empty() ? 0.0 : pre[j];
      const double* irow = in.data.data() + j * ns;
      for (size_t s = 0; s < ns; ++s) orow[s] += w * (irow[s] - offset);
    }
  }
  return out;
}

}  // namespace

EigDecomposition sym_eig(const SquareMatrix& m, const EigenConfig& cfg) {
  const size_t n = m.n;
  if (n == 0 || m.v.size() != n * n)
    throw DimensionError("sym_eig: malformed matrix");

  double max_abs = 0.0, worst_asym = 0.0;
  SquareMatrix a(n);
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < n; ++j) {
      max_abs = std::max(max_abs, std::abs(m.at(i, j)));
      worst_asym = std::max(worst_asym, std::abs(m.at(i, j) - m.at(j, i)));
      a.at(i, j) = 0.5 * (m.at(i, j) + m.at(j, i));
    }
  if (worst_asym > 1e-8 * std::max(1.0, max_abs))
    throw DataError("sym_eig: matrix is not symmetric");

  double fro = 0.0;
  for (double x : a.v) fro += x * x;
  fro = std::sqrt(fro);
  const double target = cfg.off_diag_tol * (1.0 + fro);

  SquareMatrix vec = SquareMatrix::identity(n);
  int sweep = 0;
  while (off_diagonal_norm(a) > target) {
    if (sweep++ >= cfg.max_sweeps)
      throw NumericalError("sym_eig: Jacobi sweep cap reached",
                           off_diagonal_norm(a));
    for (size_t p = 0; p + 1 < n; ++p)
      for (size_t q = p + 1; q < n; ++q) {
        const double apq = a.at(p, q);
        if (std::abs(apq) < 1e-300) continue;
        const double theta = (a.at(q, q) - a.at(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        const double tau = s / (1.0 + c);

        const double app = a.at(p, p), aqq = a.at(q, q);
        a.at(p, p) = app - t * apq;
        a.at(q, q) = aqq + t * apq;
        a.at(p, q) = a.at(q, p) = 0.0;
        for (size_t r = 0; r < n; ++r) {
          if (r != p && r != q) {
            const double arp = a.at(r, p), arq = a.at(r, q);
            a.at(r, p) = a.at(p, r) = arp - s * (arq + tau * arp);
            a.at(r, q) = a.at(q, r) = arq + s * (arp - tau * arq);
          }
          const double vrp = vec.at(r, p), vrq = vec.at(r, q);
          vec.at(r, p) = vrp - s * (vrq + tau * vrp);
          vec.at(r, q) = vrq + s * (vrp - tau * vrq);
        }
      }
  }

  EigDecomposition out;
  out.values.resize(n);
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t i, size_t j) { return a.at(i, i) > a.at(j, j); });
  out.vectors = SquareMatrix(n);
  for (size_t k = 0; k < n; ++k) {
    const size_t src = order[k];
    out.values[k] = a.at(src, src);
    double flip = 1.0;
    for (size_t r = 0; r < n; ++r) {
      if (std::abs(vec.at(r, src)) > 1e-12) {
        flip = vec.at(r, src) > 0.0 ? 1.0 : -1.0;
        break;
      }
    }
    for (size_t r = 0; r < n; ++r) out.vectors.at(r, k) = flip * vec.at(r, src);
  }
  return out;
}

ChannelStats channel_stats(const FeatureMap& f, const EigenConfig& cfg) {
  const size_t c = f.channels, ns = f.spatial();
  if (c < 1 || ns < 1) throw DimensionError("channel_stats: empty feature map");
  for (double x : f.data)
    if (!std::isfinite(x))
      throw DataError("channel_stats: non-finite activation");

  ChannelStats st;
  st.mean.resize(c);
  for (size_t i = 0; i < c; ++i) {
    double acc = 0.0;
    const double* row = f.data.data() + i * ns;
    for (size_t s = 0; s < ns; ++s) acc += row[s];
    st.mean[i] = acc / static_cast<double>(ns);
  }

  st.covariance = SquareMatrix(c);
  for (size_t i = 0; i < c; ++i) {
    const double* ri = f.data.data() + i * ns;
    for (size_t j = i; j < c; ++j) {
      const double* rj = f.data.data() + j * ns;
      double acc = 0.0;
      for (size_t s = 0; s < ns; ++s)
        acc += (ri[s] - st.mean[i]) * (rj[s] - st.mean[j]);
      const double cov = acc / static_cast<double>(ns);
      st.covariance.at(i, j) = cov;
      st.covariance.at(j, i) = cov;
    }
  }

  auto eig = sym_eig(st.covariance, cfg);
  st.eigenvalues = std::move(eig.values);
  st.eigenvectors = std::move(eig.vectors);
  for (double& l : st.eigenvalues) l = std::max(l, 0.0);
  return st;
}

std::pair<FeatureMap, ChannelStats> whiten(const FeatureMap& f,
                                           const EigenConfig& cfg) {
  ChannelStats st = channel_stats(f, cfg);
  SquareMatrix t =
      spectral_transform(st.eigenvectors, st.eigenvalues, [&](double l) {
        return 1.0 / std::sqrt(std::max(l, cfg.eig_floor));
      });
  FeatureMap white = channel_apply(f, t, st.mean, {});
  return {std::move(white), std::move(st)};
}

FeatureMap color(const FeatureMap& white, const ChannelStats& target,
                 const EigenConfig& cfg) {
  if (white.channels != target.channels())
    throw DimensionError("color: channel count mismatch");
  const size_t ns = white.spatial();
  for (size_t i = 0; i < white.channels; ++i) {
    double acc = 0.0;
    for (size_t s = 0; s < ns; ++s) acc += white.at(i, s);
    if (std::abs(acc / static_cast<double>(ns)) >= 1e-6)
      throw ContractError("color: input is not centered");
  }
  SquareMatrix t =
      spectral_transform(target.eigenvectors, target.eigenvalues, [&](double l) {
        return std::sqrt(std::max(l, cfg.eig_floor));
      });
  return channel_apply(white, t, {}, target.mean);
}

RefineResult refine(const Checkpoint& model, const Tensor& image,
                    const std::vector<int>& placements, const Tensor& reference,
                    const EigenConfig& cfg) {
  if (placements.empty())
    throw ConfigError("refine: placement set must be nonempty");
  for (size_t i = 1; i < placements.size(); ++i)
    if (placements[i] <= placements[i - 1])
      throw ConfigError("refine: placements must be ordered by depth");

  const std::set<int> pset(placements.begin(), placements.end());
  const auto ref = forward_with_taps(model, reference, pset);
  const auto all_taps = model.config.tap_ids();

  RefineResult out;
  Tensor cur = image;
  int from = kImageTap;
  for (int k : placements) {
    std::set<int> passed;  // taps crossed before reaching k
    for (int t : all_taps)
      if (t > from && t < k) passed.insert(t);
    auto seg = run_segment(model, from, cur, k, passed);
    for (const auto& [tid, act] : seg.taps)
      out.taps[tid] = FeatureMap::from_tensor(act);

    auto [white, src_stats] = whiten(FeatureMap::from_tensor(seg.output), cfg);
    (void)src_stats;
    auto target = channel_stats(FeatureMap::from_tensor(ref.features.at(k)), cfg);
    FeatureMap refined = color(white, target, cfg);
    out.taps[k] = refined;
    cur = refined.to_tensor();
    from = k;
  }

  std::set<int> downstream;
  for (int t : all_taps)
    if (t > from) downstream.insert(t);
  auto fin = run_segment(model, from, cur, kRunToEnd, downstream);
  out.logits = fin.output;
  for (const auto& [tid, act] : fin.taps)
    out.taps[tid] = FeatureMap::from_tensor(act);
  return out;
}

}  // namespace wctdef
