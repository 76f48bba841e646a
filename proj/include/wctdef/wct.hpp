#pragma once

#include <map>
#include <utility>
#include <vector>

#include "wctdef/tensor.hpp"

namespace wctdef {

struct Checkpoint;

// A layer activation [C,H,W] (or the raw image: channel count 1 works fine).
struct FeatureMap {
  size_t channels = 0, height = 0, width = 0;
  std::vector<double> data;  // row-major C*H*W

  FeatureMap() = default;
  FeatureMap(size_t c, size_t h, size_t w)
      : channels(c), height(h), width(w), data(c * h * w, 0.0) {}

  size_t spatial() const { return height * width; }
  double& at(size_t c, size_t i) { return data[c * spatial() + i]; }
  double at(size_t c, size_t i) const { return data[c * spatial() + i]; }

  static FeatureMap from_tensor(const Tensor& t);
  Tensor to_tensor() const;
};

struct SquareMatrix {
  size_t n = 0;
  std::vector<double> v;

  SquareMatrix() = default;
  explicit SquareMatrix(size_t size) : n(size), v(size * size, 0.0) {}

  double& at(size_t i, size_t j) { return v[i * n + j]; }
  double at(size_t i, size_t j) const { return v[i * n + j]; }

  static SquareMatrix identity(size_t size) {
    SquareMatrix m(size);
    for (size_t i = 0; i < size; ++i) m.at(i, i) = 1.0;
    return m;
  }
};

struct EigenConfig {
  double eig_floor = 1e-5;    // clamp applied inside both lambda^(+-1/2)
  int max_sweeps = 100;       // cyclic Jacobi sweep cap
  double off_diag_tol = 1e-12;  // relative off-diagonal convergence target
};

struct EigDecomposition {
  std::vector<double> values;  // nonincreasing
  SquareMatrix vectors;        // orthonormal columns, sign-canonicalized
};

// Per-channel mean, channel covariance over spatial samples, and its
// eigendecomposition (eigenvalues clamped at zero).
struct ChannelStats {
  std::vector<double> mean;
  SquareMatrix covariance;
  std::vector<double> eigenvalues;
  SquareMatrix eigenvectors;

  size_t channels() const { return mean.size(); }
};

// Cyclic Jacobi rotations on a symmetric matrix. The input is symmetrized as
// (M + M^T)/2; asymmetry beyond 1e-8 (relative) is rejected. Converges when
// the off-diagonal Frobenius norm drops below off_diag_tol * (1 + ||M||_F),
// else throws NumericalError carrying the residual.
EigDecomposition sym_eig(const SquareMatrix& m, const EigenConfig& cfg = {});

// Population (1/N) covariance over the channel axis; spatial positions are
// the samples. Throws DataError on non-finite activations.
ChannelStats channel_stats(const FeatureMap& f, const EigenConfig& cfg = {});

// ZCA whitening: center, then apply Phi diag(1/sqrt(max(lambda, floor))) Phi^T.
// Returns the whitened map together with the source statistics.
std::pair<FeatureMap, ChannelStats> whiten(const FeatureMap& f,
                                           const EigenConfig& cfg = {});

// Coloring: apply Phi_y diag(sqrt(max(lambda_y, floor))) Phi_y^T, add the
// target mean. Expects an (approximately) zero-mean input.
FeatureMap color(const FeatureMap& white, const ChannelStats& target,
                 const EigenConfig& cfg = {});

struct RefineResult {
  Tensor logits;
  // Activations at placement taps (post-WCT) and all deeper taps of the
  // spliced pass; taps shallower than the first placement are not included.
  std::map<int, FeatureMap> taps;
};

// Feature refinement: walks the network over `image`, and at each placement
// tap (shallowest first) replaces the activation with its whitened version
// colored by the reference image's channel statistics at the same tap, then
// continues forward. Reference activations come from one unrefined pass.
RefineResult refine(const Checkpoint& model, const Tensor& image,
                    const std::vector<int>& placements, const Tensor& reference,
                    const EigenConfig& cfg = {});

}  // namespace wctdef
