#pragma once

#include <string>
#include <vector>

#include "wctdef/tensor.hpp"

namespace wctdef {

// Labeled image set, pixels normalized to [0,1]. `ids` are stable image
// identifiers (position in the source file) that survive subsetting.
struct Dataset {
  std::string id;
  size_t channels = 1, height = 0, width = 0;
  std::vector<std::vector<double>> images;
  std::vector<int> labels;
  std::vector<int> ids;

  size_t size() const { return images.size(); }
  bool empty() const { return images.empty(); }

  Tensor image_tensor(size_t i) const {
    return Tensor::from_data({channels, height, width}, images.at(i));
  }

  size_t num_classes() const {
    int mx = -1;
    for (int l : labels) mx = std::max(mx, l);
    return static_cast<size_t>(mx + 1);
  }

  Dataset subset(const std::vector<size_t>& indices) const {
    Dataset out;
    out.id = id;
    out.channels = channels;
    out.height = height;
    out.width = width;
    out.images.reserve(indices.size());
    for (size_t i : indices) {
      out.images.push_back(images.at(i));
      out.labels.push_back(labels.at(i));
      out.ids.push_back(ids.at(i));
    }
    return out;
  }

  Dataset take(size_t n) const {
    std::vector<size_t> idx(std::min(n, size()));
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    return subset(idx);
  }
};

}  // namespace wctdef
