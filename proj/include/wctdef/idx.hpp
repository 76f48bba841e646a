#pragma once

#include <string>

#include "wctdef/dataset.hpp"

namespace wctdef {

// Reads an IDX image/label file pair (the MNIST distribution format:
// big-endian magic 0x00000803 for images, 0x00000801 for labels). Pixels are
// normalized to [0,1]. Throws IngestionError naming the offset on bad magic,
// truncation, or an image/label count mismatch.
Dataset load_idx_dataset(const std::string& images_path,
                         const std::string& labels_path);

// Writes a dataset back out as an IDX pair (pixel = round(v * 255)).
void save_idx_dataset(const Dataset& data, const std::string& images_path,
                      const std::string& labels_path);

}  // namespace wctdef
