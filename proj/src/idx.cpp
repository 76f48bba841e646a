#include "wctdef/idx.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <vector>

#include "wctdef/errors.hpp"

namespace wctdef {

namespace {

constexpr uint32_t kImagesMagic = 0x00000803;
constexpr uint32_t kLabelsMagic = 0x00000801;

class IdxReader {
 public:
  explicit IdxReader(const std::string& path) : in_(path, std::ios::binary),
                                                path_(path) {
    if (!in_) throw IngestionError("cannot open " + path);
  }

  uint32_t u32_be() {
    unsigned char b[4];
    read(reinterpret_cast<char*>(b), 4);
    return (uint32_t(b[0]) << 24) | (uint32_t(b[1]) << 16) |
           (uint32_t(b[2]) << 8) | uint32_t(b[3]);
  }

  void bytes(std::vector<unsigned char>& dst, size_t n) {
    dst.resize(n);
    read(reinterpret_cast<char*>(dst.data()), n);
  }

  size_t offset() { return static_cast<size_t>(in_.tellg()); }

 private:
  void read(char* dst, size_t n) {
    in_.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<size_t>(in_.gcount()) != n)
      throw IngestionError("truncated IDX file " + path_ + " at offset " +
                           std::to_string(offset_after_partial()));
  }

  size_t offset_after_partial() {
    in_.clear();
    return static_cast<size_t>(in_.tellg());
  }

  std::ifstream in_;
  std::string path_;
};

}  // namespace

Dataset load_idx_dataset(const std::string& images_path,
                         const std::string& labels_path) {
  IdxReader imgs(images_path);
  const uint32_t img_magic = imgs.u32_be();
  if (img_magic != kImagesMagic)
    throw IngestionError("bad magic number in " + images_path + " at offset 0");
  const uint32_t n_images = imgs.u32_be();
  const uint32_t rows = imgs.u32_be();
  const uint32_t cols = imgs.u32_be();

  IdxReader labs(labels_path);
  const uint32_t lab_magic = labs.u32_be();
  if (lab_magic != kLabelsMagic)
    throw IngestionError("bad magic number in " + labels_path + " at offset 0");
  const uint32_t n_labels = labs.u32_be();
  if (n_images != n_labels)
    throw IngestionError("image/label count mismatch: " + images_path + " has " +
                         std::to_string(n_images) + ", " + labels_path +
                         " has " + std::to_string(n_labels));

  Dataset data;
  data.id = images_path;
  data.channels = 1;
  data.height = rows;
  data.width = cols;
  data.images.reserve(n_images);
  data.labels.reserve(n_images);
  data.ids.reserve(n_images);

  std::vector<unsigned char> buf;
  for (uint32_t i = 0; i < n_images; ++i) {
    imgs.bytes(buf, size_t(rows) * cols);
    std::vector<double> pix(buf.size());
    for (size_t p = 0; p < buf.size(); ++p) pix[p] = buf[p] / 255.0;
    data.images.push_back(std::move(pix));
    data.ids.push_back(static_cast<int>(i));
  }
  std::vector<unsigned char> lab_bytes;
  labs.bytes(lab_bytes, n_labels);
  for (uint32_t i = 0; i < n_labels; ++i)
    data.labels.push_back(static_cast<int>(lab_bytes[i]));
  return data;
}

void save_idx_dataset(const Dataset& data, const std::string& images_path,
                      const std::string& labels_path) {
  std::ofstream imgs(images_path, std::ios::binary);
  std::ofstream labs(labels_path, std::ios::binary);
  if (!imgs || !labs)
    throw DataError("cannot write IDX pair " + images_path + " / " +
                    labels_path);
  auto be32 = [](std::ofstream& out, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v)};
    out.write(reinterpret_cast<char*>(b), 4);
  };
  be32(imgs, kImagesMagic);
  be32(imgs, static_cast<uint32_t>(data.size()));
  be32(imgs, static_cast<uint32_t>(data.height));
  be32(imgs, static_cast<uint32_t>(data.width));
  for (const auto& img : data.images)
    for (double v : img)
      imgs.put(static_cast<char>(std::lround(v * 255.0)));
  be32(labs, kLabelsMagic);
  be32(labs, static_cast<uint32_t>(data.size()));
  for (int l : data.labels) labs.put(static_cast<char>(l));
  if (!imgs || !labs)
    throw DataError("short write on IDX pair " + images_path);
}

}  // namespace wctdef
