#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "wctdef/errors.hpp"

namespace wctdef {

// Little-endian binary container helpers shared by the checkpoint, gallery,
// adversarial-set and report writers.
class BinaryWriter {
 public:
  explicit BinaryWriter(const std::string& path)
      : out_(path, std::ios::binary), path_(path) {
    if (!out_) throw DataError("cannot open for writing: " + path);
  }

  void magic(const char tag[8]) { out_.write(tag, 8); }

  void u8(uint8_t v) { out_.put(static_cast<char>(v)); }

  void u32(uint32_t v) {
    char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    out_.write(b, 4);
  }

  void u64(uint64_t v) {
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    out_.write(b, 8);
  }

  void i32(int32_t v) { u32(static_cast<uint32_t>(v)); }

  void f64(double v) { u64(std::bit_cast<uint64_t>(v)); }

  void str(const std::string& s) {
    u32(static_cast<uint32_t>(s.size()));
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }

  void f64_array(const std::vector<double>& v) {
    u64(v.size());
    for (double x : v) f64(x);
  }

  void close() {
    out_.close();
    if (!out_) throw DataError("write failed: " + path_);
  }

 private:
  std::ofstream out_;
  std::string path_;
};

class BinaryReader {
 public:
  explicit BinaryReader(const std::string& path)
      : in_(path, std::ios::binary), path_(path) {
    if (!in_) throw IngestionError("cannot open: " + path);
  }

  void expect_magic(const char tag[8]) {
    char got[8];
    read(got, 8);
    if (std::memcmp(got, tag, 8) != 0)
      throw IngestionError("bad magic number in " + path_);
  }

  uint8_t u8() {
    char c;
    read(&c, 1);
    return static_cast<uint8_t>(c);
  }

  uint32_t u32() {
    char b[4];
    read(b, 4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<uint32_t>(static_cast<unsigned char>(b[i])) << (8 * i);
    return v;
  }

  uint64_t u64() {
    char b[8];
    read(b, 8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<uint64_t>(static_cast<unsigned char>(b[i])) << (8 * i);
    return v;
  }

  int32_t i32() { return static_cast<int32_t>(u32()); }

  double f64() { return std::bit_cast<double>(u64()); }

  std::string str() {
    const uint32_t n = u32();
    std::string s(n, '\0');
    read(s.data(), n);
    return s;
  }

  std::vector<double> f64_array() {
    const uint64_t n = u64();
    std::vector<double> v(n);
    for (uint64_t i = 0; i < n; ++i) v[i] = f64();
    return v;
  }

  const std::string& path() const { return path_; }

 private:
  void read(char* dst, size_t n) {
    in_.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<size_t>(in_.gcount()) != n)
      throw IngestionError("truncated file: " + path_ + " at offset " +
                           std::to_string(static_cast<long long>(in_.tellg())));
  }

  std::ifstream in_;
  std::string path_;
};

}  // namespace wctdef
