#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "gav/tensor.hpp"

static_assert(std::endian::native == std::endian::little,
              "file formats are little-endian; big-endian hosts unsupported");

namespace gav {

/// Little-endian binary writer over a whole-file buffer.
class BinWriter {
 public:
  void u8(uint8_t v) { buf_.push_back(v); }
  void u32(uint32_t v) { raw(&v, 4); }
  void u64(uint64_t v) { raw(&v, 8); }
  void i32(int32_t v) { raw(&v, 4); }
  void f32(float v) { raw(&v, 4); }
  void f64(double v) { raw(&v, 8); }
  void bytes(const void* p, size_t n) { raw(p, n); }
  void tag(const char t[5]) { raw(t, 4); }
  void str(const std::string& s) {
    u32(static_cast<uint32_t>(s.size()));
    raw(s.data(), s.size());
  }
  void f32_array(const Tensor& t) {
    for (int64_t i = 0; i < t.size(); ++i) f32(static_cast<float>(t[i]));
  }
  void f64_array(const Tensor& t) {
    for (int64_t i = 0; i < t.size(); ++i) f64(t[i]);
  }

  const std::vector<uint8_t>& data() const { return buf_; }
  size_t size() const { return buf_.size(); }
  /// Patch a previously written u64 at byte offset `at`.
  void patch_u64(size_t at, uint64_t v) { std::memcpy(buf_.data() + at, &v, 8); }

  void save(const std::string& path) const {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("cannot open for writing: " + path);
    f.write(reinterpret_cast<const char*>(buf_.data()),
            static_cast<std::streamsize>(buf_.size()));
    if (!f) throw Error("write failed: " + path);
  }

 private:
  void raw(const void* p, size_t n) {
    const uint8_t* b = static_cast<const uint8_t*>(p);
    buf_.insert(buf_.end(), b, b + n);
  }
  std::vector<uint8_t> buf_;
};

/// Little-endian binary reader; every read is bounds-checked and reports the
/// section it was reading when the file is truncated.
class BinReader {
 public:
  explicit BinReader(std::vector<uint8_t> data) : buf_(std::move(data)) {}

  static BinReader from_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary | std::ios::ate);
    if (!f) throw Error("cannot open: " + path);
    std::streamsize n = f.tellg();
    f.seekg(0);
    std::vector<uint8_t> buf(static_cast<size_t>(n));
    f.read(reinterpret_cast<char*>(buf.data()), n);
    if (!f) throw Error("read failed: " + path);
    return BinReader(std::move(buf));
  }

  void set_context(std::string what) { context_ = std::move(what); }

  uint8_t u8() { return *take(1); }
  uint32_t u32() { return load<uint32_t>(); }
  uint64_t u64() { return load<uint64_t>(); }
  int32_t i32() { return load<int32_t>(); }
  float f32() { return load<float>(); }
  double f64() { return load<double>(); }
  std::string tag() {
    const uint8_t* p = take(4);
    return std::string(reinterpret_cast<const char*>(p), 4);
  }
  std::string str() {
    uint32_t n = u32();
    const uint8_t* p = take(n);
    return std::string(reinterpret_cast<const char*>(p), n);
  }
  Tensor f32_tensor(Shape shape) {
    Tensor t(std::move(shape));
    for (int64_t i = 0; i < t.size(); ++i) t[i] = static_cast<double>(f32());
    return t;
  }
  Tensor f64_tensor(Shape shape) {
    Tensor t(std::move(shape));
    for (int64_t i = 0; i < t.size(); ++i) t[i] = f64();
    return t;
  }

  bool eof() const { return pos_ >= buf_.size(); }
  size_t remaining() const { return buf_.size() - pos_; }

 private:
  template <class T>
  T load() {
    T v;
    std::memcpy(&v, take(sizeof(T)), sizeof(T));
    return v;
  }
  const uint8_t* take(size_t n) {
    if (pos_ + n > buf_.size())
      throw Error("truncated file" + (context_.empty() ? "" : " in section " + context_));
    const uint8_t* p = buf_.data() + pos_;
    pos_ += n;
    return p;
  }
  std::vector<uint8_t> buf_;
  size_t pos_ = 0;
  std::string context_;
};

}  // namespace gav
