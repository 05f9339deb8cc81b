#pragma once

#include <bit>
#include <cstdint>
#include <string>

#include "core/common.hpp"

// Little-endian binary encoding helpers shared by the on-disk formats.
namespace mc::wire {

inline void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_u64(std::string& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_f64(std::string& out, double v) {
  put_u64(out, std::bit_cast<uint64_t>(v));
}

// Cursor over an in-memory buffer; throws data_error on overrun so truncated
// files surface as corruption, with `context` naming the file in the message.
class Reader {
 public:
  Reader(const std::string& buf, std::string context)
      : buf_(buf), context_(std::move(context)) {}

  uint32_t u32() { return static_cast<uint32_t>(raw(4)); }
  uint64_t u64() { return raw(8); }
  double f64() { return std::bit_cast<double>(raw(8)); }

  std::string bytes(uint64_t n) {
    need(n);
    std::string s = buf_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool exhausted() const { return pos_ == buf_.size(); }
  uint64_t remaining() const { return buf_.size() - pos_; }

 private:
  uint64_t raw(int width) {
    need(static_cast<uint64_t>(width));
    uint64_t v = 0;
    for (int i = 0; i < width; ++i)
      v |= static_cast<uint64_t>(static_cast<unsigned char>(buf_[pos_ + i]))
           << (8 * i);
    pos_ += static_cast<size_t>(width);
    return v;
  }

  void need(uint64_t n) {
    if (pos_ + n > buf_.size())
      throw data_error("truncated " + context_);
  }

  const std::string& buf_;
  std::string context_;
  size_t pos_ = 0;
};

}  // namespace mc::wire
