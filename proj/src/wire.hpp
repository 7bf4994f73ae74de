// Little-endian wire helpers shared by the binary file formats.
#ifndef ORTSAE_SRC_WIRE_HPP
#define ORTSAE_SRC_WIRE_HPP

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "ortsae/errors.hpp"

namespace ortsae::wire {

inline void put_u32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

inline void put_f32(std::string& out, float v) {
  put_u32(out, std::bit_cast<std::uint32_t>(v));
}

/// Sequential reader over a fully loaded file; every failure reports the
/// offset at which it was detected.
class Reader {
public:
  Reader(std::vector<unsigned char> bytes, std::string what)
      : bytes_(std::move(bytes)), what_(std::move(what)) {}

  std::uint64_t offset() const { return pos_; }
  std::uint64_t remaining() const { return bytes_.size() - pos_; }
  bool at_end() const { return pos_ == bytes_.size(); }

  void expect_magic(const char (&magic)[9]) {
    if (remaining() < 8) {
      throw FormatError(what_ + ": file too short for magic", pos_);
    }
    if (std::memcmp(bytes_.data() + pos_, magic, 8) != 0) {
      throw FormatError(what_ + ": bad magic", pos_);
    }
    pos_ += 8;
  }

  std::uint32_t get_u32(const std::string& field) {
    if (remaining() < 4) {
      throw FormatError(what_ + ": truncated " + field, pos_);
    }
    std::uint32_t v = static_cast<std::uint32_t>(bytes_[pos_]) |
                      (static_cast<std::uint32_t>(bytes_[pos_ + 1]) << 8) |
                      (static_cast<std::uint32_t>(bytes_[pos_ + 2]) << 16) |
                      (static_cast<std::uint32_t>(bytes_[pos_ + 3]) << 24);
    pos_ += 4;
    return v;
  }

  std::uint8_t get_u8(const std::string& field) {
    if (remaining() < 1) {
      throw FormatError(what_ + ": truncated " + field, pos_);
    }
    return bytes_[pos_++];
  }

  float get_f32(const std::string& field) {
    return std::bit_cast<float>(get_u32(field));
  }

  std::string get_bytes(std::uint64_t count, const std::string& field) {
    if (remaining() < count) {
      throw FormatError(what_ + ": truncated " + field, pos_);
    }
    std::string out(reinterpret_cast<const char*>(bytes_.data() + pos_),
                    count);
    pos_ += count;
    return out;
  }

  void fail(const std::string& message) const {
    throw FormatError(what_ + ": " + message, pos_);
  }

  void fail_at(const std::string& message, std::uint64_t offset) const {
    throw FormatError(what_ + ": " + message, offset);
  }

private:
  std::vector<unsigned char> bytes_;
  std::string what_;
  std::uint64_t pos_ = 0;
};

inline Reader open_reader(const std::string& path, const std::string& what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(what + ": cannot open \"" + path + "\"", 0);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  return Reader(std::move(bytes), what);
}

inline void write_file(const std::string& path, const std::string& payload,
                       const std::string& what) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError(what + ": cannot open \"" + path + "\"", 0);
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!out) throw FormatError(what + ": short write to \"" + path + "\"", 0);
}

}  // namespace ortsae::wire

#endif
