#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace actguard {

std::string sha256_hex(std::string_view data);
std::string sha256_hex(std::span<const std::uint8_t> data);
std::string sha256_file(const std::string& path);

std::string base64_encode(std::span<const std::uint8_t> data);

/// Incremental SHA-256 over length-prefixed fields, so ("ab","c") and ("a","bc") differ.
class FieldHasher {
 public:
  FieldHasher();
  ~FieldHasher();
  FieldHasher(const FieldHasher&) = delete;
  FieldHasher& operator=(const FieldHasher&) = delete;

  FieldHasher& add(std::string_view field);
  std::string hex();

 private:
  void* ctx_;
};

}  // namespace actguard
