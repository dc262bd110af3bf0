#include "actguard/digest.hpp"

#include <array>
#include <fstream>
#include <iterator>
#include <vector>

#include <openssl/evp.h>

#include "actguard/error.hpp"

namespace actguard {
namespace {

std::string to_hex(const unsigned char* bytes, unsigned int n) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(n * 2);
  for (unsigned int i = 0; i < n; ++i) {
    out += kHex[bytes[i] >> 4];
    out += kHex[bytes[i] & 0xF];
  }
  return out;
}

EVP_MD_CTX* as_ctx(void* p) { return static_cast<EVP_MD_CTX*>(p); }

}  // namespace

std::string sha256_hex(std::string_view data) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  EVP_Digest(data.data(), data.size(), md.data(), &len, EVP_sha256(), nullptr);
  return to_hex(md.data(), len);
}

std::string sha256_hex(std::span<const std::uint8_t> data) {
  return sha256_hex(std::string_view(reinterpret_cast<const char*>(data.data()), data.size()));
}

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return sha256_hex(bytes);
}

std::string base64_encode(std::span<const std::uint8_t> data) {
  if (data.empty()) return {};
  std::vector<unsigned char> out(4 * ((data.size() + 2) / 3) + 1);
  const int n = EVP_EncodeBlock(out.data(), data.data(), static_cast<int>(data.size()));
  return std::string(reinterpret_cast<const char*>(out.data()), static_cast<std::size_t>(n));
}

FieldHasher::FieldHasher() : ctx_(EVP_MD_CTX_new()) {
  EVP_DigestInit_ex(as_ctx(ctx_), EVP_sha256(), nullptr);
}

FieldHasher::~FieldHasher() { EVP_MD_CTX_free(as_ctx(ctx_)); }

FieldHasher& FieldHasher::add(std::string_view field) {
  const std::string prefix = std::to_string(field.size()) + ":";
  EVP_DigestUpdate(as_ctx(ctx_), prefix.data(), prefix.size());
  EVP_DigestUpdate(as_ctx(ctx_), field.data(), field.size());
  return *this;
}

std::string FieldHasher::hex() {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  EVP_DigestFinal_ex(as_ctx(ctx_), md.data(), &len);
  return to_hex(md.data(), len);
}

}  // namespace actguard
