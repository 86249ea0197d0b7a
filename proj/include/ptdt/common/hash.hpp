#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace ptdt {

// 64-bit FNV-1a. Used for config fingerprints and checkpoint digests; not
// cryptographic.
class Fnv1a {
 public:
  void update(std::span<const std::byte> bytes) noexcept {
    for (std::byte b : bytes) {
      state_ ^= static_cast<std::uint64_t>(b);
      state_ *= 0x100000001b3ULL;
    }
  }
  void update(std::string_view s) noexcept {
    update(std::as_bytes(std::span<const char>(s.data(), s.size())));
  }
  std::uint64_t digest() const noexcept { return state_; }
  std::string hex() const;

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

std::string hash_hex(std::string_view s);

}  // namespace ptdt
