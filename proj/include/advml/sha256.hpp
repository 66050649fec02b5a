#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>

namespace advml {

/// Streaming SHA-256 (FIPS 180-4). Small and self-contained; checked against
/// the standard test vectors in the unit tests.
class Sha256 {
 public:
  Sha256();

  void update(const void* data, std::size_t len);
  std::array<std::uint8_t, 32> finish();

  /// Lowercase hex digest of a whole buffer.
  static std::string hex_digest(const void* data, std::size_t len);
  static std::string to_hex(const std::array<std::uint8_t, 32>& digest);

 private:
  void process_block(const std::uint8_t* block);

  std::array<std::uint32_t, 8> state_;
  std::uint64_t total_len_ = 0;
  std::array<std::uint8_t, 64> buffer_;
  std::size_t buffer_len_ = 0;
};

}  // namespace advml
