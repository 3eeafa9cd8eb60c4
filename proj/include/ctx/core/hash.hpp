#pragma once

#include <cstdint>
#include <string>

namespace ctx {

// FNV-1a 64-bit. Used for config hashes and weight-cache checksums.
inline uint64_t fnv1a64(const void* data, size_t len) {
  const auto* p = static_cast<const unsigned char*>(data);
  uint64_t h = 0xcbf29ce484222325ULL;
  for (size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline uint64_t fnv1a64(const std::string& s) {
  return fnv1a64(s.data(), s.size());
}

std::string hex64(uint64_t v);

// FNV-1a over a whole file; throws CtxError(io) if unreadable.
uint64_t hash_file(const std::string& path);

} // namespace ctx
