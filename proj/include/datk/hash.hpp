#pragma once

#include <cstddef>
#include <cstdint>

namespace datk {

// FNV-1a 64-bit. Used for golden-image fingerprints; not cryptographic.
inline uint64_t fnv1a64(const void* data, size_t len, uint64_t h = 0xcbf29ce484222325ULL) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace datk
