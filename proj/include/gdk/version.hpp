#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace gdk {

inline constexpr std::string_view kVersion = "0.1.0";
inline constexpr int kGeneratorVersion = 1;

// FNV-1a, used to fingerprint configs in report stanzas.
inline uint64_t fnv1a64(std::string_view data) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char ch : data) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::string hex64(uint64_t x) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[i] = digits[x & 0xf];
        x >>= 4;
    }
    return out;
}

}  // namespace gdk
