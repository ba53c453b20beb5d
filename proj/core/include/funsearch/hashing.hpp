#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace funsearch {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// 64-bit FNV-1a; stable across platforms and runs, used as the code hash.
std::uint64_t fnv1a64(std::string_view text);

/// fnv1a64 rendered as 16 lowercase hex digits.
std::string code_hash(std::string_view text);

}  // namespace funsearch
