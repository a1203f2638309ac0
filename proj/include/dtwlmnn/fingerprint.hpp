#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <span>
#include <string>
#include <string_view>

namespace dtwlmnn {

// 64-bit FNV-1a; used for cache keys and provenance stamps, not security.
class Fnv1a {
 public:
  Fnv1a& bytes(const void* data, std::size_t size) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < size; ++i) {
      state_ ^= p[i];
      state_ *= 0x100000001b3ULL;
    }
    return *this;
  }
  Fnv1a& text(std::string_view s) {
    bytes(s.data(), s.size());
    return u64(s.size());
  }
  Fnv1a& u64(std::uint64_t v) { return bytes(&v, sizeof v); }
  Fnv1a& f64(double v) { return u64(std::bit_cast<std::uint64_t>(v)); }
  Fnv1a& f64s(std::span<const double> v) {
    for (double x : v) f64(x);
    return u64(v.size());
  }

  std::uint64_t value() const { return state_; }
  std::string hex() const {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(state_));
    return buf;
  }

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

}  // namespace dtwlmnn
