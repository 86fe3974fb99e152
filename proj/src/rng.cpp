#include "hyperq/rng.hpp"

#include "hyperq/error.hpp"

namespace hyperq {

namespace {
constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;
}

std::uint64_t Rng::mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Rng Rng::split(std::uint64_t stream) const {
  return Rng(FromKey{}, mix(key_ ^ mix(stream + kGolden)));
}

Rng Rng::split(std::string_view name) const {
  // FNV-1a over the name gives the stream id.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : name) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return split(h);
}

std::uint64_t Rng::next_u64() {
  ++counter_;
  return mix(key_ + counter_ * kGolden);
}

double Rng::uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) {
  // 53-bit draw scaled onto the closed interval.
  const double u = static_cast<double>(next_u64() >> 11) / 9007199254740991.0;
  return lo + (hi - lo) * u;
}

std::size_t Rng::uniform_index(std::size_t n) {
  if (n == 0) throw Error(ErrorCode::range, "uniform_index requires n > 0");
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  // Rejection sampling removes modulo bias.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return static_cast<std::size_t>(x % bound);
}

}  // namespace hyperq
