#include "wdro/rng.hpp"

namespace wdro {

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) {
  std::uint64_t h = mix64(seed);
  for (std::uint64_t k : keys) h = mix64(h ^ mix64(k + 0x632be59bd9b4e019ULL));
  return h;
}

RngStream RngStream::derive(std::uint64_t seed, StreamPurpose purpose,
                            std::initializer_list<std::uint64_t> keys) {
  std::uint64_t h = derive_seed(seed, {static_cast<std::uint64_t>(purpose)});
  for (std::uint64_t k : keys) h = mix64(h ^ mix64(k + 0x632be59bd9b4e019ULL));
  return RngStream(h);
}

}  // namespace wdro
