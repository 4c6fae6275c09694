#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace eeikd {

using Rng = std::mt19937_64;

std::uint64_t splitmix64(std::uint64_t x) noexcept;
std::uint64_t fnv1a64(std::string_view bytes) noexcept;

// Seed splitting rule: every consumer of randomness owns a named stream whose
// seed is splitmix64(master ^ fnv1a64(stream)). Streams never depend on the
// number or order of other streams.
std::uint64_t derive_seed(std::uint64_t master, std::string_view stream) noexcept;

inline Rng make_rng(std::uint64_t master, std::string_view stream) {
  return Rng(derive_seed(master, stream));
}

}  // namespace eeikd
