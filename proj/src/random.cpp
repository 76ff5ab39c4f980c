#include "isiw/random.hpp"

namespace isiw {

double uniform_open01(CounterRng &rng) {
  // 53 random mantissa bits, offset by half an ulp so 0 is unreachable.
  const std::uint64_t bits = rng() >> 11;
  return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

} // namespace isiw
