#pragma once

#include <cstdint>
#include <limits>
#include <string_view>

namespace isiw {

/// SplitMix64 finaliser; a bijective 64-bit mixer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// FNV-1a hash of a label, used to key streams by name.
constexpr std::uint64_t hash_label(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Counter-based generator: the k-th output is a keyed hash of k, so a
/// stream is fully determined by its key and can be positioned freely.
/// Satisfies std::uniform_random_bit_generator.
class CounterRng {
public:
  using result_type = std::uint64_t;

  explicit CounterRng(std::uint64_t key) : key_(mix64(key)) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() {
    const std::uint64_t c = counter_++;
    return mix64(mix64(c ^ key_) + key_);
  }

  void discard(std::uint64_t k) { counter_ += k; }
  std::uint64_t position() const { return counter_; }

private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

/// Reproducibility handle: identical (root, id) always yields the same
/// random sequence. Child streams derive new ids deterministically.
class SeedStream {
public:
  SeedStream() = default;
  SeedStream(std::uint64_t root, std::uint64_t id) : root_(root), id_(id) {}

  std::uint64_t root() const { return root_; }
  std::uint64_t id() const { return id_; }

  SeedStream child(std::uint64_t tag) const {
    return {root_, mix64(mix64(id_) ^ (tag * 0xd1b54a32d192ed03ULL + 1))};
  }
  SeedStream child(std::string_view label) const {
    return child(hash_label(label));
  }

  CounterRng engine() const { return CounterRng(mix64(root_) ^ mix64(~id_)); }

  bool operator==(const SeedStream &) const = default;

private:
  std::uint64_t root_ = 0;
  std::uint64_t id_ = 0;
};

/// Uniform draw on the open interval (0, 1).
double uniform_open01(CounterRng &rng);

} // namespace isiw
