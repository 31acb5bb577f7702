#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace ngd::util {

// Identifier written into output metadata so consumers know which random
// stream produced a file. Streams are pinned by this repo's transforms, not
// by stdlib distribution internals.
inline constexpr const char* kPrngId = "mt19937_64+boxmuller+knuth";

std::uint64_t splitmix64(std::uint64_t x);

// Derives an independent sub-stream seed from (base, tag). Used to keep
// data generation, partitioning, client placement, and topology sampling on
// separate streams even when they share a replicate seed.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag);

// Deterministic random source. All distribution transforms are explicit so
// that a (seed, call sequence) pair fully pins the produced values.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t u64() { return gen_(); }

  // Uniform on [0,1) with 53 random bits.
  double real01();

  // Standard normal via Box-Muller; generates pairs and caches the spare.
  double normal();

  // Uniform integer in [0, n), unbiased (rejection sampling). n >= 1.
  std::uint64_t below(std::uint64_t n);

  bool bernoulli(double p) { return real01() < p; }

  // Poisson(lambda) by Knuth's product method, split into chunks of at most
  // 256 so exp(-chunk) stays far above the denormal range.
  std::int64_t poisson(double lambda);

  // In-place Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// FNV-1a over bytes; used for content digests (stable across platforms).
std::uint64_t fnv1a(std::string_view bytes);
std::string hex64(std::uint64_t v);

// Shortest round-trip decimal for a double (17 significant digits).
std::string format_double(double v);

// Runs fn(0..n-1) on up to `workers` threads. Tasks must only write to
// disjoint, preallocated slots; aggregation stays with the caller so results
// are identical for any worker count.
void parallel_for(std::int64_t n, int workers, const std::function<void(std::int64_t)>& fn);

double median(std::vector<double> v);  // by value: sorts a copy

struct Quantiles {
  double min, q1, median, q3, max;
};

// Tukey hinges: q1/q3 are medians of the lower/upper halves, middle element
// included when the size is odd. For 5 values this gives the exact order
// statistics.
Quantiles quantiles5(std::vector<double> v);

}  // namespace ngd::util
