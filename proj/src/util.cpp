#include "ngd/util.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <limits>
#include <mutex>
#include <thread>

#include "ngd/errors.hpp"

namespace ngd::util {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag) {
  return splitmix64(base ^ splitmix64(tag));
}

double Rng::real01() {
  return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // u1 in (0,1] so log stays finite.
  double u1 = 1.0 - real01();
  double u2 = real01();
  double r = std::sqrt(-2.0 * std::log(u1));
  double a = 2.0 * M_PI * u2;
  spare_ = r * std::sin(a);
  has_spare_ = true;
  return r * std::cos(a);
}

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw InvalidArgumentError("Rng::below: n must be >= 1");
  // 2^64 mod n; values >= 2^64 - rem would bias the low residues
  std::uint64_t rem = (std::numeric_limits<std::uint64_t>::max() % n + 1) % n;
  std::uint64_t x = gen_();
  if (rem != 0) {
    std::uint64_t bound = std::numeric_limits<std::uint64_t>::max() - rem;
    while (x > bound) x = gen_();
  }
  return x % n;
}

std::int64_t Rng::poisson(double lambda) {
  if (!(lambda >= 0.0)) throw InvalidArgumentError("Rng::poisson: lambda must be >= 0");
  std::int64_t total = 0;
  while (lambda > 256.0) {
    total += poisson(256.0);
    lambda -= 256.0;
  }
  double limit = std::exp(-lambda);
  double prod = 1.0;
  std::int64_t k = 0;
  do {
    prod *= real01();
    ++k;
  } while (prod > limit);
  return total + k - 1;
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return std::string(buf);
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf);
}

void parallel_for(std::int64_t n, int workers, const std::function<void(std::int64_t)>& fn) {
  if (n <= 0) return;
  int k = std::max(1, workers);
  if (k == 1 || n == 1) {
    for (std::int64_t i = 0; i < n; ++i) fn(i);
    return;
  }
  k = static_cast<int>(std::min<std::int64_t>(k, n));
  std::atomic<std::int64_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(k));
  for (int t = 0; t < k; ++t) {
    pool.emplace_back([&] {
      for (;;) {
        std::int64_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

double median(std::vector<double> v) {
  if (v.empty()) throw InvalidArgumentError("median: empty input");
  std::sort(v.begin(), v.end());
  std::size_t n = v.size();
  if (n % 2 == 1) return v[n / 2];
  return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

static double median_sorted(const std::vector<double>& v, std::size_t lo, std::size_t hi) {
  std::size_t n = hi - lo;
  if (n % 2 == 1) return v[lo + n / 2];
  return 0.5 * (v[lo + n / 2 - 1] + v[lo + n / 2]);
}

Quantiles quantiles5(std::vector<double> v) {
  if (v.empty()) throw InvalidArgumentError("quantiles5: empty input");
  std::sort(v.begin(), v.end());
  std::size_t n = v.size();
  Quantiles q;
  q.min = v.front();
  q.max = v.back();
  q.median = median_sorted(v, 0, n);
  std::size_t half = n / 2;
  // halves include the middle element when n is odd (Tukey hinges)
  q.q1 = median_sorted(v, 0, n % 2 == 1 ? half + 1 : half);
  q.q3 = median_sorted(v, half, n);
  return q;
}

}  // namespace ngd::util
