#include <doctest.h>

#include <cmath>
#include <set>

#include "ngd/util.hpp"

using namespace ngd;

TEST_CASE("rng streams are reproducible and seed-sensitive") {
  util::Rng a(42), b(42), c(43);
  bool same = true, differ = false;
  for (int i = 0; i < 100; ++i) {
    double va = a.normal();
    same = same && (va == b.normal());
    differ = differ || (va != c.normal());
  }
  CHECK(same);
  CHECK(differ);
}

TEST_CASE("real01 stays in [0,1)") {
  util::Rng rng(7);
  for (int i = 0; i < 10000; ++i) {
    double u = rng.real01();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("below covers its range uniformly enough") {
  util::Rng rng(11);
  std::vector<int> counts(5, 0);
  for (int i = 0; i < 50000; ++i) ++counts[rng.below(5)];
  for (int count : counts) CHECK(std::abs(count - 10000) < 500);  // ~5 sigma
}

TEST_CASE("normal moments") {
  util::Rng rng(3);
  double sum = 0.0, sum2 = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    double z = rng.normal();
    sum += z;
    sum2 += z * z;
  }
  CHECK(std::abs(sum / n) < 0.01);
  CHECK(std::abs(sum2 / n - 1.0) < 0.02);
}

TEST_CASE("poisson mean matches lambda, including the chunked path") {
  util::Rng rng(5);
  for (double lambda : {1.0, 700.5}) {
    double sum = 0.0;
    const int n = lambda > 100 ? 2000 : 100000;
    for (int i = 0; i < n; ++i) sum += static_cast<double>(rng.poisson(lambda));
    double se = std::sqrt(lambda / n);
    CHECK(std::abs(sum / n - lambda) < 4.0 * se);
  }
  CHECK(util::Rng(1).poisson(0.0) == 0);
}

TEST_CASE("derive_seed separates streams") {
  CHECK(util::derive_seed(42, 1) != util::derive_seed(42, 2));
  CHECK(util::derive_seed(42, 1) != util::derive_seed(43, 1));
  CHECK(util::derive_seed(42, 1) == util::derive_seed(42, 1));
}

TEST_CASE("format_double round trips") {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, 197.00502512562815, -0.0}) {
    CHECK(std::stod(util::format_double(v)) == v);
  }
}

TEST_CASE("median and quantiles") {
  CHECK(util::median({3.0, 1.0, 2.0}) == 2.0);
  CHECK(util::median({4.0, 1.0, 2.0, 3.0}) == 2.5);
  util::Quantiles q = util::quantiles5({5.0, 1.0, 4.0, 2.0, 3.0});
  CHECK(q.min == 1.0);
  CHECK(q.q1 == 2.0);
  CHECK(q.median == 3.0);
  CHECK(q.q3 == 4.0);
  CHECK(q.max == 5.0);
}

TEST_CASE("parallel_for fills all slots for any worker count") {
  for (int workers : {1, 2, 5}) {
    std::vector<int> slots(100, 0);
    util::parallel_for(100, workers, [&](std::int64_t i) { slots[i] = static_cast<int>(i) + 1; });
    for (int i = 0; i < 100; ++i) CHECK(slots[i] == i + 1);
  }
}

TEST_CASE("fnv1a digest is stable") {
  CHECK(util::fnv1a("") == 0xcbf29ce484222325ull);
  CHECK(util::fnv1a("a") != util::fnv1a("b"));
  CHECK(util::hex64(0xabcull).size() == 16);
}
