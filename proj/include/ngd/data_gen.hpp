#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ngd/model_kind.hpp"

namespace ngd::datagen {

enum class Pattern { homogeneous, heterogeneous };

std::string to_string(Pattern p);
Pattern pattern_from_string(const std::string& s);

struct Dataset {
  ModelKind kind = ModelKind::linear;
  Eigen::MatrixXd x;       // N x p, one observation per row
  Eigen::VectorXd y;       // length N
  Eigen::VectorXd theta0;  // length p
  double noise_sd = 1.0;   // linear only
  std::uint64_t seed = 0;

  std::int64_t n_total() const { return x.rows(); }
  int p() const { return static_cast<int>(x.cols()); }
};

// Linear regression, p = 8, theta0 = (3, 1.5, 0, 0, 2, 0, 0, 0),
// cov(X_j1, X_j2) = 0.5^{|j1-j2|}, additive N(0, noise_sd^2) noise.
// noise_sd = 0 is the noiseless test hook.
Dataset gen_linear(std::int64_t n_total, std::uint64_t seed, double noise_sd = 1.0);

// Logistic regression, p = 6, theta0 = (1/2, ..., 1/2, -2.5/2),
// equicorrelated covariates (var 1, cov 0.5).
Dataset gen_logistic(std::int64_t n_total, std::uint64_t seed);

// Poisson regression, p = 8: six correlated normals (0.2^{|j1-j2|}) plus two
// Bernoulli(0.5) covariates standardized to +/-1; Y | X ~ Poisson(exp(X^T theta0)).
Dataset gen_poisson(std::int64_t n_total, std::uint64_t seed);

// Generic-p linear model for over-parameterized (n < p < N) studies:
// X i.i.d. standard normal, theta0 = (3/sqrt(p)) * 1.
Dataset gen_linear_iid(std::int64_t n_total, int p, std::uint64_t seed, double noise_sd = 1.0);

struct Partition {
  int m_clients = 0;
  std::vector<std::vector<std::int64_t>> shard_indices;  // M lists, 0-based, size n each
  Pattern pattern = Pattern::homogeneous;

  std::int64_t shard_size() const {
    return shard_indices.empty() ? 0 : static_cast<std::int64_t>(shard_indices.front().size());
  }
};

// Uniform random permutation split into M consecutive blocks of size N/M.
Partition partition_homogeneous(const Dataset& dataset, int m_clients, std::uint64_t seed);

// Stable sort by Y ascending (ties by original index), then consecutive blocks.
Partition partition_heterogeneous(const Dataset& dataset, int m_clients);

// Columnar text persistence (17-significant-digit decimals, lossless round
// trip). See README for the exact layout.
void save_dataset(const Dataset& dataset, std::ostream& out, const std::string& config_digest);
Dataset load_dataset(std::istream& in);
void save_partition(const Partition& partition, std::ostream& out, const std::string& config_digest);
Partition load_partition(std::istream& in);

}  // namespace ngd::datagen
