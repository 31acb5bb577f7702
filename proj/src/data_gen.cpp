#include "ngd/data_gen.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "ngd/errors.hpp"
#include "ngd/util.hpp"

namespace ngd::datagen {

std::string to_string(Pattern p) {
  return p == Pattern::homogeneous ? "homogeneous" : "heterogeneous";
}

Pattern pattern_from_string(const std::string& s) {
  if (s == "homogeneous") return Pattern::homogeneous;
  if (s == "heterogeneous") return Pattern::heterogeneous;
  throw InvalidArgumentError("unknown partition pattern: '" + s + "'");
}

namespace {

Eigen::MatrixXd power_decay_cov(int p, double rho) {
  Eigen::MatrixXd c(p, p);
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < p; ++j) c(i, j) = std::pow(rho, std::abs(i - j));
  return c;
}

Eigen::MatrixXd equicorrelated_cov(int p, double rho) {
  Eigen::MatrixXd c = Eigen::MatrixXd::Constant(p, p, rho);
  c.diagonal().setOnes();
  return c;
}

// Lower-triangular factor; correlated rows are L * z with z i.i.d. standard
// normal, which realizes the target law exactly.
Eigen::MatrixXd chol_lower(const Eigen::MatrixXd& cov) {
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success)
    throw NumericalError("covariance factorization failed");
  return llt.matrixL();
}

void check_n(std::int64_t n_total) {
  if (n_total < 1) throw InvalidArgumentError("n_total must be >= 1");
}

}  // namespace

Dataset gen_linear(std::int64_t n_total, std::uint64_t seed, double noise_sd) {
  check_n(n_total);
  const int p = 8;
  Dataset d;
  d.kind = ModelKind::linear;
  d.seed = seed;
  d.noise_sd = noise_sd;
  d.theta0 = Eigen::VectorXd::Zero(p);
  d.theta0 << 3.0, 1.5, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0;
  Eigen::MatrixXd l = chol_lower(power_decay_cov(p, 0.5));
  d.x.resize(n_total, p);
  d.y.resize(n_total);
  util::Rng rng(seed);
  Eigen::VectorXd z(p);
  for (std::int64_t i = 0; i < n_total; ++i) {
    for (int j = 0; j < p; ++j) z(j) = rng.normal();
    d.x.row(i) = (l * z).transpose();
    double eps = rng.normal();
    d.y(i) = d.x.row(i).dot(d.theta0) + noise_sd * eps;
  }
  return d;
}

Dataset gen_logistic(std::int64_t n_total, std::uint64_t seed) {
  check_n(n_total);
  const int p = 6;
  Dataset d;
  d.kind = ModelKind::logistic;
  d.seed = seed;
  d.noise_sd = 0.0;
  d.theta0 = Eigen::VectorXd::Zero(p);
  d.theta0 << 0.5, 0.5, 0.5, 0.5, 0.5, -1.25;
  Eigen::MatrixXd l = chol_lower(equicorrelated_cov(p, 0.5));
  d.x.resize(n_total, p);
  d.y.resize(n_total);
  util::Rng rng(seed);
  Eigen::VectorXd z(p);
  for (std::int64_t i = 0; i < n_total; ++i) {
    for (int j = 0; j < p; ++j) z(j) = rng.normal();
    d.x.row(i) = (l * z).transpose();
    double prob = 1.0 / (1.0 + std::exp(-d.x.row(i).dot(d.theta0)));
    d.y(i) = rng.bernoulli(prob) ? 1.0 : 0.0;
  }
  return d;
}

Dataset gen_poisson(std::int64_t n_total, std::uint64_t seed) {
  check_n(n_total);
  const int p = 8;
  Dataset d;
  d.kind = ModelKind::poisson;
  d.seed = seed;
  d.noise_sd = 0.0;
  d.theta0 = Eigen::VectorXd::Zero(p);
  d.theta0 << 1.2, 0.6, 0.0, 0.0, 0.8, 0.0, 0.0, 0.0;
  Eigen::MatrixXd l = chol_lower(power_decay_cov(6, 0.2));
  d.x.resize(n_total, p);
  d.y.resize(n_total);
  util::Rng rng(seed);
  Eigen::VectorXd z(6);
  for (std::int64_t i = 0; i < n_total; ++i) {
    for (int j = 0; j < 6; ++j) z(j) = rng.normal();
    d.x.row(i).head(6) = (l * z).transpose();
    // Bernoulli(0.5) standardized with population constants: (b - 0.5)/0.5
    for (int j = 6; j < 8; ++j) d.x(i, j) = rng.bernoulli(0.5) ? 1.0 : -1.0;
    double lambda = std::exp(d.x.row(i).dot(d.theta0));
    d.y(i) = static_cast<double>(rng.poisson(lambda));
  }
  return d;
}

Dataset gen_linear_iid(std::int64_t n_total, int p, std::uint64_t seed, double noise_sd) {
  check_n(n_total);
  if (p < 1) throw InvalidArgumentError("p must be >= 1");
  Dataset d;
  d.kind = ModelKind::linear;
  d.seed = seed;
  d.noise_sd = noise_sd;
  d.theta0 = Eigen::VectorXd::Constant(p, 3.0 / std::sqrt(static_cast<double>(p)));
  d.x.resize(n_total, p);
  d.y.resize(n_total);
  util::Rng rng(seed);
  for (std::int64_t i = 0; i < n_total; ++i) {
    for (int j = 0; j < p; ++j) d.x(i, j) = rng.normal();
    d.y(i) = d.x.row(i).dot(d.theta0) + noise_sd * rng.normal();
  }
  return d;
}

namespace {

Partition blocks_from_order(const std::vector<std::int64_t>& order, int m_clients,
                            Pattern pattern) {
  std::int64_t n_total = static_cast<std::int64_t>(order.size());
  std::int64_t n = n_total / m_clients;
  Partition part;
  part.m_clients = m_clients;
  part.pattern = pattern;
  part.shard_indices.resize(static_cast<std::size_t>(m_clients));
  for (int m = 0; m < m_clients; ++m)
    part.shard_indices[static_cast<std::size_t>(m)].assign(order.begin() + m * n,
                                                           order.begin() + (m + 1) * n);
  return part;
}

void check_divides(std::int64_t n_total, int m_clients) {
  if (m_clients < 1) throw InvalidArgumentError("m_clients must be >= 1");
  if (n_total % m_clients != 0)
    throw InvalidArgumentError("m_clients must divide n_total (" + std::to_string(m_clients) +
                               " does not divide " + std::to_string(n_total) + ")");
}

}  // namespace

Partition partition_homogeneous(const Dataset& dataset, int m_clients, std::uint64_t seed) {
  check_divides(dataset.n_total(), m_clients);
  std::vector<std::int64_t> order(static_cast<std::size_t>(dataset.n_total()));
  std::iota(order.begin(), order.end(), 0);
  util::Rng rng(seed);
  rng.shuffle(order);
  return blocks_from_order(order, m_clients, Pattern::homogeneous);
}

Partition partition_heterogeneous(const Dataset& dataset, int m_clients) {
  check_divides(dataset.n_total(), m_clients);
  std::vector<std::int64_t> order(static_cast<std::size_t>(dataset.n_total()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::int64_t a, std::int64_t b) { return dataset.y(a) < dataset.y(b); });
  return blocks_from_order(order, m_clients, Pattern::heterogeneous);
}

void save_dataset(const Dataset& dataset, std::ostream& out, const std::string& config_digest) {
  out << "# schema=ngd.dataset.v1 config=" << config_digest << "\n";
  out << to_string(dataset.kind) << " " << dataset.n_total() << " " << dataset.p() << " "
      << dataset.seed << "\n";
  out << "theta0";
  for (int j = 0; j < dataset.p(); ++j) out << " " << util::format_double(dataset.theta0(j));
  out << "\n";
  out << "noise_sd " << util::format_double(dataset.noise_sd) << "\n";
  for (std::int64_t i = 0; i < dataset.n_total(); ++i) {
    out << util::format_double(dataset.y(i));
    for (int j = 0; j < dataset.p(); ++j) out << " " << util::format_double(dataset.x(i, j));
    out << "\n";
  }
}

Dataset load_dataset(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("# schema=ngd.dataset.v1", 0) != 0)
    throw SchemaError("ngd.dataset.v1", line);
  Dataset d;
  std::string kind;
  std::int64_t n_total = 0;
  int p = 0;
  if (!(in >> kind >> n_total >> p >> d.seed))
    throw IoError("dataset: malformed header line");
  d.kind = model_kind_from_string(kind);
  if (n_total < 1 || p < 1) throw IoError("dataset: invalid dimensions");
  std::string tag;
  d.theta0.resize(p);
  if (!(in >> tag) || tag != "theta0") throw IoError("dataset: expected theta0 line");
  for (int j = 0; j < p; ++j)
    if (!(in >> d.theta0(j))) throw IoError("dataset: malformed theta0 line");
  if (!(in >> tag) || tag != "noise_sd") throw IoError("dataset: expected noise_sd line");
  if (!(in >> d.noise_sd)) throw IoError("dataset: malformed noise_sd line");
  d.x.resize(n_total, p);
  d.y.resize(n_total);
  for (std::int64_t i = 0; i < n_total; ++i) {
    if (!(in >> d.y(i))) throw IoError("dataset: truncated at row " + std::to_string(i + 1));
    for (int j = 0; j < p; ++j)
      if (!(in >> d.x(i, j)))
        throw IoError("dataset: truncated at row " + std::to_string(i + 1));
  }
  if (d.kind == ModelKind::logistic)
    for (std::int64_t i = 0; i < n_total; ++i)
      if (d.y(i) != 0.0 && d.y(i) != 1.0)
        throw InvalidArgumentError("dataset: logistic responses must be 0/1");
  if (d.kind == ModelKind::poisson)
    for (std::int64_t i = 0; i < n_total; ++i)
      if (d.y(i) < 0.0 || d.y(i) != std::floor(d.y(i)))
        throw InvalidArgumentError("dataset: poisson responses must be nonnegative integers");
  return d;
}

void save_partition(const Partition& partition, std::ostream& out,
                    const std::string& config_digest) {
  out << "# schema=ngd.partition.v1 config=" << config_digest << "\n";
  out << partition.m_clients << " " << partition.shard_size() << " "
      << to_string(partition.pattern) << "\n";
  for (const auto& shard : partition.shard_indices) {
    for (std::size_t i = 0; i < shard.size(); ++i)
      out << (i ? " " : "") << (shard[i] + 1);  // 1-indexed on disk
    out << "\n";
  }
}

Partition load_partition(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("# schema=ngd.partition.v1", 0) != 0)
    throw SchemaError("ngd.partition.v1", line);
  Partition part;
  std::int64_t n = 0;
  std::string pattern;
  if (!(in >> part.m_clients >> n >> pattern)) throw IoError("partition: malformed header");
  part.pattern = pattern_from_string(pattern);
  if (part.m_clients < 1 || n < 1) throw IoError("partition: invalid sizes");
  part.shard_indices.assign(static_cast<std::size_t>(part.m_clients), {});
  std::vector<char> seen(static_cast<std::size_t>(part.m_clients) * static_cast<std::size_t>(n), 0);
  for (auto& shard : part.shard_indices) {
    shard.resize(static_cast<std::size_t>(n));
    for (auto& idx : shard) {
      if (!(in >> idx)) throw IoError("partition: truncated index lines");
      if (idx < 1 || idx > static_cast<std::int64_t>(seen.size()))
        throw InvalidArgumentError("partition: index out of range");
      if (seen[static_cast<std::size_t>(idx - 1)])
        throw InvalidArgumentError("partition: duplicate index " + std::to_string(idx));
      seen[static_cast<std::size_t>(idx - 1)] = 1;
      --idx;  // 0-based in memory
    }
  }
  return part;
}

}  // namespace ngd::datagen
