#include "ngd/loss_models.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <limits>

#include "ngd/errors.hpp"

namespace ngd::loss {

namespace {

constexpr double kPoissonPredictorLimit = 700.0;  // exp overflows just past this

void check_dims(const Shard& shard, const Eigen::VectorXd& theta) {
  if (shard.x.cols() != theta.size())
    throw InvalidArgumentError("theta dimension does not match shard predictors");
  if (shard.x.rows() != shard.y.size())
    throw InvalidArgumentError("shard x/y row counts differ");
  if (shard.n() < 1) throw InvalidArgumentError("shard must hold at least one observation");
}

Eigen::VectorXd poisson_rates(const Shard& shard, const Eigen::VectorXd& theta) {
  Eigen::VectorXd z = shard.x * theta;
  if ((z.array() > kPoissonPredictorLimit).any())
    throw OverflowError("poisson linear predictor exceeds " +
                        std::to_string(kPoissonPredictorLimit));
  return z.array().exp();
}

}  // namespace

LocalSuffStats suff_stats(const Shard& shard) {
  if (shard.n() < 1) throw InvalidArgumentError("shard must hold at least one observation");
  double inv_n = 1.0 / static_cast<double>(shard.n());
  return LocalSuffStats{inv_n * (shard.x.transpose() * shard.x),
                        inv_n * (shard.x.transpose() * shard.y)};
}

std::vector<Shard> make_shards(const datagen::Dataset& dataset,
                               const datagen::Partition& partition) {
  std::vector<Shard> shards;
  shards.reserve(partition.shard_indices.size());
  for (const auto& idx : partition.shard_indices) {
    Shard s;
    s.x.resize(static_cast<std::int64_t>(idx.size()), dataset.p());
    s.y.resize(static_cast<std::int64_t>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) {
      s.x.row(static_cast<std::int64_t>(i)) = dataset.x.row(idx[i]);
      s.y(static_cast<std::int64_t>(i)) = dataset.y(idx[i]);
    }
    shards.push_back(std::move(s));
  }
  return shards;
}

Shard whole_shard(const datagen::Dataset& dataset) { return Shard{dataset.x, dataset.y}; }

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  double e = std::exp(z);
  return e / (1.0 + e);
}

double local_loss(ModelKind kind, const Shard& shard, const Eigen::VectorXd& theta) {
  check_dims(shard, theta);
  double inv_n = 1.0 / static_cast<double>(shard.n());
  switch (kind) {
    case ModelKind::linear: {
      Eigen::VectorXd r = shard.y - shard.x * theta;
      return 0.5 * inv_n * r.squaredNorm();
    }
    case ModelKind::logistic: {
      Eigen::VectorXd z = shard.x * theta;
      double total = 0.0;
      for (std::int64_t i = 0; i < z.size(); ++i) {
        double zi = z(i);
        double log1pe = zi > 0.0 ? zi + std::log1p(std::exp(-zi)) : std::log1p(std::exp(zi));
        total += log1pe - shard.y(i) * zi;
      }
      return 2.0 * inv_n * total;
    }
    case ModelKind::poisson: {
      Eigen::VectorXd z = shard.x * theta;
      if ((z.array() > kPoissonPredictorLimit).any())
        throw OverflowError("poisson linear predictor exceeds " +
                            std::to_string(kPoissonPredictorLimit));
      return 2.0 * inv_n * (z.array().exp() - shard.y.array() * z.array()).sum();
    }
  }
  throw InvalidArgumentError("unknown model kind");
}

Eigen::VectorXd local_gradient(ModelKind kind, const Shard& shard, const Eigen::VectorXd& theta) {
  check_dims(shard, theta);
  double inv_n = 1.0 / static_cast<double>(shard.n());
  switch (kind) {
    case ModelKind::linear: {
      LocalSuffStats s = suff_stats(shard);
      return s.sigma_xx * theta - s.sigma_xy;
    }
    case ModelKind::logistic: {
      Eigen::VectorXd z = shard.x * theta;
      Eigen::VectorXd r(z.size());
      for (std::int64_t i = 0; i < z.size(); ++i) r(i) = sigmoid(z(i)) - shard.y(i);
      return 2.0 * inv_n * (shard.x.transpose() * r);
    }
    case ModelKind::poisson: {
      Eigen::VectorXd r = poisson_rates(shard, theta) - shard.y;
      return 2.0 * inv_n * (shard.x.transpose() * r);
    }
  }
  throw InvalidArgumentError("unknown model kind");
}

Eigen::MatrixXd local_hessian(ModelKind kind, const Shard& shard, const Eigen::VectorXd& theta) {
  check_dims(shard, theta);
  double inv_n = 1.0 / static_cast<double>(shard.n());
  switch (kind) {
    case ModelKind::linear:
      return inv_n * (shard.x.transpose() * shard.x);
    case ModelKind::logistic: {
      Eigen::VectorXd z = shard.x * theta;
      Eigen::VectorXd w(z.size());
      for (std::int64_t i = 0; i < z.size(); ++i) {
        double s = sigmoid(z(i));
        w(i) = s * (1.0 - s);
      }
      return 2.0 * inv_n * (shard.x.transpose() * w.asDiagonal() * shard.x);
    }
    case ModelKind::poisson: {
      Eigen::VectorXd w = poisson_rates(shard, theta);
      return 2.0 * inv_n * (shard.x.transpose() * w.asDiagonal() * shard.x);
    }
  }
  throw InvalidArgumentError("unknown model kind");
}

LossModel::LossModel(ModelKind kind, std::vector<Shard> shards)
    : kind_(kind), shards_(std::move(shards)) {
  if (shards_.empty()) throw InvalidArgumentError("loss model needs at least one shard");
  p_ = shards_.front().p();
  stats_.reserve(shards_.size());
  for (const auto& s : shards_) {
    if (s.p() != p_) throw InvalidArgumentError("shards disagree on predictor dimension");
    stats_.push_back(suff_stats(s));
  }
}

Eigen::VectorXd LossModel::gradient(int m, const Eigen::VectorXd& theta) const {
  if (kind_ == ModelKind::linear) {
    const auto& s = stats_[static_cast<std::size_t>(m)];
    return s.sigma_xx * theta - s.sigma_xy;
  }
  return local_gradient(kind_, shards_[static_cast<std::size_t>(m)], theta);
}

Eigen::MatrixXd LossModel::hessian(int m, const Eigen::VectorXd& theta) const {
  if (kind_ == ModelKind::linear) return stats_[static_cast<std::size_t>(m)].sigma_xx;
  return local_hessian(kind_, shards_[static_cast<std::size_t>(m)], theta);
}

double LossModel::loss(int m, const Eigen::VectorXd& theta) const {
  return local_loss(kind_, shards_[static_cast<std::size_t>(m)], theta);
}

LossModel make_loss_model(const datagen::Dataset& dataset,
                          const datagen::Partition& partition) {
  return LossModel(dataset.kind, make_shards(dataset, partition));
}

namespace {

GlobalEstimate solve_linear(const Shard& all) {
  LocalSuffStats s = suff_stats(all);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s.sigma_xx);
  if (es.info() != Eigen::Success) throw NumericalError("eigensolver failed on Sigma_xx");
  double lmin = es.eigenvalues().minCoeff();
  double lmax = es.eigenvalues().maxCoeff();
  if (!(lmin > 0.0) || lmax / lmin > 1e12)
    throw SingularMatrixError("Sigma_xx is numerically singular (lambda_min=" +
                              std::to_string(lmin) + ")");
  GlobalEstimate est;
  est.theta = s.sigma_xx.ldlt().solve(s.sigma_xy);
  est.grad_norm_at_solution = (s.sigma_xx * est.theta - s.sigma_xy).norm();
  est.iterations_used = 0;
  return est;
}

GlobalEstimate solve_newton(ModelKind kind, const Shard& all, double tolerance) {
  const int max_iterations = 200;
  const int max_halvings = 30;
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(all.p());
  for (int it = 0; it < max_iterations; ++it) {
    Eigen::VectorXd g = local_gradient(kind, all, theta);
    double gnorm = g.norm();
    if (gnorm <= tolerance)
      return GlobalEstimate{theta, gnorm, it};
    double f0 = local_loss(kind, all, theta);
    Eigen::MatrixXd h = local_hessian(kind, all, theta);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(h);
    if (ldlt.info() != Eigen::Success)
      throw SolverError("Newton step factorization failed at iteration " + std::to_string(it));
    Eigen::VectorXd step = ldlt.solve(g);
    double scale = 1.0;
    bool accepted = false;
    // ties within rounding count as decrease so near-floor steps still pass
    double accept_limit = f0 + 4.0 * std::numeric_limits<double>::epsilon() * (std::abs(f0) + 1.0);
    for (int halve = 0; halve <= max_halvings; ++halve) {
      Eigen::VectorXd candidate = theta - scale * step;
      double f1;
      try {
        f1 = local_loss(kind, all, candidate);
      } catch (const OverflowError&) {
        scale *= 0.5;
        continue;
      }
      if (f1 < accept_limit) {
        theta = candidate;
        accepted = true;
        break;
      }
      scale *= 0.5;
    }
    if (!accepted)
      throw SolverError("Newton step halving failed at iteration " + std::to_string(it) +
                        " (grad norm " + std::to_string(gnorm) + ")");
  }
  double gnorm = local_gradient(kind, all, theta).norm();
  throw SolverError("Newton did not reach tolerance " + std::to_string(tolerance) + " in " +
                    std::to_string(max_iterations) + " iterations (grad norm " +
                    std::to_string(gnorm) + ")");
}

}  // namespace

GlobalEstimate global_estimator(ModelKind kind, const datagen::Dataset& dataset,
                                double tolerance) {
  Shard all = whole_shard(dataset);
  if (kind == ModelKind::linear) return solve_linear(all);
  return solve_newton(kind, all, tolerance);
}

double max_stable_lr(const std::vector<Eigen::MatrixXd>& curvatures) {
  if (curvatures.empty()) throw InvalidArgumentError("max_stable_lr: empty curvature list");
  double worst = 0.0;
  for (const auto& h : curvatures) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
    if (es.info() != Eigen::Success)
      throw NumericalError("eigensolver failed on a local curvature matrix");
    worst = std::max(worst, es.eigenvalues().maxCoeff());
  }
  if (!(worst > 0.0)) throw NumericalError("max_stable_lr: no positive curvature found");
  return 2.0 / worst;
}

std::vector<Eigen::MatrixXd> local_curvatures(const LossModel& model,
                                              const Eigen::VectorXd& reference) {
  std::vector<Eigen::MatrixXd> out;
  out.reserve(static_cast<std::size_t>(model.m_clients()));
  for (int m = 0; m < model.m_clients(); ++m) out.push_back(model.hessian(m, reference));
  return out;
}

double max_stable_lr(const LossModel& model, const Eigen::VectorXd& reference) {
  return max_stable_lr(local_curvatures(model, reference));
}

}  // namespace ngd::loss
