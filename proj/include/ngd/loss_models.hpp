#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "ngd/data_gen.hpp"
#include "ngd/model_kind.hpp"

namespace ngd::loss {

struct Shard {
  Eigen::MatrixXd x;  // n x p
  Eigen::VectorXd y;  // length n

  std::int64_t n() const { return x.rows(); }
  int p() const { return static_cast<int>(x.cols()); }
};

struct LocalSuffStats {
  Eigen::MatrixXd sigma_xx;  // n^{-1} sum x_i x_i^T
  Eigen::VectorXd sigma_xy;  // n^{-1} sum x_i y_i
};

LocalSuffStats suff_stats(const Shard& shard);

std::vector<Shard> make_shards(const datagen::Dataset& dataset,
                               const datagen::Partition& partition);
Shard whole_shard(const datagen::Dataset& dataset);

double sigmoid(double z);

// Local loss values. Linear is the potential whose gradient is the paper's
// update quantity Sigma_xx theta - Sigma_xy (i.e. half the squared-error
// loss); logistic/poisson are twice the negative log-likelihood over n,
// dropping theta-free terms.
double local_loss(ModelKind kind, const Shard& shard, const Eigen::VectorXd& theta);

// linear:   Sigma_xx theta - Sigma_xy
// logistic: (2/n) sum (sigmoid(x^T theta) - y) x
// poisson:  (2/n) sum (exp(x^T theta) - y) x; throws OverflowError when any
//           linear predictor exceeds 700.
Eigen::VectorXd local_gradient(ModelKind kind, const Shard& shard, const Eigen::VectorXd& theta);

Eigen::MatrixXd local_hessian(ModelKind kind, const Shard& shard, const Eigen::VectorXd& theta);

// Immutable bundle the engine iterates over; suff stats are precomputed and
// the linear gradient path always goes through them.
class LossModel {
 public:
  LossModel(ModelKind kind, std::vector<Shard> shards);

  ModelKind kind() const { return kind_; }
  int m_clients() const { return static_cast<int>(shards_.size()); }
  int p() const { return p_; }
  const std::vector<Shard>& shards() const { return shards_; }
  const Shard& shard(int m) const { return shards_[static_cast<std::size_t>(m)]; }
  const std::vector<LocalSuffStats>& stats() const { return stats_; }

  Eigen::VectorXd gradient(int m, const Eigen::VectorXd& theta) const;
  Eigen::MatrixXd hessian(int m, const Eigen::VectorXd& theta) const;
  double loss(int m, const Eigen::VectorXd& theta) const;

 private:
  ModelKind kind_;
  int p_;
  std::vector<Shard> shards_;
  std::vector<LocalSuffStats> stats_;
};

LossModel make_loss_model(const datagen::Dataset& dataset, const datagen::Partition& partition);

struct GlobalEstimate {
  Eigen::VectorXd theta;
  double grad_norm_at_solution = 0.0;
  int iterations_used = 0;
};

// Whole-sample reference estimator: direct solve for linear (throws
// SingularMatrixError when Sigma_xx is numerically singular), damped Newton
// for logistic/poisson (throws SolverError on non-convergence).
GlobalEstimate global_estimator(ModelKind kind, const datagen::Dataset& dataset,
                                double tolerance = 1e-10);

// 2 * min_m 1/lambda_max(H_m) over the supplied local curvature matrices.
double max_stable_lr(const std::vector<Eigen::MatrixXd>& curvatures);

// Curvatures for the contraction operator: Sigma_xx^(m) for linear, local
// Hessians at `reference` for general losses.
std::vector<Eigen::MatrixXd> local_curvatures(const LossModel& model,
                                              const Eigen::VectorXd& reference);

double max_stable_lr(const LossModel& model, const Eigen::VectorXd& reference);

}  // namespace ngd::loss
