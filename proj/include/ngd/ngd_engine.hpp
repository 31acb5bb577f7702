#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "ngd/loss_models.hpp"
#include "ngd/spectral.hpp"
#include "ngd/topology.hpp"

namespace ngd::engine {

struct NgdState {
  Eigen::MatrixXd theta_all;  // M x p, row m = client m's estimate
  std::int64_t iteration = 0;
};

struct RunConfig {
  double alpha = 0.0;
  std::int64_t max_iterations = 1;
  Eigen::MatrixXd init;  // empty => zeros
  std::int64_t record_every = 10;
  double divergence_guard = 1e8;
  bool early_stop = false;  // off by default: figures use fixed budgets
  double early_stop_tol = 1e-12;
  bool track_consensus_spread = true;

  void validate() const;
};

// References the run measures against. theta_star, when present, adds a
// distance-to-stable-solution track (in-memory only, not serialized).
struct RunRefs {
  Eigen::VectorXd theta0;
  Eigen::VectorXd theta_ge;
  std::optional<Eigen::MatrixXd> theta_star;
};

struct SnapshotRow {
  std::int64_t iteration = 0;
  double mse = 0.0;
  double log_mse = 0.0;
  double discrepancy_to_global = 0.0;
  double consensus_spread = 0.0;
  double dist_to_stable = std::numeric_limits<double>::quiet_NaN();
};

struct Trajectory {
  std::vector<SnapshotRow> rows;
  Eigen::MatrixXd initial_state;
  NgdState final_state;
};

struct StableSolution {
  Eigen::MatrixXd theta_star;  // M x p
  double omega_condition = 0.0;
};

struct OverparamReport {
  double radius = 0.0;
  bool converges = false;
  std::string method;
  std::string leading_term_kind;  // circle_d1 | central_client | ""
  std::optional<double> leading_term_radius;
  std::optional<double> central_alpha_threshold;  // 2(M-1)/{M l1 + (M-2) l2}
};

// Row m of the result is sum_k w_{mk} theta_k, i.e. W * Theta.
Eigen::MatrixXd neighborhood_average(const NgdState& state, const topology::WeightMatrix& w);

// One synchronous NGD iteration: neighborhood average, then a local gradient
// step per client. Throws DivergedError (with the iteration index) when any
// entry exceeds the guard.
NgdState ngd_step(const NgdState& state, const topology::WeightMatrix& w,
                  const loss::LossModel& model, double alpha, double divergence_guard = 1e8);

// Runs exactly max_iterations steps (or stops early when enabled), recording
// t = 0, every record_every-th iterate, and the final iterate.
Trajectory run(const loss::LossModel& model, const topology::WeightMatrix& w,
               const RunConfig& config, const RunRefs& refs);

// Direct solve of Omega theta* = alpha Sigma*_xy. Verifies the fixed-point
// residual and throws SingularMatrixError when the condition estimate
// exceeds 1e12.
StableSolution stable_solution_ols(const std::vector<loss::LocalSuffStats>& stats,
                                   const topology::WeightMatrix& w, double alpha);

// Full contraction analysis for (possibly) rank-deficient local second
// moments, with the leading-term checks for the two canonical topologies.
OverparamReport overparam_check(const std::vector<loss::LocalSuffStats>& stats,
                                const topology::WeightMatrix& w, double alpha,
                                const SpectralOptions& options = {});

double mse_to(const Eigen::MatrixXd& theta_all, const Eigen::VectorXd& reference);
double frobenius_to(const Eigen::MatrixXd& theta_all, const Eigen::VectorXd& reference);
double consensus_spread(const Eigen::MatrixXd& theta_all);

}  // namespace ngd::engine
