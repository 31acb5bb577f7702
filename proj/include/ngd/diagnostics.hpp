#pragma once

#include <Eigen/Dense>
#include <string>

#include "ngd/loss_models.hpp"
#include "ngd/ngd_engine.hpp"
#include "ngd/topology.hpp"

namespace ngd::diagnostics {

struct HeterogeneityStats {
  double se_sxx = 0.0;    // sqrt tr[ M^{-1} sum (Sigma_xx^(m) - Sigma_xx)^2 ]
  double se_sxy = 0.0;    // sqrt M^{-1} sum ||Sigma_xy^(m) - Sigma_xy||^2
  double se_grad0 = 0.0;  // sqrt M^{-1} sum ||grad_m(theta0)||^2
};

// Every scalar in the Theorem 2/3 and Corollary 2 decompositions, plus the
// two convergence-condition flags. Field names are the JSON output contract.
struct ErrorBoundReport {
  double lhs_discrepancy = 0.0;     // ||Theta_final - 1 theta_ge^T||_F / sqrt(M)
  double bound_factor = 0.0;        // SE(W) + alpha
  double hetero_factor = 0.0;       // SE(Sxx)+SE(Sxy) linear, SE(grad(theta0)) otherwise
  double kappa1 = 0.0;              // lambda_min(global Sigma_xx)
  double kappa2 = 0.0;              // max_m lambda_max(Sigma_xx^(m))
  double kappa3 = 0.0;              // min_m lambda_min(local Hessian at theta_ge)
  double kappa4 = 0.0;              // max_m lambda_max(local Hessian at theta_ge)
  double rho = 0.0;                 // lambda_max^{1/2}(Sigma_w)
  double sigma_max_w = 0.0;
  double sigma_min_I_minus_w = 0.0;
  double se_w = 0.0;
  double alpha = 0.0;
  double delta0_max = 0.0;          // max_m ||theta^(0,m) - theta_ge||
  double opt_error_at_t = 0.0;      // delta0_max (1 - alpha kappa3)^t at final t
  std::int64_t final_iteration = 0;
  double global_stat_error = 0.0;   // ||theta_ge - theta0||
  bool theorem2_condition = false;  // alpha k2 smax + SE(W) < k1 k2^{-1} smin/(4 smax)
  bool theorem3_condition = false;  // rho < 1 and a s k4 + SE(W) < 0.5 k4^{-1} k3 (1-rho)
  bool degenerate_curvature = false;  // kappa3 <= 0 at theta_ge
};

HeterogeneityStats heterogeneity(const loss::LossModel& model, const Eigen::VectorXd& theta0);

// ||Theta - 1 theta0^T||_F^2 / M
double mse(const engine::NgdState& state, const Eigen::VectorXd& theta0);

// ||Theta - 1 theta_ge^T||_F / sqrt(M)
double discrepancy_to_global(const engine::NgdState& state, const Eigen::VectorXd& theta_ge);

ErrorBoundReport bound_report(const loss::LossModel& model, const topology::WeightMatrix& w,
                              double alpha, const engine::Trajectory& trajectory,
                              const Eigen::VectorXd& theta_ge, const Eigen::VectorXd& theta0);

std::string bound_report_json(const ErrorBoundReport& report);

}  // namespace ngd::diagnostics
