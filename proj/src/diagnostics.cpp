#include "ngd/diagnostics.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

#include "ngd/errors.hpp"

namespace ngd::diagnostics {

HeterogeneityStats heterogeneity(const loss::LossModel& model, const Eigen::VectorXd& theta0) {
  int m_clients = model.m_clients();
  int p = model.p();
  Eigen::MatrixXd mean_xx = Eigen::MatrixXd::Zero(p, p);
  Eigen::VectorXd mean_xy = Eigen::VectorXd::Zero(p);
  for (const auto& s : model.stats()) {
    mean_xx += s.sigma_xx;
    mean_xy += s.sigma_xy;
  }
  mean_xx /= m_clients;
  mean_xy /= m_clients;

  double acc_xx = 0.0, acc_xy = 0.0, acc_grad = 0.0;
  for (int m = 0; m < m_clients; ++m) {
    const auto& s = model.stats()[static_cast<std::size_t>(m)];
    Eigen::MatrixXd dev = s.sigma_xx - mean_xx;
    acc_xx += (dev * dev).trace();
    acc_xy += (s.sigma_xy - mean_xy).squaredNorm();
    acc_grad += model.gradient(m, theta0).squaredNorm();
  }
  HeterogeneityStats out;
  out.se_sxx = std::sqrt(acc_xx / m_clients);
  out.se_sxy = std::sqrt(acc_xy / m_clients);
  out.se_grad0 = std::sqrt(acc_grad / m_clients);
  return out;
}

double mse(const engine::NgdState& state, const Eigen::VectorXd& theta0) {
  return engine::mse_to(state.theta_all, theta0);
}

double discrepancy_to_global(const engine::NgdState& state, const Eigen::VectorXd& theta_ge) {
  return engine::frobenius_to(state.theta_all, theta_ge);
}

ErrorBoundReport bound_report(const loss::LossModel& model, const topology::WeightMatrix& w,
                              double alpha, const engine::Trajectory& trajectory,
                              const Eigen::VectorXd& theta_ge, const Eigen::VectorXd& theta0) {
  if (trajectory.rows.empty()) throw InvalidArgumentError("bound_report: empty trajectory");

  ErrorBoundReport report;
  report.alpha = alpha;

  topology::BalanceStats balance = topology::balance_stats(w);
  report.se_w = std::sqrt(balance.se2_w);
  report.rho = balance.rho;
  report.sigma_max_w = balance.sigma_max_w;
  report.sigma_min_I_minus_w = balance.sigma_min_I_minus_w;
  report.bound_factor = report.se_w + alpha;

  HeterogeneityStats hetero = heterogeneity(model, theta0);
  report.hetero_factor = model.kind() == ModelKind::linear ? hetero.se_sxx + hetero.se_sxy
                                                           : hetero.se_grad0;

  int p = model.p();
  Eigen::MatrixXd global_xx = Eigen::MatrixXd::Zero(p, p);
  for (const auto& s : model.stats()) global_xx += s.sigma_xx;
  global_xx /= model.m_clients();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es_global(global_xx);
  if (es_global.info() != Eigen::Success)
    throw NumericalError("eigensolver failed on global Sigma_xx");
  report.kappa1 = es_global.eigenvalues().minCoeff();

  double kappa2 = -std::numeric_limits<double>::infinity();
  for (const auto& s : model.stats()) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s.sigma_xx);
    if (es.info() != Eigen::Success) throw NumericalError("eigensolver failed on Sigma_xx^(m)");
    kappa2 = std::max(kappa2, es.eigenvalues().maxCoeff());
  }
  report.kappa2 = kappa2;

  double kappa3 = std::numeric_limits<double>::infinity();
  double kappa4 = -std::numeric_limits<double>::infinity();
  for (int m = 0; m < model.m_clients(); ++m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(model.hessian(m, theta_ge));
    if (es.info() != Eigen::Success) throw NumericalError("eigensolver failed on local Hessian");
    kappa3 = std::min(kappa3, es.eigenvalues().minCoeff());
    kappa4 = std::max(kappa4, es.eigenvalues().maxCoeff());
  }
  report.kappa3 = kappa3;
  report.kappa4 = kappa4;
  report.degenerate_curvature = !(kappa3 > 0.0);

  report.lhs_discrepancy = engine::frobenius_to(trajectory.final_state.theta_all, theta_ge);
  report.global_stat_error = (theta_ge - theta0).norm();

  report.delta0_max = 0.0;
  for (Eigen::Index m = 0; m < trajectory.initial_state.rows(); ++m)
    report.delta0_max = std::max(
        report.delta0_max, (trajectory.initial_state.row(m).transpose() - theta_ge).norm());
  report.final_iteration = trajectory.final_state.iteration;
  double contraction = report.degenerate_curvature ? 1.0 : 1.0 - alpha * kappa3;
  report.opt_error_at_t =
      report.delta0_max * std::pow(contraction, static_cast<double>(report.final_iteration));

  report.theorem2_condition =
      alpha * report.kappa2 * report.sigma_max_w + report.se_w <
      report.kappa1 / report.kappa2 * report.sigma_min_I_minus_w / (4.0 * report.sigma_max_w);
  report.theorem3_condition =
      report.rho < 1.0 && !report.degenerate_curvature &&
      alpha * report.sigma_max_w * report.kappa4 + report.se_w <
          0.5 / report.kappa4 * report.kappa3 * (1.0 - report.rho);
  return report;
}

std::string bound_report_json(const ErrorBoundReport& r) {
  nlohmann::json j;
  j["lhs_discrepancy"] = r.lhs_discrepancy;
  j["bound_factor"] = r.bound_factor;
  j["hetero_factor"] = r.hetero_factor;
  j["kappa1"] = r.kappa1;
  j["kappa2"] = r.kappa2;
  j["kappa3"] = r.kappa3;
  j["kappa4"] = r.kappa4;
  j["rho"] = r.rho;
  j["sigma_max_w"] = r.sigma_max_w;
  j["sigma_min_I_minus_w"] = r.sigma_min_I_minus_w;
  j["se_w"] = r.se_w;
  j["alpha"] = r.alpha;
  j["delta0_max"] = r.delta0_max;
  j["opt_error_at_t"] = r.opt_error_at_t;
  j["final_iteration"] = r.final_iteration;
  j["global_stat_error"] = r.global_stat_error;
  j["theorem2_condition"] = r.theorem2_condition;
  j["theorem3_condition"] = r.theorem3_condition;
  j["degenerate_curvature"] = r.degenerate_curvature;
  return j.dump(2);
}

}  // namespace ngd::diagnostics
