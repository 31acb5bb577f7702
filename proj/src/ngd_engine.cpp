#include "ngd/ngd_engine.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/Sparse>
#include <cmath>
#include <limits>

#include "ngd/errors.hpp"

namespace ngd::engine {

void RunConfig::validate() const {
  if (!(alpha >= 0.0)) throw InvalidArgumentError("alpha must be >= 0");
  if (max_iterations < 1) throw InvalidArgumentError("max_iterations must be >= 1");
  if (record_every < 1) throw InvalidArgumentError("record_every must be >= 1");
  if (!(divergence_guard > 0.0)) throw InvalidArgumentError("divergence_guard must be > 0");
}

Eigen::MatrixXd neighborhood_average(const NgdState& state, const topology::WeightMatrix& w) {
  if (state.theta_all.rows() != w.m_clients())
    throw InvalidArgumentError("state and weight matrix disagree on client count");
  return w.entries * state.theta_all;
}

double mse_to(const Eigen::MatrixXd& theta_all, const Eigen::VectorXd& reference) {
  return (theta_all.rowwise() - reference.transpose()).squaredNorm() / theta_all.rows();
}

double frobenius_to(const Eigen::MatrixXd& theta_all, const Eigen::VectorXd& reference) {
  return (theta_all.rowwise() - reference.transpose()).norm() / std::sqrt(theta_all.rows());
}

double consensus_spread(const Eigen::MatrixXd& theta_all) {
  Eigen::Index m = theta_all.rows();
  Eigen::MatrixXd gram = theta_all * theta_all.transpose();
  double worst = 0.0;
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = i + 1; j < m; ++j)
      worst = std::max(worst, gram(i, i) + gram(j, j) - 2.0 * gram(i, j));
  return std::sqrt(std::max(0.0, worst));
}

namespace {

// Averaging plus per-client gradient step, writing into `next`. The linear
// path runs on sufficient statistics; GLMs evaluate on the raw shard.
void step_into(const Eigen::MatrixXd& averaged, const loss::LossModel& model, double alpha,
               Eigen::MatrixXd& next) {
  int m_clients = static_cast<int>(averaged.rows());
  if (model.kind() == ModelKind::linear) {
    for (int m = 0; m < m_clients; ++m) {
      const auto& s = model.stats()[static_cast<std::size_t>(m)];
      // sigma_xx is symmetric, so the row-vector product matches sigma_xx * theta
      next.row(m).noalias() = averaged.row(m) - alpha * (averaged.row(m) * s.sigma_xx);
      next.row(m).noalias() += alpha * s.sigma_xy.transpose();
    }
    return;
  }
  Eigen::VectorXd theta;
  for (int m = 0; m < m_clients; ++m) {
    theta = averaged.row(m);
    next.row(m) = averaged.row(m) - alpha * model.gradient(m, theta).transpose();
  }
}

void check_guard(const Eigen::MatrixXd& theta, double guard, std::int64_t iteration) {
  double worst = theta.array().abs().maxCoeff();
  if (!(worst <= guard))
    throw DivergedError("NGD diverged at iteration " + std::to_string(iteration) +
                            " (max |theta| = " + std::to_string(worst) + ")",
                        iteration);
}

}  // namespace

NgdState ngd_step(const NgdState& state, const topology::WeightMatrix& w,
                  const loss::LossModel& model, double alpha, double divergence_guard) {
  if (!(alpha >= 0.0)) throw InvalidArgumentError("alpha must be >= 0");
  Eigen::MatrixXd averaged = neighborhood_average(state, w);
  Eigen::MatrixXd next(averaged.rows(), averaged.cols());
  step_into(averaged, model, alpha, next);
  check_guard(next, divergence_guard, state.iteration + 1);
  return NgdState{std::move(next), state.iteration + 1};
}

Trajectory run(const loss::LossModel& model, const topology::WeightMatrix& w,
               const RunConfig& config, const RunRefs& refs) {
  config.validate();
  int m_clients = model.m_clients();
  int p = model.p();
  if (w.m_clients() != m_clients)
    throw InvalidArgumentError("weight matrix and loss model disagree on client count");

  Eigen::MatrixXd theta;
  if (config.init.size() == 0) {
    theta = Eigen::MatrixXd::Zero(m_clients, p);
  } else {
    if (config.init.rows() != m_clients || config.init.cols() != p)
      throw InvalidArgumentError("init matrix has wrong shape");
    theta = config.init;
  }

  Eigen::SparseMatrix<double> w_sparse = w.entries.sparseView();

  Trajectory traj;
  traj.initial_state = theta;
  auto record = [&](std::int64_t t, const Eigen::MatrixXd& th) {
    SnapshotRow row;
    row.iteration = t;
    row.mse = mse_to(th, refs.theta0);
    row.log_mse = std::log(row.mse);
    row.discrepancy_to_global = frobenius_to(th, refs.theta_ge);
    row.consensus_spread = config.track_consensus_spread ? consensus_spread(th)
                                                         : std::numeric_limits<double>::quiet_NaN();
    if (refs.theta_star)
      row.dist_to_stable = (th - *refs.theta_star).norm();
    traj.rows.push_back(row);
  };

  record(0, theta);
  Eigen::MatrixXd averaged(m_clients, p), next(m_clients, p);
  for (std::int64_t t = 0; t < config.max_iterations; ++t) {
    averaged.noalias() = w_sparse * theta;
    step_into(averaged, model, config.alpha, next);
    check_guard(next, config.divergence_guard, t + 1);
    bool stop_early = false;
    if (config.early_stop && (next - theta).norm() < config.early_stop_tol) stop_early = true;
    theta.swap(next);
    std::int64_t now = t + 1;
    if (now % config.record_every == 0 || now == config.max_iterations || stop_early)
      record(now, theta);
    if (stop_early) {
      traj.final_state = NgdState{theta, now};
      return traj;
    }
  }
  traj.final_state = NgdState{theta, config.max_iterations};
  return traj;
}

StableSolution stable_solution_ols(const std::vector<loss::LocalSuffStats>& stats,
                                   const topology::WeightMatrix& w, double alpha) {
  int m = w.m_clients();
  if (static_cast<int>(stats.size()) != m)
    throw InvalidArgumentError("one sufficient-statistics block per client required");
  if (!(alpha > 0.0)) throw InvalidArgumentError("alpha must be > 0");
  int p = static_cast<int>(stats.front().sigma_xx.rows());
  Eigen::Index q = static_cast<Eigen::Index>(m) * p;

  Eigen::MatrixXd omega = Eigen::MatrixXd::Identity(q, q);
  Eigen::VectorXd rhs(q);
  for (int i = 0; i < m; ++i) {
    Eigen::MatrixXd delta = Eigen::MatrixXd::Identity(p, p) - alpha * stats[static_cast<std::size_t>(i)].sigma_xx;
    for (int k = 0; k < m; ++k) {
      double weight = w.entries(i, k);
      if (weight != 0.0)
        omega.block(static_cast<Eigen::Index>(i) * p, static_cast<Eigen::Index>(k) * p, p, p) -=
            weight * delta;
    }
    rhs.segment(static_cast<Eigen::Index>(i) * p, p) =
        alpha * stats[static_cast<std::size_t>(i)].sigma_xy;
  }

  Eigen::PartialPivLU<Eigen::MatrixXd> lu(omega);
  Eigen::VectorXd solution = lu.solve(rhs);

  // two-sided power iterations give a cheap condition estimate
  auto power_sigma = [&](bool inverse) {
    Eigen::VectorXd v = Eigen::VectorXd::Ones(q).normalized();
    double value = 0.0;
    for (int it = 0; it < 40; ++it) {
      Eigen::VectorXd u;
      if (inverse) {
        u = lu.solve(v);
        u = lu.transpose().solve(u);
      } else {
        u = omega.transpose() * (omega * v);
      }
      value = std::sqrt(u.norm());
      double nu = u.norm();
      if (nu < 1e-300) return inverse ? std::numeric_limits<double>::infinity() : 0.0;
      v = u / nu;
    }
    return value;
  };
  double sigma_max = power_sigma(false);
  double inv_sigma_min = power_sigma(true);
  double condition = sigma_max * inv_sigma_min;
  if (!std::isfinite(condition) || condition > 1e12)
    throw SingularMatrixError("Omega is singular or near-singular (condition estimate " +
                              std::to_string(condition) + ")");

  double residual = (omega * solution - rhs).norm() / std::max(1e-300, rhs.norm());
  if (!(residual <= 1e-8))
    throw NumericalError("stable solution residual too large: " + std::to_string(residual));

  StableSolution out;
  out.theta_star.resize(m, p);
  for (int i = 0; i < m; ++i)
    out.theta_star.row(i) = solution.segment(static_cast<Eigen::Index>(i) * p, p);
  out.omega_condition = condition;
  return out;
}

OverparamReport overparam_check(const std::vector<loss::LocalSuffStats>& stats,
                                const topology::WeightMatrix& w, double alpha,
                                const SpectralOptions& options) {
  int m = w.m_clients();
  if (static_cast<int>(stats.size()) != m)
    throw InvalidArgumentError("one sufficient-statistics block per client required");
  int p = static_cast<int>(stats.front().sigma_xx.rows());

  std::vector<Eigen::MatrixXd> curvatures;
  curvatures.reserve(stats.size());
  for (const auto& s : stats) curvatures.push_back(s.sigma_xx);

  OverparamReport report;
  SpectralEstimate est = contraction_radius_detailed(curvatures, w, alpha, options);
  report.radius = est.radius;
  report.method = est.method;
  report.converges = est.converged && est.radius < 1.0 - 1e-10;

  Eigen::MatrixXd global = Eigen::MatrixXd::Zero(p, p);
  for (const auto& s : stats) global += s.sigma_xx;
  global /= m;

  auto symmetric_radius = [](const Eigen::MatrixXd& a) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
    if (es.info() != Eigen::Success) throw NumericalError("leading-term eigensolve failed");
    return std::max(std::abs(es.eigenvalues().minCoeff()), std::abs(es.eigenvalues().maxCoeff()));
  };
  auto lambda_max = [](const Eigen::MatrixXd& a) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
    if (es.info() != Eigen::Success) throw NumericalError("leading-term eigensolve failed");
    return es.eigenvalues().maxCoeff();
  };

  if (is_circle_d1_weight(w)) {
    report.leading_term_kind = "circle_d1";
    report.leading_term_radius =
        symmetric_radius(Eigen::MatrixXd::Identity(p, p) - (alpha * m) * global);
  } else if (is_central_client_weight(w)) {
    report.leading_term_kind = "central_client";
    const Eigen::MatrixXd& hub = stats.front().sigma_xx;
    double mm = static_cast<double>(m);
    Eigen::MatrixXd combined = (mm / (mm - 1.0)) * global + ((mm - 2.0) / (mm - 1.0)) * hub;
    report.leading_term_radius =
        symmetric_radius(Eigen::MatrixXd::Identity(p, p) - alpha * combined);
    report.central_alpha_threshold =
        2.0 * (mm - 1.0) / (mm * lambda_max(global) + (mm - 2.0) * lambda_max(hub));
  }
  return report;
}

}  // namespace ngd::engine
