#include "ngd/spectral.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

#include "ngd/errors.hpp"
#include "ngd/util.hpp"

namespace ngd::engine {

namespace {

double max_modulus(const Eigen::VectorXcd& eigenvalues) {
  double r = 0.0;
  for (Eigen::Index i = 0; i < eigenvalues.size(); ++i)
    r = std::max(r, std::abs(eigenvalues(i)));
  return r;
}

SpectralEstimate dense_radius(const ApplyFn& apply, int q) {
  Eigen::MatrixXd a(q, q);
  Eigen::VectorXd e = Eigen::VectorXd::Zero(q);
  Eigen::VectorXd col(q);
  for (int j = 0; j < q; ++j) {
    e(j) = 1.0;
    apply(e, col);
    a.col(j) = col;
    e(j) = 0.0;
  }
  Eigen::EigenSolver<Eigen::MatrixXd> es(a, /*computeEigenvectors=*/false);
  if (es.info() != Eigen::Success) throw NumericalError("dense eigensolver failed");
  return SpectralEstimate{max_modulus(es.eigenvalues()), "dense", true, q};
}

// Restarted Arnoldi. The radius estimate is the largest Ritz-value modulus;
// convergence is declared when two successive restart cycles agree.
SpectralEstimate arnoldi_radius(const ApplyFn& apply, int q, const SpectralOptions& options) {
  int k = std::min(options.krylov_dim, q);
  util::Rng rng(0x9d2c5680u);  // fixed seed: estimates are reproducible
  Eigen::MatrixXd v(q, k + 1);
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(k + 1, k);
  Eigen::VectorXd w(q);

  auto random_unit = [&] {
    Eigen::VectorXd u(q);
    for (int i = 0; i < q; ++i) u(i) = rng.normal();
    u.normalize();
    return u;
  };

  Eigen::VectorXd start = random_unit();
  double previous = -1.0;
  int stable_cycles = 0;
  int matvecs = 0;
  double best = 0.0;
  while (matvecs < options.max_matvecs) {
    v.col(0) = start;
    int built = 0;
    bool breakdown = false;
    for (int j = 0; j < k; ++j) {
      apply(v.col(j), w);
      ++matvecs;
      // modified Gram-Schmidt, twice
      for (int pass = 0; pass < 2; ++pass) {
        for (int i = 0; i <= j; ++i) {
          double c = v.col(i).dot(w);
          if (pass == 0)
            h(i, j) = c;
          else
            h(i, j) += c;
          w -= c * v.col(i);
        }
      }
      double nw = w.norm();
      h(j + 1, j) = nw;
      built = j + 1;
      if (nw < 1e-14) {
        breakdown = true;  // invariant subspace: Ritz values on it are exact
        break;
      }
      v.col(j + 1) = w / nw;
    }
    Eigen::EigenSolver<Eigen::MatrixXd> es(h.topLeftCorner(built, built),
                                           /*computeEigenvectors=*/true);
    if (es.info() != Eigen::Success) throw NumericalError("Arnoldi Hessenberg eigensolve failed");
    double estimate = max_modulus(es.eigenvalues());
    best = std::max(best, estimate);

    if (breakdown) {
      // confirm with one fresh start in case the first vector missed the
      // dominant invariant subspace
      if (stable_cycles == 0) {
        stable_cycles = 1;
        previous = best;
        start = random_unit();
        h.setZero();
        continue;
      }
      return SpectralEstimate{best, "arnoldi", true, matvecs};
    }

    if (previous >= 0.0 && std::abs(estimate - previous) <= options.tol * std::max(1.0, estimate)) {
      if (++stable_cycles >= 2) return SpectralEstimate{best, "arnoldi", true, matvecs};
    } else {
      stable_cycles = 0;
    }
    previous = estimate;

    // restart from the dominant Ritz direction
    int top = 0;
    for (int i = 1; i < built; ++i)
      if (std::abs(es.eigenvalues()(i)) > std::abs(es.eigenvalues()(top))) top = i;
    Eigen::VectorXd real_part = es.eigenvectors().col(top).real();
    Eigen::VectorXd imag_part = es.eigenvectors().col(top).imag();
    Eigen::VectorXd combo = real_part;
    if (imag_part.norm() > 1e-12) combo += imag_part;
    start = v.leftCols(built) * combo;
    double ns = start.norm();
    if (ns < 1e-300)
      start = random_unit();
    else
      start /= ns;
    h.setZero();
  }
  return SpectralEstimate{best, "arnoldi", false, matvecs};
}

}  // namespace

SpectralEstimate operator_spectral_radius(const ApplyFn& apply, int q,
                                          const SpectralOptions& options) {
  if (q < 1) throw InvalidArgumentError("operator dimension must be >= 1");
  if (!options.force_iterative && q <= options.dense_budget) return dense_radius(apply, q);
  return arnoldi_radius(apply, q, options);
}

bool is_circle_d1_weight(const topology::WeightMatrix& w) {
  int m = w.m_clients();
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      double expected = (j == (i + 1) % m) ? 1.0 : 0.0;
      if (w.entries(i, j) != expected) return false;
    }
  return true;
}

bool is_central_client_weight(const topology::WeightMatrix& w) {
  int m = w.m_clients();
  if (m < 2) return false;
  double hub_weight = 1.0 / (m - 1);
  for (int j = 0; j < m; ++j)
    if (w.entries(0, j) != (j == 0 ? 0.0 : hub_weight)) return false;
  for (int i = 1; i < m; ++i)
    for (int j = 0; j < m; ++j)
      if (w.entries(i, j) != (j == 0 ? 1.0 : 0.0)) return false;
  return true;
}

SpectralEstimate contraction_radius_detailed(const std::vector<Eigen::MatrixXd>& curvatures,
                                             const topology::WeightMatrix& w, double alpha,
                                             const SpectralOptions& options) {
  int m = w.m_clients();
  if (static_cast<int>(curvatures.size()) != m)
    throw InvalidArgumentError("one curvature matrix per client required");
  int p = static_cast<int>(curvatures.front().rows());
  Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(p, p);

  auto delta = [&](int i) -> Eigen::MatrixXd { return identity - alpha * curvatures[static_cast<std::size_t>(i)]; };

  if (!options.force_iterative && is_circle_d1_weight(w)) {
    // eigenvalues satisfy lambda^M = eig( prod_m Delta^(m) )
    Eigen::MatrixXd prod = delta(0);
    for (int i = 1; i < m; ++i) prod *= delta(i);
    Eigen::EigenSolver<Eigen::MatrixXd> es(prod, false);
    if (es.info() != Eigen::Success) throw NumericalError("circle reduction eigensolve failed");
    double mu = max_modulus(es.eigenvalues());
    return SpectralEstimate{std::pow(mu, 1.0 / m), "reduced_circle", true, 0};
  }

  if (!options.force_iterative && is_central_client_weight(w)) {
    // lambda^2 = eig( Delta^(1) (M-1)^{-1} sum_{k>=2} Delta^(k) )
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(p, p);
    for (int i = 1; i < m; ++i) acc += delta(i);
    Eigen::MatrixXd reduced = delta(0) * (acc / (m - 1));
    Eigen::EigenSolver<Eigen::MatrixXd> es(reduced, false);
    if (es.info() != Eigen::Success) throw NumericalError("central reduction eigensolve failed");
    double mu = max_modulus(es.eigenvalues());
    return SpectralEstimate{std::sqrt(mu), "reduced_central", true, 0};
  }

  int q = m * p;
  std::vector<Eigen::MatrixXd> deltas;
  deltas.reserve(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) deltas.push_back(delta(i));
  // v |-> Delta* (W (x) I_p) v without materializing the q x q operator
  Eigen::MatrixXd theta(m, p), averaged(m, p);
  ApplyFn apply = [&](const Eigen::VectorXd& in, Eigen::VectorXd& out) {
    for (int i = 0; i < m; ++i) theta.row(i) = in.segment(static_cast<Eigen::Index>(i) * p, p);
    averaged.noalias() = w.entries * theta;
    out.resize(q);
    for (int i = 0; i < m; ++i)
      out.segment(static_cast<Eigen::Index>(i) * p, p).noalias() =
          deltas[static_cast<std::size_t>(i)] * averaged.row(i).transpose();
  };
  return operator_spectral_radius(apply, q, options);
}

double contraction_spectral_radius(const std::vector<Eigen::MatrixXd>& curvatures,
                                   const topology::WeightMatrix& w, double alpha,
                                   const SpectralOptions& options) {
  SpectralEstimate est = contraction_radius_detailed(curvatures, w, alpha, options);
  if (!est.converged)
    throw SpectralError("spectral radius estimate did not settle after " +
                            std::to_string(est.matvecs) + " matvecs (best " +
                            std::to_string(est.radius) + ")",
                        est.radius);
  return est.radius;
}

}  // namespace ngd::engine
