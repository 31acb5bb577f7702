#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ngd/topology.hpp"

namespace ngd::engine {

struct SpectralOptions {
  // Dense complex eigensolve when the operator dimension q fits the budget.
  int dense_budget = 512;
  // Restarted Arnoldi beyond the budget.
  int krylov_dim = 32;
  int max_matvecs = 10000;
  double tol = 1e-9;
  // Test hook: skip the dense path and structural reductions.
  bool force_iterative = false;
};

struct SpectralEstimate {
  double radius = 0.0;
  std::string method;  // dense | arnoldi | reduced_circle | reduced_central
  bool converged = true;
  int matvecs = 0;
};

using ApplyFn = std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&)>;

// Largest eigenvalue modulus of a real (possibly nonsymmetric) operator on
// R^q given through matvecs. Dense within budget, else restarted Arnoldi;
// a non-converged iterative estimate comes back with converged = false.
SpectralEstimate operator_spectral_radius(const ApplyFn& apply, int q,
                                          const SpectralOptions& options = {});

// Largest eigenvalue modulus of the NGD contraction operator
// Delta* (W (x) I_p) with Delta^(m) = I - alpha * curvatures[m]. Exact p x p
// reductions are used for circle D=1 and central-client weight patterns.
SpectralEstimate contraction_radius_detailed(const std::vector<Eigen::MatrixXd>& curvatures,
                                             const topology::WeightMatrix& w, double alpha,
                                             const SpectralOptions& options = {});

// Spec operation: returns the radius, throwing SpectralError (with the best
// estimate attached) when an iterative estimate failed to settle.
double contraction_spectral_radius(const std::vector<Eigen::MatrixXd>& curvatures,
                                   const topology::WeightMatrix& w, double alpha,
                                   const SpectralOptions& options = {});

// Structural recognizers for the canonical weight patterns (exact matches of
// the builder output).
bool is_circle_d1_weight(const topology::WeightMatrix& w);
bool is_central_client_weight(const topology::WeightMatrix& w);

}  // namespace ngd::engine
