#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <string>

namespace ngd::topology {

// Directed communication graph: entries(m1, m2) = 1 means client m1 receives
// parameters from client m2. Zero diagonal, every row in-degree >= 1.
class AdjacencyMatrix {
 public:
  static AdjacencyMatrix from_entries(Eigen::MatrixXi entries);

  int m_clients() const { return static_cast<int>(entries_.rows()); }
  const Eigen::MatrixXi& entries() const { return entries_; }
  int in_degree(int m) const { return entries_.row(m).sum(); }

 private:
  explicit AdjacencyMatrix(Eigen::MatrixXi entries) : entries_(std::move(entries)) {}
  Eigen::MatrixXi entries_;
};

// Row-stochastic averaging weights w = a / d.
struct WeightMatrix {
  Eigen::MatrixXd entries;
  int m_clients() const { return static_cast<int>(entries.rows()); }
};

struct SeW {
  double se2;  // M^{-1} || W^T 1 - 1 ||^2
  double se;
};

struct BalanceStats {
  double se2_w;
  double sigma_max_w;           // largest singular value of W
  double sigma_min_I_minus_w;   // smallest positive singular value of I - W
  double rho;                   // lambda_max^{1/2}( W^T (I - 11^T/M) W )
};

// Hub client 1 connected bidirectionally to all others.
AdjacencyMatrix build_central_client(int m_clients);

// Each client receives from its next `degree` clients cyclically.
AdjacencyMatrix build_circle(int m_clients, int degree);

struct FixedDegreeOptions {
  // When set, redraw with derived seeds (seed, seed+1, ...) until the graph
  // is strongly connected, up to max_attempts; throws
  // TopologyGenerationError on exhaustion. Off by default: conditioning on
  // connectivity visibly biases E[SE^2(W)] away from 1/D - 1/(M-1) at small
  // M and never succeeds at large M with small D.
  bool require_strongly_connected = false;
  int max_attempts = 64;
};

// Each client independently picks `degree` distinct neighbors uniformly
// without replacement. `resample_attempts_out`, when non-null, receives the
// number of redraws performed (0 unless connectivity is enforced).
AdjacencyMatrix build_fixed_degree(int m_clients, int degree, std::uint64_t seed,
                                   FixedDegreeOptions options = {},
                                   int* resample_attempts_out = nullptr);

WeightMatrix to_weight_matrix(const AdjacencyMatrix& adj);

SeW se_w(const WeightMatrix& w);

BalanceStats balance_stats(const WeightMatrix& w);

bool is_strongly_connected(const AdjacencyMatrix& adj);

// Edge-list text format: first line "M", then one "src dst" pair per line
// (a_{src,dst} = 1), 1-indexed, newline-terminated.
void save_edge_list(const AdjacencyMatrix& adj, std::ostream& out);
AdjacencyMatrix load_edge_list(std::istream& in);
std::string edge_list_string(const AdjacencyMatrix& adj);

}  // namespace ngd::topology
