#include "ngd/topology.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <vector>

#include "ngd/errors.hpp"
#include "ngd/util.hpp"

namespace ngd::topology {

AdjacencyMatrix AdjacencyMatrix::from_entries(Eigen::MatrixXi entries) {
  if (entries.rows() != entries.cols() || entries.rows() < 2)
    throw InvalidArgumentError("adjacency matrix must be square with M >= 2");
  int m = static_cast<int>(entries.rows());
  for (int i = 0; i < m; ++i) {
    if (entries(i, i) != 0)
      throw InvalidArgumentError("adjacency matrix must have a zero diagonal");
    int degree = 0;
    for (int j = 0; j < m; ++j) {
      int v = entries(i, j);
      if (v != 0 && v != 1) throw InvalidArgumentError("adjacency entries must be 0 or 1");
      degree += v;
    }
    if (degree < 1)
      throw InvalidArgumentError("every client needs in-degree >= 1, row " +
                                 std::to_string(i + 1) + " has none");
  }
  return AdjacencyMatrix(std::move(entries));
}

AdjacencyMatrix build_central_client(int m_clients) {
  if (m_clients < 2) throw InvalidArgumentError("central-client topology needs M >= 2");
  Eigen::MatrixXi a = Eigen::MatrixXi::Zero(m_clients, m_clients);
  for (int j = 1; j < m_clients; ++j) {
    a(0, j) = 1;
    a(j, 0) = 1;
  }
  return AdjacencyMatrix::from_entries(std::move(a));
}

AdjacencyMatrix build_circle(int m_clients, int degree) {
  if (m_clients < 2) throw InvalidArgumentError("circle topology needs M >= 2");
  if (degree < 1 || degree > m_clients - 1)
    throw InvalidArgumentError("circle degree must satisfy 1 <= D <= M-1");
  Eigen::MatrixXi a = Eigen::MatrixXi::Zero(m_clients, m_clients);
  for (int m = 0; m < m_clients; ++m)
    for (int d = 1; d <= degree; ++d) a(m, (m + d) % m_clients) = 1;
  return AdjacencyMatrix::from_entries(std::move(a));
}

static Eigen::MatrixXi draw_fixed_degree(int m_clients, int degree, util::Rng& rng) {
  Eigen::MatrixXi a = Eigen::MatrixXi::Zero(m_clients, m_clients);
  std::vector<int> pool(static_cast<std::size_t>(m_clients) - 1);
  for (int m = 0; m < m_clients; ++m) {
    int k = 0;
    for (int j = 0; j < m_clients; ++j)
      if (j != m) pool[static_cast<std::size_t>(k++)] = j;
    // partial Fisher-Yates: first `degree` entries are the sample
    for (int i = 0; i < degree; ++i) {
      std::size_t j = i + static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(m_clients - 1 - i)));
      std::swap(pool[static_cast<std::size_t>(i)], pool[j]);
      a(m, pool[static_cast<std::size_t>(i)]) = 1;
    }
  }
  return a;
}

AdjacencyMatrix build_fixed_degree(int m_clients, int degree, std::uint64_t seed,
                                   FixedDegreeOptions options, int* resample_attempts_out) {
  if (m_clients < 2) throw InvalidArgumentError("fixed-degree topology needs M >= 2");
  if (degree < 1 || degree > m_clients - 1)
    throw InvalidArgumentError("fixed degree must satisfy 1 <= D <= M-1");
  int resamples = 0;
  for (int attempt = 0;; ++attempt) {
    util::Rng rng(seed + static_cast<std::uint64_t>(attempt));
    AdjacencyMatrix adj = AdjacencyMatrix::from_entries(draw_fixed_degree(m_clients, degree, rng));
    if (!options.require_strongly_connected || is_strongly_connected(adj)) {
      if (resample_attempts_out) *resample_attempts_out = resamples;
      return adj;
    }
    ++resamples;
    if (attempt + 1 >= options.max_attempts)
      throw TopologyGenerationError(
          "fixed-degree sampling produced no strongly connected graph in " +
              std::to_string(options.max_attempts) + " attempts (M=" + std::to_string(m_clients) +
              ", D=" + std::to_string(degree) + ")",
          resamples);
  }
}

WeightMatrix to_weight_matrix(const AdjacencyMatrix& adj) {
  int m = adj.m_clients();
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(m, m);
  for (int i = 0; i < m; ++i) {
    int d = adj.in_degree(i);
    if (d < 1) throw InvalidArgumentError("zero in-degree row in adjacency matrix");
    for (int j = 0; j < m; ++j)
      if (adj.entries()(i, j)) w(i, j) = 1.0 / d;
  }
  return WeightMatrix{std::move(w)};
}

SeW se_w(const WeightMatrix& w) {
  int m = w.m_clients();
  double se2 = 0.0;
  for (int j = 0; j < m; ++j) {
    double dev = w.entries.col(j).sum() - 1.0;
    se2 += dev * dev;
  }
  se2 /= m;
  return SeW{se2, std::sqrt(se2)};
}

BalanceStats balance_stats(const WeightMatrix& w) {
  const Eigen::MatrixXd& W = w.entries;
  int m = w.m_clients();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es_wtw(W.transpose() * W);
  if (es_wtw.info() != Eigen::Success)
    throw NumericalError("eigensolver failed on W^T W");
  double sigma_max = std::sqrt(std::max(0.0, es_wtw.eigenvalues().maxCoeff()));

  Eigen::MatrixXd i_minus_w = Eigen::MatrixXd::Identity(m, m) - W;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es_imw(i_minus_w.transpose() * i_minus_w);
  if (es_imw.info() != Eigen::Success)
    throw NumericalError("eigensolver failed on (I-W)^T (I-W)");
  // 1 is always in the kernel of I - W; take the smallest eigenvalue above
  // the structural-zero threshold.
  double smallest_positive = -1.0;
  for (int i = 0; i < m; ++i) {
    double ev = es_imw.eigenvalues()(i);
    if (ev > 1e-10) {
      smallest_positive = ev;
      break;
    }
  }
  double sigma_min = smallest_positive > 0.0 ? std::sqrt(smallest_positive) : 0.0;

  Eigen::MatrixXd centering =
      Eigen::MatrixXd::Identity(m, m) - Eigen::MatrixXd::Constant(m, m, 1.0 / m);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es_sw(W.transpose() * centering * W);
  if (es_sw.info() != Eigen::Success)
    throw NumericalError("eigensolver failed on Sigma_w");
  double rho = std::sqrt(std::max(0.0, es_sw.eigenvalues().maxCoeff()));

  return BalanceStats{se_w(w).se2, sigma_max, sigma_min, rho};
}

bool is_strongly_connected(const AdjacencyMatrix& adj) {
  int m = adj.m_clients();
  auto all_reachable_from_0 = [&](bool transpose) {
    std::vector<char> seen(static_cast<std::size_t>(m), 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    int count = 1;
    while (!stack.empty()) {
      int u = stack.back();
      stack.pop_back();
      for (int v = 0; v < m; ++v) {
        int e = transpose ? adj.entries()(v, u) : adj.entries()(u, v);
        if (e && !seen[static_cast<std::size_t>(v)]) {
          seen[static_cast<std::size_t>(v)] = 1;
          ++count;
          stack.push_back(v);
        }
      }
    }
    return count == m;
  };
  return all_reachable_from_0(false) && all_reachable_from_0(true);
}

void save_edge_list(const AdjacencyMatrix& adj, std::ostream& out) {
  int m = adj.m_clients();
  out << m << "\n";
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      if (adj.entries()(i, j)) out << (i + 1) << " " << (j + 1) << "\n";
}

std::string edge_list_string(const AdjacencyMatrix& adj) {
  std::ostringstream out;
  save_edge_list(adj, out);
  return out.str();
}

AdjacencyMatrix load_edge_list(std::istream& in) {
  int m = 0;
  if (!(in >> m)) throw IoError("edge list: missing client count");
  if (m < 2) throw InvalidArgumentError("edge list: M must be >= 2");
  Eigen::MatrixXi a = Eigen::MatrixXi::Zero(m, m);
  int src = 0, dst = 0;
  while (in >> src >> dst) {
    if (src < 1 || src > m || dst < 1 || dst > m)
      throw InvalidArgumentError("edge list: endpoint out of range: " + std::to_string(src) +
                                 " " + std::to_string(dst));
    a(src - 1, dst - 1) = 1;
  }
  if (!in.eof() && in.fail()) throw IoError("edge list: malformed edge line");
  return AdjacencyMatrix::from_entries(std::move(a));
}

}  // namespace ngd::topology
