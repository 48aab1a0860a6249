#include "rgw/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "rgw/errors.hpp"

namespace rgw {

namespace {

struct Cell {
  Eigen::Index i, j;
};

// Basis of the transportation simplex: a spanning tree on m row nodes and n
// column nodes (column j is node m + j), one edge per basic cell.
class TransportSimplex {
 public:
  TransportSimplex(const Matrix& cost, const Vector& supply, const Vector& demand)
      : c_(cost), m_(cost.rows()), n_(cost.cols()), flow_(Matrix::Zero(m_, n_)),
        basic_(Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(m_, n_, false)) {
    northwest_corner(supply, demand);
    const double scale = std::max(1.0, c_.cwiseAbs().maxCoeff());
    tol_ = 1e-12 * scale;
  }

  Matrix solve() {
    const long max_pivots = 200L * (m_ + n_) * (m_ + n_) + 1000;
    for (long pivot = 0; pivot < max_pivots; ++pivot) {
      compute_potentials();
      Cell enter{-1, -1};
      for (Eigen::Index i = 0; i < m_ && enter.i < 0; ++i) {
        for (Eigen::Index j = 0; j < n_; ++j) {
          if (!basic_(i, j) && c_(i, j) - u_[i] - v_[j] < -tol_) {
            enter = {i, j};
            break;
          }
        }
      }
      if (enter.i < 0) return flow_;
      exchange(enter);
    }
    throw NumericalError("transport_lp: pivot limit exceeded");
  }

 private:
  void add_basic(Eigen::Index i, Eigen::Index j, double x) {
    basic_(i, j) = true;
    flow_(i, j) = x;
    cells_.push_back({i, j});
  }

  void northwest_corner(Vector s, Vector d) {
    Eigen::Index i = 0, j = 0;
    while (i < m_ && j < n_) {
      const double x = std::max(0.0, std::min(s[i], d[j]));
      add_basic(i, j, x);
      s[i] -= x;
      d[j] -= x;
      if (i == m_ - 1) {
        ++j;
      } else if (j == n_ - 1) {
        ++i;
      } else if (s[i] <= d[j]) {
        ++i;
      } else {
        ++j;
      }
    }
  }

  std::vector<std::vector<std::size_t>> adjacency() const {
    std::vector<std::vector<std::size_t>> adj(static_cast<std::size_t>(m_ + n_));
    for (std::size_t e = 0; e < cells_.size(); ++e) {
      adj[static_cast<std::size_t>(cells_[e].i)].push_back(e);
      adj[static_cast<std::size_t>(m_ + cells_[e].j)].push_back(e);
    }
    return adj;
  }

  std::size_t other_end(std::size_t e, std::size_t node) const {
    const auto r = static_cast<std::size_t>(cells_[e].i);
    return node == r ? static_cast<std::size_t>(m_ + cells_[e].j) : r;
  }

  void compute_potentials() {
    u_.assign(static_cast<std::size_t>(m_), 0.0);
    v_.assign(static_cast<std::size_t>(n_), 0.0);
    const auto adj = adjacency();
    std::vector<char> seen(static_cast<std::size_t>(m_ + n_), 0);
    std::vector<std::size_t> stack{0};
    seen[0] = 1;
    while (!stack.empty()) {
      const std::size_t node = stack.back();
      stack.pop_back();
      for (std::size_t e : adj[node]) {
        const std::size_t next = other_end(e, node);
        if (seen[next]) continue;
        seen[next] = 1;
        const Cell c = cells_[e];
        // c_ij = u_i + v_j on every basic cell.
        if (next < static_cast<std::size_t>(m_)) {
          u_[next] = c_(c.i, c.j) - v_[static_cast<std::size_t>(c.j)];
        } else {
          v_[next - static_cast<std::size_t>(m_)] = c_(c.i, c.j) - u_[static_cast<std::size_t>(c.i)];
        }
        stack.push_back(next);
      }
    }
  }

  void exchange(Cell enter) {
    // Tree path from column node of `enter` back to its row node.
    const auto adj = adjacency();
    const auto start = static_cast<std::size_t>(m_ + enter.j);
    const auto goal = static_cast<std::size_t>(enter.i);
    std::vector<std::ptrdiff_t> via(static_cast<std::size_t>(m_ + n_), -1);
    std::vector<char> seen(static_cast<std::size_t>(m_ + n_), 0);
    std::vector<std::size_t> queue{start};
    seen[start] = 1;
    for (std::size_t h = 0; h < queue.size() && !seen[goal]; ++h) {
      const std::size_t node = queue[h];
      for (std::size_t e : adj[node]) {
        const std::size_t next = other_end(e, node);
        if (seen[next]) continue;
        seen[next] = 1;
        via[next] = static_cast<std::ptrdiff_t>(e);
        queue.push_back(next);
      }
    }
    std::vector<std::size_t> path;  // edges ordered from `start` to `goal`
    for (std::size_t node = goal; node != start;) {
      const auto e = static_cast<std::size_t>(via[node]);
      path.push_back(e);
      node = other_end(e, node);
    }
    std::reverse(path.begin(), path.end());

    // Signs alternate -, +, -, ... starting at the column end.
    double theta = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < path.size(); k += 2) {
      const Cell c = cells_[path[k]];
      theta = std::min(theta, flow_(c.i, c.j));
    }
    std::size_t leave = path[0];
    Eigen::Index leave_index = std::numeric_limits<Eigen::Index>::max();
    for (std::size_t k = 0; k < path.size(); k += 2) {
      const Cell c = cells_[path[k]];
      const Eigen::Index idx = c.i * n_ + c.j;
      if (flow_(c.i, c.j) <= theta && idx < leave_index) {
        leave_index = idx;
        leave = path[k];
      }
    }
    for (std::size_t k = 0; k < path.size(); ++k) {
      const Cell c = cells_[path[k]];
      if (k % 2 == 0) {
        flow_(c.i, c.j) = std::max(0.0, flow_(c.i, c.j) - theta);
      } else {
        flow_(c.i, c.j) += theta;
      }
    }
    const Cell out = cells_[leave];
    flow_(out.i, out.j) = 0.0;
    basic_(out.i, out.j) = false;
    cells_[leave] = enter;
    basic_(enter.i, enter.j) = true;
    flow_(enter.i, enter.j) = theta;
  }

  const Matrix& c_;
  Eigen::Index m_, n_;
  Matrix flow_;
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> basic_;
  std::vector<Cell> cells_;
  std::vector<double> u_, v_;
  double tol_ = 0.0;
};

}  // namespace

Matrix transport_lp(const Matrix& cost, const Vector& supply, const Vector& demand) {
  if (cost.rows() != supply.size() || cost.cols() != demand.size()) {
    throw InputError("transport_lp: cost shape does not match the marginals");
  }
  if (supply.size() == 0 || demand.size() == 0) throw InputError("transport_lp: empty marginal");
  if (supply.minCoeff() < 0.0 || demand.minCoeff() < 0.0) throw InputError("transport_lp: negative weights");
  if (!cost.allFinite()) throw InputError("transport_lp: non-finite cost");
  const double gap = std::abs(supply.sum() - demand.sum());
  if (gap > 1e-12) {
    throw InputError("transport_lp: supply and demand differ by " + std::to_string(gap));
  }
  return TransportSimplex(cost, supply, demand).solve();
}

Matrix partial_lmo(const Matrix& grad, const Vector& p, const Vector& q, double eps, double margin) {
  if (!(eps >= 0.0 && eps < 1.0)) throw InputError("partial_lmo: eps must lie in [0, 1)");
  if (std::abs(p.sum() - 1.0) > 1e-9 || std::abs(q.sum() - 1.0) > 1e-9) {
    throw InputError("partial_lmo: marginals must be probability vectors");
  }
  if (!(margin > 0.0)) throw InputError("partial_lmo: penalty margin must be positive");
  if (eps == 0.0) {
    Vector balanced = q;
    Eigen::Index heaviest = 0;
    balanced.maxCoeff(&heaviest);
    balanced(heaviest) += p.sum() - q.sum();
    return transport_lp(grad, p, balanced);
  }

  const Eigen::Index m = grad.rows();
  const Eigen::Index n = grad.cols();
  Matrix cost = Matrix::Zero(m + 1, n + 1);
  cost.topLeftCorner(m, n) = grad;
  cost(m, n) = margin + grad.cwiseAbs().maxCoeff();
  Vector supply(m + 1), demand(n + 1);
  supply << p, eps;
  demand << q, eps;
  // Balance exactly so the LP sees no spurious mismatch from p, q rounding.
  demand(n) += supply.sum() - demand.sum();
  const Matrix full = transport_lp(cost, supply, demand);
  if (full(m, n) > 1e-12) throw NumericalError("partial_lmo: dummy-dummy cell carries mass");
  return full.topLeftCorner(m, n);
}

}  // namespace rgw
