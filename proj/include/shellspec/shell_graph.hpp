#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <queue>
#include <random>
#include <utility>
#include <vector>

#include "numerics.hpp"

namespace shellspec {

struct GraphEntry {
  int x = 0;
  int y = 0;
  cplx w;
};

// Off-diagonal entries are stored once; the conjugate entry (y, x, conj w) is
// implied. Diagonal entries (x == y) must be real.
struct WeightedGraph {
  int vertex_count = 0;
  std::vector<GraphEntry> entries;

  void add_edge(int x, int y, cplx w) { entries.push_back({x, y, w}); }
  void add_diagonal(int x, double v) { entries.push_back({x, x, cplx(v, 0.0)}); }

  void validate() const {
    if (vertex_count < 0) throw Error(ErrorCode::SpecInvalid, "negative vertex count");
    for (const auto& e : entries) {
      if (e.x < 0 || e.y < 0 || e.x >= vertex_count || e.y >= vertex_count)
        throw Error(ErrorCode::SpecInvalid, "vertex id out of range");
      if (e.x == e.y && e.w.imag() != 0.0)
        throw Error(ErrorCode::SpecInvalid, "diagonal entries must be real");
    }
  }

  Mat to_dense() const {
    Mat H = Mat::Zero(vertex_count, vertex_count);
    for (const auto& e : entries) {
      if (e.x == e.y) {
        H(e.x, e.x) += e.w.real();
      } else {
        H(e.x, e.y) += e.w;
        H(e.y, e.x) += std::conj(e.w);
      }
    }
    return H;
  }

  std::vector<std::vector<int>> adjacency() const {
    std::vector<std::vector<int>> adj(vertex_count);
    for (const auto& e : entries) {
      if (e.x == e.y || e.w == cplx(0.0)) continue;
      adj[e.x].push_back(e.y);
      adj[e.y].push_back(e.x);
    }
    for (auto& a : adj) {
      std::sort(a.begin(), a.end());
      a.erase(std::unique(a.begin(), a.end()), a.end());
    }
    return adj;
  }

  bool is_connected() const {
    if (vertex_count == 0) return true;
    auto adj = adjacency();
    std::vector<char> seen(vertex_count, 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    int count = 1;
    while (!stack.empty()) {
      int v = stack.back();
      stack.pop_back();
      for (int u : adj[v])
        if (!seen[u]) {
          seen[u] = 1;
          ++count;
          stack.push_back(u);
        }
    }
    return count == vertex_count;
  }
};

struct ShellPartition {
  std::vector<std::vector<int>> shells;

  std::vector<int> sizes() const {
    std::vector<int> s;
    for (const auto& sh : shells) s.push_back(static_cast<int>(sh.size()));
    return s;
  }
  int depth() const { return static_cast<int>(shells.size()) - 1; }
};

inline ShellPartition bfs_partition(const WeightedGraph& g, int root) {
  g.validate();
  if (root < 0 || root >= g.vertex_count) throw Error(ErrorCode::SpecInvalid, "root out of range");
  auto adj = g.adjacency();
  std::vector<int> dist(g.vertex_count, -1);
  std::queue<int> q;
  dist[root] = 0;
  q.push(root);
  int maxd = 0;
  while (!q.empty()) {
    int v = q.front();
    q.pop();
    for (int u : adj[v])
      if (dist[u] < 0) {
        dist[u] = dist[v] + 1;
        maxd = std::max(maxd, dist[u]);
        q.push(u);
      }
  }
  ShellPartition p;
  p.shells.resize(maxd + 1);
  for (int v = 0; v < g.vertex_count; ++v) {
    if (dist[v] < 0) throw Error(ErrorCode::Disconnected, "vertex " + std::to_string(v) + " unreachable");
    p.shells[dist[v]].push_back(v);
  }
  return p;
}

namespace detail {
inline std::vector<int> shell_of(const WeightedGraph& g, const ShellPartition& p) {
  std::vector<int> where(g.vertex_count, -1);
  for (std::size_t k = 0; k < p.shells.size(); ++k)
    for (int v : p.shells[k]) {
      if (v < 0 || v >= g.vertex_count || where[v] >= 0)
        throw Error(ErrorCode::PartitionInvalid, "shells must be disjoint and in range");
      where[v] = static_cast<int>(k);
    }
  for (int v = 0; v < g.vertex_count; ++v)
    if (where[v] < 0) throw Error(ErrorCode::PartitionInvalid, "partition does not cover the graph");
  return where;
}
}  // namespace detail

inline std::vector<std::pair<int, int>> validate_partition(const WeightedGraph& g, const ShellPartition& p) {
  auto where = detail::shell_of(g, p);
  std::vector<std::pair<int, int>> bad;
  for (const auto& e : g.entries) {
    if (e.x == e.y || e.w == cplx(0.0)) continue;
    if (std::abs(where[e.x] - where[e.y]) >= 2) bad.emplace_back(e.x, e.y);
  }
  return bad;
}

// Finite truncation: potentials V_0..V_N, connections[k] = W_{k+1} (s_{k+1} x s_k).
struct ShellOperator {
  std::vector<Mat> potentials;
  std::vector<Mat> connections;

  int depth() const { return static_cast<int>(potentials.size()) - 1; }
  int size(int n) const { return static_cast<int>(potentials[n].rows()); }
  const Mat& V(int n) const { return potentials[n]; }
  const Mat& W(int n) const { return connections[n - 1]; }

  std::vector<int> sizes() const {
    std::vector<int> s;
    for (const auto& v : potentials) s.push_back(static_cast<int>(v.rows()));
    return s;
  }

  int offset(int m, int n) const {
    int o = 0;
    for (int k = m; k < n; ++k) o += size(k);
    return o;
  }

  void validate() const {
    if (potentials.empty()) throw Error(ErrorCode::SpecInvalid, "empty shell operator");
    if (connections.size() + 1 != potentials.size())
      throw Error(ErrorCode::DimensionMismatch, "need exactly one connection between consecutive shells");
    for (int n = 0; n <= depth(); ++n) {
      const Mat& v = potentials[n];
      if (v.rows() != v.cols()) throw Error(ErrorCode::DimensionMismatch, "V_n not square");
      if ((v - v.adjoint()).norm() > 1e-12 * (1.0 + v.norm()))
        throw Error(ErrorCode::SpecInvalid, "V_n not Hermitian");
    }
    for (int n = 1; n <= depth(); ++n)
      if (W(n).rows() != size(n) || W(n).cols() != size(n - 1))
        throw Error(ErrorCode::DimensionMismatch, "W_n shape");
  }

  // H_{m,n}
  Mat assemble(int m, int n) const {
    const int dim = offset(m, n + 1);
    Mat H = Mat::Zero(dim, dim);
    int o = 0;
    for (int k = m; k <= n; ++k) {
      H.block(o, o, size(k), size(k)) = potentials[k];
      if (k > m) {
        int op = o - size(k - 1);
        H.block(o, op, size(k), size(k - 1)) = W(k);
        H.block(op, o, size(k - 1), size(k)) = W(k).adjoint();
      }
      o += size(k);
    }
    return H;
  }
  Mat assemble() const { return assemble(0, depth()); }
};

inline ShellOperator extract_shell_operator(const WeightedGraph& g, const ShellPartition& p) {
  if (!validate_partition(g, p).empty())
    throw Error(ErrorCode::PartitionInvalid, "an edge skips a shell");
  Mat H = g.to_dense();
  ShellOperator so;
  const int N = p.depth();
  for (int n = 0; n <= N; ++n) {
    const auto& s = p.shells[n];
    Mat v(s.size(), s.size());
    for (std::size_t i = 0; i < s.size(); ++i)
      for (std::size_t j = 0; j < s.size(); ++j) v(i, j) = H(s[i], s[j]);
    so.potentials.push_back(v);
    if (n > 0) {
      const auto& sp = p.shells[n - 1];
      Mat w(s.size(), sp.size());
      for (std::size_t i = 0; i < s.size(); ++i)
        for (std::size_t j = 0; j < sp.size(); ++j) w(i, j) = H(s[i], sp[j]);
      so.connections.push_back(w);
    }
  }
  return so;
}

// Per shell: upsilon[n] = Υ_n (s_n x r_n), phi[n] = Φ_n (s_n x r_{n+1}).
// phi may stop one short of the last shell (no outgoing connection).
struct ChannelData {
  std::vector<Mat> upsilon;
  std::vector<Mat> phi;

  int rank_in(int n) const { return static_cast<int>(upsilon[n].cols()); }
  int rank_out(int n) const { return static_cast<int>(phi[n].cols()); }
  int max_boundary_depth() const { return static_cast<int>(phi.size()) - 1; }
  std::vector<int> ranks() const {
    std::vector<int> r;
    for (const auto& u : upsilon) r.push_back(static_cast<int>(u.cols()));
    if (phi.size() == upsilon.size() && !phi.empty()) r.push_back(static_cast<int>(phi.back().cols()));
    return r;
  }
};

enum class ChannelSplit { SingularOnUpsilon, SingularOnPhi };

// Υ_n, Φ_{n-1} from a compact SVD of W_n = -Υ_n Φ_{n-1}^*.
inline std::pair<Mat, Mat> split_connection(const Mat& W, const TolerancePolicy& tol,
                                            ChannelSplit split = ChannelSplit::SingularOnUpsilon) {
  Eigen::BDCSVD<Mat> svd(W, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s(0) <= 1e-300)
    throw Error(ErrorCode::ZeroConnection, "connection matrix vanishes");
  int r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > tol.rank_rel_tol * s(0)) ++r;
  Mat U = svd.matrixU().leftCols(r);
  Mat V = svd.matrixV().leftCols(r);
  RVec d = s.head(r);
  if (split == ChannelSplit::SingularOnUpsilon) return {-(U * d.asDiagonal()), V};
  return {-U, V * d.asDiagonal()};
}

inline ChannelData channel_decomposition(const ShellOperator& so, const Vec& root_vector,
                                         const TolerancePolicy& tol = {},
                                         ChannelSplit split = ChannelSplit::SingularOnUpsilon) {
  so.validate();
  if (root_vector.size() != so.size(0)) throw Error(ErrorCode::DimensionMismatch, "root vector size");
  const double nrm = root_vector.norm();
  if (nrm == 0.0) throw Error(ErrorCode::SpecInvalid, "root vector is zero");
  ChannelData cd;
  cd.upsilon.push_back(root_vector / nrm);
  for (int n = 1; n <= so.depth(); ++n) {
    auto [ups, ph] = split_connection(so.W(n), tol, split);
    cd.upsilon.push_back(ups);
    cd.phi.push_back(ph);
  }
  return cd;
}

inline Vec root_delta(const ShellOperator& so, int index = 0) {
  Vec v = Vec::Zero(so.size(0));
  v(index) = 1.0;
  return v;
}

struct A2Probe {
  double lambda = 0.0;
  bool full_rank = false;
  double sigma_ratio = 0.0;  // smallest / largest singular value of beta
};

struct A2ShellReport {
  int shell = 0;
  std::vector<A2Probe> probes;
  bool certified() const {
    return std::any_of(probes.begin(), probes.end(), [](const A2Probe& p) { return p.full_rank; });
  }
};

// β^λ_n = Υ_n^*(V_n − λ)^{-1}Φ_n
inline Mat shell_beta(const ShellOperator& so, const ChannelData& cd, int n, double lambda,
                      const TolerancePolicy& tol = {}) {
  return cd.upsilon[n].adjoint() * resolvent_apply(so.V(n), cplx(lambda, 0.0), cd.phi[n], tol);
}

inline A2Probe probe_beta(const Mat& beta, double lambda, const TolerancePolicy& tol) {
  A2Probe p;
  p.lambda = lambda;
  Eigen::BDCSVD<Mat> svd(beta);
  const auto& s = svd.singularValues();
  if (beta.rows() == 0) {
    p.full_rank = true;
    p.sigma_ratio = 1.0;
  } else if (s(0) > 0.0) {
    p.sigma_ratio = beta.rows() <= beta.cols() ? s(beta.rows() - 1) / s(0) : 0.0;
    p.full_rank = p.sigma_ratio > tol.rank_rel_tol;
  }
  return p;
}

inline A2ShellReport check_A2_shell(const ShellOperator& so, const ChannelData& cd, int n,
                                    const std::vector<double>& probes, const TolerancePolicy& tol = {}) {
  A2ShellReport rep;
  rep.shell = n;
  for (double lam : probes) {
    try {
      rep.probes.push_back(probe_beta(shell_beta(so, cd, n, lam, tol), lam, tol));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::SingularSpectralParameter) throw;
    }
  }
  return rep;
}

inline std::vector<A2ShellReport> check_A2(const ShellOperator& so, const ChannelData& cd,
                                           const std::vector<double>& probes,
                                           const TolerancePolicy& tol = {}) {
  std::vector<A2ShellReport> out;
  for (int n = 0; n <= cd.max_boundary_depth(); ++n) out.push_back(check_A2_shell(so, cd, n, probes, tol));
  return out;
}

namespace detail {
inline double spectral_bound(const Mat& v) {
  double b = 0.0;
  for (Eigen::Index i = 0; i < v.rows(); ++i) b = std::max(b, v.row(i).cwiseAbs().sum());
  return b;
}

inline std::vector<double> random_probes(const Mat& v, int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const double b = spectral_bound(v) + 2.0;
  std::uniform_real_distribution<double> U(-b, b);
  std::vector<double> out;
  for (int i = 0; i < count; ++i) out.push_back(U(rng));
  return out;
}
}  // namespace detail

inline std::vector<A2ShellReport> check_A2(const ShellOperator& so, const ChannelData& cd, int probe_count,
                                           std::uint64_t seed, const TolerancePolicy& tol = {}) {
  std::vector<A2ShellReport> out;
  for (int n = 0; n <= cd.max_boundary_depth(); ++n) {
    auto probes = detail::random_probes(so.V(n), probe_count, seed + 7919ULL * n);
    out.push_back(check_A2_shell(so, cd, n, probes, tol));
  }
  return out;
}

struct Grouping {
  ShellOperator so;
  std::vector<std::vector<int>> groups;  // group index -> original shells
};

// Regrouping into blocks so that the ranks at the block cuts are
// non-decreasing and every closed block passes a sampled (A2) probe. Among
// valid cut sets the one with the most closed blocks is kept; the block after
// the last cut runs to the end and carries no condition.
inline Grouping group_shells(const ShellOperator& so, const TolerancePolicy& tol = {}, int probe_count = 3,
                             std::uint64_t seed = 20240611ULL) {
  so.validate();
  const int N = so.depth();
  std::vector<int> rank(N + 1, 0);
  rank[0] = 1;
  for (int n = 1; n <= N; ++n) rank[n] = numerical_rank(so.W(n), tol);

  auto block_passes_A2 = [&](int a, int b) {
    // Block channels: Υ at the first shell, Φ at the last shell.
    Mat H = so.assemble(a, b);
    const int dim = static_cast<int>(H.rows());
    Mat ups = Mat::Zero(dim, 0);
    if (a == 0) {
      ups = Mat::Zero(dim, 1);
      ups(0, 0) = 1.0;
    } else {
      auto [u, p] = split_connection(so.W(a), tol);
      (void)p;
      ups = Mat::Zero(dim, u.cols());
      ups.topRows(so.size(a)) = u;
    }
    auto [u_next, phi_b] = split_connection(so.W(b + 1), tol);
    (void)u_next;
    Mat ph = Mat::Zero(dim, phi_b.cols());
    ph.bottomRows(so.size(b)) = phi_b;
    auto probes = detail::random_probes(H, probe_count, seed + 104729ULL * a + b);
    for (double lam : probes) {
      try {
        Mat beta = ups.adjoint() * resolvent_apply(H, cplx(lam, 0.0), ph, tol);
        if (probe_beta(beta, lam, tol).full_rank) return true;
      } catch (const Error&) {
      }
    }
    return false;
  };

  // best[b]: most closed blocks in a valid prefix whose last block ends at
  // shell b (cut rank rank[b + 1]); prev[b]: end of the block before, or -1.
  std::vector<int> best(N, 0), prev(N, -1);
  std::vector<int> order;  // closed ends sorted by best, descending
  for (int b = 0; b < N; ++b) {
    const int out_rank = rank[b + 1];
    for (int e : order) {
      if (rank[e + 1] > out_rank) continue;
      if (block_passes_A2(e + 1, b)) {
        best[b] = best[e] + 1;
        prev[b] = e;
        break;
      }
    }
    if (best[b] == 0 && out_rank >= rank[0] && block_passes_A2(0, b)) best[b] = 1;
    if (best[b] > 0)
      order.insert(std::upper_bound(order.begin(), order.end(), b,
                                    [&](int x, int y) { return best[x] > best[y]; }),
                   b);
  }
  int last = -1;
  for (int b = 0; b < N; ++b)
    if (best[b] > 0 && (last < 0 || best[b] >= best[last])) last = b;
  if (N > 0 && last < 0) throw Error(ErrorCode::GroupingFailed, "no block closes with a valid rank and A2 probe");

  std::vector<int> ends;
  for (int e = last; e >= 0; e = prev[e]) ends.push_back(e);
  std::reverse(ends.begin(), ends.end());
  ends.push_back(N);
  std::vector<std::vector<int>> groups;
  int start = 0;
  for (int e : ends) {
    std::vector<int> g;
    for (int k = start; k <= e; ++k) g.push_back(k);
    groups.push_back(g);
    start = e + 1;
  }

  Grouping out;
  out.groups = groups;
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    const int ga = groups[gi].front(), gb = groups[gi].back();
    out.so.potentials.push_back(so.assemble(ga, gb));
    if (gi > 0) {
      const int pa = groups[gi - 1].front();
      const int rows = so.offset(ga, gb + 1), cols = so.offset(pa, ga);
      Mat w = Mat::Zero(rows, cols);
      w.block(0, cols - so.size(ga - 1), so.size(ga), so.size(ga - 1)) = so.W(ga);
      out.so.connections.push_back(w);
    }
  }
  return out;
}

}  // namespace shellspec
