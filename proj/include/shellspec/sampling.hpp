#pragma once

#include <random>
#include <vector>

#include "boundary.hpp"
#include "numerics.hpp"
#include "shell_graph.hpp"
#include "transfer.hpp"

namespace shellspec {

// Connected graph: random spanning tree plus extra edges, complex weights,
// real diagonal.
inline WeightedGraph random_connected_graph(int n, double extra_edge_prob, std::mt19937_64& rng) {
  WeightedGraph g;
  g.vertex_count = n;
  std::normal_distribution<double> N(0.0, 1.0);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::vector<std::vector<char>> has(n, std::vector<char>(n, 0));
  auto weight = [&] {
    cplx w(N(rng), N(rng));
    if (std::abs(w) < 0.2) w += cplx(0.5, 0.0);
    return w;
  };
  for (int v = 1; v < n; ++v) {
    std::uniform_int_distribution<int> P(0, v - 1);
    int p = P(rng);
    g.add_edge(v, p, weight());
    has[v][p] = has[p][v] = 1;
  }
  for (int x = 0; x < n; ++x)
    for (int y = x + 1; y < n; ++y)
      if (!has[x][y] && U(rng) < extra_edge_prob) {
        g.add_edge(x, y, weight());
        has[x][y] = has[y][x] = 1;
      }
  for (int x = 0; x < n; ++x) g.add_diagonal(x, N(rng));
  return g;
}

// Boundary data of a random block: [Υ Φ]^*(H − z)^{-1}[Υ Φ] with a random
// Hermitian H of size dim; lies in the upper cone when Im z > 0.
inline BoundaryData random_block_data(int q, int r, int dim, cplx z, std::mt19937_64& rng) {
  Mat G = complex_gaussian(dim, dim, rng);
  Mat H = 0.5 * (G + G.adjoint());
  Mat C = complex_gaussian(dim, q + r, rng);
  Mat X = resolvent_apply(H, z, C, TolerancePolicy{});
  return BoundaryData::from_full(C.adjoint() * X, q, z);
}

// Random Hermitian-data shell operator of given shell sizes, with dense
// random connections.
inline ShellOperator random_shell_operator(const std::vector<int>& sizes, std::mt19937_64& rng, bool real = false) {
  ShellOperator so;
  for (std::size_t n = 0; n < sizes.size(); ++n) {
    Mat G = complex_gaussian(sizes[n], sizes[n], rng);
    if (real) G = G.real().cast<cplx>();
    so.potentials.push_back(0.5 * (G + G.adjoint()));
    if (n > 0) {
      Mat W = complex_gaussian(sizes[n], sizes[n - 1], rng);
      if (real) W = W.real().cast<cplx>();
      so.connections.push_back(W);
    }
  }
  return so;
}

}  // namespace shellspec
