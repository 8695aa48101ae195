#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "boundary.hpp"
#include "models.hpp"
#include "numerics.hpp"
#include "sampling.hpp"
#include "shell_graph.hpp"
#include "spectral.hpp"
#include "transfer.hpp"
#include "weyl.hpp"

namespace shellspec {

struct CheckResult {
  std::string name;
  bool passed = false;
  double residual = 0.0;
  double threshold = 0.0;
};

struct VerifyOptions {
  std::uint64_t seed = 1234;
  // Flips the sign of the composed β block; used to check that the suite
  // actually detects a broken composition.
  bool inject_sign_flip = false;
};

namespace verify_detail {

inline CheckResult make(const std::string& name, double residual, double threshold) {
  return {name, residual <= threshold, residual, threshold};
}

inline double block_rel_err(const BoundaryData& a, const BoundaryData& b) {
  auto rel = [](const Mat& x, const Mat& y) { return (x - y).norm() / std::max(1e-300, y.norm()); };
  return std::max({rel(a.alpha, b.alpha), rel(a.beta, b.beta), rel(a.gamma, b.gamma), rel(a.delta, b.delta)});
}

inline BoundaryData maybe_flip(BoundaryData R, const VerifyOptions& o) {
  if (o.inject_sign_flip) R.beta = -R.beta;
  return R;
}

inline cplx random_z(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> U(0.1, 2.0), X(-2.0, 2.0), S(0.0, 1.0);
  double im = U(rng);
  return {X(rng), S(rng) < 0.5 ? im : -im};
}

inline double min_solution_norm_sq(const ShellOperator& so, const ChannelData& cd, int n, cplx z) {
  Mat H = so.assemble(0, n);
  Mat phi = Mat::Zero(H.rows(), cd.phi[n].cols());
  phi.bottomRows(so.size(n)) = cd.phi[n];
  Mat root = Mat::Zero(H.rows(), 1);
  root.topRows(so.size(0)) = cd.upsilon[0];
  Mat X = resolvent_apply(H, z, phi, TolerancePolicy{});
  Mat beta = root.adjoint() * X;
  Mat G = X.adjoint() * X;
  return 1.0 / (beta * G.ldlt().solve(Mat(beta.adjoint())))(0, 0).real();
}

}  // namespace verify_detail

inline std::vector<CheckResult> verify_algebra(const VerifyOptions& o = {}) {
  using namespace verify_detail;
  std::vector<CheckResult> out;
  std::mt19937_64 rng(o.seed);
  double comp = 0.0;
  for (int g = 0; g < 8; ++g) {
    std::uniform_int_distribution<int> V(6, 18);
    WeightedGraph gr = random_connected_graph(V(rng), 0.15, rng);
    std::uniform_int_distribution<int> Rt(0, gr.vertex_count - 1);
    ShellPartition p = bfs_partition(gr, Rt(rng));
    if (p.depth() < 1) continue;
    ShellOperator so = extract_shell_operator(gr, p);
    ChannelData cd = channel_decomposition(so, root_delta(so));
    const int n = cd.max_boundary_depth();
    for (int k = 0; k < 4; ++k) {
      cplx z = random_z(rng);
      BoundaryData direct = boundary_data_direct(so, cd, 0, n, z);
      BoundaryData folded = shell_data(so, cd, 0, z);
      for (int s = 1; s <= n; ++s) folded = maybe_flip(compose(folded, shell_data(so, cd, s, z)), o);
      comp = std::max(comp, block_rel_err(folded, direct));
    }
  }
  out.push_back(make("composition identity (fold vs direct resolvent)", comp, 1e-8));

  double assoc = 0.0, cone = 1e300;
  for (int t = 0; t < 40; ++t) {
    std::uniform_int_distribution<int> D(1, 3);
    int q = D(rng), r = D(rng), s = D(rng), u = D(rng);
    cplx z(std::uniform_real_distribution<double>(-1, 1)(rng), std::uniform_real_distribution<double>(0.2, 1.5)(rng));
    BoundaryData Q = random_block_data(q, r, q + r + 2, z, rng);
    BoundaryData R = random_block_data(r, s, r + s + 2, z, rng);
    BoundaryData S = random_block_data(s, u, s + u + 2, z, rng);
    BoundaryData left = compose(maybe_flip(compose(Q, R), o), S);
    BoundaryData right = compose(Q, compose(R, S));
    assoc = std::max(assoc, (left.full() - right.full()).norm() / (1.0 + right.full().norm()));
    ConeMargins cm = cone_margins(compose(Q, R));
    cone = std::min({cone, cm.alpha_min, cm.delta_min, cm.full_min});
  }
  out.push_back(make("associativity of composition", assoc, 1e-9));
  out.push_back(make("composition stays in the closed upper cone", -cone, 1e-10));

  double sym = 0.0, symT = 0.0;
  for (int t = 0; t < 10; ++t) {
    std::uniform_int_distribution<int> D(1, 3);
    const int d0 = D(rng);
    std::vector<int> sizes{1, d0, d0 + D(rng) - 1};
    ShellOperator so = random_shell_operator(sizes, rng);
    ChannelData cd = channel_decomposition(so, root_delta(so));
    double lam = std::uniform_real_distribution<double>(-2, 2)(rng);
    TransferSpace ts = transfer_space(shell_data(so, cd, 1, cplx(lam, 0.0)));
    ShellOperator sr = random_shell_operator(sizes, rng, true);
    ChannelData cr = channel_decomposition(sr, root_delta(sr));
    TransferSpace tz = transfer_space(shell_data(sr, cr, 1, cplx(lam, 0.7)));
    for (int k = 0; k < 4; ++k) {
      auto m1 = sample_member(ts, complex_gaussian(ts.kernel_dim(), ts.q(), rng), complex_gaussian(ts.kernel_dim(), ts.q(), rng));
      auto m2 = sample_member(ts, complex_gaussian(ts.kernel_dim(), ts.q(), rng), complex_gaussian(ts.kernel_dim(), ts.q(), rng));
      sym = std::max(sym, symplectic_residual(m1, m2));
      auto n1 = sample_member(tz, complex_gaussian(tz.kernel_dim(), tz.q(), rng).real().cast<cplx>(), Mat());
      auto n2 = sample_member(tz, complex_gaussian(tz.kernel_dim(), tz.q(), rng).real().cast<cplx>(),
                              complex_gaussian(tz.kernel_dim(), tz.q(), rng).real().cast<cplx>());
      symT = std::max(symT, symplectic_residual(n1, n2, true));
    }
  }
  out.push_back(make("Hermitian-symplectic identity at real lambda", sym, 1e-10));
  out.push_back(make("real-symmetric transpose identity at complex z", symT, 1e-10));

  double prod = 0.0;
  for (int t = 0; t < 10; ++t) {
    ShellOperator so = random_shell_operator({1, 2, 2, 3}, rng);
    ChannelData cd = channel_decomposition(so, root_delta(so));
    cplx z = random_z(rng);
    BoundaryData Q = boundary_data_direct(so, cd, 0, 1, z), R = boundary_data_direct(so, cd, 2, 2, z);
    TransferSpace tq = transfer_space(Q), tr = transfer_space(R);
    auto a = sample_member(tq, complex_gaussian(tq.kernel_dim(), 1, rng), complex_gaussian(tq.kernel_dim(), 1, rng));
    auto b = sample_member(tr, complex_gaussian(tr.kernel_dim(), tr.q(), rng), complex_gaussian(tr.kernel_dim(), tr.q(), rng));
    TransferMatrix pm{b.T * a.T, 1, R.r()};
    auto res = membership_check(pm, maybe_flip(compose(Q, R), o));
    prod = std::max(prod, std::max({res[0], res[1], res[2], res[3]}) / std::max(1.0, pm.T.norm()));
  }
  out.push_back(make("transfer product lies in the composed space", prod, 1e-9));

  double ri = 0.0, dim_gap = 0.0;
  for (int l = 1; l <= 4; ++l)
    for (int m = l; m <= 4; ++m)
      for (int n = m; n <= 4; ++n)
        for (int t = 0; t < 3; ++t) {
          Mat A = complex_gaussian(l, m, rng), B = complex_gaussian(m, n, rng);
          auto c = right_inverse_product_check(A, B, l * (n - l) + 4, rng);
          ri = std::max(ri, c.residual);
          dim_gap = std::max(dim_gap, static_cast<double>(std::abs(c.span_dim - c.expected_dim)));
        }
  out.push_back(make("products of right inverses are right inverses", ri, 1e-10));
  out.push_back(make("right-inverse products span the full affine set", dim_gap, 0.0));
  return out;
}

inline std::vector<CheckResult> verify_weyl(const VerifyOptions& o = {}) {
  using namespace verify_detail;
  std::vector<CheckResult> out;
  ModelSpec spec;
  spec.widths.cap = 3;
  spec.potential = {"gauss_herm", 0.5, 1.0};
  spec.seed = o.seed;
  spec.depth = 8;
  Model m = build_model(spec);
  const cplx z(0.3, 0.8);
  std::vector<int> depths;
  for (int d = 0; d <= spec.depth; ++d) depths.push_back(d);
  LimitPointTable t = limit_point_diagnostic(m.so, m.cd, z, depths);
  double nest = 0.0;
  for (std::size_t i = 1; i < t.rows.size(); ++i)
    nest = std::max(nest, t.rows[i].disc.radius - t.rows[i - 1].disc.radius);
  out.push_back(make("Weyl radii non-increasing", nest, 1e-12));

  double cont = 0.0, dual = 0.0, fill = 1.0;
  for (int d : {2, 5, 8}) {
    BoundaryData R = boundary_data_direct(m.so, m.cd, 0, d, z);
    WeylDisc disc = weyl_disc(R);
    double reach = 0.0;
    for (cplx w : sample_disc(R, 300, o.seed + d)) {
      cont = std::max(cont, std::abs(w - disc.center) - disc.radius);
      reach = std::max(reach, std::abs(w - disc.center));
    }
    fill = std::min(fill, reach / disc.radius);
    double lhs = 1.0 / (4.0 * z.imag() * z.imag() * disc.radius * disc.radius);
    double rhs = min_solution_norm_sq(m.so, m.cd, d, z) * min_solution_norm_sq(m.so, m.cd, d, std::conj(z));
    dual = std::max(dual, std::abs(lhs - rhs) / rhs);
  }
  out.push_back(make("sampled boundary conditions inside the disc", cont, 1e-8));
  out.push_back(make("sampled points reach the rim (1 - fill ratio)", 1.0 - fill, 0.1));
  out.push_back(make("radius-solution duality", dual, 1e-8));
  return out;
}

inline std::vector<CheckResult> verify_spectral(const VerifyOptions& o = {}) {
  using namespace verify_detail;
  std::vector<CheckResult> out;
  ModelSpec spec;
  spec.widths.cap = 3;
  spec.potential = {"gauss_herm", 0.3, 1.0};
  spec.seed = o.seed;
  spec.depth = 40;
  Model m = build_model(spec);
  std::vector<double> grid;
  for (int i = 0; i <= 1600; ++i) grid.push_back(-4.0 + 8.0 * i / 1600);
  DensityEstimate est = density_curve(m.so, m.cd, grid, spec.depth);
  double t1 = 0.0, t2 = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (est.flags[i] != PointFlag::Ok) continue;
    t1 = std::max(t1, std::abs(est.density[i] - est.stieltjes[i].imag() / std::numbers::pi));
    t2 = std::max(t2, std::abs(est.density[i] * std::numbers::pi * est.min_norm[i] - 1.0));
  }
  out.push_back(make("density equals Im S / pi", t1, 1e-9));
  out.push_back(make("density * pi * min_norm equals 1", t2, 1e-8));
  double mass = trapezoid(grid, est.density);
  for (const auto& pm : est.point_masses) mass += pm.mass;
  out.push_back(make("total averaged mass within [0.9, 1.02]", std::max(0.9 - mass, mass - 1.02), 0.0));

  double herg = 0.0;
  for (int k = 0; k < 10; ++k) {
    cplx z(-2.0 + 0.4 * k, 0.05 + 0.1 * k);
    herg = std::max(herg, -averaged_stieltjes(sweep(m.so, m.cd, z, spec.depth).data).imag());
  }
  out.push_back(make("Herglotz sign of the averaged transform", herg, 1e-12));
  return out;
}

inline std::vector<CheckResult> verify_models(const VerifyOptions& o = {}) {
  using namespace verify_detail;
  std::vector<CheckResult> out;
  double uni = 0.0;
  for (int n = 0; n <= 10; ++n) {
    Mat U = mean_field_unitary(n);
    uni = std::max(uni, (U.adjoint() * U - Mat::Identity(U.rows(), U.cols())).norm());
  }
  out.push_back(make("mean-field unitary", uni, 1e-12));
  out.push_back(make("tree reduction on interior shells", tree_reduction_check(6), 1e-10));

  std::mt19937_64 rng(o.seed + 3);
  double iso = 0.0;
  for (int t = 0; t < 20; ++t) {
    std::uniform_int_distribution<int> S(1, 5);
    int sp = S(rng), sc = sp + S(rng) - 1;
    std::vector<double> a(sc);
    for (auto& x : a) x = std::uniform_real_distribution<double>(-0.5, 0.5)(rng);
    ConjugatedStep st = conjugated_step(a, 0.2, sp, sc, Mat::Zero(sc, sc));
    Vec u = complex_gaussian(2 * sp, 1, rng).col(0);
    iso = std::max(iso, std::abs((st.R * u).norm() - u.norm()));
  }
  out.push_back(make("free conjugated step is an isometry", iso, 1e-12));

  ModelSpec free;
  free.widths.cap = 4;
  free.depth = 60;
  McConfig cfg;
  cfg.grid = {-1.0, 0.0, 1.0};
  cfg.trials = 4;
  McResult mc = fourth_moment_run(free, cfg);
  double dev = 0.0;
  for (const auto& row : mc.fourth_moment)
    for (double x : row) dev = std::max(dev, std::abs(x - 1.0));
  out.push_back(make("zero potential keeps the fourth moment at 1", dev, 1e-10));

  Model tree = build_model(tree_spec(5)), red = build_model(reduced_tree_spec(5));
  double tr = 0.0;
  for (double lam : {-2.1, -0.7, 0.3, 1.9}) {
    double a = density_point(tree.so, tree.cd, lam, 5).density, b = density_point(red.so, red.cd, lam, 5).density;
    tr = std::max(tr, std::abs(a - b));
  }
  out.push_back(make("tree density equals reduced stair density", tr, 1e-8));
  return out;
}

inline std::vector<CheckResult> run_verify_suite(const std::string& suite, const VerifyOptions& o = {}) {
  std::vector<CheckResult> all;
  auto add = [&](std::vector<CheckResult> v) { all.insert(all.end(), v.begin(), v.end()); };
  if (suite == "all" || suite == "algebra") add(verify_algebra(o));
  if (suite == "all" || suite == "weyl") add(verify_weyl(o));
  if (suite == "all" || suite == "spectral") add(verify_spectral(o));
  if (suite == "all" || suite == "models") add(verify_models(o));
  if (all.empty()) throw Error(ErrorCode::ConfigInvalid, "unknown suite '" + suite + "'");
  return all;
}

}  // namespace shellspec
