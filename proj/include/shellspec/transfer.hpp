#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "boundary.hpp"
#include "numerics.hpp"
#include "shell_graph.hpp"

namespace shellspec {

// Affine set {[B, -b; δB, γ - δb] : B = B0 + K C1, b = b0 + K C2}.
struct TransferSpace {
  BoundaryData R;
  Mat B0;
  Mat b0;
  Mat K;

  int q() const { return R.q(); }
  int r() const { return R.r(); }
  int kernel_dim() const { return static_cast<int>(K.cols()); }
};

struct TransferMatrix {
  Mat T;  // 2r x 2q
  int q = 0;
  int r = 0;
};

inline TransferSpace transfer_space(const BoundaryData& R, const TolerancePolicy& tol = {}) {
  TransferSpace ts;
  ts.R = R;
  ts.B0 = right_inverse_base(R.beta, tol);
  ts.b0 = ts.B0 * R.alpha;
  ts.K = kernel_basis(R.beta, tol);
  return ts;
}

inline TransferMatrix member_from(const BoundaryData& R, const Mat& B, const Mat& b) {
  const int q = R.q(), r = R.r();
  TransferMatrix tm;
  tm.q = q;
  tm.r = r;
  tm.T.resize(2 * r, 2 * q);
  tm.T << B, -b, R.delta * B, R.gamma - R.delta * b;
  return tm;
}

inline TransferMatrix sample_member(const TransferSpace& ts, const Mat& C1, const Mat& C2) {
  const int k = ts.kernel_dim(), q = ts.q();
  Mat c1 = C1.size() ? C1 : Mat::Zero(k, q);
  Mat c2 = C2.size() ? C2 : Mat::Zero(k, q);
  if (c1.rows() != k || c1.cols() != q || c2.rows() != k || c2.cols() != q)
    throw Error(ErrorCode::DimensionMismatch, "coefficients must be (r-q) x q");
  return member_from(ts.R, ts.B0 + ts.K * c1, ts.b0 + ts.K * c2);
}

// Member of the restricted set where b = B α.
inline TransferMatrix bold_member(const TransferSpace& ts, const Mat& C1) {
  const int k = ts.kernel_dim(), q = ts.q();
  Mat c1 = C1.size() ? C1 : Mat::Zero(k, q);
  Mat B = ts.B0 + ts.K * c1;
  return member_from(ts.R, B, B * ts.R.alpha);
}

inline std::array<double, 4> membership_check(const TransferMatrix& tm, const BoundaryData& R) {
  const int q = R.q(), r = R.r();
  if (tm.T.rows() != 2 * r || tm.T.cols() != 2 * q)
    throw Error(ErrorCode::DimensionMismatch, "transfer matrix shape does not match boundary data");
  Mat B = tm.T.topLeftCorner(r, q);
  Mat b = -tm.T.topRightCorner(r, q);
  Mat X = tm.T.bottomLeftCorner(r, q);
  Mat Y = tm.T.bottomRightCorner(r, q);
  return {(R.beta * B - Mat::Identity(q, q)).norm(), (R.beta * b - R.alpha).norm(),
          (X - R.delta * B).norm(), (Y - (R.gamma - R.delta * b)).norm()};
}

inline Mat symplectic_form(int m) {
  Mat J = Mat::Zero(2 * m, 2 * m);
  J.topRightCorner(m, m) = -Mat::Identity(m, m);
  J.bottomLeftCorner(m, m) = Mat::Identity(m, m);
  return J;
}

// ‖T1^* J_r T2 − J_q‖, or with transposes for the real-symmetric variant.
inline double symplectic_residual(const TransferMatrix& t1, const TransferMatrix& t2, bool transpose = false) {
  if (t1.T.rows() != t2.T.rows() || t1.T.cols() != t2.T.cols())
    throw Error(ErrorCode::DimensionMismatch, "symplectic_residual: shapes differ");
  const int r = static_cast<int>(t1.T.rows() / 2), q = static_cast<int>(t1.T.cols() / 2);
  Mat lhs = (transpose ? Mat(t1.T.transpose()) : Mat(t1.T.adjoint())) * symplectic_form(r) * t2.T;
  return (lhs - symplectic_form(q)).norm();
}

struct DirichletMin {
  Vec u;  // (B; δB), length 2r
  double value = 0.0;
};

// Minimizes B^*(1 + δ^*δ)B subject to βB = 1 (q = 1). Works in the singular
// basis of δ so that large δ (deep truncations away from the spectrum) does not
// overflow when squared.
inline DirichletMin min_norm_dirichlet(const BoundaryData& R) {
  if (R.q() != 1) throw Error(ErrorCode::DimensionMismatch, "min_norm_dirichlet needs q = 1");
  const int r = R.r();
  Vec bstar = R.beta.adjoint().col(0);
  if (bstar.norm() <= 1e-300) throw Error(ErrorCode::ZeroGamma, "beta vanishes");
  Eigen::BDCSVD<Mat> svd(R.delta, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const RVec& s = svd.singularValues();
  Vec w = svd.matrixV().adjoint() * bstar;
  Vec x_s(r), dx_s(r);
  double denom = 0.0;
  for (int k = 0; k < r; ++k) {
    const double sk = k < s.size() ? s(k) : 0.0;
    const double damp = 1.0 / (1.0 + sk * sk);
    x_s(k) = w(k) * damp;
    dx_s(k) = sk == 0.0 ? cplx(0.0) : w(k) / (sk + 1.0 / sk);
    denom += std::norm(w(k)) * damp;
  }
  DirichletMin out;
  out.u.resize(2 * r);
  out.u << svd.matrixV() * x_s / denom, svd.matrixU() * dx_s / denom;
  out.value = 1.0 / denom;
  return out;
}

struct ShellChoice {
  Mat C1;
  Mat C2;
};

struct Propagation {
  std::vector<Vec> u;    // u[n] = u_n, n = 0..depth+1
  std::vector<Vec> v;    // v[n + 1] = v_n, n = -1..depth
  std::vector<Vec> psi;  // Ψ_n, n = 0..depth
  std::vector<double> eq_residual;
  std::vector<double> trace_residual;

  double max_residual() const {
    double m = 0.0;
    for (double x : eq_residual) m = std::max(m, x);
    for (double x : trace_residual) m = std::max(m, x);
    return m;
  }
};

// Iterates (u_{n+1}; v_n) = T_n (u_n; v_{n-1}) and rebuilds Ψ_n shell by shell.
// Residuals are relative to 1 + the local solution size.
inline Propagation propagate_solution(const ShellOperator& so, const ChannelData& cd, cplx z,
                                      const std::vector<ShellChoice>& choices, const Vec& u, const Vec& v,
                                      int depth, const TolerancePolicy& tol = {}) {
  if (depth < 0 || depth > cd.max_boundary_depth())
    throw Error(ErrorCode::DimensionMismatch, "propagation depth outside channel data");
  Propagation out;
  out.u.push_back(u);
  out.v.push_back(v);
  for (int n = 0; n <= depth; ++n) {
    BoundaryData Rn;
    try {
      Rn = shell_data(so, cd, n, z, tol, ResolventMode::Pseudo);
    } catch (const Error& e) {
      throw Error(ErrorCode::SingularShell, "shell " + std::to_string(n) + ": " + e.what());
    }
    TransferSpace ts = transfer_space(Rn, tol);
    ShellChoice ch = n < static_cast<int>(choices.size()) ? choices[n] : ShellChoice{};
    TransferMatrix tm = sample_member(ts, ch.C1, ch.C2);
    Vec in(tm.T.cols());
    in << out.u[n], out.v[n];
    Vec next = tm.T * in;
    out.u.push_back(next.head(tm.r));
    out.v.push_back(next.tail(tm.r));
    Vec rhs = cd.upsilon[n] * out.v[n] + cd.phi[n] * out.u[n + 1];
    try {
      out.psi.push_back(resolvent_apply(so.V(n), z, rhs, tol, ResolventMode::Pseudo));
    } catch (const Error& e) {
      throw Error(ErrorCode::SingularShell, "shell " + std::to_string(n) + ": " + e.what());
    }
  }
  for (int n = 0; n <= depth; ++n) {
    const Vec& p = out.psi[n];
    Vec res = so.V(n) * p - z * p;
    double scale = 1.0 + p.norm();
    if (n > 0) {
      res += so.W(n) * out.psi[n - 1];
      scale += out.psi[n - 1].norm();
    } else {
      res -= cd.upsilon[0] * out.v[0];
    }
    if (n < depth) {
      res += so.W(n + 1).adjoint() * out.psi[n + 1];
      scale += out.psi[n + 1].norm();
    } else {
      res -= cd.phi[n] * out.u[n + 1];
    }
    out.eq_residual.push_back(res.norm() / scale);
    double tr = (cd.upsilon[n].adjoint() * p - out.u[n]).norm() + (cd.phi[n].adjoint() * p - out.v[n + 1]).norm();
    out.trace_residual.push_back(tr / scale);
  }
  return out;
}

inline Mat complex_gaussian(int rows, int cols, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> N(0.0, scale / std::sqrt(2.0));
  Mat m(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) m(i, j) = cplx(N(rng), N(rng));
  return m;
}

inline std::vector<double> injectivity_check(const TransferSpace& ts, const std::vector<ShellChoice>& samples) {
  std::vector<double> out;
  for (const auto& s : samples) {
    RVec sv = singular_values(sample_member(ts, s.C1, s.C2).T);
    out.push_back(sv(sv.size() - 1));
  }
  return out;
}

inline std::vector<double> injectivity_check(const TransferSpace& ts, int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<ShellChoice> samples;
  for (int i = 0; i < count; ++i)
    samples.push_back({complex_gaussian(ts.kernel_dim(), ts.q(), rng), complex_gaussian(ts.kernel_dim(), ts.q(), rng)});
  return injectivity_check(ts, samples);
}

struct RightInverseProductCheck {
  double residual = 0.0;  // max ‖(AB)(B̂Â) − 1‖ over the samples
  int span_dim = 0;       // dimension of the affine span of the sampled products
  int expected_dim = 0;   // l (n − l)
};

// For A (l×m) and B (m×n) of full row rank, products B̂Â of right inverses are
// right inverses of AB and sweep out the whole affine set.
inline RightInverseProductCheck right_inverse_product_check(const Mat& A, const Mat& B, int samples,
                                                            std::mt19937_64& rng, const TolerancePolicy& tol = {}) {
  const int l = static_cast<int>(A.rows()), n = static_cast<int>(B.cols());
  Mat A0 = right_inverse_base(A, tol), KA = kernel_basis(A, tol);
  Mat B0 = right_inverse_base(B, tol), KB = kernel_basis(B, tol);
  Mat AB = A * B;
  RightInverseProductCheck out;
  out.expected_dim = l * (n - l);
  Mat base;
  Mat diffs(static_cast<Eigen::Index>(n) * l, samples);
  for (int s = 0; s <= samples; ++s) {
    Mat Ah = A0 + KA * complex_gaussian(static_cast<int>(KA.cols()), l, rng);
    Mat Bh = B0 + KB * complex_gaussian(static_cast<int>(KB.cols()), static_cast<int>(B.rows()), rng);
    Mat P = Bh * Ah;
    out.residual = std::max(out.residual, (AB * P - Mat::Identity(l, l)).norm());
    if (s == 0) {
      base = P;
    } else {
      Mat d = P - base;
      diffs.col(s - 1) = Eigen::Map<const Vec>(d.data(), d.size());
    }
  }
  out.span_dim = samples > 0 ? numerical_rank(diffs, tol) : 0;
  return out;
}

}  // namespace shellspec
