#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "boundary.hpp"
#include "numerics.hpp"
#include "shell_graph.hpp"
#include "transfer.hpp"

namespace shellspec {

struct WeylDisc {
  cplx center;
  double radius = 0.0;
  int n = 0;
  cplx z;

  bool contains(cplx w, double slack = 0.0) const { return std::abs(w - center) <= radius + slack; }
};

// The disc is the image of the unit ball of contractions under
// U -> center + ½ (β I^{-1/2}) U (I^{-1/2} γ), with I = Im δ.
inline WeylDisc weyl_disc(const BoundaryData& R, int n = 0) {
  if (R.q() != 1) throw Error(ErrorCode::DimensionMismatch, "weyl_disc needs q = 1");
  if (!(R.z.imag() > 0.0)) throw Error(ErrorCode::ConfigInvalid, "weyl_disc needs Im z > 0");
  Mat S = sqrt_inv_pd(imag_part(R.delta));
  Mat bS = R.beta * S;
  Mat Sg = S * R.gamma;
  WeylDisc d;
  d.center = R.alpha(0, 0) + 0.5 * I_UNIT * (bS * Sg)(0, 0);
  d.radius = 0.5 * bS.norm() * Sg.norm();
  d.n = n;
  d.z = R.z;
  return d;
}

inline Mat haar_unitary(int r, std::mt19937_64& rng) {
  Mat G = complex_gaussian(r, r, rng);
  Eigen::HouseholderQR<Mat> qr(G);
  Mat Q = qr.householderQ();
  Mat Rm = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int j = 0; j < r; ++j) {
    cplx d = Rm(j, j);
    if (std::abs(d) > 0) Q.col(j) *= d / std::abs(d);
  }
  return Q;
}

inline Mat random_hermitian(int r, std::mt19937_64& rng, double scale = 1.0) {
  Mat G = complex_gaussian(r, r, rng, scale);
  return 0.5 * (G + G.adjoint());
}

// Boundary conditions A with Im A >= 0 come from three families: Hermitian A
// at log-uniform scales, dissipative H + iP, and Hermitian A obtained from
// Haar unitaries through the disc parametrization (these reach the rim).
inline std::vector<cplx> sample_disc(const BoundaryData& R, int count, std::uint64_t seed,
                                     const TolerancePolicy& tol = {}) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> logscale(-2.0, 2.0);
  const int r = R.r();
  Mat S = sqrt_inv_pd(imag_part(R.delta));
  std::vector<cplx> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    Mat A;
    switch (i % 3) {
      case 0:
        A = random_hermitian(r, rng, std::pow(10.0, logscale(rng)));
        break;
      case 1: {
        Mat G = complex_gaussian(r, r, rng, std::pow(10.0, logscale(rng)));
        A = random_hermitian(r, rng, std::pow(10.0, logscale(rng))) + I_UNIT * (G * G.adjoint());
        break;
      }
      default: {
        Mat U = haar_unitary(r, rng);
        Mat X = 0.5 * S * (I_UNIT * Mat::Identity(r, r) + U) * S;
        Mat Xinv = Eigen::PartialPivLU<Mat>(X).inverse();
        A = Eigen::PartialPivLU<Mat>(Mat(Xinv + R.delta)).inverse();
        A = hermitian_part(A);
        break;
      }
    }
    try {
      out.push_back(perturbed_blocks(R, A, tol).alpha_A(0, 0));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NotInvertible) throw;
    }
  }
  return out;
}

struct LimitPointRow {
  int n = 0;
  WeylDisc disc;
  double distance = 0.0;  // |center - truth|
};

struct LimitPointTable {
  std::vector<LimitPointRow> rows;
  cplx truth;
  int truth_depth = 0;
};

// Root entry of (H_{0,n} - z)^{-1}.
inline cplx root_resolvent_entry(const ShellOperator& so, const ChannelData& cd, int n, cplx z,
                                 const TolerancePolicy& tol = {}) {
  Mat H = so.assemble(0, n);
  Mat e = Mat::Zero(H.rows(), 1);
  e.topRows(so.size(0)) = cd.upsilon[0];
  return (e.adjoint() * resolvent_apply(H, z, e, tol))(0, 0);
}

inline LimitPointTable limit_point_diagnostic(const ShellOperator& so, const ChannelData& cd, cplx z,
                                              const std::vector<int>& depths, const SweepPolicy& policy = {}) {
  if (!(z.imag() > 0.0)) throw Error(ErrorCode::ConfigInvalid, "limit_point_diagnostic needs Im z > 0");
  if (depths.empty()) throw Error(ErrorCode::ConfigInvalid, "no depths");
  int nmax = 0;
  for (int d : depths) nmax = std::max(nmax, d);
  std::vector<std::optional<BoundaryData>> path;
  sweep(so, cd, z, nmax, policy, &path);
  LimitPointTable t;
  t.truth_depth = nmax;
  t.truth = root_resolvent_entry(so, cd, nmax, z, policy.tol);
  for (int d : depths) {
    BoundaryData R = path[d] ? *path[d] : boundary_data_direct(so, cd, 0, d, z, policy.tol);
    LimitPointRow row;
    row.n = d;
    row.disc = weyl_disc(R, d);
    row.distance = std::abs(row.disc.center - t.truth);
    t.rows.push_back(row);
  }
  return t;
}

}  // namespace shellspec
