#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "boundary.hpp"
#include "numerics.hpp"
#include "parallel.hpp"
#include "shell_graph.hpp"
#include "transfer.hpp"

namespace shellspec {

// α + iβ(1 − iδ)^{-1}γ, the Stieltjes transform ∫(λ − z)^{-1} of the
// Cauchy-averaged root measure. At real λ, δ is Hermitian and 1 − iδ is
// inverted in its eigenbasis, which is always well posed.
inline cplx averaged_stieltjes(const BoundaryData& R, const TolerancePolicy& tol = {}) {
  if (R.q() != 1) throw Error(ErrorCode::DimensionMismatch, "averaged_stieltjes needs q = 1");
  if (R.z.imag() == 0.0) {
    Eigen::SelfAdjointEigenSolver<Mat> es(hermitian_part(R.delta));
    Vec bv = (R.beta * es.eigenvectors()).adjoint().col(0);
    Vec vg = es.eigenvectors().adjoint() * R.gamma.col(0);
    cplx sum = 0.0;
    for (Eigen::Index k = 0; k < vg.size(); ++k) sum += std::conj(bv(k)) * vg(k) / (1.0 - I_UNIT * es.eigenvalues()(k));
    return R.alpha(0, 0) + I_UNIT * sum;
  }
  Mat M = Mat::Identity(R.r(), R.r()) - I_UNIT * R.delta;
  if (cond_one_minus(M, op_norm(R.delta)) > tol.suitability_cond_max)
    throw Error(ErrorCode::NotInvertible, "1 - i delta");
  return R.alpha(0, 0) + I_UNIT * (R.beta * Eigen::PartialPivLU<Mat>(M).solve(R.gamma))(0, 0);
}

// (1/π) γ^*(1 + δ²)^{-1}γ at real λ, summed over the eigenbasis of δ.
inline double ac_density(const BoundaryData& R) {
  if (R.q() != 1) throw Error(ErrorCode::DimensionMismatch, "ac_density needs q = 1");
  Vec g = R.gamma.col(0);
  if (g.norm() == 0.0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Mat> es(hermitian_part(R.delta));
  Vec c = es.eigenvectors().adjoint() * g;
  double sum = 0.0;
  for (Eigen::Index k = 0; k < c.size(); ++k) {
    const double d = es.eigenvalues()(k);
    sum += std::norm(c(k)) / (1.0 + d * d);
  }
  return sum / std::numbers::pi;
}

enum class PointFlag { Ok, Perturbed, Singular };

inline const char* to_string(PointFlag f) {
  switch (f) {
    case PointFlag::Ok: return "ok";
    case PointFlag::Perturbed: return "perturbed";
    case PointFlag::Singular: return "singular";
  }
  return "singular";
}

struct PointMass {
  double lambda0 = 0.0;
  double mass = 0.0;
};

struct DensityEstimate {
  std::vector<double> grid;
  std::vector<double> density;
  std::vector<double> min_norm;
  std::vector<cplx> stieltjes;
  std::vector<PointFlag> flags;
  std::vector<double> evaluated_at;  // λ actually used (differs from grid when perturbed)
  std::vector<PointMass> point_masses;
  int depth = 0;
};

struct DensityPolicy {
  SweepPolicy sweep;
  int max_perturbations = 6;
  int threads = 0;
  bool attach_masses = true;
  double mass_tol = 1e-9;
};

struct DensityPoint {
  double density = 0.0;
  double min_norm = 0.0;
  cplx stieltjes;
};

inline DensityPoint density_point(const ShellOperator& so, const ChannelData& cd, double lambda, int depth,
                                  const SweepPolicy& policy = {}) {
  BoundaryData R = sweep(so, cd, cplx(lambda, 0.0), depth, policy).data;
  DensityPoint p;
  p.density = ac_density(R);
  p.stieltjes = averaged_stieltjes(R, policy.tol);
  p.min_norm = min_norm_dirichlet(R).value;
  if (!std::isfinite(p.density) || !std::isfinite(p.min_norm) || !std::isfinite(p.stieltjes.real()) ||
      !std::isfinite(p.stieltjes.imag()))
    throw Error(ErrorCode::SweepFailed, "non-finite density value");
  return p;
}

inline std::vector<PointMass> point_mass_detect(const ShellOperator& so, const ChannelData& cd, int depth,
                                                double tol = 1e-9) {
  Mat H = so.assemble(0, depth);
  const Eigen::Index dim = H.rows();
  Mat phi = Mat::Zero(dim, 0);
  if (depth <= cd.max_boundary_depth()) {
    phi = Mat::Zero(dim, cd.phi[depth].cols());
    phi.bottomRows(so.size(depth)) = cd.phi[depth];
  }
  Vec root = Vec::Zero(dim);
  root.head(so.size(0)) = cd.upsilon[0];
  Eigen::SelfAdjointEigenSolver<Mat> es(hermitian_part(H));
  const RVec& ev = es.eigenvalues();
  const Mat& E = es.eigenvectors();
  const double cluster = 1e-9 * (1.0 + std::max(std::abs(ev(0)), std::abs(ev(dim - 1))));
  const double orth = tol * std::max(1.0, op_norm(phi));
  std::vector<PointMass> out;
  Eigen::Index i = 0;
  while (i < dim) {
    Eigen::Index j = i + 1;
    while (j < dim && ev(j) - ev(j - 1) <= cluster) ++j;
    Mat Ec = E.middleCols(i, j - i);
    Mat Nb = null_space(phi.adjoint() * Ec, orth);
    if (Nb.cols() > 0) {
      Mat P = Ec * Nb;
      double mass = (P.adjoint() * root).squaredNorm();
      if (mass > tol) out.push_back({ev.segment(i, j - i).mean(), mass});
    }
    i = j;
  }
  return out;
}

inline DensityEstimate density_curve(const ShellOperator& so, const ChannelData& cd, const std::vector<double>& grid,
                                     int depth, const DensityPolicy& policy = {}) {
  DensityEstimate est;
  est.grid = grid;
  est.depth = depth;
  const std::size_t n = grid.size();
  est.density.assign(n, std::numeric_limits<double>::quiet_NaN());
  est.min_norm.assign(n, std::numeric_limits<double>::quiet_NaN());
  est.stieltjes.assign(n, cplx(std::numeric_limits<double>::quiet_NaN(), 0.0));
  est.flags.assign(n, PointFlag::Singular);
  est.evaluated_at = grid;
  parallel_for(
      static_cast<int>(n),
      [&](int i) {
        const double lam = grid[i];
        // Blocks near a pole grow like 1/step and S̄ cancels them, so the shift
        // trades distance from the grid for roughly eps/step accuracy.
        const double step = 1e-6 * (1.0 + std::abs(lam));
        for (int k = 0; k <= policy.max_perturbations; ++k) {
          const double off = k == 0 ? 0.0 : ((k + 1) / 2) * step * (k % 2 ? 1.0 : -1.0);
          try {
            DensityPoint p = density_point(so, cd, lam + off, depth, policy.sweep);
            est.density[i] = p.density;
            est.min_norm[i] = p.min_norm;
            est.stieltjes[i] = p.stieltjes;
            est.flags[i] = k == 0 ? PointFlag::Ok : PointFlag::Perturbed;
            est.evaluated_at[i] = lam + off;
            return;
          } catch (const Error& e) {
            switch (e.code()) {
              case ErrorCode::SweepFailed:
              case ErrorCode::SingularSpectralParameter:
              case ErrorCode::NotInvertible:
              case ErrorCode::ZeroGamma:
                break;
              default:
                throw;
            }
          }
        }
      },
      policy.threads);
  if (policy.attach_masses) est.point_masses = point_mass_detect(so, cd, depth, policy.mass_tol);
  return est;
}

inline double trapezoid(const std::vector<double>& x, const std::vector<double>& y) {
  double s = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) s += 0.5 * (x[i] - x[i - 1]) * (y[i] + y[i - 1]);
  return s;
}

struct EntropyResult {
  double value = 0.0;
  int clipped = 0;
};

// (1/w(K)) ∫_K −log(ρ/w) w dλ by trapezoid; zero densities are clipped at 1e-300.
inline EntropyResult entropy_criterion(const std::vector<double>& grid, const std::vector<double>& density,
                                       const std::vector<double>& w) {
  if (grid.size() != density.size() || grid.size() != w.size())
    throw Error(ErrorCode::DimensionMismatch, "entropy_criterion: sample counts differ");
  EntropyResult res;
  std::vector<double> f(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    double rho = density[i];
    if (!(rho > 1e-300)) {
      rho = 1e-300;
      ++res.clipped;
    }
    f[i] = -std::log(rho / w[i]) * w[i];
  }
  res.value = trapezoid(grid, f) / trapezoid(grid, w);
  return res;
}

enum class TransferChoice { BaseMembers, JacobiChoice };

struct LpPolicy {
  TransferChoice choice = TransferChoice::JacobiChoice;
  // Optional change of basis: Q(n, λ) for n >= -1; the product is reported as
  // Q_n^{-1} T_{0,n} Q_{-1}.
  std::function<Mat(int, double)> basis;
  TolerancePolicy tol;
  int threads = 0;
};

struct LpResult {
  std::vector<int> depths;
  std::vector<double> values;
  int singular_points = 0;
};

// T_n = [(V_n − λ)Λ_n, −Υ_n; Λ_n, 0] with Λ_n = Υ_n(Υ_n^*Υ_n)^{-1}; valid when Φ_n = 1.
inline Mat jacobi_transfer(const ShellOperator& so, const ChannelData& cd, int n, double lambda) {
  const Mat& ups = cd.upsilon[n];
  const int s = so.size(n), r = static_cast<int>(ups.cols());
  Mat lam = ups * Eigen::PartialPivLU<Mat>(Mat(ups.adjoint() * ups)).inverse();
  Mat Vm = so.V(n);
  Vm.diagonal().array() -= lambda;
  Mat T = Mat::Zero(2 * s, 2 * r);
  T.topLeftCorner(s, r) = Vm * lam;
  T.topRightCorner(s, r) = -ups;
  T.bottomLeftCorner(s, r) = lam;
  return T;
}

inline bool phi_is_identity(const ChannelData& cd, int n) {
  const Mat& p = cd.phi[n];
  return p.rows() == p.cols() && (p - Mat::Identity(p.rows(), p.cols())).norm() == 0.0;
}

inline LpResult lp_diagnostic(const ShellOperator& so, const ChannelData& cd, const std::vector<double>& grid,
                              const std::vector<int>& depths, double p, const LpPolicy& policy = {}) {
  if (!(p > 1.0)) throw Error(ErrorCode::ConfigInvalid, "lp_diagnostic needs p > 1");
  int nmax = 0;
  for (int d : depths) nmax = std::max(nmax, d);
  if (nmax > cd.max_boundary_depth()) throw Error(ErrorCode::DimensionMismatch, "depth outside channel data");
  if (policy.choice == TransferChoice::JacobiChoice)
    for (int n = 0; n <= nmax; ++n)
      if (!phi_is_identity(cd, n))
        throw Error(ErrorCode::ConfigInvalid, "Jacobi transfer choice needs Phi_n = 1");
  const std::size_t G = grid.size();
  std::vector<std::vector<double>> norms(G, std::vector<double>(depths.size(), 0.0));
  std::vector<char> bad(G, 0);
  parallel_for(
      static_cast<int>(G),
      [&](int gi) {
        const double lam = grid[gi];
        try {
          Mat prod;
          for (int n = 0; n <= nmax; ++n) {
            Mat T;
            if (policy.choice == TransferChoice::JacobiChoice) {
              T = jacobi_transfer(so, cd, n, lam);
            } else {
              BoundaryData Rn = shell_data(so, cd, n, cplx(lam, 0.0), policy.tol, ResolventMode::Pseudo);
              T = sample_member(transfer_space(Rn, policy.tol), Mat(), Mat()).T;
            }
            prod = n == 0 ? T : Mat(T * prod);
            for (std::size_t di = 0; di < depths.size(); ++di) {
              if (depths[di] != n) continue;
              Mat shown = prod;
              if (policy.basis) {
                Mat Qn = policy.basis(n, lam);
                shown = Eigen::PartialPivLU<Mat>(Qn).solve(Mat(prod * policy.basis(-1, lam)));
              }
              norms[gi][di] = std::pow(op_norm(shown), 2.0 * p);
            }
          }
        } catch (const Error&) {
          bad[gi] = 1;
        }
      },
      policy.threads);
  LpResult res;
  res.depths = depths;
  std::vector<double> xs, ys;
  for (std::size_t di = 0; di < depths.size(); ++di) {
    xs.clear();
    ys.clear();
    for (std::size_t gi = 0; gi < G; ++gi) {
      if (bad[gi]) continue;
      xs.push_back(grid[gi]);
      ys.push_back(norms[gi][di]);
    }
    res.values.push_back(trapezoid(xs, ys));
  }
  for (char b : bad) res.singular_points += b;
  return res;
}

}  // namespace shellspec
