#pragma once

#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>
#include <string>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/SVD>

namespace shellspec {

using cplx = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;
using RMat = Eigen::MatrixXd;
using RVec = Eigen::VectorXd;

inline constexpr cplx I_UNIT{0.0, 1.0};

enum class ErrorCode {
  SingularSpectralParameter,
  RankDeficient,
  NotPositiveDefinite,
  NotInvertible,
  NotSuitable,
  DimensionMismatch,
  ParameterMismatch,
  SweepFailed,
  Disconnected,
  PartitionInvalid,
  GroupingFailed,
  ZeroConnection,
  ZeroGamma,
  SingularShell,
  OutsideBand,
  SpecInvalid,
  ConfigInvalid,
};

inline const char* to_string(ErrorCode c) {
  switch (c) {
    case ErrorCode::SingularSpectralParameter: return "SingularSpectralParameter";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::NotInvertible: return "NotInvertible";
    case ErrorCode::NotSuitable: return "NotSuitable";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::ParameterMismatch: return "ParameterMismatch";
    case ErrorCode::SweepFailed: return "SweepFailed";
    case ErrorCode::Disconnected: return "Disconnected";
    case ErrorCode::PartitionInvalid: return "PartitionInvalid";
    case ErrorCode::GroupingFailed: return "GroupingFailed";
    case ErrorCode::ZeroConnection: return "ZeroConnection";
    case ErrorCode::ZeroGamma: return "ZeroGamma";
    case ErrorCode::SingularShell: return "SingularShell";
    case ErrorCode::OutsideBand: return "OutsideBand";
    case ErrorCode::SpecInvalid: return "SpecInvalid";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

struct TolerancePolicy {
  double rank_rel_tol = 1e-12;
  double suitability_cond_max = 1e12;
  double eig_exclusion_tol = 1e-10;

  void validate() const {
    if (!(rank_rel_tol > 0 && rank_rel_tol < 1) || !(suitability_cond_max > 0) ||
        !(eig_exclusion_tol > 0))
      throw Error(ErrorCode::ConfigInvalid, "tolerance policy fields must be positive, rank_rel_tol < 1");
  }
};

// Descending singular values.
inline RVec singular_values(const Mat& a) {
  return Eigen::BDCSVD<Mat>(a).singularValues();
}

inline double op_norm(const Mat& a) {
  if (a.size() == 0) return 0.0;
  return singular_values(a)(0);
}

inline double cond_number(const Mat& a) {
  if (a.size() == 0) return 1.0;
  RVec s = singular_values(a);
  double smin = s(s.size() - 1);
  if (smin == 0.0) return std::numeric_limits<double>::infinity();
  return s(0) / smin;
}

// Condition of M = 1 - XY measured against 1 + ‖X‖‖Y‖, so cancellation shows
// up even when M is 1 x 1 and its ordinary condition number is always 1.
inline double cond_one_minus(const Mat& M, double xy_norm) {
  if (M.size() == 0) return 1.0;
  RVec s = singular_values(M);
  double smin = s(s.size() - 1);
  if (!(smin > 0.0)) return std::numeric_limits<double>::infinity();
  return std::max(s(0), 1.0 + xy_norm) / smin;
}

inline Mat hermitian_part(const Mat& a) { return 0.5 * (a + a.adjoint()); }

// (A - A^*)/(2i)
inline Mat imag_part(const Mat& a) { return (a - a.adjoint()) / (2.0 * I_UNIT); }

inline int numerical_rank(const Mat& a, const TolerancePolicy& tol) {
  if (a.size() == 0) return 0;
  RVec s = singular_values(a);
  if (s(0) == 0.0) return 0;
  int r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > tol.rank_rel_tol * s(0)) ++r;
  return r;
}

enum class ResolventMode { Strict, Pseudo };

// Solves (H - z) X = rhs. For real z within tolerance of the spectrum the
// strict mode throws; the pseudo mode inverts on the complement of the
// nearby eigenspaces and requires rhs to be orthogonal to them.
inline Mat resolvent_apply(const Mat& H, cplx z, const Mat& rhs, const TolerancePolicy& tol,
                           ResolventMode mode = ResolventMode::Strict) {
  const Eigen::Index n = H.rows();
  if (H.cols() != n || rhs.rows() != n)
    throw Error(ErrorCode::DimensionMismatch, "resolvent_apply: shape");
  if (n == 0) return Mat(0, rhs.cols());
  if (z.imag() != 0.0) {
    Mat A = H;
    A.diagonal().array() -= z;
    return Eigen::PartialPivLU<Mat>(A).solve(rhs);
  }
  const double lam = z.real();
  Eigen::SelfAdjointEigenSolver<Mat> es(hermitian_part(H));
  const RVec& ev = es.eigenvalues();
  const double scale = 1.0 + std::max(std::abs(ev(0)), std::abs(ev(n - 1)));
  const double excl = tol.eig_exclusion_tol * scale;
  bool near = false;
  for (Eigen::Index i = 0; i < n; ++i)
    if (std::abs(ev(i) - lam) <= excl) near = true;
  if (!near) {
    Mat A = H;
    A.diagonal().array() -= z;
    return Eigen::PartialPivLU<Mat>(A).solve(rhs);
  }
  if (mode == ResolventMode::Strict)
    throw Error(ErrorCode::SingularSpectralParameter,
                "real spectral parameter within tolerance of an eigenvalue");
  const Mat& E = es.eigenvectors();
  Mat coeff = E.adjoint() * rhs;
  const double rhs_scale = std::max(1.0, rhs.norm());
  Mat out = Mat::Zero(n, rhs.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    if (std::abs(ev(i) - lam) <= excl) {
      if (coeff.row(i).norm() > 1e-8 * rhs_scale)
        throw Error(ErrorCode::SingularSpectralParameter,
                    "channel not orthogonal to the kernel of H - z");
      continue;
    }
    out += E.col(i) * (coeff.row(i) / (ev(i) - lam));
  }
  return out;
}

inline Mat hermitian_resolvent(const Mat& H, cplx z, const TolerancePolicy& tol) {
  return resolvent_apply(H, z, Mat::Identity(H.rows(), H.rows()), tol, ResolventMode::Strict);
}

namespace detail {
inline Eigen::BDCSVD<Mat> full_rank_svd(const Mat& beta, const TolerancePolicy& tol, int flags) {
  if (beta.rows() > beta.cols())
    throw Error(ErrorCode::DimensionMismatch, "beta must satisfy q <= r");
  Eigen::BDCSVD<Mat> svd(beta, flags);
  const auto& s = svd.singularValues();
  if (beta.rows() > 0) {
    if (s(0) == 0.0 || s(s.size() - 1) <= tol.rank_rel_tol * s(0))
      throw Error(ErrorCode::RankDeficient, "beta has numerical rank below q");
  }
  return svd;
}
}  // namespace detail

// Minimum-norm right inverse beta^*(beta beta^*)^{-1}.
inline Mat right_inverse_base(const Mat& beta, const TolerancePolicy& tol) {
  auto svd = detail::full_rank_svd(beta, tol, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::Index q = beta.rows();
  Mat out = svd.matrixV().leftCols(q);
  for (Eigen::Index i = 0; i < q; ++i) out.col(i) /= svd.singularValues()(i);
  return out * svd.matrixU().adjoint();
}

inline Mat kernel_basis(const Mat& beta, const TolerancePolicy& tol) {
  auto svd = detail::full_rank_svd(beta, tol, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Index q = beta.rows(), r = beta.cols();
  return svd.matrixV().rightCols(r - q);
}

inline Mat sqrt_inv_pd(const Mat& I) {
  if (I.rows() != I.cols()) throw Error(ErrorCode::DimensionMismatch, "sqrt_inv_pd: not square");
  Eigen::SelfAdjointEigenSolver<Mat> es(hermitian_part(I));
  const RVec& ev = es.eigenvalues();
  if (ev.size() > 0 && !(ev(0) > 0.0))
    throw Error(ErrorCode::NotPositiveDefinite, "smallest eigenvalue is not positive");
  RVec d = ev.array().rsqrt();
  return es.eigenvectors() * d.asDiagonal() * es.eigenvectors().adjoint();
}

// Orthonormal basis of the null space of m (columns), by SVD with an absolute cutoff.
inline Mat null_space(const Mat& m, double abs_tol) {
  const Eigen::Index cols = m.cols();
  if (m.rows() == 0) return Mat::Identity(cols, cols);
  Eigen::BDCSVD<Mat> svd(m, Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > abs_tol) ++rank;
  return svd.matrixV().rightCols(cols - rank);
}

}  // namespace shellspec
