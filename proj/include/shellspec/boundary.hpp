#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "numerics.hpp"
#include "shell_graph.hpp"

namespace shellspec {

// R^z_{m,n}: blocks of [Υ Φ]^*(H_{m,n} - z)^{-1}[Υ Φ], split (q, r).
struct BoundaryData {
  Mat alpha, beta, gamma, delta;
  cplx z;

  int q() const { return static_cast<int>(alpha.rows()); }
  int r() const { return static_cast<int>(delta.rows()); }

  Mat full() const {
    Mat m(q() + r(), q() + r());
    m << alpha, beta, gamma, delta;
    return m;
  }

  static BoundaryData from_full(const Mat& m, int q, cplx z) {
    const int r = static_cast<int>(m.rows()) - q;
    return {m.topLeftCorner(q, q), m.topRightCorner(q, r), m.bottomLeftCorner(r, q),
            m.bottomRightCorner(r, r), z};
  }

  static BoundaryData scalar(cplx a, cplx b, cplx c, cplx d, cplx z) {
    return {Mat::Constant(1, 1, a), Mat::Constant(1, 1, b), Mat::Constant(1, 1, c), Mat::Constant(1, 1, d), z};
  }
};

struct ConeMargins {
  double alpha_min = 0.0;  // smallest eigenvalue of Im(alpha)
  double delta_min = 0.0;
  double full_min = 0.0;
};

inline double min_eig_hermitian(const Mat& h) {
  if (h.rows() == 0) return std::numeric_limits<double>::infinity();
  Eigen::SelfAdjointEigenSolver<Mat> es(hermitian_part(h), Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

inline ConeMargins cone_margins(const BoundaryData& R) {
  return {min_eig_hermitian(imag_part(R.alpha)), min_eig_hermitian(imag_part(R.delta)),
          min_eig_hermitian(imag_part(R.full()))};
}

// Channel matrix [Υ_m embedded at the top shell | Φ_n at the bottom shell].
inline Mat embedded_channels(const ShellOperator& so, const ChannelData& cd, int m, int n) {
  const int dim = so.offset(m, n + 1);
  const Mat& ups = cd.upsilon[m];
  const Mat& ph = cd.phi[n];
  Mat C = Mat::Zero(dim, ups.cols() + ph.cols());
  C.block(0, 0, so.size(m), ups.cols()) = ups;
  C.block(dim - so.size(n), ups.cols(), so.size(n), ph.cols()) = ph;
  return C;
}

inline BoundaryData boundary_data_direct(const ShellOperator& so, const ChannelData& cd, int m, int n, cplx z,
                                         const TolerancePolicy& tol = {},
                                         ResolventMode mode = ResolventMode::Strict) {
  if (m < 0 || m > n || n > so.depth() || n > cd.max_boundary_depth())
    throw Error(ErrorCode::DimensionMismatch, "boundary_data_direct: shell range outside channel data");
  Mat H = so.assemble(m, n);
  Mat C = embedded_channels(so, cd, m, n);
  Mat X = resolvent_apply(H, z, C, tol, mode);
  return BoundaryData::from_full(C.adjoint() * X, static_cast<int>(cd.upsilon[m].cols()), z);
}

inline BoundaryData shell_data(const ShellOperator& so, const ChannelData& cd, int n, cplx z,
                               const TolerancePolicy& tol = {}, ResolventMode mode = ResolventMode::Strict) {
  return boundary_data_direct(so, cd, n, n, z, tol, mode);
}

struct SuitabilityReport {
  bool suitable = false;
  double cond = 0.0;
};

inline void check_pair(const BoundaryData& Q, const BoundaryData& R) {
  if (Q.r() != R.q()) throw Error(ErrorCode::DimensionMismatch, "Q.r must equal R.q");
  if (Q.z != R.z) throw Error(ErrorCode::ParameterMismatch, "boundary data computed at different z");
}

inline SuitabilityReport is_suitable(const BoundaryData& Q, const BoundaryData& R, const TolerancePolicy& tol = {}) {
  check_pair(Q, R);
  Mat M = Mat::Identity(Q.r(), Q.r()) - R.alpha * Q.delta;
  SuitabilityReport rep;
  rep.cond = cond_one_minus(M, op_norm(R.alpha) * op_norm(Q.delta));
  rep.suitable = rep.cond <= tol.suitability_cond_max;
  return rep;
}

// Q ◁ R
inline BoundaryData compose_unchecked(const BoundaryData& Q, const BoundaryData& R) {
  const Eigen::Index r = Q.r();
  Mat M1 = Mat::Identity(r, r) - R.alpha * Q.delta;
  Mat M2 = Mat::Identity(r, r) - Q.delta * R.alpha;
  Mat rhs1(r, Q.q() + R.r());
  rhs1 << R.alpha * Q.gamma, R.beta;
  Mat Y = Eigen::PartialPivLU<Mat>(M1).solve(rhs1);
  Mat rhs2(r, Q.q() + R.r());
  rhs2 << Q.gamma, Q.delta * R.beta;
  Mat Z = Eigen::PartialPivLU<Mat>(M2).solve(rhs2);
  BoundaryData out;
  out.z = Q.z;
  out.alpha = Q.alpha + Q.beta * Y.leftCols(Q.q());
  out.beta = Q.beta * Y.rightCols(R.r());
  out.gamma = R.gamma * Z.leftCols(Q.q());
  out.delta = R.delta + R.gamma * Z.rightCols(R.r());
  return out;
}

inline BoundaryData compose(const BoundaryData& Q, const BoundaryData& R, const TolerancePolicy& tol = {}) {
  auto rep = is_suitable(Q, R, tol);
  if (!rep.suitable)
    throw Error(ErrorCode::NotSuitable, "1 - alpha~ delta has condition number " + std::to_string(rep.cond));
  return compose_unchecked(Q, R);
}

struct SweepPolicy {
  TolerancePolicy tol;
  ResolventMode mode = ResolventMode::Pseudo;
  // Steps conditioned worse than this are deferred: the shell stays pending
  // and is merged with the next one, skipping the ill-conditioned prefix.
  // A run is deferred for at most max_defer shells, since a large prefix δ
  // keeps every later step ill-conditioned and merged blocks grow each time.
  // At the final shell the prefix is recomputed directly instead.
  double merge_cond = 1e6;
  int max_defer = 4;
};

struct SweepEvent {
  int shell = 0;        // step at which the event happened
  int block_start = 0;  // first shell of the block that was finally used
  std::string reason;
};

struct SweepDiagnostics {
  std::vector<SweepEvent> events;
  double worst_cond = 1.0;
};

struct SweepResult {
  BoundaryData data;
  SweepDiagnostics diag;
};

// Left fold R_0 ◁ R_1 ◁ ... ◁ R_n. A singular shell or an ill-conditioned
// step keeps the shell pending and merges it with the next one; after an
// unsuitable step the whole prefix is recomputed directly. When path is non-null it
// receives R_{0,k} for every k that closes a block.
inline SweepResult sweep(const ShellOperator& so, const ChannelData& cd, cplx z, int n,
                         const SweepPolicy& policy = {},
                         std::vector<std::optional<BoundaryData>>* path = nullptr) {
  if (n < 0 || n > so.depth() || n > cd.max_boundary_depth())
    throw Error(ErrorCode::DimensionMismatch, "sweep depth outside channel data");
  SweepDiagnostics diag;
  std::optional<BoundaryData> acc;
  int pending = 0;
  if (path) path->assign(n + 1, std::nullopt);
  for (int k = 0; k <= n; ++k) {
    bool done = false, defer = false;
    std::string reason;
    try {
      BoundaryData blk = boundary_data_direct(so, cd, pending, k, z, policy.tol, policy.mode);
      if (!acc) {
        acc = std::move(blk);
        done = true;
      } else {
        auto rep = is_suitable(*acc, blk, policy.tol);
        const bool ill = rep.cond > policy.merge_cond;
        if (rep.suitable && ill && k < n && k - pending < policy.max_defer) {
          reason = "ill-conditioned step";
          defer = true;
        } else if (rep.suitable && ill && k == n) {
          try {
            acc = boundary_data_direct(so, cd, 0, k, z, policy.tol, policy.mode);
            diag.events.push_back({k, 0, "ill-conditioned final step; direct prefix"});
          } catch (const Error& e) {
            if (e.code() != ErrorCode::SingularSpectralParameter) throw;
            diag.worst_cond = std::max(diag.worst_cond, rep.cond);
            acc = compose_unchecked(*acc, blk);
          }
          done = true;
        } else if (rep.suitable) {
          diag.worst_cond = std::max(diag.worst_cond, rep.cond);
          acc = compose_unchecked(*acc, blk);
          done = true;
        } else {
          reason = "unsuitable step";
        }
      }
    } catch (const Error& e) {
      if (e.code() != ErrorCode::SingularSpectralParameter) throw;
      reason = "singular block";
    }
    if (done) {
      if (pending < k) diag.events.push_back({k, pending, "merged pending shells"});
    } else if (acc && !defer) {
      try {
        acc = boundary_data_direct(so, cd, 0, k, z, policy.tol, policy.mode);
        done = true;
        diag.events.push_back({k, 0, reason + "; direct prefix"});
      } catch (const Error& e) {
        if (e.code() != ErrorCode::SingularSpectralParameter) throw;
      }
    }
    if (done) {
      pending = k + 1;
      if (path) (*path)[k] = *acc;
    } else {
      diag.events.push_back({k, pending, reason + "; pending"});
    }
  }
  if (pending != n + 1) throw Error(ErrorCode::SweepFailed, "direct fallback failed at the final shell");
  return {*acc, diag};
}

struct PerturbedBlocks {
  Mat alpha_A;
  Mat gamma_A;
};

inline PerturbedBlocks perturbed_blocks(const BoundaryData& R, const Mat& A, const TolerancePolicy& tol = {}) {
  if (A.rows() != R.r() || A.cols() != R.r()) throw Error(ErrorCode::DimensionMismatch, "A must be r x r");
  Mat M = Mat::Identity(R.r(), R.r()) - R.delta * A;
  if (cond_one_minus(M, op_norm(R.delta) * op_norm(A)) > tol.suitability_cond_max)
    throw Error(ErrorCode::NotInvertible, "1 - delta A");
  PerturbedBlocks out;
  out.gamma_A = Eigen::PartialPivLU<Mat>(M).solve(R.gamma);
  out.alpha_A = R.alpha + R.beta * A * out.gamma_A;
  return out;
}

}  // namespace shellspec
