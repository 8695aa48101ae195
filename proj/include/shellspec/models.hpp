#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <mutex>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "numerics.hpp"
#include "parallel.hpp"
#include "shell_graph.hpp"

namespace shellspec {

enum class ModelKind { Stair, Tree, Strip, Custom };

struct WidthRule {
  std::string rule = "min_linear";  // min_linear | constant | power2 | list
  int cap = 8;
  int width = 1;
  std::vector<int> list;
};

struct PotentialSpec {
  std::string dist = "none";  // none | gauss_herm | diag_iid
  double c0 = 0.0;
  double exponent = 1.0;

  // c_n = c0 · max(n, 1)^{-exponent}
  double scale(int n) const {
    if (dist == "none") return 0.0;
    return c0 * std::pow(std::max(n, 1), -exponent);
  }
};

struct ModelSpec {
  ModelKind kind = ModelKind::Stair;
  WidthRule widths;
  std::vector<double> a;                  // channel means, zero-padded
  std::vector<std::vector<double>> A;     // strip cross-section (optional)
  PotentialSpec potential;
  std::uint64_t seed = 42;
  int depth = 0;
  double hopping = 1.0;
  int root = 0;

  static ModelSpec free_jacobi(int depth) {
    ModelSpec s;
    s.widths.rule = "constant";
    s.widths.width = 1;
    s.depth = depth;
    return s;
  }

  int width(int n) const {
    switch (kind) {
      case ModelKind::Tree: return 1 << n;
      case ModelKind::Strip: return A.empty() ? (widths.rule == "constant" ? widths.width : static_cast<int>(a.size()))
                                              : static_cast<int>(A.size());
      default: break;
    }
    if (widths.rule == "min_linear") return std::min(n + 1, widths.cap);
    if (widths.rule == "constant") return widths.width;
    if (widths.rule == "power2") return 1 << n;
    if (widths.rule == "list") return widths.list.at(std::min<std::size_t>(n, widths.list.size() - 1));
    throw Error(ErrorCode::SpecInvalid, "unknown width rule " + widths.rule);
  }

  double mean(int j) const { return j < static_cast<int>(a.size()) ? a[j] : 0.0; }

  std::vector<std::string> validate() const {
    std::vector<std::string> warnings;
    if (depth < 0) throw Error(ErrorCode::SpecInvalid, "depth must be >= 0");
    if (kind == ModelKind::Custom) throw Error(ErrorCode::SpecInvalid, "custom models are built from a graph file");
    if (kind == ModelKind::Tree && depth > 12) throw Error(ErrorCode::SpecInvalid, "tree depth above 12 is not dense-feasible");
    if (widths.rule == "list" && widths.list.empty()) throw Error(ErrorCode::SpecInvalid, "empty width list");
    if (widths.rule == "min_linear" && widths.cap < 1) throw Error(ErrorCode::SpecInvalid, "width cap must be >= 1");
    for (int n = 0; n <= depth; ++n) {
      if (width(n) < 1) throw Error(ErrorCode::SpecInvalid, "widths must be positive");
      if (n > 0 && width(n) < width(n - 1)) throw Error(ErrorCode::SpecInvalid, "widths must be non-decreasing");
    }
    if (kind == ModelKind::Stair) {
      const int smax = width(depth);
      double lo = mean(0), hi = mean(0);
      for (int j = 0; j < smax; ++j) {
        lo = std::min(lo, mean(j));
        hi = std::max(hi, mean(j));
      }
      if (hi - lo >= 4.0) throw Error(ErrorCode::SpecInvalid, "channel means spread must be < 4");
    }
    if (kind == ModelKind::Strip && !A.empty()) {
      for (const auto& row : A)
        if (row.size() != A.size()) throw Error(ErrorCode::SpecInvalid, "strip A must be square");
      for (std::size_t i = 0; i < A.size(); ++i)
        for (std::size_t j = 0; j < A.size(); ++j)
          if (A[i][j] != A[j][i]) throw Error(ErrorCode::SpecInvalid, "strip A must be symmetric");
    }
    if (potential.dist != "none" && potential.dist != "gauss_herm" && potential.dist != "diag_iid")
      throw Error(ErrorCode::SpecInvalid, "unknown potential distribution " + potential.dist);
    if (potential.c0 < 0.0) throw Error(ErrorCode::SpecInvalid, "c0 must be >= 0");
    if (!(hopping > 0.0)) throw Error(ErrorCode::SpecInvalid, "hopping must be positive");
    if (root < 0 || root >= width(0)) throw Error(ErrorCode::SpecInvalid, "root index outside shell 0");
    if (potential.dist != "none" && potential.c0 > 0.0 && potential.exponent <= 0.5)
      warnings.push_back("potential exponent <= 1/2: sum of c_n^2 diverges with depth");
    return warnings;
  }
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0) {
  return splitmix64(master ^ splitmix64(a ^ splitmix64(b + 0x632BE59BD9B4E019ULL)));
}

// Hermitian with N(0,1) diagonal and unit-variance complex off-diagonal entries.
inline Mat unit_gue(int s, std::mt19937_64& rng) {
  std::normal_distribution<double> N(0.0, 1.0);
  const double h = 1.0 / std::sqrt(2.0);
  Mat X(s, s);
  for (int j = 0; j < s; ++j) {
    X(j, j) = N(rng);
    for (int i = j + 1; i < s; ++i) {
      cplx g(h * N(rng), h * N(rng));
      X(i, j) = g;
      X(j, i) = std::conj(g);
    }
  }
  return X;
}

// E‖X‖² for unit_gue(s): small widths by a fixed-seed pilot run, large ones by the
// semicircle edge 2√s.
inline double gue_norm_sq_mean(int s) {
  if (s == 1) return 1.0;
  if (s > 64) return 4.0 * s;
  static std::mutex mu;
  static std::map<int, double> cache;
  std::lock_guard<std::mutex> lk(mu);
  auto it = cache.find(s);
  if (it != cache.end()) return it->second;
  std::mt19937_64 rng(derive_seed(0x5EED5EEDULL, static_cast<std::uint64_t>(s)));
  const int samples = 400;
  double acc = 0.0;
  for (int k = 0; k < samples; ++k) {
    Eigen::SelfAdjointEigenSolver<Mat> es(unit_gue(s, rng), Eigen::EigenvaluesOnly);
    const RVec& ev = es.eigenvalues();
    double nrm = std::max(std::abs(ev(0)), std::abs(ev(s - 1)));
    acc += nrm * nrm;
  }
  cache[s] = acc / samples;
  return cache[s];
}

// Random shell potential with E‖X‖² ≈ 1, scaled by c.
inline Mat random_potential(const PotentialSpec& p, int s, double c, std::mt19937_64& rng) {
  if (p.dist == "none" || c == 0.0) return Mat::Zero(s, s);
  if (p.dist == "diag_iid") {
    std::normal_distribution<double> N(0.0, 1.0);
    Mat X = Mat::Zero(s, s);
    for (int j = 0; j < s; ++j) X(j, j) = c * N(rng);
    return X;
  }
  return (c / std::sqrt(gue_norm_sq_mean(s))) * unit_gue(s, rng);
}

struct Model {
  ShellOperator so;
  ChannelData cd;
  std::vector<double> scales;  // c_n
  std::vector<std::string> warnings;
};

inline Mat strip_matrix(const ModelSpec& spec) {
  const int s = spec.width(0);
  Mat A = Mat::Zero(s, s);
  if (!spec.A.empty()) {
    for (int i = 0; i < s; ++i)
      for (int j = 0; j < s; ++j) A(i, j) = spec.A[i][j];
  } else {
    for (int j = 0; j < s; ++j) A(j, j) = spec.mean(j);
  }
  return A;
}

// W_{n+1} for the model kind, before the hopping scale.
inline Mat model_connection(const ModelSpec& spec, int n) {
  const int sp = spec.width(n), sc = spec.width(n + 1);
  Mat W = Mat::Zero(sc, sp);
  if (spec.kind == ModelKind::Tree) {
    for (int j = 0; j < sp; ++j) {
      W(2 * j, j) = -1.0;
      W(2 * j + 1, j) = -1.0;
    }
  } else {
    for (int j = 0; j < sp; ++j) W(j, j) = -1.0;
  }
  return W;
}

// Unperturbed shell potential A_n.
inline Mat model_free_potential(const ModelSpec& spec, int n) {
  const int s = spec.width(n);
  if (spec.kind == ModelKind::Strip) return strip_matrix(spec);
  Mat A = Mat::Zero(s, s);
  if (spec.kind == ModelKind::Stair)
    for (int j = 0; j < s; ++j) A(j, j) = spec.mean(j);
  return A;
}

// Channels use Φ_n = 1 and Υ_{n+1} = −W_{n+1}, exact for every built-in model;
// the last shell keeps Φ_N = 1 so boundary data reaches depth N.
inline Model build_model(const ModelSpec& spec) {
  Model m;
  m.warnings = spec.validate();
  for (int n = 0; n <= spec.depth; ++n) {
    const int s = spec.width(n);
    const double c = spec.potential.scale(n);
    std::mt19937_64 rng(derive_seed(spec.seed, static_cast<std::uint64_t>(n)));
    m.so.potentials.push_back(model_free_potential(spec, n) + random_potential(spec.potential, s, c, rng));
    m.scales.push_back(c);
    if (n > 0) m.so.connections.push_back(spec.hopping * model_connection(spec, n - 1));
  }
  Vec root = Vec::Zero(spec.width(0));
  root(spec.root) = 1.0;
  m.cd.upsilon.push_back(root);
  for (int n = 0; n <= spec.depth; ++n) {
    m.cd.phi.push_back(Mat::Identity(spec.width(n), spec.width(n)));
    if (n > 0) m.cd.upsilon.push_back(-m.so.W(n));
  }
  return m;
}

inline Mat mean_field_unitary(int n) {
  const int dim = 1 << n;
  Mat U = Mat::Zero(dim, dim);
  auto chi = [](int k) { return RVec::Constant(1 << k, std::pow(2.0, -0.5 * k)); };
  auto zeta = [&](int k) {
    RVec z(1 << k);
    RVec c = chi(k - 1);
    z << c, -c;
    return RVec(z / std::sqrt(2.0));
  };
  U.col(0) = chi(n).cast<cplx>();
  int col = 1;
  for (int k = n; k >= 1; --k) {
    RVec zk = zeta(k);
    const int copies = 1 << (n - k);
    for (int c = 0; c < copies; ++c) U.block(c * (1 << k), col++, 1 << k, 1) = zk.cast<cplx>();
  }
  return U;
}

inline ModelSpec tree_spec(int depth) {
  ModelSpec s;
  s.kind = ModelKind::Tree;
  s.depth = depth;
  return s;
}

// Stair with widths 2^n and hopping √2: the image of the tree under the
// mean-field unitaries.
inline ModelSpec reduced_tree_spec(int depth) {
  ModelSpec s;
  s.kind = ModelKind::Stair;
  s.widths.rule = "power2";
  s.depth = depth;
  s.hopping = std::sqrt(2.0);
  return s;
}

inline Mat block_unitary(int depth) {
  int dim = (1 << (depth + 1)) - 1;
  Mat U = Mat::Zero(dim, dim);
  int o = 0;
  for (int n = 0; n <= depth; ++n) {
    U.block(o, o, 1 << n, 1 << n) = mean_field_unitary(n);
    o += 1 << n;
  }
  return U;
}

// ‖𝒰^* Δ^(2) 𝒰 − √2 Δ^(1)‖ over shells 0..depth-1, or over all shells when
// include_boundary is set.
inline double tree_reduction_check(int depth, bool include_boundary = false) {
  Mat tree = build_model(tree_spec(depth)).so.assemble();
  Mat stair = build_model(reduced_tree_spec(depth)).so.assemble();
  Mat U = block_unitary(depth);
  Mat diff = U.adjoint() * tree * U - stair;
  const int keep = include_boundary ? static_cast<int>(diff.rows()) : (1 << depth) - 1;
  return diff.topLeftCorner(keep, keep).norm();
}

struct ConjugatedStep {
  Mat R;   // 2 s_cur x 2 s_prev isometry
  Mat Vc;  // conjugated potential block
  double cond_Q = 1.0;
};

inline Mat conjugation_matrix(const std::vector<double>& a, double lambda, int s, double margin_min = 0.05) {
  Mat Q(2 * s, 2 * s);
  Q.setZero();
  for (int j = 0; j < s; ++j) {
    const double aj = j < static_cast<int>(a.size()) ? a[j] : 0.0;
    const double x = (aj - lambda) / 2.0;
    if (std::abs(aj - lambda) > 2.0 - margin_min)
      throw Error(ErrorCode::OutsideBand, "|a_j - lambda| exceeds 2 - margin");
    const double k = std::acos(x);
    Q(j, j) = std::exp(I_UNIT * k);
    Q(j, s + j) = std::exp(-I_UNIT * k);
    Q(s + j, j) = 1.0;
    Q(s + j, s + j) = 1.0;
  }
  return Q;
}

inline ConjugatedStep conjugated_step(const std::vector<double>& a, double lambda, int s_prev, int s_cur, const Mat& V,
                                      double margin_min = 0.05) {
  if (s_cur < s_prev) throw Error(ErrorCode::SpecInvalid, "widths must be non-decreasing");
  if (V.rows() != s_cur || V.cols() != s_cur) throw Error(ErrorCode::DimensionMismatch, "V must be s_cur x s_cur");
  Mat Qc = conjugation_matrix(a, lambda, s_cur, margin_min);
  Mat Qp = conjugation_matrix(a, lambda, s_prev, margin_min);
  ConjugatedStep st;
  st.R = Mat::Zero(2 * s_cur, 2 * s_prev);
  for (int j = 0; j < s_prev; ++j) {
    st.R(j, j) = Qc(j, j);
    st.R(s_cur + j, s_prev + j) = Qc(j, s_cur + j);
  }
  Mat P = Mat::Zero(2 * s_cur, 2 * s_prev);
  P.topLeftCorner(s_cur, s_prev) = V.leftCols(s_prev);
  st.Vc = Eigen::PartialPivLU<Mat>(Qc).solve(Mat(P * Qp));
  st.cond_Q = cond_number(Qc);
  return st;
}

struct McConfig {
  std::vector<double> grid;
  int trials = 64;
  Vec start = Vec::Unit(2, 0);
  int threads = 0;
  int block = 4;  // trials per reduction block; fixed so results do not depend on threads
};

struct McResult {
  std::vector<double> grid;
  int depth = 0;
  int trials = 0;
  // [λ index][n], n = 0..depth
  std::vector<std::vector<double>> fourth_moment;
  std::vector<std::vector<double>> stderr_;
  std::vector<std::vector<double>> step_bound;     // b_n
  std::vector<std::vector<double>> bound_product;  // E‖u_{-1}‖⁴ Π_{k<=n} b_k
};

namespace detail {
struct McAccum {
  std::vector<double> m4, m8, v2, v3, v4;
  std::vector<Mat> vsum;
};

// Stair form of the model: channel means, widths and a basis change per shell
// that turns the free part into independent wires.
struct WireForm {
  std::vector<double> a;
  std::vector<int> widths;
  std::vector<Mat> basis;  // per shell, V -> basis^* V basis
  double scale = 1.0;      // operator = scale · (wires + potential/scale)
};

inline WireForm wire_form(const ModelSpec& spec) {
  WireForm f;
  for (int n = 0; n <= spec.depth; ++n) f.widths.push_back(spec.width(n));
  const int smax = f.widths.back();
  if (spec.kind == ModelKind::Stair) {
    if (spec.hopping != 1.0) throw Error(ErrorCode::SpecInvalid, "Monte Carlo needs unit hopping");
    for (int j = 0; j < smax; ++j) f.a.push_back(spec.mean(j));
    for (int n = 0; n <= spec.depth; ++n) f.basis.push_back(Mat::Identity(f.widths[n], f.widths[n]));
  } else if (spec.kind == ModelKind::Strip) {
    Eigen::SelfAdjointEigenSolver<Mat> es(strip_matrix(spec));
    for (int j = 0; j < smax; ++j) f.a.push_back(es.eigenvalues()(j));
    for (int n = 0; n <= spec.depth; ++n) f.basis.push_back(es.eigenvectors());
    if (spec.root != 0) throw Error(ErrorCode::SpecInvalid, "strip Monte Carlo uses the first eigen-wire as root");
  } else if (spec.kind == ModelKind::Tree) {
    f.a.assign(smax, 0.0);
    for (int n = 0; n <= spec.depth; ++n) f.basis.push_back(mean_field_unitary(n));
    f.scale = std::sqrt(2.0);
  } else {
    throw Error(ErrorCode::SpecInvalid, "Monte Carlo supports stair, strip and tree models");
  }
  return f;
}
}  // namespace detail

inline McResult fourth_moment_run(const ModelSpec& spec, const McConfig& cfg) {
  spec.validate();
  if (cfg.trials < 2) throw Error(ErrorCode::ConfigInvalid, "need at least two trials");
  if (cfg.start.size() != 2) throw Error(ErrorCode::DimensionMismatch, "start vector must have two entries");
  detail::WireForm wf = detail::wire_form(spec);
  const int N = spec.depth;
  const int L = static_cast<int>(cfg.grid.size());
  for (double lam : cfg.grid)
    for (int j = 0; j < wf.widths.back(); ++j)
      if (std::abs(wf.a[j] - lam / wf.scale) > 2.0 - 0.05)
        throw Error(ErrorCode::OutsideBand, "grid point outside the band interior");

  const int nblocks = (cfg.trials + cfg.block - 1) / cfg.block;
  std::vector<std::vector<detail::McAccum>> acc(nblocks, std::vector<detail::McAccum>(L));
  for (auto& row : acc)
    for (auto& a : row) {
      a.m4.assign(N + 1, 0.0);
      a.m8.assign(N + 1, 0.0);
      a.v2.assign(N + 1, 0.0);
      a.v3.assign(N + 1, 0.0);
      a.v4.assign(N + 1, 0.0);
      for (int n = 0; n <= N; ++n)
        a.vsum.push_back(Mat::Zero(2 * wf.widths[n], 2 * (n == 0 ? 1 : wf.widths[n - 1])));
    }

  parallel_for(
      nblocks,
      [&](int b) {
        for (int t = b * cfg.block; t < std::min(cfg.trials, (b + 1) * cfg.block); ++t) {
          std::vector<Mat> pot;
          for (int n = 0; n <= N; ++n) {
            std::mt19937_64 rng(derive_seed(spec.seed, static_cast<std::uint64_t>(t) + 1, n));
            Mat V = random_potential(spec.potential, wf.widths[n], spec.potential.scale(n), rng);
            pot.push_back(Mat(wf.basis[n].adjoint() * V * wf.basis[n]) / wf.scale);
          }
          for (int li = 0; li < L; ++li) {
            const double lam = cfg.grid[li] / wf.scale;
            auto& a = acc[b][li];
            Vec u = cfg.start;
            for (int n = 0; n <= N; ++n) {
              const int sp = n == 0 ? 1 : wf.widths[n - 1];
              ConjugatedStep st = conjugated_step(wf.a, lam, sp, wf.widths[n], pot[n]);
              u = st.R * u + st.Vc * u;
              const double q = u.squaredNorm();
              a.m4[n] += q * q;
              a.m8[n] += q * q * q * q;
              const double vn = op_norm(st.Vc);
              a.v2[n] += vn * vn;
              a.v3[n] += vn * vn * vn;
              a.v4[n] += vn * vn * vn * vn;
              a.vsum[n] += st.Vc;
            }
          }
        }
      },
      cfg.threads);

  McResult res;
  res.grid = cfg.grid;
  res.depth = N;
  res.trials = cfg.trials;
  const double T = cfg.trials;
  const double start4 = std::pow(cfg.start.squaredNorm(), 2);
  for (int li = 0; li < L; ++li) {
    std::vector<double> m4(N + 1), se(N + 1), bn(N + 1), prod(N + 1);
    double running = start4;
    for (int n = 0; n <= N; ++n) {
      double s4 = 0, s8 = 0, s2v = 0, s3v = 0, s4v = 0;
      Mat vs = Mat::Zero(acc[0][li].vsum[n].rows(), acc[0][li].vsum[n].cols());
      for (int b = 0; b < nblocks; ++b) {
        const auto& a = acc[b][li];
        s4 += a.m4[n];
        s8 += a.m8[n];
        s2v += a.v2[n];
        s3v += a.v3[n];
        s4v += a.v4[n];
        vs += a.vsum[n];
      }
      const double mean = s4 / T;
      m4[n] = mean;
      se[n] = std::sqrt(std::max(0.0, (s8 - T * mean * mean) / (T * (T - 1.0))));
      bn[n] = 1.0 + 6.0 * s2v / T + s4v / T + 4.0 * s3v / T + 4.0 * op_norm(Mat(vs / T));
      running *= bn[n];
      prod[n] = running;
    }
    res.fourth_moment.push_back(m4);
    res.stderr_.push_back(se);
    res.step_bound.push_back(bn);
    res.bound_product.push_back(prod);
  }
  return res;
}

}  // namespace shellspec
