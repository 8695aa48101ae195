#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "shellspec/io.hpp"
#include "shellspec/models.hpp"
#include "shellspec/shell_graph.hpp"
#include "shellspec/spectral.hpp"
#include "shellspec/verify.hpp"
#include "shellspec/weyl.hpp"

using namespace shellspec;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitModel = 3;

struct Options {
  std::string model_path;
  std::string graph_path;
  int root = 0;
  std::optional<int> depth;
  std::string depths;
  double lmin = -2.5;
  double lmax = 2.5;
  int points = 501;
  std::string z;
  std::string out;
  int threads = 0;
  int trials = 64;
  std::string lambdas = "-1,0,1";
  std::string suite = "all";
  std::string fault;
  double rank_tol = 1e-12;
  double cond_max = 1e12;
  double eig_tol = 1e-10;
  bool strict = false;
  int max_perturbations = 6;
};

struct Loaded {
  ShellOperator so;
  ChannelData cd;
  int depth = 0;
  std::optional<ModelSpec> spec;
};

TolerancePolicy tolerance(const Options& o) {
  TolerancePolicy t{o.rank_tol, o.cond_max, o.eig_tol};
  t.validate();
  return t;
}

SweepPolicy sweep_policy(const Options& o) {
  return {tolerance(o), o.strict ? ResolventMode::Strict : ResolventMode::Pseudo};
}

void need_source(const Options& o) {
  if (o.model_path.empty() == o.graph_path.empty())
    throw Error(ErrorCode::ConfigInvalid, "give exactly one of --model or --graph");
}

ModelSpec load_spec(const Options& o) {
  ModelSpec spec = model_spec_from_json(read_json_file(o.model_path));
  if (o.depth) spec.depth = *o.depth;
  if (spec.depth < 0) throw Error(ErrorCode::ConfigInvalid, "depth must be >= 0");
  return spec;
}

Loaded load(const Options& o) {
  need_source(o);
  Loaded l;
  if (!o.model_path.empty()) {
    ModelSpec spec = load_spec(o);
    Model m = build_model(spec);
    for (const auto& w : m.warnings) std::cerr << "warning: " << w << "\n";
    l.so = std::move(m.so);
    l.cd = std::move(m.cd);
    l.depth = spec.depth;
    l.spec = spec;
    return l;
  }
  WeightedGraph g = graph_from_json(read_json_file(o.graph_path));
  if (o.root < 0 || o.root >= g.vertex_count) throw Error(ErrorCode::ConfigInvalid, "root outside the graph");
  ShellPartition p = bfs_partition(g, o.root);
  Grouping grp = group_shells(extract_shell_operator(g, p), tolerance(o));
  l.so = std::move(grp.so);
  l.cd = channel_decomposition(l.so, root_delta(l.so), tolerance(o));
  const int available = l.cd.max_boundary_depth();
  if (available < 0) throw Error(ErrorCode::SpecInvalid, "graph has a single shell; no boundary channels");
  l.depth = o.depth ? *o.depth : available;
  if (l.depth < 0 || l.depth > available)
    throw Error(ErrorCode::ConfigInvalid, "depth must lie in [0, " + std::to_string(available) + "]");
  return l;
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    double v = 0.0;
    std::size_t used = 0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0) throw Error(ErrorCode::ConfigInvalid, "cannot parse number '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw Error(ErrorCode::ConfigInvalid, "empty list");
  return out;
}

// "a:b" (inclusive range) or "a,b,c".
std::vector<int> parse_depths(const std::string& text, int fallback_max) {
  std::vector<int> out;
  if (text.empty()) {
    for (int d = 0; d <= fallback_max; ++d) out.push_back(d);
    return out;
  }
  auto colon = text.find(':');
  if (colon != std::string::npos) {
    int a = static_cast<int>(parse_list(text.substr(0, colon)).at(0));
    int b = static_cast<int>(parse_list(text.substr(colon + 1)).at(0));
    if (a < 0 || b < a) throw Error(ErrorCode::ConfigInvalid, "bad depth range " + text);
    for (int d = a; d <= b; ++d) out.push_back(d);
    return out;
  }
  for (double d : parse_list(text)) {
    if (d < 0 || d != static_cast<int>(d)) throw Error(ErrorCode::ConfigInvalid, "bad depth in " + text);
    out.push_back(static_cast<int>(d));
  }
  return out;
}

std::vector<double> grid_of(const Options& o) {
  if (o.points < 2) throw Error(ErrorCode::ConfigInvalid, "grid needs at least 2 points");
  if (!(o.lmin < o.lmax)) throw Error(ErrorCode::ConfigInvalid, "need lmin < lmax");
  std::vector<double> g(o.points);
  for (int i = 0; i < o.points; ++i) g[i] = o.lmin + (o.lmax - o.lmin) * i / (o.points - 1);
  return g;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::ConfigInvalid, "cannot write " + path);
  f << content;
  if (!f) throw Error(ErrorCode::ConfigInvalid, "write failed for " + path);
}

void emit(const Options& o, const std::string& content) {
  if (o.out.empty())
    std::cout << content;
  else
    write_file(o.out, content);
}

int run_density(const Options& o) {
  std::vector<double> grid = grid_of(o);
  DensityPolicy pol;
  pol.sweep = sweep_policy(o);
  pol.threads = o.threads;
  pol.max_perturbations = o.max_perturbations;
  Loaded l = load(o);
  DensityEstimate est = density_curve(l.so, l.cd, grid, l.depth, pol);
  int bad = 0;
  for (PointFlag f : est.flags) bad += f == PointFlag::Singular;
  emit(o, density_csv(est));
  if (!o.out.empty()) write_file(o.out + ".masses.csv", masses_csv(est));
  if (bad) std::cerr << bad << " grid points flagged singular\n";
  return 0;
}

int run_weyl(const Options& o) {
  if (o.z.empty()) throw Error(ErrorCode::ConfigInvalid, "--z is required");
  cplx z = parse_complex(o.z);
  if (!(z.imag() > 0.0)) throw Error(ErrorCode::ConfigInvalid, "weyl needs Im z > 0");
  Loaded l = load(o);
  std::vector<int> depths = parse_depths(o.depths, l.depth);
  for (int d : depths)
    if (d > l.cd.max_boundary_depth())
      throw Error(ErrorCode::ConfigInvalid, "depth " + std::to_string(d) + " exceeds the available shells");
  LimitPointTable t = limit_point_diagnostic(l.so, l.cd, z, depths, sweep_policy(o));
  emit(o, weyl_csv(t));
  return 0;
}

int run_mc(const Options& o) {
  if (!o.graph_path.empty() || o.model_path.empty())
    throw Error(ErrorCode::ConfigInvalid, "mc needs --model (stair, strip or tree)");
  McConfig cfg;
  cfg.grid = parse_list(o.lambdas);
  cfg.trials = o.trials;
  cfg.threads = o.threads;
  if (cfg.trials < 2) throw Error(ErrorCode::ConfigInvalid, "need at least 2 trials");
  ModelSpec spec = load_spec(o);
  McResult r = fourth_moment_run(spec, cfg);
  emit(o, mc_csv(r));
  return 0;
}

int run_verify(const Options& o) {
  VerifyOptions vo;
  if (!o.fault.empty()) {
    if (o.fault != "sign-flip") throw Error(ErrorCode::ConfigInvalid, "unknown fault " + o.fault);
    vo.inject_sign_flip = true;
  }
  std::vector<CheckResult> res = run_verify_suite(o.suite, vo);
  bool ok = true;
  for (const auto& c : res) {
    std::printf("%s  %-52s residual=%.3e  threshold=%.1e\n", c.passed ? "PASS" : "FAIL", c.name.c_str(), c.residual,
                c.threshold);
    ok = ok && c.passed;
  }
  std::printf("%s\n", ok ? "all checks passed" : "some checks failed");
  return ok ? 0 : kExitFailure;
}

int run_partition(const Options& o) {
  if (o.graph_path.empty()) throw Error(ErrorCode::ConfigInvalid, "partition needs --graph");
  WeightedGraph g = graph_from_json(read_json_file(o.graph_path));
  if (o.root < 0 || o.root >= g.vertex_count) throw Error(ErrorCode::ConfigInvalid, "root outside the graph");
  ShellPartition p = bfs_partition(g, o.root);
  ShellOperator so = extract_shell_operator(g, p);
  Grouping grp = group_shells(so, tolerance(o));
  std::vector<int> group_of(p.shells.size(), 0);
  for (std::size_t k = 0; k < grp.groups.size(); ++k)
    for (int s : grp.groups[k]) group_of[s] = static_cast<int>(k);
  std::string csv = "vertex,shell,group\n";
  for (std::size_t n = 0; n < p.shells.size(); ++n)
    for (int v : p.shells[n]) csv += std::to_string(v) + "," + std::to_string(n) + "," + std::to_string(group_of[n]) + "\n";
  emit(o, csv);
  std::cerr << p.shells.size() << " shells, " << grp.groups.size() << " blocks after grouping\n";
  return 0;
}

int exit_code_for(ErrorCode c) { return c == ErrorCode::ConfigInvalid ? kExitConfig : kExitModel; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Transfer-matrix spectral analysis on shell-partitioned graphs"};
  app.require_subcommand(1);
  Options o;

  auto add_source = [&](CLI::App* s) {
    s->add_option("--model", o.model_path, "model spec (JSON)");
    s->add_option("--graph", o.graph_path, "weighted graph (JSON)");
    s->add_option("--root", o.root, "root vertex for --graph");
  };
  auto add_policy = [&](CLI::App* s) {
    s->add_option("--rank-tol", o.rank_tol, "relative singular-value cutoff");
    s->add_option("--cond-max", o.cond_max, "largest accepted condition number in a composition step");
    s->add_option("--eig-tol", o.eig_tol, "eigenvalue exclusion for real spectral parameters");
    s->add_flag("--strict", o.strict, "fail on real spectral parameters hitting a shell eigenvalue");
  };
  auto add_out = [&](CLI::App* s) {
    s->add_option("-o,--out", o.out, "output CSV (stdout if omitted)");
    s->add_option("--threads", o.threads, "worker threads (0 = all, capped by SHELLSPEC_THREADS)");
  };

  auto* density = app.add_subcommand("density", "averaged spectral density on a grid");
  add_source(density);
  add_policy(density);
  add_out(density);
  density->add_option("--depth", o.depth, "truncation depth");
  density->add_option("--lmin", o.lmin, "grid start");
  density->add_option("--lmax", o.lmax, "grid end");
  density->add_option("--points", o.points, "grid points");
  density->add_option("--max-perturbations", o.max_perturbations, "retries at shifted lambda per grid point");

  auto* weyl = app.add_subcommand("weyl", "Weyl disc centers and radii by depth");
  add_source(weyl);
  add_policy(weyl);
  add_out(weyl);
  weyl->add_option("--z", o.z, "spectral parameter, e.g. 0.5+1i")->required();
  weyl->add_option("--depth", o.depth, "largest depth");
  weyl->add_option("--depths", o.depths, "depths as a:b or a,b,c");

  auto* mc = app.add_subcommand("mc", "Monte Carlo fourth moments of conjugated transfer products");
  add_source(mc);
  add_out(mc);
  mc->add_option("--depth", o.depth, "truncation depth");
  mc->add_option("--trials", o.trials, "number of potential samples");
  mc->add_option("--lambdas", o.lambdas, "comma-separated energies");

  auto* ver = app.add_subcommand("verify", "run property suites");
  ver->add_option("suite", o.suite, "all | algebra | weyl | spectral | models");
  ver->add_option("--inject-fault", o.fault)->group("");

  auto* part = app.add_subcommand("partition", "BFS shells and block grouping of a graph");
  add_source(part);
  add_policy(part);
  add_out(part);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*density) return run_density(o);
    if (*weyl) return run_weyl(o);
    if (*mc) return run_mc(o);
    if (*ver) return run_verify(o);
    if (*part) return run_partition(o);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitModel;
  }
  return kExitConfig;
}
