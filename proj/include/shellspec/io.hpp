#pragma once

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <system_error>

#include <json.hpp>

#include "models.hpp"
#include "numerics.hpp"
#include "shell_graph.hpp"
#include "spectral.hpp"
#include "weyl.hpp"

namespace shellspec {

// Shortest round-trip representation; "nan"/"inf" for non-finite values.
inline std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

namespace detail {
inline double parse_real(const std::string& s, const std::string& whole) {
  double v = 0.0;
  const char* first = s.data();
  if (!s.empty() && s[0] == '+') ++first;
  auto res = std::from_chars(first, s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw Error(ErrorCode::ConfigInvalid, "cannot parse complex number '" + whole + "'");
  return v;
}
}  // namespace detail

// "a+bi", "a-bi", "bi", "a", "i", with optional spaces.
inline cplx parse_complex(const std::string& text) {
  std::string s;
  for (char c : text)
    if (!std::isspace(static_cast<unsigned char>(c))) s += c;
  if (s.empty()) throw Error(ErrorCode::ConfigInvalid, "empty complex number");
  if (s.back() != 'i') return {detail::parse_real(s, text), 0.0};
  s.pop_back();
  std::size_t split = std::string::npos;
  for (std::size_t k = s.size(); k-- > 1;)
    if ((s[k] == '+' || s[k] == '-') && s[k - 1] != 'e' && s[k - 1] != 'E') {
      split = k;
      break;
    }
  std::string re = split == std::string::npos ? "" : s.substr(0, split);
  std::string im = split == std::string::npos ? s : s.substr(split);
  if (im.empty() || im == "+") im = "1";
  if (im == "-") im = "-1";
  return {re.empty() ? 0.0 : detail::parse_real(re, text), detail::parse_real(im, text)};
}

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigInvalid, "cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigInvalid, path + ": " + e.what());
  }
}

inline WeightedGraph graph_from_json(const nlohmann::json& j) {
  try {
    WeightedGraph g;
    g.vertex_count = j.at("vertices").get<int>();
    for (const auto& e : j.value("edges", nlohmann::json::array())) {
      if (e.size() < 3) throw Error(ErrorCode::ConfigInvalid, "edge needs [x, y, re(, im)]");
      double im = e.size() > 3 ? e[3].get<double>() : 0.0;
      g.add_edge(e[0].get<int>(), e[1].get<int>(), cplx(e[2].get<double>(), im));
    }
    for (const auto& d : j.value("diagonal", nlohmann::json::array())) g.add_diagonal(d[0].get<int>(), d[1].get<double>());
    g.validate();
    for (const auto& e : g.entries)
      if (e.x == e.y && e.w.imag() != 0.0) throw Error(ErrorCode::SpecInvalid, "complex diagonal");
    return g;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigInvalid, std::string("graph file: ") + e.what());
  }
}

inline ModelKind model_kind_from_string(const std::string& k) {
  if (k == "stair") return ModelKind::Stair;
  if (k == "tree") return ModelKind::Tree;
  if (k == "strip") return ModelKind::Strip;
  if (k == "custom") return ModelKind::Custom;
  throw Error(ErrorCode::SpecInvalid, "unknown model kind '" + k + "'");
}

inline ModelSpec model_spec_from_json(const nlohmann::json& j) {
  try {
    ModelSpec s;
    s.kind = model_kind_from_string(j.value("kind", std::string("stair")));
    if (j.contains("widths")) {
      const auto& w = j.at("widths");
      s.widths.rule = w.value("rule", std::string("min_linear"));
      s.widths.cap = w.value("cap", 8);
      s.widths.width = w.value("width", 1);
      if (w.contains("list")) s.widths.list = w.at("list").get<std::vector<int>>();
    }
    if (j.contains("a")) s.a = j.at("a").get<std::vector<double>>();
    if (j.contains("A")) s.A = j.at("A").get<std::vector<std::vector<double>>>();
    if (j.contains("potential")) {
      const auto& p = j.at("potential");
      s.potential.dist = p.value("dist", std::string("none"));
      s.potential.c0 = p.value("c0", 0.0);
      s.potential.exponent = p.value("exponent", 1.0);
    }
    s.seed = j.value("seed", std::uint64_t{42});
    s.depth = j.value("depth", 0);
    s.hopping = j.value("hopping", 1.0);
    s.root = j.value("root", 0);
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigInvalid, std::string("model file: ") + e.what());
  }
}

inline std::string density_csv(const DensityEstimate& est) {
  std::string csv = "lambda,density,min_norm,stieltjes_re,stieltjes_im,flag\n";
  for (std::size_t i = 0; i < est.grid.size(); ++i)
    csv += format_double(est.grid[i]) + "," + format_double(est.density[i]) + "," + format_double(est.min_norm[i]) +
           "," + format_double(est.stieltjes[i].real()) + "," + format_double(est.stieltjes[i].imag()) + "," +
           to_string(est.flags[i]) + "\n";
  return csv;
}

inline std::string masses_csv(const DensityEstimate& est) {
  std::string csv = "lambda0,mass\n";
  for (const auto& pm : est.point_masses) csv += format_double(pm.lambda0) + "," + format_double(pm.mass) + "\n";
  return csv;
}

inline std::string weyl_csv(const LimitPointTable& t) {
  std::string csv = "n,center_re,center_im,radius,truth_re,truth_im\n";
  for (const auto& row : t.rows)
    csv += std::to_string(row.n) + "," + format_double(row.disc.center.real()) + "," +
           format_double(row.disc.center.imag()) + "," + format_double(row.disc.radius) + "," +
           format_double(t.truth.real()) + "," + format_double(t.truth.imag()) + "\n";
  return csv;
}

inline std::string mc_csv(const McResult& r) {
  std::string csv = "lambda,n,fourth_moment,stderr,bound_product\n";
  for (std::size_t li = 0; li < r.grid.size(); ++li)
    for (int n = 0; n <= r.depth; ++n)
      csv += format_double(r.grid[li]) + "," + std::to_string(n) + "," + format_double(r.fourth_moment[li][n]) + "," +
             format_double(r.stderr_[li][n]) + "," + format_double(r.bound_product[li][n]) + "\n";
  return csv;
}

}  // namespace shellspec
