#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "iay/boundaries.hpp"
#include "iay/ensemble.hpp"
#include "iay/errors.hpp"
#include "iay/measures.hpp"
#include "iay/oracle.hpp"
#include "iay/pricing.hpp"
#include "iay/verify.hpp"

namespace iay {

using json = nlohmann::json;

// Round-trip text form of a double.
inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace detail {

inline int line_of(const std::string& text, std::size_t offset) {
  int line = 1;
  for (std::size_t i = 0; i < offset && i < text.size(); ++i)
    if (text[i] == '\n') ++line;
  return line;
}

// Line numbers where the top-level array elements (or the single object)
// start, so semantic errors can point into the file.
inline std::vector<int> element_lines(const std::string& text) {
  std::vector<int> lines;
  int depth = 0, line = 1;
  bool in_str = false, esc = false;
  for (char ch : text) {
    if (ch == '\n') ++line;
    if (in_str) {
      if (esc)
        esc = false;
      else if (ch == '\\')
        esc = true;
      else if (ch == '"')
        in_str = false;
      continue;
    }
    if (ch == '"') {
      in_str = true;
    } else if (ch == '{' || ch == '[') {
      if (depth <= 1 && ch == '{') lines.push_back(line);
      ++depth;
    } else if (ch == '}' || ch == ']') {
      --depth;
    }
  }
  return lines;
}

inline std::vector<double> number_array(const json& j, const char* what) {
  if (!j.is_array()) throw InputError(std::string(what) + " must be an array of numbers");
  std::vector<double> out;
  for (const auto& v : j) {
    if (!v.is_number()) throw InputError(std::string(what) + " must be an array of numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

}  // namespace detail

inline Marginal parse_marginal(const json& j) {
  if (!j.is_object()) throw InputError("a measure must be a JSON object");
  if (j.contains("atoms")) {
    const json& a = j["atoms"];
    if (!a.is_array()) throw InputError("\"atoms\" must be an array of [x, w] pairs");
    std::vector<Atom> atoms;
    for (const auto& p : a) {
      if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number())
        throw InputError("\"atoms\" entries must be [x, w] number pairs");
      atoms.push_back({p[0].get<double>(), p[1].get<double>()});
    }
    return Marginal::from_atoms(std::move(atoms));
  }
  if (j.contains("call_curve")) {
    const json& c = j["call_curve"];
    if (!c.is_object() || !c.contains("strikes") || !c.contains("prices"))
      throw InputError("\"call_curve\" needs \"strikes\" and \"prices\"");
    return Marginal::from_call_curve(detail::number_array(c["strikes"], "strikes"),
                                     detail::number_array(c["prices"], "prices"));
  }
  throw InputError("a measure needs either \"atoms\" or \"call_curve\"");
}

// A sequence file is an array of measures; a lone measure is a sequence of
// one. The result is checked for centring and convex order.
inline MarginalSequence parse_measures_text(const std::string& text,
                                            const std::string& source = "<input>",
                                            bool check_order = true) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    std::ostringstream os;
    os << source << ":" << detail::line_of(text, e.byte == 0 ? 0 : e.byte - 1)
       << ": JSON parse error: " << e.what();
    throw InputError(os.str());
  }
  const auto lines = detail::element_lines(text);
  MarginalSequence seq;
  auto one = [&](const json& m, std::size_t idx) {
    try {
      seq.push_back(parse_marginal(m));
    } catch (const InputError& e) {
      std::ostringstream os;
      os << source;
      if (idx < lines.size()) os << ":" << lines[idx];
      os << ": measure " << idx + 1 << ": " << e.what();
      throw InputError(os.str());
    }
  };
  if (j.is_array()) {
    if (j.empty()) throw InputError(source + ": empty measure sequence");
    for (std::size_t i = 0; i < j.size(); ++i) one(j[i], i);
  } else {
    one(j, 0);
  }
  const ValidationReport v = validate_sequence(seq);
  if (check_order && !v.order_ok) {
    for (std::size_t i = 0; i < v.max_order_violation.size(); ++i) {
      if (v.max_order_violation[i] > kConvexOrderTol) {
        std::ostringstream os;
        os.precision(17);
        os << source << ": measures " << i + 1 << " and " << i + 2
           << " are not in convex order: call gap " << v.max_order_violation[i]
           << " at strike " << v.violation_at[i];
        throw InputError(os.str());
      }
    }
  }
  return seq;
}

inline MarginalSequence parse_measures(const std::string& path, bool check_order = true) {
  return parse_measures_text(read_text(path), path, check_order);
}

inline json measure_to_json(const Marginal& m) {
  if (m.is_curve()) return {{"call_curve", {{"strikes", m.strikes()}, {"prices", m.prices()}}}};
  json a = json::array();
  for (const Atom& x : m.atoms()) a.push_back({x.x, x.w});
  return {{"atoms", a}};
}

inline json sequence_to_json(const MarginalSequence& seq) {
  json a = json::array();
  for (const Marginal& m : seq) a.push_back(measure_to_json(m));
  return a;
}

// ---------------------------------------------------------------------------
// Writers

inline void ensure_parent(const std::string& path) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
}

inline void write_text(const std::string& path, const std::string& text) {
  ensure_parent(path);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path);
  out << text;
}

inline void write_json(const std::string& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

inline std::string boundaries_csv(const BoundarySet& b) {
  const int n = b.levels();
  std::ostringstream os;
  os << "y";
  for (int i = 1; i <= n; ++i) os << ",xi_" << i;
  for (int i = 1; i <= n; ++i) os << ",K_" << i;
  os << ",j_" << n << "\n";
  for (std::size_t k = 0; k < b.size(); ++k) {
    os << fmt17(b.y[k]);
    for (int i = 0; i < n; ++i) os << "," << fmt17(b.xi[i][k]);
    for (int i = 0; i < n; ++i) os << "," << fmt17(b.K[i][k]);
    os << "," << b.j[n - 1][k] << "\n";
  }
  return os.str();
}

inline std::string barrier_csv(const std::vector<BarrierBound>& rows) {
  std::ostringstream os;
  os << "y,barrier_bound\n";
  for (const auto& r : rows) os << fmt17(r.y) << "," << fmt17(r.bound) << "\n";
  return os.str();
}

// level,value,mass for every level.
inline std::string law_csv(const std::vector<LevelLaw>& laws, double tol = 1e-9) {
  std::ostringstream os;
  os << "level,value,mass\n";
  for (std::size_t i = 0; i < laws.size(); ++i)
    for (const auto& [x, w] : laws[i].values(tol))
      os << i + 1 << "," << fmt17(x) << "," << fmt17(w) << "\n";
  return os.str();
}

// level,y,tail
inline std::string tail_csv(const std::vector<LevelLaw>& laws, const std::vector<double>& ys) {
  std::ostringstream os;
  os << "level,y,tail\n";
  for (std::size_t i = 0; i < laws.size(); ++i)
    for (double y : ys) {
      const auto t = laws[i].tail(y);
      os << i + 1 << "," << fmt17(y) << "," << (t ? fmt17(*t) : std::string("nan")) << "\n";
    }
  return os.str();
}

// Rows of (M_1, max_1, ..., M_n, max_n) as little-endian doubles; the max is
// the lower end of the record's cell (exact for simulated paths).
inline json write_mc_dump(const std::string& path, const PathEnsemble& e) {
  ensure_parent(path);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path);
  std::vector<double> row(2 * static_cast<std::size_t>(e.n_levels));
  for (const auto& p : e.paths) {
    for (int i = 0; i < e.n_levels; ++i) {
      row[2 * i] = p.levels[i].m;
      row[2 * i + 1] = p.levels[i].max_lo;
    }
    for (double v : row) {
      std::uint64_t u;
      std::memcpy(&u, &v, sizeof u);
      if constexpr (std::endian::native == std::endian::big) u = __builtin_bswap64(u);
      out.write(reinterpret_cast<const char*>(&u), sizeof u);
    }
  }
  json cols = json::array();
  for (int i = 1; i <= e.n_levels; ++i) {
    cols.push_back("M_" + std::to_string(i));
    cols.push_back("max_" + std::to_string(i));
  }
  json meta = {{"file", std::filesystem::path(path).filename().string()},
               {"format", "float64 little-endian, row-major"},
               {"columns", cols},
               {"rows", e.paths.size()},
               {"n_levels", e.n_levels},
               {"n_paths", e.meta.n_paths},
               {"truncated", e.meta.truncated},
               {"seed", e.meta.seed},
               {"dt", e.meta.dt},
               {"exact_exit", e.meta.exact_exit},
               {"row_weight", e.paths.empty() ? 0.0 : e.paths.front().weight}};
  write_json(path + ".json", meta);
  return meta;
}

inline std::vector<double> read_mc_dump(const std::string& path, int n_levels) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);
  std::vector<double> out;
  std::uint64_t u;
  while (in.read(reinterpret_cast<char*>(&u), sizeof u)) {
    if constexpr (std::endian::native == std::endian::big) u = __builtin_bswap64(u);
    double v;
    std::memcpy(&v, &u, sizeof v);
    out.push_back(v);
  }
  if (out.size() % (2 * static_cast<std::size_t>(n_levels)) != 0)
    throw InputError(path + ": size is not a whole number of rows");
  return out;
}

// ---------------------------------------------------------------------------
// JSON views of reports

inline json to_json(const Check& c) {
  json where = json::array();
  const std::size_t cap = 50;
  for (std::size_t q = 0; q < c.where.size() && q < cap; ++q) {
    const auto& v = c.where[q];
    where.push_back({{"level", v.level}, {"y", v.y}, {"what", v.what}, {"value", v.mass}});
  }
  return {{"name", c.name},     {"pass", c.pass},         {"statistic", c.statistic},
          {"threshold", c.threshold}, {"note", c.note}, {"violations", c.where.size()},
          {"where", where}};
}

inline json to_json(const CheckReport& r) {
  json a = json::array();
  for (const auto& c : r.checks) a.push_back(to_json(c));
  return {{"pass", r.pass()}, {"checks", a}};
}

inline json to_json(const DiagnosticsReport& r) {
  json a = json::array();
  for (const auto& f : r.flags)
    a.push_back({{"level", f.level}, {"y", f.y}, {"reason", std::string(1, f.reason)},
                 {"detail", f.detail}});
  return {{"pass", r.pass()}, {"flags", a}};
}

inline json to_json(const ValidationReport& v) {
  return {{"pass", v.pass()},
          {"means_ok", v.means_ok},
          {"order_ok", v.order_ok},
          {"mean_deviation", v.mean_deviation},
          {"max_order_violation", v.max_order_violation},
          {"violation_at", v.violation_at}};
}

inline json to_json(const StepBoundary& sb) {
  json a = json::array();
  for (const auto& p : sb.pieces)
    a.push_back({{"from", p.t}, {"diagonal", p.diagonal}, {"value", p.diagonal ? json() : json(p.v)}});
  return a;
}

}  // namespace iay
