#pragma once

// Scenario files: a JSON document describing a chart (expression metric, space
// form, product or multiply twisted product), its distributions, an optional
// immersion into an ambient chart, and the list of checks to run.

#include "mixedcurv/charts.hpp"
#include "mixedcurv/extremal.hpp"
#include "mixedcurv/immersion.hpp"
#include "mixedcurv/twisted.hpp"

#include <json.hpp>

#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace mixedcurv {

struct Tolerances {
  double eq = 1e-5;        // |gap| for EQUALITY
  double identity = 1e-5;  // identity residuals
  double iso = 1e-8;       // isometry residual
  double diag = 1e-5;      // equality-case diagnostics
  double umbilic = 1e-6;   // umbilicity gate
};

enum class CheckId {
  MAIN, RICCI_K2, DD, ADAPTED_2K, ADAPTED_NPROD, TWISTED,
  PW, PW3K, UMB, SMIX3, DKSMIX,
  GAUSS, SI, SII, TWISTED_SMIX,
  SPLITTING, COMPACT_TANGENT, COMPACT_FACTOR, TWISTED_PAIR, COMPACT_INTEGRAL
};

inline constexpr std::array<std::pair<CheckId, std::string_view>, 20> kCheckNames = {{
    {CheckId::MAIN, "MAIN"},
    {CheckId::RICCI_K2, "RICCI_K2"},
    {CheckId::DD, "DD"},
    {CheckId::ADAPTED_2K, "ADAPTED_2K"},
    {CheckId::ADAPTED_NPROD, "ADAPTED_NPROD"},
    {CheckId::TWISTED, "TWISTED"},
    {CheckId::PW, "PW"},
    {CheckId::PW3K, "PW3K"},
    {CheckId::UMB, "UMB"},
    {CheckId::SMIX3, "SMIX3"},
    {CheckId::DKSMIX, "DKSMIX"},
    {CheckId::GAUSS, "GAUSS"},
    {CheckId::SI, "SI"},
    {CheckId::SII, "SII"},
    {CheckId::TWISTED_SMIX, "TWISTED_SMIX"},
    {CheckId::SPLITTING, "SPLITTING"},
    {CheckId::COMPACT_TANGENT, "COMPACT_TANGENT"},
    {CheckId::COMPACT_FACTOR, "COMPACT_FACTOR"},
    {CheckId::TWISTED_PAIR, "TWISTED_PAIR"},
    {CheckId::COMPACT_INTEGRAL, "COMPACT_INTEGRAL"},
}};

inline std::string_view to_string(CheckId id) {
  for (const auto& [k, v] : kCheckNames)
    if (k == id) return v;
  return "?";
}

inline std::optional<CheckId> check_from_string(std::string_view s) {
  for (const auto& [k, v] : kCheckNames)
    if (v == s) return k;
  return std::nullopt;
}

inline bool is_criterion(CheckId id) {
  return id == CheckId::SPLITTING || id == CheckId::COMPACT_TANGENT || id == CheckId::COMPACT_FACTOR ||
         id == CheckId::TWISTED_PAIR || id == CheckId::COMPACT_INTEGRAL;
}

/// A coordinate leaf: the coordinates of one block vary, the rest are pinned.
struct LeafSpec {
  int block = 0;  // zero-based
  std::map<std::string, double> at;
};

struct CheckSpec {
  CheckId id = CheckId::MAIN;
  int block = 0;  // zero-based; PW and SII
  std::optional<LeafSpec> leaf;
  int resolution = 32;
};

struct Scenario {
  std::string label;
  std::string description;
  ChartManifold manifold;
  std::optional<DistributionSet> distributions;
  std::optional<TwistedProduct> twisted;
  std::optional<ChartManifold> ambient;
  std::optional<DistributionSet> ambient_distributions;
  std::optional<ImmersionData> immersion;
  /// M closed: the chart covers a compact manifold up to a null set.
  bool compact = false;
  /// F_1 closed, for twisted products.
  bool base_compact = false;
  /// Declared completeness; never inferred.
  std::optional<bool> complete;
  std::vector<CheckSpec> checks;
  std::vector<Vector> points;
  Tolerances tol;
  OptimizerParams optimizer;
  std::uint64_t seed = 0;
  DiffConfig diff;
};

// ---------------------------------------------------------------------------
// validation bookkeeping

struct Issue {
  ErrorKind kind;
  std::string where;
  std::string message;
};

/// Every problem found in a document; kind() is the kind of the first one.
class ValidationFailure : public Error {
 public:
  explicit ValidationFailure(std::vector<Issue> issues)
      : Error(issues.empty() ? ErrorKind::ValidationError : issues.front().kind, join(issues)), issues_(std::move(issues)) {}

  const std::vector<Issue>& issues() const noexcept { return issues_; }

 private:
  static std::string join(const std::vector<Issue>& v) {
    std::string s = std::to_string(v.size()) + " problem" + (v.size() == 1 ? "" : "s");
    for (const auto& i : v) s += "\n  " + i.where + ": [" + std::string(to_string(i.kind)) + "] " + i.message;
    return s;
  }
  std::vector<Issue> issues_;
};

/// A parsed, not yet built, scenario document.
struct ScenarioDoc {
  nlohmann::json root;
  std::string origin;
};

inline ScenarioDoc parse_scenario_text(std::string_view text, std::string origin = "<memory>") {
  ScenarioDoc doc;
  doc.origin = std::move(origin);
  try {
    doc.root = nlohmann::json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::ValidationError,
                doc.origin + ": malformed JSON at byte offset " + std::to_string(e.byte) + ": " + e.what());
  }
  return doc;
}

inline ScenarioDoc load_scenario_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::ValidationError, "cannot open scenario file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_scenario_text(ss.str(), path);
}

namespace detail {

class DocReader {
 public:
  std::vector<Issue> issues;

  void fail(const std::string& where, const std::string& msg, ErrorKind kind = ErrorKind::ValidationError) {
    issues.push_back({kind, where, msg});
  }

  /// Records unknown keys; returns false when `j` is not an object.
  bool object(const nlohmann::json& j, const std::string& where, std::initializer_list<std::string_view> allowed) {
    if (!j.is_object()) {
      fail(where, "expected an object");
      return false;
    }
    for (const auto& [key, _] : j.items())
      if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) fail(where, "unknown field '" + key + "'");
    return true;
  }

  /// A number, or a constant expression such as "pi/2"; "inf" and "-inf" allowed.
  std::optional<double> number(const nlohmann::json& j, const std::string& where) {
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) {
      const auto s = j.get<std::string>();
      if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
      if (s == "-inf") return -std::numeric_limits<double>::infinity();
      try {
        return WarpExpression(s).evaluate({}, {});
      } catch (const Error& e) {
        fail(where, e.what(), e.kind());
        return std::nullopt;
      }
    }
    fail(where, "expected a number or a constant expression");
    return std::nullopt;
  }

  std::optional<int> positive_int(const nlohmann::json& j, const std::string& where) {
    if (!j.is_number_integer() || j.get<long long>() < 1) {
      fail(where, "expected a positive integer");
      return std::nullopt;
    }
    return static_cast<int>(j.get<long long>());
  }

  std::optional<std::string> expression_text(const nlohmann::json& j, const std::string& where) {
    if (j.is_string()) return j.get<std::string>();
    if (j.is_number()) return expr::format_number(j.get<double>());
    fail(where, "expected an expression string or number");
    return std::nullopt;
  }

  std::optional<std::vector<std::string>> names(const nlohmann::json& j, const std::string& where) {
    if (!j.is_array() || j.empty()) {
      fail(where, "expected a nonempty array of coordinate names");
      return std::nullopt;
    }
    std::vector<std::string> out;
    for (std::size_t i = 0; i < j.size(); ++i) {
      if (!j[i].is_string()) {
        fail(where + "[" + std::to_string(i) + "]", "expected a string");
        return std::nullopt;
      }
      const auto s = j[i].get<std::string>();
      if (s.empty() || !(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_') || s == "pi") {
        fail(where + "[" + std::to_string(i) + "]", "'" + s + "' is not a usable coordinate name");
        return std::nullopt;
      }
      if (std::find(out.begin(), out.end(), s) != out.end()) {
        fail(where, "coordinate '" + s + "' listed twice");
        return std::nullopt;
      }
      out.push_back(s);
    }
    return out;
  }

  std::optional<std::vector<Interval>> domain(const nlohmann::json& j, const std::string& where, int n) {
    if (!j.is_array() || static_cast<int>(j.size()) != n) {
      fail(where, "expected " + std::to_string(n) + " intervals", ErrorKind::DimensionMismatch);
      return std::nullopt;
    }
    std::vector<Interval> out;
    for (int i = 0; i < n; ++i) {
      const auto& e = j[i];
      const std::string w = where + "[" + std::to_string(i) + "]";
      if (!e.is_array() || e.size() < 2 || e.size() > 3) {
        fail(w, "expected [lower, upper] or [lower, upper, \"periodic\"]");
        return std::nullopt;
      }
      Interval iv;
      const auto lo = number(e[0], w), hi = number(e[1], w);
      if (!lo || !hi) return std::nullopt;
      iv.lower = *lo;
      iv.upper = *hi;
      if (e.size() == 3) {
        if (e[2] != "periodic") {
          fail(w, "third entry must be \"periodic\"");
          return std::nullopt;
        }
        iv.periodic = true;
        if (!iv.bounded()) {
          fail(w, "a periodic axis must be bounded");
          return std::nullopt;
        }
      }
      if (!(iv.upper > iv.lower)) {
        fail(w, "empty interval");
        return std::nullopt;
      }
      out.push_back(iv);
    }
    return out;
  }
};

inline Vector midpoint_grid_first(const ChartManifold& m) {
  OptimizerParams p;
  p.grid_per_axis = 1;
  return region_points(m, p).front();
}

struct BuiltChart {
  ChartManifold chart;
  std::optional<TwistedProduct> twisted;
  bool compact = false;
  bool base_compact = false;
  std::optional<bool> complete;
};

inline std::optional<BuiltChart> read_chart(DocReader& r, const nlohmann::json& j, const std::string& where) {
  if (!r.object(j, where,
                {"coordinates", "domain", "metric", "curvature", "space_form", "twisted_product", "product", "compact", "complete",
                 "label"}))
    return std::nullopt;
  int kinds = 0;
  for (const char* k : {"metric", "space_form", "twisted_product", "product"}) kinds += j.contains(k) ? 1 : 0;
  if (kinds != 1) {
    r.fail(where, "give exactly one of metric, space_form, twisted_product, product");
    return std::nullopt;
  }
  BuiltChart out;
  const auto errors_before = r.issues.size();
  try {
    if (j.contains("metric") || j.contains("space_form")) {
      if (!j.contains("coordinates")) {
        r.fail(where, "missing 'coordinates'");
        return std::nullopt;
      }
      const auto names = r.names(j["coordinates"], where + ".coordinates");
      if (!names) return std::nullopt;
      const int n = static_cast<int>(names->size());
      if (j.contains("metric")) {
        const auto& mj = j["metric"];
        if (!mj.is_array() || static_cast<int>(mj.size()) != n) {
          r.fail(where + ".metric", "expected " + std::to_string(n) + " rows", ErrorKind::DimensionMismatch);
          return std::nullopt;
        }
        std::vector<std::vector<std::string>> entries(n, std::vector<std::string>(n));
        for (int a = 0; a < n; ++a) {
          if (!mj[a].is_array() || static_cast<int>(mj[a].size()) != n) {
            r.fail(where + ".metric[" + std::to_string(a) + "]", "expected " + std::to_string(n) + " entries",
                   ErrorKind::DimensionMismatch);
            return std::nullopt;
          }
          for (int b = a; b < n; ++b) {
            const auto t = r.expression_text(mj[a][b], where + ".metric[" + std::to_string(a) + "][" + std::to_string(b) + "]");
            if (!t) return std::nullopt;
            entries[a][b] = *t;
          }
        }
        std::vector<Interval> dom(n);
        if (j.contains("domain")) {
          const auto d = r.domain(j["domain"], where + ".domain", n);
          if (!d) return std::nullopt;
          dom = *d;
        }
        out.chart = charts::from_expressions(*names, entries, dom, j.value("label", std::string("metric")));
        if (j.contains("curvature")) {
          // a declared constant curvature, spot-checked on the coordinate planes
          const auto c = r.number(j["curvature"], where + ".curvature");
          if (!c) return std::nullopt;
          const Vector x = midpoint_grid_first(out.chart);
          const auto curv = curvature_at(out.chart, x);
          for (int a = 0; a < n; ++a)
            for (int b = a + 1; b < n; ++b) {
              const double K = sectional(curv, Vector::Unit(n, a), Vector::Unit(n, b));
              if (std::abs(K - *c) > 1e-5) {
                r.fail(where + ".curvature", "declared " + expr::format_number(*c) + " but K(" + names->at(a) + "," +
                                                 names->at(b) + ") = " + std::to_string(K));
                return std::nullopt;
              }
            }
          out.chart.constant_curvature = *c;
        }
        out.compact = std::all_of(dom.begin(), dom.end(), [](const Interval& iv) { return iv.periodic; });
      } else {
        const auto& sj = j["space_form"];
        if (!r.object(sj, where + ".space_form", {"curvature"}) || !sj.contains("curvature")) {
          r.fail(where + ".space_form", "missing 'curvature'");
          return std::nullopt;
        }
        const auto c = r.number(sj["curvature"], where + ".space_form.curvature");
        if (!c) return std::nullopt;
        out.chart = charts::space_form(n, *c, *names);
        if (j.contains("domain")) {
          const auto d = r.domain(j["domain"], where + ".domain", n);
          if (!d) return std::nullopt;
          out.chart.domain = *d;
        }
        if (j.contains("label")) out.chart.label = j["label"].get<std::string>();
        out.compact = *c > 0;
      }
    } else if (j.contains("curvature")) {
      r.fail(where + ".curvature", "only expression metrics take a declared curvature");
      return std::nullopt;
    } else if (j.contains("product")) {
      if (j.contains("coordinates") || j.contains("domain")) r.fail(where, "a product takes coordinates from its factors");
      const auto& pj = j["product"];
      if (!pj.is_array() || pj.size() < 2) {
        r.fail(where + ".product", "expected at least two factors");
        return std::nullopt;
      }
      std::vector<ChartManifold> factors;
      bool compact = true;
      for (std::size_t f = 0; f < pj.size(); ++f) {
        auto c = read_chart(r, pj[f], where + ".product[" + std::to_string(f) + "]");
        if (!c) return std::nullopt;
        if (c->twisted) r.fail(where + ".product", "twisted factors are not supported");
        compact = compact && c->compact;
        factors.push_back(std::move(c->chart));
      }
      std::set<std::string> seen;
      for (const auto& f : factors)
        for (int a = 0; a < f.dim; ++a)
          if (!seen.insert(f.coord_name(a)).second) r.fail(where + ".product", "coordinate '" + f.coord_name(a) + "' used twice");
      out.chart = charts::product(factors);
      if (j.contains("label")) out.chart.label = j["label"].get<std::string>();
      out.compact = compact;
    } else {
      if (j.contains("coordinates") || j.contains("domain")) r.fail(where, "a twisted product takes coordinates from its factors");
      const auto& tj = j["twisted_product"];
      if (!r.object(tj, where + ".twisted_product", {"base", "fibers", "warpings"})) return std::nullopt;
      for (const char* k : {"base", "fibers", "warpings"})
        if (!tj.contains(k)) {
          r.fail(where + ".twisted_product", std::string("missing '") + k + "'");
          return std::nullopt;
        }
      auto base = read_chart(r, tj["base"], where + ".twisted_product.base");
      if (!base) return std::nullopt;
      if (!tj["fibers"].is_array() || !tj["warpings"].is_array()) {
        r.fail(where + ".twisted_product", "fibers and warpings must be arrays");
        return std::nullopt;
      }
      std::vector<ChartManifold> fibers;
      bool compact = base->compact;
      for (std::size_t f = 0; f < tj["fibers"].size(); ++f) {
        auto c = read_chart(r, tj["fibers"][f], where + ".twisted_product.fibers[" + std::to_string(f) + "]");
        if (!c) return std::nullopt;
        compact = compact && c->compact;
        fibers.push_back(std::move(c->chart));
      }
      std::vector<WarpExpression> warpings;
      for (std::size_t f = 0; f < tj["warpings"].size(); ++f) {
        const auto t = r.expression_text(tj["warpings"][f], where + ".twisted_product.warpings[" + std::to_string(f) + "]");
        if (!t) return std::nullopt;
        warpings.emplace_back(*t);
      }
      out.twisted = build_twisted_product(base->chart, fibers, warpings);
      out.chart = out.twisted->manifold;
      if (j.contains("label")) out.chart.label = j["label"].get<std::string>();
      out.twisted->manifold.label = out.chart.label;
      out.twisted->distributions.manifold.label = out.chart.label;
      out.base_compact = base->compact;
      out.compact = compact;
    }
  } catch (const Error& e) {
    r.fail(where, e.what(), e.kind());
    return std::nullopt;
  } catch (const nlohmann::json::exception& e) {
    r.fail(where, e.what());
    return std::nullopt;
  }
  if (r.issues.size() != errors_before) return std::nullopt;
  if (j.contains("compact")) {
    if (!j["compact"].is_boolean()) r.fail(where + ".compact", "expected a boolean");
    else out.compact = j["compact"].get<bool>();
  }
  if (j.contains("complete")) {
    if (!j["complete"].is_boolean()) r.fail(where + ".complete", "expected a boolean");
    else out.complete = j["complete"].get<bool>();
  }
  return out;
}

inline std::optional<DistributionSet> read_distributions(DocReader& r, const nlohmann::json& j, const std::string& where,
                                                         const ChartManifold& m) {
  if (!j.is_array() || j.size() < 2) {
    r.fail(where, "expected an array of at least two blocks");
    return std::nullopt;
  }
  std::vector<std::string> names;
  for (int a = 0; a < m.dim; ++a) names.push_back(m.coord_name(a));
  bool all_coordinate = true;
  for (const auto& b : j) all_coordinate = all_coordinate && b.is_array();
  try {
    if (all_coordinate) {
      std::vector<std::vector<int>> blocks;
      std::set<int> used;
      for (std::size_t i = 0; i < j.size(); ++i) {
        const auto nm = r.names(j[i], where + "[" + std::to_string(i) + "]");
        if (!nm) return std::nullopt;
        std::vector<int> idx;
        for (const auto& s : *nm) {
          const auto it = std::find(names.begin(), names.end(), s);
          if (it == names.end()) {
            r.fail(where + "[" + std::to_string(i) + "]", "unknown coordinate '" + s + "'", ErrorKind::UnknownIdentifier);
            return std::nullopt;
          }
          const int a = static_cast<int>(it - names.begin());
          if (!used.insert(a).second) {
            r.fail(where, "coordinate '" + s + "' appears in two blocks");
            return std::nullopt;
          }
          idx.push_back(a);
        }
        blocks.push_back(idx);
      }
      if (static_cast<int>(used.size()) != m.dim) {
        r.fail(where, "blocks cover " + std::to_string(used.size()) + " of " + std::to_string(m.dim) + " coordinates",
               ErrorKind::DimensionMismatch);
        return std::nullopt;
      }
      return DistributionSet::from_coordinates(m, blocks);
    }
    DistributionSet d;
    d.manifold = m;
    const int n = m.dim;
    for (std::size_t i = 0; i < j.size(); ++i) {
      const std::string w = where + "[" + std::to_string(i) + "]";
      BlockSpec bs;
      if (j[i].is_array()) {
        const auto nm = r.names(j[i], w);
        if (!nm) return std::nullopt;
        for (const auto& s : *nm) {
          const auto it = std::find(names.begin(), names.end(), s);
          if (it == names.end()) {
            r.fail(w, "unknown coordinate '" + s + "'", ErrorKind::UnknownIdentifier);
            return std::nullopt;
          }
          const int a = static_cast<int>(it - names.begin());
          bs.fields.push_back([n, a](const Vector&) {
            Vector v = Vector::Zero(n);
            v[a] = 1.0;
            return v;
          });
        }
      } else {
        if (!r.object(j[i], w, {"fields", "project"}) || !j[i].contains("fields") || !j[i]["fields"].is_array() ||
            j[i]["fields"].empty()) {
          r.fail(w, "expected a coordinate list or {\"fields\": [[...]], \"project\": bool}");
          return std::nullopt;
        }
        for (std::size_t f = 0; f < j[i]["fields"].size(); ++f) {
          const auto& fj = j[i]["fields"][f];
          const std::string wf = w + ".fields[" + std::to_string(f) + "]";
          if (!fj.is_array() || static_cast<int>(fj.size()) != n) {
            r.fail(wf, "expected " + std::to_string(n) + " components", ErrorKind::DimensionMismatch);
            return std::nullopt;
          }
          auto progs = std::make_shared<std::vector<expr::Program>>();
          for (int a = 0; a < n; ++a) {
            const auto t = r.expression_text(fj[a], wf);
            if (!t) return std::nullopt;
            progs->push_back(WarpExpression(*t).compile(names));
          }
          bs.fields.push_back([progs, n](const Vector& x) {
            Vector v(n);
            const std::span<const double> s(x.data(), static_cast<std::size_t>(n));
            for (int a = 0; a < n; ++a) v[a] = (*progs)[a](s);
            return v;
          });
        }
        if (j[i].contains("project")) {
          if (!j[i]["project"].is_boolean()) r.fail(w + ".project", "expected a boolean");
          else bs.project_onto_complement = j[i]["project"].get<bool>();
        }
      }
      d.blocks.push_back(std::move(bs));
    }
    int total = 0;
    for (int rk : d.ranks()) total += rk;
    if (total != n) {
      r.fail(where, "ranks sum to " + std::to_string(total) + " but the chart has dimension " + std::to_string(n),
             ErrorKind::DimensionMismatch);
      return std::nullopt;
    }
    return d;
  } catch (const Error& e) {
    r.fail(where, e.what(), e.kind());
    return std::nullopt;
  }
}

inline std::optional<Vector> read_point(DocReader& r, const nlohmann::json& j, const std::string& where, int n) {
  if (!j.is_array() || static_cast<int>(j.size()) != n) {
    r.fail(where, "expected " + std::to_string(n) + " coordinates", ErrorKind::DimensionMismatch);
    return std::nullopt;
  }
  Vector x(n);
  for (int a = 0; a < n; ++a) {
    const auto v = r.number(j[a], where);
    if (!v) return std::nullopt;
    x[a] = *v;
  }
  return x;
}

}  // namespace detail

/// Evaluation grid: midpoints of `per_axis` cells per axis over the box
/// (infinite sides become a width-2 window).
inline std::vector<Vector> midpoint_grid(const ChartManifold& m, int per_axis, std::optional<std::vector<Interval>> box = {}) {
  OptimizerParams p;
  p.grid_per_axis = per_axis;
  p.max_points = 1 << 16;
  p.region = std::move(box);
  return detail::region_points(m, p);
}

/// Overrides applied on top of the document (from the command line).
struct ScenarioOverrides {
  std::optional<int> grid;
  std::optional<int> restarts;
  std::optional<std::uint64_t> seed;
  std::optional<double> tol_eq;
  unsigned threads = 1;
};

/// Builds every component and validates it eagerly; all problems are reported
/// together.
inline Scenario build_scenario(const ScenarioDoc& doc, const ScenarioOverrides& ov = {}) {
  detail::DocReader r;
  const auto& j = doc.root;
  Scenario sc;
  const std::string top = doc.origin;
  if (!r.object(j, top,
                {"mixedcurv_schema", "label", "description", "manifold", "distributions", "ambient", "ambient_distributions",
                 "immersion", "checks", "points", "grid", "optimizer", "tolerances", "seed"}))
    throw ValidationFailure(r.issues);
  if (!j.contains("mixedcurv_schema") || j["mixedcurv_schema"] != 1)
    r.fail(top + ".mixedcurv_schema", "expected schema version 1");
  sc.label = j.contains("label") && j["label"].is_string() ? j["label"].get<std::string>() : doc.origin;
  if (j.contains("description")) {
    if (j["description"].is_string()) sc.description = j["description"].get<std::string>();
    else r.fail(top + ".description", "expected a string");
  }
  if (j.contains("seed")) {
    if (j["seed"].is_number_unsigned()) sc.seed = j["seed"].get<std::uint64_t>();
    else r.fail(top + ".seed", "expected a non-negative integer");
  }
  if (ov.seed) sc.seed = *ov.seed;

  if (j.contains("tolerances") && r.object(j["tolerances"], top + ".tolerances", {"eq", "identity", "iso", "diag", "umbilic"})) {
    const std::pair<const char*, double*> fields[] = {{"eq", &sc.tol.eq},
                                                      {"identity", &sc.tol.identity},
                                                      {"iso", &sc.tol.iso},
                                                      {"diag", &sc.tol.diag},
                                                      {"umbilic", &sc.tol.umbilic}};
    for (const auto& [k, dst] : fields)
      if (j["tolerances"].contains(k)) {
        const auto v = r.number(j["tolerances"][k], top + ".tolerances." + k);
        if (v && *v > 0) *dst = *v;
        else if (v) r.fail(top + ".tolerances." + k, "must be positive");
      }
  }
  if (ov.tol_eq) sc.tol.eq = *ov.tol_eq;

  sc.optimizer.restarts = 8;
  sc.optimizer.grid_per_axis = 3;
  sc.optimizer.max_iters = 200;
  sc.optimizer.seed = sc.seed;
  if (j.contains("optimizer") && r.object(j["optimizer"], top + ".optimizer", {"restarts", "grid", "max_iters", "seed"})) {
    const auto& oj = j["optimizer"];
    if (oj.contains("restarts"))
      if (auto v = r.positive_int(oj["restarts"], top + ".optimizer.restarts")) sc.optimizer.restarts = *v;
    if (oj.contains("grid"))
      if (auto v = r.positive_int(oj["grid"], top + ".optimizer.grid")) sc.optimizer.grid_per_axis = *v;
    if (oj.contains("max_iters"))
      if (auto v = r.positive_int(oj["max_iters"], top + ".optimizer.max_iters")) sc.optimizer.max_iters = *v;
    if (oj.contains("seed")) {
      if (oj["seed"].is_number_unsigned()) sc.optimizer.seed = oj["seed"].get<std::uint64_t>() ^ sc.seed;
      else r.fail(top + ".optimizer.seed", "expected a non-negative integer");
    }
  }
  if (ov.restarts) sc.optimizer.restarts = *ov.restarts;
  sc.optimizer.threads = ov.threads;

  // the manifold
  if (!j.contains("manifold")) {
    r.fail(top, "missing 'manifold'");
    throw ValidationFailure(r.issues);
  }
  auto built = detail::read_chart(r, j["manifold"], top + ".manifold");
  if (!built) throw ValidationFailure(r.issues);
  sc.manifold = built->chart;
  sc.twisted = built->twisted;
  sc.compact = built->compact;
  sc.base_compact = built->base_compact;
  sc.complete = built->complete;
  if (sc.label.empty()) sc.label = sc.manifold.label;

  if (j.contains("distributions")) sc.distributions = detail::read_distributions(r, j["distributions"], top + ".distributions", sc.manifold);
  else if (sc.twisted) sc.distributions = sc.twisted->distributions;

  if (j.contains("ambient")) {
    if (auto a = detail::read_chart(r, j["ambient"], top + ".ambient")) {
      if (a->twisted) r.fail(top + ".ambient", "twisted ambients are not supported");
      sc.ambient = a->chart;
    }
  }
  if (j.contains("ambient_distributions")) {
    if (!sc.ambient) r.fail(top + ".ambient_distributions", "needs 'ambient'");
    else sc.ambient_distributions = detail::read_distributions(r, j["ambient_distributions"], top + ".ambient_distributions", *sc.ambient);
  }
  if (j.contains("immersion")) {
    const auto& ij = j["immersion"];
    if (!sc.ambient) r.fail(top + ".immersion", "needs 'ambient'", ErrorKind::MissingImmersion);
    else if (r.object(ij, top + ".immersion", {"map"})) {
      if (!ij.contains("map") || !ij["map"].is_array()) r.fail(top + ".immersion", "expected 'map': [expressions]");
      else {
        std::vector<std::string> comps;
        bool ok = true;
        for (std::size_t c = 0; c < ij["map"].size(); ++c) {
          const auto t = r.expression_text(ij["map"][c], top + ".immersion.map[" + std::to_string(c) + "]");
          ok = ok && t.has_value();
          if (t) comps.push_back(*t);
        }
        if (ok) {
          try {
            sc.immersion = immersion_from_expressions(sc.manifold, *sc.ambient, comps, sc.distributions);
          } catch (const Error& e) {
            r.fail(top + ".immersion", e.what(), e.kind());
          }
        }
      }
    }
  }

  // evaluation points
  if (j.contains("points") && j.contains("grid")) r.fail(top, "give either 'points' or 'grid', not both");
  int per_axis = 3;
  std::optional<std::vector<Interval>> box;
  if (j.contains("grid") && r.object(j["grid"], top + ".grid", {"per_axis", "region"})) {
    if (j["grid"].contains("per_axis"))
      if (auto v = r.positive_int(j["grid"]["per_axis"], top + ".grid.per_axis")) per_axis = *v;
    if (j["grid"].contains("region")) box = r.domain(j["grid"]["region"], top + ".grid.region", sc.manifold.dim);
  }
  if (ov.grid) per_axis = *ov.grid;
  if (j.contains("points") && !ov.grid) {
    if (!j["points"].is_array() || j["points"].empty()) r.fail(top + ".points", "expected a nonempty array of points");
    else
      for (std::size_t p = 0; p < j["points"].size(); ++p)
        if (auto x = detail::read_point(r, j["points"][p], top + ".points[" + std::to_string(p) + "]", sc.manifold.dim))
          sc.points.push_back(*x);
  } else {
    try {
      sc.points = midpoint_grid(sc.manifold, per_axis, box);
    } catch (const Error& e) {
      r.fail(top + ".grid", e.what(), e.kind());
    }
  }

  // checks
  if (!j.contains("checks") || !j["checks"].is_array() || j["checks"].empty())
    r.fail(top + ".checks", "expected a nonempty array of checks");
  else
    for (std::size_t c = 0; c < j["checks"].size(); ++c) {
      const auto& cj = j["checks"][c];
      const std::string w = top + ".checks[" + std::to_string(c) + "]";
      if (!r.object(cj, w, {"id", "block", "leaf", "resolution"})) continue;
      if (!cj.contains("id") || !cj["id"].is_string()) {
        r.fail(w, "missing 'id'");
        continue;
      }
      const auto id = check_from_string(cj["id"].get<std::string>());
      if (!id) {
        r.fail(w, "unknown check '" + cj["id"].get<std::string>() + "'");
        continue;
      }
      CheckSpec spec;
      spec.id = *id;
      if (cj.contains("block")) {
        if (*id != CheckId::PW && *id != CheckId::SII) r.fail(w, "'block' applies to PW and SII only");
        else if (auto v = r.positive_int(cj["block"], w + ".block")) spec.block = *v - 1;
      }
      if (cj.contains("resolution")) {
        if (!is_criterion(*id)) r.fail(w, "'resolution' applies to criteria only");
        else if (auto v = r.positive_int(cj["resolution"], w + ".resolution")) spec.resolution = *v;
      }
      if (cj.contains("leaf")) {
        const auto& lj = cj["leaf"];
        if (!is_criterion(*id)) r.fail(w, "'leaf' applies to criteria only");
        else if (r.object(lj, w + ".leaf", {"block", "at"})) {
          LeafSpec leaf;
          if (lj.contains("block"))
            if (auto v = r.positive_int(lj["block"], w + ".leaf.block")) leaf.block = *v - 1;
          if (lj.contains("at")) {
            if (!lj["at"].is_object()) r.fail(w + ".leaf.at", "expected {coordinate: value}");
            else
              for (const auto& [name, val] : lj["at"].items()) {
                const auto nm = std::find(sc.manifold.coord_names.begin(), sc.manifold.coord_names.end(), name);
                if (nm == sc.manifold.coord_names.end())
                  r.fail(w + ".leaf.at", "unknown coordinate '" + name + "'", ErrorKind::UnknownIdentifier);
                else if (auto v = r.number(val, w + ".leaf.at." + name))
                  leaf.at[name] = *v;
              }
          }
          spec.leaf = leaf;
        }
      }
      // ingredients
      const CheckId needs_immersion[] = {CheckId::MAIN,          CheckId::RICCI_K2,        CheckId::DD,
                                         CheckId::ADAPTED_2K,    CheckId::ADAPTED_NPROD,   CheckId::TWISTED,
                                         CheckId::GAUSS,         CheckId::SI,              CheckId::SII,
                                         CheckId::SPLITTING,     CheckId::COMPACT_TANGENT, CheckId::COMPACT_FACTOR,
                                         CheckId::TWISTED_PAIR,  CheckId::COMPACT_INTEGRAL};
      const CheckId needs_distributions[] = {CheckId::MAIN, CheckId::RICCI_K2,  CheckId::ADAPTED_2K, CheckId::PW, CheckId::DD,
                                             CheckId::PW3K, CheckId::UMB,       CheckId::SMIX3,      CheckId::DKSMIX,
                                             CheckId::SII,  CheckId::SPLITTING, CheckId::COMPACT_TANGENT,
                                             CheckId::COMPACT_INTEGRAL};
      const CheckId needs_twisted[] = {CheckId::TWISTED, CheckId::TWISTED_SMIX, CheckId::COMPACT_FACTOR, CheckId::TWISTED_PAIR};
      auto in = [&](const auto& list) { return std::find(std::begin(list), std::end(list), *id) != std::end(list); };
      if (in(needs_immersion) && !j.contains("immersion"))
        r.fail(w, std::string(to_string(*id)) + " needs an immersion", ErrorKind::MissingImmersion);
      if (in(needs_distributions) && !j.contains("distributions") && !sc.twisted)
        r.fail(w, std::string(to_string(*id)) + " needs distributions", ErrorKind::PrerequisiteNotMet);
      if (in(needs_twisted) && !sc.twisted)
        r.fail(w, std::string(to_string(*id)) + " needs a twisted product manifold", ErrorKind::NotTwistedProduct);
      if (*id == CheckId::ADAPTED_2K && !j.contains("ambient_distributions"))
        r.fail(w, "ADAPTED_2K needs ambient distributions", ErrorKind::PrerequisiteNotMet);
      if (sc.distributions) {
        const auto ranks = sc.distributions->ranks();
        if (*id == CheckId::RICCI_K2 && (ranks.size() != 2 || ranks[0] != 1))
          r.fail(w, "RICCI_K2 needs two blocks, the first of rank 1", ErrorKind::PrerequisiteNotMet);
        if (*id == CheckId::ADAPTED_NPROD && std::any_of(ranks.begin(), ranks.end(), [](int v) { return v != 1; }))
          r.fail(w, "ADAPTED_NPROD needs every block of rank 1", ErrorKind::PrerequisiteNotMet);
        if (*id == CheckId::TWISTED_PAIR && ranks.size() != 2)
          r.fail(w, "TWISTED_PAIR needs exactly two factors", ErrorKind::PrerequisiteNotMet);
      }
      sc.checks.push_back(spec);
    }

  // eager numerical validation at the evaluation points
  if (r.issues.empty()) {
    for (std::size_t p = 0; p < sc.points.size(); ++p) {
      const Vector& x = sc.points[p];
      const std::string w = top + ".points[" + std::to_string(p) + "] " + detail::format_point(sc.manifold, x);
      try {
        check_in_domain(sc.manifold, x, sc.diff);
        (void)metric_at(sc.manifold, x);
        if (sc.distributions) (void)adapted_frame(*sc.distributions, x);
        if (sc.immersion) {
          const double iso = isometry_residual(*sc.immersion, x, sc.diff);
          if (iso > sc.tol.iso) r.fail(w, "isometry residual " + std::to_string(iso), ErrorKind::NotIsometric);
          const Vector y = sc.immersion->map(x);
          check_in_domain(*sc.ambient, y, sc.diff);
          (void)metric_at(*sc.ambient, y);
          if (sc.ambient_distributions) (void)adapted_frame(*sc.ambient_distributions, y);
        }
      } catch (const Error& e) {
        r.fail(w, e.what(), e.kind());
      }
    }
  }
  if (!r.issues.empty()) throw ValidationFailure(r.issues);
  return sc;
}

/// Coordinates of a leaf through `anchor`: the leaf block's coordinates vary;
/// `at` pins the others, defaulting to the anchor's values.
inline std::vector<QuadratureNode> leaf_quadrature(const Scenario& sc, const LeafSpec& leaf, const Vector& anchor,
                                                   int resolution) {
  if (!sc.distributions || !sc.distributions->coordinate_blocks)
    throw Error(ErrorKind::PrerequisiteNotMet, "leaves need distributions spanned by coordinate fields");
  const auto& blocks = *sc.distributions->coordinate_blocks;
  if (leaf.block < 0 || leaf.block >= static_cast<int>(blocks.size()))
    throw Error(ErrorKind::DimensionMismatch, "leaf block out of range");
  Vector x = anchor;
  for (const auto& [name, v] : leaf.at)
    for (int a = 0; a < sc.manifold.dim; ++a)
      if (sc.manifold.coord_name(a) == name) x[a] = v;
  return leaf_quadrature(sc.manifold, blocks[leaf.block], x, resolution);
}

}  // namespace mixedcurv
