#pragma once

// The scenario catalog shipped with the library, as scenario documents.

#include "mixedcurv/scenarios.hpp"

#include <string_view>

namespace mixedcurv {

namespace detail {

struct BuiltinEntry {
  std::string_view name;
  std::string_view text;
};

inline constexpr BuiltinEntry kBuiltins[] = {
    {"s3_ranks_1_2", R"json({
  "mixedcurv_schema": 1,
  "label": "s3_ranks_1_2",
  "description": "unit S3 in R4, distributions of ranks 1 and 2",
  "manifold": {"coordinates": ["a", "b", "c"], "space_form": {"curvature": 1}},
  "distributions": [["a"], ["b", "c"]],
  "ambient": {"coordinates": ["x1", "x2", "x3", "x4"], "space_form": {"curvature": 0}},
  "immersion": {"map": ["cos(a)", "sin(a)*cos(b)", "sin(a)*sin(b)*cos(c)", "sin(a)*sin(b)*sin(c)"]},
  "checks": [{"id": "MAIN"}, {"id": "RICCI_K2"}, {"id": "DD"}, {"id": "PW"}, {"id": "PW", "block": 2},
             {"id": "PW3K"}, {"id": "SMIX3"}, {"id": "DKSMIX"}, {"id": "UMB"}, {"id": "GAUSS"}, {"id": "SI"},
             {"id": "SII", "block": 2}],
  "grid": {"per_axis": 3}
})json"},
    {"s4_ranks_2_2", R"json({
  "mixedcurv_schema": 1,
  "label": "s4_ranks_2_2",
  "description": "unit S4 in R5, two rank-2 distributions",
  "manifold": {"coordinates": ["a", "b", "c", "d"], "space_form": {"curvature": 1}},
  "distributions": [["a", "b"], ["c", "d"]],
  "ambient": {"coordinates": ["x1", "x2", "x3", "x4", "x5"], "space_form": {"curvature": 0}},
  "immersion": {"map": ["cos(a)", "sin(a)*cos(b)", "sin(a)*sin(b)*cos(c)", "sin(a)*sin(b)*sin(c)*cos(d)",
                        "sin(a)*sin(b)*sin(c)*sin(d)"]},
  "checks": [{"id": "MAIN"}, {"id": "DD"}, {"id": "PW3K"}, {"id": "SMIX3"}, {"id": "DKSMIX"}, {"id": "UMB"},
             {"id": "GAUSS"}, {"id": "SI"}, {"id": "SII", "block": 1}],
  "grid": {"per_axis": 2}
})json"},
    {"s3_ranks_1_1_1", R"json({
  "mixedcurv_schema": 1,
  "label": "s3_ranks_1_1_1",
  "description": "unit S3 in R4, three line fields",
  "manifold": {"coordinates": ["a", "b", "c"], "space_form": {"curvature": 1}},
  "distributions": [["a"], ["b"], ["c"]],
  "ambient": {"coordinates": ["x1", "x2", "x3", "x4"], "space_form": {"curvature": 0}},
  "immersion": {"map": ["cos(a)", "sin(a)*cos(b)", "sin(a)*sin(b)*cos(c)", "sin(a)*sin(b)*sin(c)"]},
  "checks": [{"id": "MAIN"}, {"id": "DD"}, {"id": "ADAPTED_NPROD"}, {"id": "PW3K"}, {"id": "SMIX3"},
             {"id": "DKSMIX"}, {"id": "GAUSS"}, {"id": "SI"}],
  "grid": {"per_axis": 3}
})json"},
    {"warped_sphere", R"json({
  "mixedcurv_schema": 1,
  "label": "warped_sphere",
  "description": "unit S2 as (0, pi) x_sin(t) S1 in R3",
  "manifold": {"twisted_product": {
    "base": {"coordinates": ["t"], "metric": [["1"]], "domain": [[0, "pi"]]},
    "fibers": [{"coordinates": ["theta"], "metric": [["1"]], "domain": [["-pi", "pi", "periodic"]]}],
    "warpings": ["sin(t)"]}, "compact": true},
  "ambient": {"coordinates": ["x", "y", "z"], "space_form": {"curvature": 0}},
  "immersion": {"map": ["sin(t)*cos(theta)", "sin(t)*sin(theta)", "cos(t)"]},
  "checks": [{"id": "TWISTED"}, {"id": "MAIN"}, {"id": "DD"}, {"id": "TWISTED_SMIX"}, {"id": "PW"},
             {"id": "PW3K"}, {"id": "SMIX3"}, {"id": "DKSMIX"}, {"id": "UMB"}, {"id": "GAUSS"}, {"id": "SI"},
             {"id": "TWISTED_PAIR", "leaf": {"block": 2, "at": {"t": "pi/2"}}, "resolution": 64},
             {"id": "COMPACT_TANGENT"}, {"id": "COMPACT_FACTOR"}],
  "grid": {"per_axis": 4}
})json"},
    {"hyperbolic_warp", R"json({
  "mixedcurv_schema": 1,
  "label": "hyperbolic_warp",
  "description": "H2 as R x_exp(t) R, totally geodesic in H3",
  "manifold": {"twisted_product": {
    "base": {"coordinates": ["t"], "metric": [["1"]]},
    "fibers": [{"coordinates": ["y"], "metric": [["1"]]}],
    "warpings": ["exp(t)"]}, "complete": true},
  "ambient": {"coordinates": ["t", "y", "z"], "space_form": {"curvature": -1}},
  "immersion": {"map": ["t", "y", "0"]},
  "checks": [{"id": "TWISTED"}, {"id": "MAIN"}, {"id": "TWISTED_SMIX"}, {"id": "PW3K"}, {"id": "UMB"},
             {"id": "GAUSS"}, {"id": "SI"}, {"id": "SPLITTING"}, {"id": "TWISTED_PAIR"}, {"id": "COMPACT_FACTOR"}],
  "grid": {"per_axis": 3}
})json"},
    {"cosh_warp", R"json({
  "mixedcurv_schema": 1,
  "label": "cosh_warp",
  "description": "H2 as R x_cosh(t) R, totally geodesic in H3 written in Fermi coordinates",
  "manifold": {"twisted_product": {
    "base": {"coordinates": ["t"], "metric": [["1"]]},
    "fibers": [{"coordinates": ["s"], "metric": [["1"]]}],
    "warpings": ["cosh(t)"]}, "complete": true},
  "ambient": {"coordinates": ["t", "s", "r"],
              "metric": [["cosh(r)^2", "0", "0"], ["", "cosh(r)^2*cosh(t)^2", "0"], ["", "", "1"]],
              "curvature": -1},
  "immersion": {"map": ["t", "s", "0"]},
  "checks": [{"id": "TWISTED"}, {"id": "MAIN"}, {"id": "TWISTED_SMIX"}, {"id": "GAUSS"},
             {"id": "COMPACT_FACTOR"}, {"id": "TWISTED_PAIR"}],
  "grid": {"per_axis": 3}
})json"},
    {"h2_in_h3", R"json({
  "mixedcurv_schema": 1,
  "label": "h2_in_h3",
  "description": "totally geodesic H2 in the horospherical chart of H3",
  "manifold": {"coordinates": ["t", "y"], "metric": [["1", "0"], ["", "exp(2*t)"]], "curvature": -1,
               "complete": true},
  "distributions": [["t"], ["y"]],
  "ambient": {"coordinates": ["t", "y", "z"], "space_form": {"curvature": -1}},
  "immersion": {"map": ["t", "y", "0"]},
  "checks": [{"id": "MAIN"}, {"id": "RICCI_K2"}, {"id": "DD"}, {"id": "GAUSS"}, {"id": "SI"},
             {"id": "SII", "block": 1}, {"id": "SPLITTING"}],
  "grid": {"per_axis": 3}
})json"},
    {"heisenberg_span", R"json({
  "mixedcurv_schema": 1,
  "label": "heisenberg_span",
  "description": "R3 split into the contact plane of dz - x dy and its normal line",
  "manifold": {"coordinates": ["x", "y", "z"], "space_form": {"curvature": 0}},
  "distributions": [{"fields": [["1", "0", "0"], ["0", "1", "x"]]}, {"fields": [["0", "0", "1"]], "project": true}],
  "checks": [{"id": "PW"}, {"id": "PW", "block": 2}, {"id": "PW3K"}, {"id": "SMIX3"}, {"id": "DKSMIX"}],
  "grid": {"per_axis": 3}
})json"},
    {"flat_plane", R"json({
  "mixedcurv_schema": 1,
  "label": "flat_plane",
  "description": "the coordinate plane in R3",
  "manifold": {"coordinates": ["x", "y"], "space_form": {"curvature": 0}, "complete": true},
  "distributions": [["x"], ["y"]],
  "ambient": {"coordinates": ["x1", "x2", "x3"], "space_form": {"curvature": 0}},
  "immersion": {"map": ["x", "y", "0"]},
  "checks": [{"id": "MAIN"}, {"id": "RICCI_K2"}, {"id": "DD"}, {"id": "GAUSS"}, {"id": "SI"}, {"id": "SPLITTING"}],
  "grid": {"per_axis": 3}
})json"},
    {"graph_paraboloid", R"json({
  "mixedcurv_schema": 1,
  "label": "graph_paraboloid",
  "description": "the graph of x^2 + y^2 in R3, coordinate line field and its orthogonal complement",
  "manifold": {"coordinates": ["x", "y"], "metric": [["1 + 4*x^2", "4*x*y"], ["", "1 + 4*y^2"]]},
  "distributions": [{"fields": [["1", "0"]]}, {"fields": [["0", "1"]], "project": true}],
  "ambient": {"coordinates": ["x1", "x2", "x3"], "space_form": {"curvature": 0}},
  "immersion": {"map": ["x", "y", "x^2 + y^2"]},
  "checks": [{"id": "MAIN"}, {"id": "RICCI_K2"}, {"id": "DD"}, {"id": "PW"}, {"id": "PW3K"}, {"id": "SMIX3"},
             {"id": "DKSMIX"}, {"id": "GAUSS"}, {"id": "SI"}, {"id": "SII", "block": 1}],
  "grid": {"per_axis": 3, "region": [[-1, 1], [-1, 1]]}
})json"},
    {"s2xr_ambient", R"json({
  "mixedcurv_schema": 1,
  "label": "s2xr_ambient",
  "description": "a great circle times R inside S2 x R, adapted to the product structure",
  "manifold": {"coordinates": ["theta", "s"], "metric": [["1", "0"], ["", "1"]],
               "domain": [["-pi", "pi", "periodic"], ["-inf", "inf"]], "complete": true},
  "distributions": [["theta"], ["s"]],
  "ambient": {"product": [{"coordinates": ["a", "b"], "space_form": {"curvature": 1}},
                          {"coordinates": ["w"], "space_form": {"curvature": 0}}]},
  "ambient_distributions": [["a", "b"], ["w"]],
  "immersion": {"map": ["pi/2", "theta", "s"]},
  "checks": [{"id": "MAIN"}, {"id": "RICCI_K2"}, {"id": "ADAPTED_2K"}, {"id": "GAUSS"}, {"id": "SI"}],
  "grid": {"per_axis": 3}
})json"},
    {"torus_of_revolution", R"json({
  "mixedcurv_schema": 1,
  "label": "torus_of_revolution",
  "description": "the torus of revolution with radii 2 and 1 in R3",
  "manifold": {"twisted_product": {
    "base": {"coordinates": ["theta"], "metric": [["1"]], "domain": [["-pi", "pi", "periodic"]]},
    "fibers": [{"coordinates": ["phi"], "metric": [["1"]], "domain": [["-pi", "pi", "periodic"]]}],
    "warpings": ["2 + cos(theta)"]}},
  "ambient": {"coordinates": ["x", "y", "z"], "space_form": {"curvature": 0}},
  "immersion": {"map": ["(2 + cos(theta))*cos(phi)", "(2 + cos(theta))*sin(phi)", "sin(theta)"]},
  "checks": [{"id": "TWISTED"}, {"id": "MAIN"}, {"id": "TWISTED_SMIX"}, {"id": "PW3K"}, {"id": "UMB"},
             {"id": "GAUSS"}, {"id": "SI"}, {"id": "TWISTED_PAIR"}, {"id": "COMPACT_TANGENT"},
             {"id": "COMPACT_FACTOR"}, {"id": "COMPACT_INTEGRAL", "resolution": 48}],
  "grid": {"per_axis": 4}
})json"},
    {"clifford_torus", R"json({
  "mixedcurv_schema": 1,
  "label": "clifford_torus",
  "description": "the flat torus S1 x S1 in R4",
  "manifold": {"coordinates": ["a", "b"], "metric": [["1", "0"], ["", "1"]],
               "domain": [["-pi", "pi", "periodic"], ["-pi", "pi", "periodic"]]},
  "distributions": [["a"], ["b"]],
  "ambient": {"coordinates": ["x1", "x2", "x3", "x4"], "space_form": {"curvature": 0}},
  "immersion": {"map": ["cos(a)", "sin(a)", "cos(b)", "sin(b)"]},
  "checks": [{"id": "MAIN"}, {"id": "DD"}, {"id": "GAUSS"}, {"id": "SI"}, {"id": "COMPACT_TANGENT"},
             {"id": "COMPACT_INTEGRAL", "resolution": 16}],
  "grid": {"per_axis": 3}
})json"},
    {"hopf_s3", R"json({
  "mixedcurv_schema": 1,
  "label": "hopf_s3",
  "description": "unit S3 in R4 split into the Hopf fibers and their horizontal planes",
  "manifold": {"coordinates": ["eta", "u", "v"],
               "metric": [["1", "0", "0"], ["", "cos(eta)^2", "0"], ["", "", "sin(eta)^2"]],
               "domain": [[0, "pi/2"], ["-pi", "pi", "periodic"], ["-pi", "pi", "periodic"]],
               "curvature": 1, "compact": true},
  "distributions": [{"fields": [["0", "1", "1"]]},
                    {"fields": [["1", "0", "0"], ["0", "1", "0"]], "project": true}],
  "ambient": {"coordinates": ["x1", "x2", "x3", "x4"], "space_form": {"curvature": 0}},
  "immersion": {"map": ["cos(eta)*cos(u)", "cos(eta)*sin(u)", "sin(eta)*cos(v)", "sin(eta)*sin(v)"]},
  "checks": [{"id": "MAIN"}, {"id": "RICCI_K2"}, {"id": "PW"}, {"id": "PW", "block": 2}, {"id": "PW3K"},
             {"id": "SMIX3"}, {"id": "DKSMIX"}, {"id": "GAUSS"}, {"id": "SI"}],
  "grid": {"per_axis": 3}
})json"},
    {"double_warp", R"json({
  "mixedcurv_schema": 1,
  "label": "double_warp",
  "description": "R x_exp(t) R x_exp(2t) R, a doubly warped product with constant mixed curvature -5",
  "manifold": {"twisted_product": {
    "base": {"coordinates": ["t"], "metric": [["1"]]},
    "fibers": [{"coordinates": ["y"], "metric": [["1"]]}, {"coordinates": ["z"], "metric": [["1"]]}],
    "warpings": ["exp(t)", "exp(2*t)"]}},
  "checks": [{"id": "TWISTED_SMIX"}, {"id": "PW3K"}, {"id": "SMIX3"}, {"id": "DKSMIX"}],
  "grid": {"per_axis": 3}
})json"},
};

}  // namespace detail

inline std::vector<std::string> builtin_names() {
  std::vector<std::string> out;
  for (const auto& e : detail::kBuiltins) out.emplace_back(e.name);
  return out;
}

inline std::optional<std::string_view> builtin_text(std::string_view name) {
  for (const auto& e : detail::kBuiltins)
    if (e.name == name) return e.text;
  return std::nullopt;
}

inline ScenarioDoc load_builtin(std::string_view name) {
  const auto t = builtin_text(name);
  if (!t) throw Error(ErrorKind::ValidationError, "no built-in scenario '" + std::string(name) + "'");
  return parse_scenario_text(*t, "builtin:" + std::string(name));
}

/// "builtin:<name>" or a file path.
inline ScenarioDoc load_scenario_ref(const std::string& ref) {
  constexpr std::string_view prefix = "builtin:";
  if (ref.rfind(prefix, 0) == 0) return load_builtin(std::string_view(ref).substr(prefix.size()));
  return load_scenario_file(ref);
}

}  // namespace mixedcurv
