#pragma once

// Report serialization: the JSON run report and the per-point CSV sweep.

#include "mixedcurv/verify.hpp"

#include <cstdio>
#include <json.hpp>
#include <ostream>

namespace mixedcurv {

inline constexpr int kReportSchemaVersion = 1;

namespace detail {

using ojson = nlohmann::ordered_json;

inline ojson named(const NamedValues& vs) {
  ojson o = ojson::object();
  for (const auto& [k, v] : vs) o[k] = v;
  return o;
}

inline ojson hypotheses_json(const std::vector<Hypothesis>& hs) {
  ojson a = ojson::array();
  for (const auto& h : hs) {
    ojson o;
    o["name"] = h.name;
    o["holds"] = std::string(to_string(h.state));
    o["measured"] = h.measured;
    if (!h.note.empty()) o["note"] = h.note;
    a.push_back(std::move(o));
  }
  return a;
}

inline ojson point_json(const Vector& x) {
  ojson a = ojson::array();
  for (int i = 0; i < x.size(); ++i) a.push_back(x[i]);
  return a;
}

inline ojson report_json(const InequalityReport& r) {
  ojson o;
  o["inequality_id"] = std::string(to_string(r.id));
  o["point"] = point_json(r.point);
  o["lhs"] = r.lhs;
  o["rhs"] = r.rhs;
  o["gap"] = r.gap;
  o["verdict"] = std::string(to_string(r.verdict));
  if (r.diagnostics)
    o["diagnostics"] = {{"mixed_sff_norm", r.diagnostics->mixed_sff_norm},
                        {"hbar_spread", r.diagnostics->hbar_spread},
                        {"smix_gap", r.diagnostics->smix_gap}};
  if (!r.hypotheses.empty()) {
    o["hypotheses"] = hypotheses_json(r.hypotheses);
    o["hypotheses_met"] = r.hypotheses_met();
  }
  if (!r.values.empty()) o["values"] = named(r.values);
  o["tolerance"] = r.tolerance;
  if (!r.label.empty()) o["label"] = r.label;
  return o;
}

inline ojson criterion_json(const CriterionVerdict& v) {
  ojson o;
  o["criterion_id"] = std::string(to_string(v.id));
  o["hypotheses"] = hypotheses_json(v.hypotheses);
  o["outcome"] = std::string(to_string(v.outcome));
  // the conclusion is stated only when every hypothesis held
  if (v.outcome == Outcome::CONCLUDED || v.outcome == Outcome::CONTRADICTION) o["conclusion"] = v.conclusion;
  else o["conclusion"] = nullptr;
  if (v.integral_value) o["integral_value"] = *v.integral_value;
  if (!v.values.empty()) o["values"] = named(v.values);
  if (!v.sub_residuals.empty()) o["sub_residuals"] = named(v.sub_residuals);
  if (!v.note.empty()) o["note"] = v.note;
  return o;
}

}  // namespace detail

inline nlohmann::ordered_json report_json(const RunReport& run) {
  using detail::ojson;
  ojson o;
  o["schema_version"] = kReportSchemaVersion;
  o["scenario_label"] = run.label;
  o["coordinates"] = run.coordinates;
  o["seed"] = run.seed;
  o["tolerances"] = {{"eq", run.tol.eq},
                     {"identity", run.tol.identity},
                     {"iso", run.tol.iso},
                     {"diag", run.tol.diag},
                     {"umbilic", run.tol.umbilic}};
  ojson checks = ojson::array();
  for (const auto& c : run.checks) {
    ojson e;
    e["check_id"] = std::string(to_string(c.spec.id));
    if (c.spec.id == CheckId::PW || c.spec.id == CheckId::SII) e["block"] = c.spec.block + 1;
    if (c.error_kind) {
      e["error"] = {{"kind", std::string(to_string(*c.error_kind))}, {"message", c.error}};
    } else if (c.criterion) {
      e["criterion"] = detail::criterion_json(*c.criterion);
    } else {
      ojson reps = ojson::array();
      for (const auto& r : c.reports) reps.push_back(detail::report_json(r));
      e["reports"] = std::move(reps);
    }
    checks.push_back(std::move(e));
  }
  o["per_check"] = std::move(checks);
  o["summary"] = {{"pass", run.summary.pass},
                  {"equality", run.summary.equality},
                  {"violation", run.summary.violation},
                  {"unverifiable", run.summary.unverifiable}};
  return o;
}

inline std::string report_text(const RunReport& run) { return report_json(run).dump(2) + "\n"; }

inline std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// One row per (check, point): check_id, coordinates…, lhs, rhs, gap, verdict.
inline void write_csv(std::ostream& os, const RunReport& run) {
  os << "check_id";
  for (const auto& c : run.coordinates) os << ',' << c;
  os << ",lhs,rhs,gap,verdict\n";
  for (const auto& c : run.checks)
    for (const auto& r : c.reports) {
      os << to_string(c.spec.id);
      if (c.spec.id == CheckId::PW || c.spec.id == CheckId::SII) os << ':' << c.spec.block + 1;
      for (int i = 0; i < r.point.size(); ++i) os << ',' << format_number(r.point[i]);
      os << ',' << format_number(r.lhs) << ',' << format_number(r.rhs) << ',' << format_number(r.gap) << ','
         << to_string(r.verdict) << '\n';
    }
}

}  // namespace mixedcurv
