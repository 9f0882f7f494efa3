#pragma once

// The command-line run: load a scenario, execute its checks, write reports.
// Exit codes: 0 clean, 1 a violation with its hypotheses met, 2 bad input,
// 3 numerical breakdown.

#include "mixedcurv/builtins.hpp"
#include "mixedcurv/report.hpp"

#include <fstream>
#include <iomanip>

namespace mixedcurv {

enum ExitCode : int { kExitOk = 0, kExitViolation = 1, kExitInput = 2, kExitNumerical = 3 };

struct RunConfig {
  std::string scenario;  // a path or "builtin:<name>"
  ScenarioOverrides overrides;
  std::string report_path;
  std::string csv_path;
  int verbosity = 0;
};

inline int exit_code_for(const RunReport& run) {
  if (run.numerical_error) return kExitNumerical;
  if (run.summary.violation > 0) return kExitViolation;
  return kExitOk;
}

namespace detail {

inline void print_run(std::ostream& os, const RunReport& run, int verbosity) {
  os << "scenario " << run.label << '\n';
  for (const auto& c : run.checks) {
    os << "  " << std::left << std::setw(18) << to_string(c.spec.id);
    if (c.error_kind) {
      os << "error [" << to_string(*c.error_kind) << "] " << c.error << '\n';
      continue;
    }
    if (c.criterion) {
      os << to_string(c.criterion->outcome);
      if (c.criterion->integral_value) os << "  integral " << format_number(*c.criterion->integral_value);
      os << '\n';
      if (verbosity > 0)
        for (const auto& h : c.criterion->hypotheses)
          os << "      " << to_string(h.state) << "  " << h.name << "  (" << format_number(h.measured) << ")\n";
      continue;
    }
    int counts[3] = {0, 0, 0};
    double worst = 1e300;
    for (const auto& r : c.reports) {
      ++counts[static_cast<int>(r.verdict)];
      worst = std::min(worst, r.identity ? -std::abs(r.gap) : r.gap);
    }
    os << "pass " << counts[0] << "  equality " << counts[1] << "  violation " << counts[2] << "  min gap "
       << format_number(worst) << '\n';
    if (verbosity > 0)
      for (const auto& r : c.reports) {
        os << "      [";
        for (int i = 0; i < r.point.size(); ++i) os << (i ? ", " : "") << r.point[i];
        os << "]  lhs " << format_number(r.lhs) << "  rhs " << format_number(r.rhs) << "  " << to_string(r.verdict)
           << '\n';
      }
  }
  const auto& s = run.summary;
  os << "summary: pass " << s.pass << ", equality " << s.equality << ", violation " << s.violation << ", unverifiable "
     << s.unverifiable << '\n';
}

inline bool write_file(const std::string& path, const std::string& text, std::ostream& err) {
  std::ofstream f(path, std::ios::binary);
  if (!f) {
    err << "error: cannot write " << path << '\n';
    return false;
  }
  f << text;
  return static_cast<bool>(f);
}

}  // namespace detail

inline int run(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  Scenario sc;
  try {
    sc = build_scenario(load_scenario_ref(cfg.scenario), cfg.overrides);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return e.is_numerical() ? kExitNumerical : kExitInput;
  }
  const RunReport run = run_scenario(sc);
  detail::print_run(out, run, cfg.verbosity);
  if (!cfg.report_path.empty() && !detail::write_file(cfg.report_path, report_text(run), err)) return kExitInput;
  if (!cfg.csv_path.empty()) {
    std::ostringstream csv;
    write_csv(csv, run);
    if (!detail::write_file(cfg.csv_path, csv.str(), err)) return kExitInput;
  }
  for (const auto& c : run.checks)
    if (c.error_kind) err << "warning: " << to_string(c.spec.id) << ": " << c.error << '\n';
  return exit_code_for(run);
}

}  // namespace mixedcurv
