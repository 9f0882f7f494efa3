#include <catch_amalgamated.hpp>

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;

namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string out, err;
};

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

fs::path scratch() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() / ("mixedcurv_cli_" + std::to_string(::getpid()));
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

Result cli(const std::string& args) {
  const auto out = scratch() / "stdout.txt", err = scratch() / "stderr.txt";
  const std::string cmd = std::string("'") + MIXEDCURV_CLI_PATH + "' " + args + " >'" + out.string() + "' 2>'" +
                          err.string() + "'";
  const int status = std::system(cmd.c_str());
  Result r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

fs::path write(const std::string& name, const std::string& text) {
  const auto p = scratch() / name;
  std::ofstream(p, std::ios::binary) << text;
  return p;
}

std::vector<std::vector<std::string>> csv_rows(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string c;
    while (std::getline(ls, c, ',')) cells.push_back(c);
    rows.push_back(cells);
  }
  return rows;
}

}  // namespace

TEST_CASE("listing builtins", "[cli]") {
  const auto r = cli("--list-builtins");
  CHECK(r.code == 0);
  CHECK_THAT(r.out, ContainsSubstring("s3_ranks_1_2"));
  CHECK_THAT(r.out, ContainsSubstring("warped_sphere"));
  CHECK(cli("verify --list-builtins").out == r.out);
}

TEST_CASE("equality case exits cleanly", "[cli]") {
  const auto report = scratch() / "s4.json";
  const auto r = cli("verify builtin:s4_ranks_2_2 --report '" + report.string() + "'");
  CHECK(r.code == 0);
  const auto j = nlohmann::json::parse(slurp(report));
  CHECK(j["schema_version"] == 1);
  CHECK(j["scenario_label"] == "s4_ranks_2_2");
  CHECK(j["summary"]["equality"].get<int>() >= 1);
  CHECK(j["summary"]["violation"].get<int>() == 0);
  const auto& main = j["per_check"][0];
  CHECK(main["check_id"] == "MAIN");
  for (const auto& rep : main["reports"]) {
    CHECK(rep["verdict"] == "EQUALITY");
    CHECK(rep["diagnostics"]["mixed_sff_norm"].get<double>() <= 1e-6);
  }
}

TEST_CASE("CSV sweep of the strict S3 case", "[cli]") {
  const auto csv = scratch() / "s3.csv";
  const auto r = cli("verify builtin:s3_ranks_1_2 --csv '" + csv.string() + "'");
  CHECK(r.code == 0);
  const auto rows = csv_rows(slurp(csv));
  REQUIRE(rows.size() > 1);
  CHECK(rows[0] == std::vector<std::string>{"check_id", "a", "b", "c", "lhs", "rhs", "gap", "verdict"});
  int main_rows = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    REQUIRE(rows[i].size() == 8);
    if (rows[i][0] != "MAIN") continue;
    ++main_rows;
    CHECK_THAT(std::stod(rows[i][6]), WithinAbs(0.25, 1e-5));
    CHECK(rows[i][7] == "PASS");
  }
  CHECK(main_rows == 27);
  // a grid override changes the sweep
  const auto csv2 = scratch() / "s3_grid2.csv";
  CHECK(cli("verify builtin:s3_ranks_1_2 --grid 2 --csv '" + csv2.string() + "'").code == 0);
  int rows2 = 0;
  for (const auto& row : csv_rows(slurp(csv2))) rows2 += row[0] == "MAIN";
  CHECK(rows2 == 8);
}

TEST_CASE("input errors exit with 2", "[cli]") {
  SECTION("malformed JSON names the byte offset") {
    const auto p = write("bad.json", "{\"mixedcurv_schema\": 1,, }");
    const auto r = cli("verify '" + p.string() + "'");
    CHECK(r.code == 2);
    CHECK_THAT(r.err, ContainsSubstring("byte offset 24"));
  }
  SECTION("missing file") { CHECK(cli("verify '" + (scratch() / "nope.json").string() + "'").code == 2); }
  SECTION("unknown builtin") { CHECK(cli("verify builtin:nope").code == 2); }
  SECTION("bad flag values") {
    CHECK(cli("verify builtin:flat_plane --grid 0").code == 2);
    CHECK(cli("verify builtin:flat_plane --bogus").code == 2);
    CHECK(cli("verify").code == 2);
  }
  SECTION("validation problems go to standard error") {
    const auto p = write("unknown.json", R"json({"mixedcurv_schema": 1, "colour": "red",
      "manifold": {"coordinates": ["x"], "space_form": {"curvature": 0}}, "checks": [{"id": "PW3K"}]})json");
    const auto r = cli("verify '" + p.string() + "'");
    CHECK(r.code == 2);
    CHECK_THAT(r.err, ContainsSubstring("colour"));
  }
}

TEST_CASE("numerical breakdown exits with 3", "[cli]") {
  const auto p = write("indefinite.json", R"json({"mixedcurv_schema": 1, "label": "indefinite",
    "manifold": {"coordinates": ["x", "y"], "metric": [["1", "0"], ["", "x"]]},
    "distributions": [["x"], ["y"]], "checks": [{"id": "PW3K"}],
    "grid": {"per_axis": 2, "region": [[-1, 1], [-1, 1]]}})json");
  const auto r = cli("verify '" + p.string() + "'");
  CHECK(r.code == 3);
  CHECK_THAT(r.err, ContainsSubstring("MetricNotPositiveDefinite"));
}

TEST_CASE("a violation with its hypotheses met exits with 1", "[cli]") {
  // three-factor twisted form on H3 in H4; not a shipped scenario
  const auto p = write("h3_in_h4.json", R"json({"mixedcurv_schema": 1, "label": "h3_in_h4",
    "manifold": {"twisted_product": {
      "base": {"coordinates": ["t"], "metric": [["1"]]},
      "fibers": [{"coordinates": ["y"], "metric": [["1"]]}, {"coordinates": ["z"], "metric": [["1"]]}],
      "warpings": ["exp(t)", "exp(t)"]}},
    "ambient": {"coordinates": ["t", "y", "z", "w"], "space_form": {"curvature": -1}},
    "immersion": {"map": ["t", "y", "z", "0"]},
    "checks": [{"id": "TWISTED"}], "grid": {"per_axis": 2}})json");
  const auto r = cli("verify '" + p.string() + "'");
  CHECK(r.code == 1);
  CHECK_THAT(r.out, ContainsSubstring("violation 8"));
}

TEST_CASE("shipped scenario files", "[cli]") {
  for (const auto& e : fs::directory_iterator(MIXEDCURV_SCENARIO_DIR)) {
    if (e.path().extension() != ".json") continue;
    INFO(e.path());
    CHECK(cli("verify '" + e.path().string() + "'").code == 0);
  }
}

TEST_CASE("reports are deterministic", "[cli]") {
  for (const char* name : {"s3_ranks_1_2", "s2xr_ambient", "warped_sphere", "graph_paraboloid"}) {
    INFO(name);
    const auto a = scratch() / "a.json", b = scratch() / "b.json", c = scratch() / "c.json";
    const std::string base = std::string("verify builtin:") + name + " --seed 42 --report ";
    REQUIRE(cli(base + "'" + a.string() + "'").code == 0);
    REQUIRE(cli(base + "'" + b.string() + "'").code == 0);
    REQUIRE(cli(base + "'" + c.string() + "' --threads 4").code == 0);
    const auto ta = slurp(a);
    CHECK(!ta.empty());
    CHECK(ta == slurp(b));
    CHECK(ta == slurp(c));
  }
}
