#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string cli_path() {
  if (const char* env = std::getenv("SPLITFORM_CLI")) return env;
  return "./tools/splitform";
}

fs::path work_dir() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "splitform_cli_test";
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

struct RunResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

RunResult run_cli(const std::string& args) {
  const fs::path out = work_dir() / "stdout.txt";
  const fs::path err = work_dir() / "stderr.txt";
  const std::string cmd =
      "\"" + cli_path() + "\" " + args + " > \"" + out.string() + "\" 2> \"" + err.string() + "\"";
  const int raw = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

fs::path write_scenario(const std::string& stem, const std::string& body) {
  const fs::path p = work_dir() / (stem + ".json");
  std::ofstream out(p, std::ios::binary);
  out << body;
  return p;
}

std::string strip_timestamp(const std::string& text) {
  std::istringstream in(text);
  std::string line, kept;
  while (std::getline(in, line))
    if (line.find("generated_at") == std::string::npos) kept += line + "\n";
  return kept;
}

const char* kPlaneScenario = R"json({
  "name": "plane",
  "kind": "poisson",
  "dim": 2,
  "transversal": {"p": 0},
  "sampling": {"count": 4, "seed": 5},
  "bivector": [["0", "-1"], ["1", "0"]]
})";

}  // namespace

TEST_CASE("list prints the catalog in both formats") {
  const RunResult plain = run_cli("list");
  CHECK(plain.exit_code == 0);
  for (const char* name : {"canonical-r4", "so3-star", "heisenberg", "twisted-graph",
                           "gcs-product-shear", "tangent-algebroid"})
    CHECK(plain.out.find(name) != std::string::npos);

  const RunResult machine = run_cli("list --json");
  CHECK(machine.exit_code == 0);
  const json doc = json::parse(machine.out);
  REQUIRE(doc.is_array());
  CHECK(doc.size() == 6);
  for (const auto& entry : doc) {
    CHECK(entry.contains("name"));
    CHECK(entry.contains("kind"));
    CHECK(entry.contains("description"));
    CHECK(entry.contains("paper_anchor"));
  }
}

TEST_CASE("identical scenario and seed give identical reports") {
  const fs::path r1 = work_dir() / "rep1.json";
  const fs::path r2 = work_dir() / "rep2.json";
  const fs::path c1 = work_dir() / "res1.csv";
  const fs::path c2 = work_dir() / "res2.csv";
  const std::string base = "run so3-star --samples 4 --seed 9";
  CHECK(run_cli(base + " --report \"" + r1.string() + "\" --csv \"" + c1.string() + "\"")
            .exit_code == 0);
  CHECK(run_cli(base + " --report \"" + r2.string() + "\" --csv \"" + c2.string() + "\"")
            .exit_code == 0);
  CHECK(strip_timestamp(slurp(r1)) == strip_timestamp(slurp(r2)));
  CHECK(slurp(c1) == slurp(c2));
  CHECK(!strip_timestamp(slurp(r1)).empty());
}

TEST_CASE("seed changes move the sampled residuals") {
  const fs::path c1 = work_dir() / "seed_a.csv";
  const fs::path c2 = work_dir() / "seed_b.csv";
  CHECK(run_cli("run heisenberg --samples 4 --seed 1 --csv \"" + c1.string() + "\"").exit_code ==
        0);
  CHECK(run_cli("run heisenberg --samples 4 --seed 2 --csv \"" + c2.string() + "\"").exit_code ==
        0);
  CHECK(slurp(c1) != slurp(c2));
}

TEST_CASE("report carries the expected check rows for the canonical scenario") {
  const fs::path rp = work_dir() / "canon.json";
  const RunResult r = run_cli("run canonical-r4 --samples 3 --report \"" + rp.string() + "\"");
  CHECK(r.exit_code == 0);
  const json doc = json::parse(slurp(rp));
  CHECK(doc["scenario"] == "canonical-r4");
  CHECK(doc["verdict"] == "pass");
  CHECK(doc.contains("generated_at"));
  REQUIRE(doc["checks"].is_array());
  bool has_omega_oracle = false;
  for (const auto& c : doc["checks"]) {
    REQUIRE(c.contains("name"));
    REQUIRE(c.contains("paper_anchor"));
    REQUIRE(c.contains("max_residual"));
    REQUIRE(c.contains("tol"));
    REQUIRE(c.contains("pass"));
    REQUIRE(c.contains("samples"));
    if (c["name"] == "omega matches the expected two-form") {
      has_omega_oracle = true;
      CHECK(c["pass"] == true);
      CHECK(c["samples"].size() == 3);
    }
  }
  CHECK(has_omega_oracle);
}

TEST_CASE("csv has one row per check and sample point") {
  const fs::path cp = work_dir() / "plane.csv";
  const fs::path sc = write_scenario("plane", kPlaneScenario);
  const RunResult r =
      run_cli("run \"" + sc.string() + "\" --csv \"" + cp.string() + "\"");
  CHECK(r.exit_code == 0);
  std::istringstream in(slurp(cp));
  std::string line;
  REQUIRE(std::getline(in, line));
  CHECK(line == "scenario,check,sample,residual");
  int rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    CHECK(line.rfind("plane,", 0) == 0);
    const auto last = line.rfind(',');
    const double residual = std::stod(line.substr(last + 1));
    CHECK(residual >= 0.0);
  }
  CHECK(rows >= 4);  // at least the per-sample rows of one check
}

TEST_CASE("exit code 1 on verification failure") {
  std::string body = kPlaneScenario;
  body.insert(body.rfind('}'), R"(,
  "tolerances": {"pushforward": 1e-30})json");
  const fs::path sc = write_scenario("too_tight", body);
  const RunResult r = run_cli("run \"" + sc.string() + "\"");
  CHECK(r.exit_code == 1);
  CHECK(r.out.find("verdict: fail") != std::string::npos);
}

TEST_CASE("exit code 1 when a precondition is violated") {
  const fs::path sc = write_scenario("odd_codim", R"json({
    "name": "odd-codim",
    "kind": "poisson",
    "dim": 3,
    "transversal": {"p": 2},
    "sampling": {"count": 3, "seed": 2},
    "bivector": [["0", "x3", "0"], ["-x3", "0", "1"], ["0", "-1", "0"]]
  })json");
  const RunResult r = run_cli("run \"" + sc.string() + "\"");
  CHECK(r.exit_code == 1);
  CHECK(r.err.find("precondition violated") != std::string::npos);
}

TEST_CASE("exit code 2 on schema problems") {
  const RunResult unknown = run_cli("run no-such-scenario");
  CHECK(unknown.exit_code == 2);
  CHECK(unknown.err.find("schema error") != std::string::npos);

  const fs::path broken = write_scenario("broken", "{ not json");
  CHECK(run_cli("run \"" + broken.string() + "\"").exit_code == 2);

  const fs::path bad_expr = write_scenario("bad_expr", R"json({
    "name": "bad-expr",
    "kind": "poisson",
    "dim": 2,
    "transversal": {"p": 0},
    "bivector": [["0", "x7 +"], ["-(x7 +)", "0"]]
  })json");
  const RunResult expr = run_cli("run \"" + bad_expr.string() + "\"");
  CHECK(expr.exit_code == 2);
  CHECK(expr.err.find("/bivector") != std::string::npos);

  const fs::path lopsided = write_scenario("lopsided", R"json({
    "name": "lopsided",
    "kind": "poisson",
    "dim": 2,
    "transversal": {"p": 0},
    "bivector": [["0", "x1"], ["x1", "0"]]
  })json");
  const RunResult skew = run_cli("run \"" + lopsided.string() + "\"");
  CHECK(skew.exit_code == 2);
  CHECK(skew.err.find("antisymmetric") != std::string::npos);

  CHECK(run_cli("run").exit_code == 2);
  CHECK(run_cli("frobnicate").exit_code == 2);
}

TEST_CASE("exit code 3 on numeric failure") {
  const fs::path sc = write_scenario("starved_quadrature", R"json({
    "name": "starved-quadrature",
    "kind": "poisson",
    "dim": 2,
    "transversal": {"p": 0},
    "sampling": {"count": 3, "seed": 2},
    "bivector": [["0", "1+x1"], ["-(1+x1)", "0"]],
    "quadrature": {"nodes": 2, "doubling_tol": 1e-16}
  })json");
  const RunResult r = run_cli("run \"" + sc.string() + "\"");
  CHECK(r.exit_code == 3);
  CHECK(r.err.find("numeric failure") != std::string::npos);
}
