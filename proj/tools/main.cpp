#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "splitform/errors.hpp"
#include "splitform/scenario.hpp"

namespace {

splitform::Scenario load_scenario(const std::string& ref) {
  if (std::filesystem::exists(std::filesystem::path(ref))) {
    std::ifstream in(ref, std::ios::binary);
    if (!in) throw splitform::SchemaError("cannot read scenario file '" + ref + "'", "/");
    std::ostringstream buf;
    buf << in.rdbuf();
    return splitform::parse_scenario(buf.str());
  }
  return splitform::builtin_scenario(ref);
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw splitform::Error("cannot write '" + path + "'");
  out << content;
}

void print_result(const splitform::ScenarioResult& r) {
  std::printf("scenario %s (seed %llu)\n", r.scenario.c_str(),
              static_cast<unsigned long long>(r.seed));
  for (const auto& c : r.checks) {
    if (std::isfinite(c.tol))
      std::printf("  [%s] %-46s max %9.3e  tol %9.3e\n", c.pass ? "pass" : "FAIL", c.name.c_str(),
                  c.max_residual, c.tol);
    else
      std::printf("  [info] %-46s max %9.3e\n", c.name.c_str(), c.max_residual);
  }
  std::printf("verdict: %s\n", r.pass ? "pass" : "fail");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"builds splitting normal forms around transversals and checks their contracts"};
  app.require_subcommand(1);

  std::string ref;
  std::optional<double> tol;
  std::optional<int> samples;
  std::optional<double> radius;
  std::optional<std::uint64_t> seed;
  std::optional<int> quad_nodes;
  std::string report_path;
  std::string csv_path;

  CLI::App* run = app.add_subcommand("run", "run every check of a scenario");
  run->add_option("scenario", ref, "scenario file or builtin name")->required();
  run->add_option("--tol", tol, "override the principal angle and pushforward tolerances");
  run->add_option("--samples", samples, "number of sample points");
  run->add_option("--radius", radius, "sampling radius");
  run->add_option("--seed", seed, "sampling seed");
  run->add_option("--quad-nodes", quad_nodes, "base Gauss-Legendre node count");
  run->add_option("--report", report_path, "write the JSON report to this file");
  run->add_option("--csv", csv_path, "write per-sample residuals to this file");

  bool as_json = false;
  CLI::App* list = app.add_subcommand("list", "list the builtin scenarios");
  list->add_flag("--json", as_json, "machine readable catalog");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (list->parsed()) {
    const auto& catalog = splitform::scenario_catalog();
    if (as_json) {
      nlohmann::ordered_json doc = nlohmann::ordered_json::array();
      for (const auto& entry : catalog) {
        nlohmann::ordered_json row;
        row["name"] = entry.name;
        row["kind"] = entry.kind;
        row["description"] = entry.description;
        row["paper_anchor"] = entry.anchor;
        doc.push_back(std::move(row));
      }
      std::printf("%s\n", doc.dump(2).c_str());
    } else {
      for (const auto& entry : catalog)
        std::printf("%-18s %-10s %s\n", entry.name.c_str(), entry.kind.c_str(),
                    entry.description.c_str());
    }
    return 0;
  }

  try {
    splitform::Scenario s = load_scenario(ref);
    if (samples) {
      if (*samples < 1) throw splitform::SchemaError("samples must be positive", "/sampling/count");
      s.sampling.count = *samples;
    }
    if (radius) {
      if (!(*radius > 0.0))
        throw splitform::SchemaError("radius must be positive", "/sampling/radius");
      if (*radius * std::sqrt(static_cast<double>(s.chart.dim)) > s.chart.radius)
        throw splitform::SchemaError("the sampling box leaves the chart", "/sampling/radius");
      s.sampling.radius = *radius;
    }
    if (seed) s.sampling.seed = *seed;
    if (quad_nodes) {
      if (*quad_nodes < 2)
        throw splitform::SchemaError("quadrature nodes must be at least 2", "/quadrature/nodes");
      s.config.quad.nodes = *quad_nodes;
    }
    if (tol) {
      if (!(*tol > 0.0)) throw splitform::SchemaError("tol must be positive", "/tolerances");
      s.config.angle_tol = *tol;
      s.config.push_tol = *tol;
    }

    const splitform::ScenarioResult r = splitform::run_scenario(s);
    print_result(r);
    if (!report_path.empty())
      write_file(report_path, splitform::report_json(r, splitform::iso_timestamp()));
    if (!csv_path.empty()) write_file(csv_path, splitform::report_csv(r));
    return r.pass ? 0 : 1;
  } catch (const splitform::SchemaError& e) {
    std::cerr << "schema error: " << e.what() << "\n";
    return 2;
  } catch (const splitform::ParseError& e) {
    std::cerr << "schema error: " << e.what() << "\n";
    return 2;
  } catch (const splitform::PreconditionError& e) {
    std::cerr << "precondition violated: " << e.what() << "\n";
    return 1;
  } catch (const splitform::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const splitform::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
