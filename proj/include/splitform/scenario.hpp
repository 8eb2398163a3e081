#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "splitform/chart.hpp"
#include "splitform/dirac.hpp"
#include "splitform/normalform.hpp"

namespace splitform {

// ---------------------------------------------------------------------------
// scenario description
//
// A scenario bundles one geometric structure with a transversal, a sampling
// plan and tolerances.  Scenarios come from JSON files or from the builtin
// catalog; both feed the same runner.

enum class ScenarioKind { kPoisson, kDirac, kGcs, kAlgebroid, kEuler };

std::string to_string(ScenarioKind kind);

struct Sampling {
  int count = 50;
  double radius = 0.3;
  std::uint64_t seed = 1;
};

struct Scenario {
  std::string name;
  std::string description;
  ScenarioKind kind = ScenarioKind::kPoisson;
  Chart chart;
  int leaf_dim = 0;
  Sampling sampling;
  NormalFormConfig config;

  std::optional<Bivector> bivector;       // poisson
  std::optional<Expr> casimir;            // poisson: leaf-invariance row
  std::optional<TwoForm> expected_omega;  // poisson: closed-form oracle row
  std::optional<TwoForm> two_form;        // dirac: graph data
  bool twisted = false;                   // dirac: background eta = d(two_form)
  std::optional<GCSData> gcs;             // gcs
  std::optional<VectorField> field;       // algebroid section / euler field

  Transversal transversal() const { return Transversal{chart, leaf_dim}; }
};

/// Parses a scenario document.  Malformed documents raise SchemaError with a
/// JSON pointer to the offending member; expression members are parsed with
/// the chart dimension as the variable budget.
Scenario parse_scenario(const std::string& json_text);

/// Builtin scenarios by name; unknown names raise SchemaError.
Scenario builtin_scenario(const std::string& name);

struct CatalogEntry {
  std::string name;
  std::string kind;
  std::string description;
  std::string anchor;
};

const std::vector<CatalogEntry>& scenario_catalog();

// ---------------------------------------------------------------------------
// runner

struct CheckRow {
  std::string name;
  std::string anchor;  // statement of the verified fact
  double max_residual = 0.0;
  double tol = 0.0;
  bool pass = false;
  std::vector<double> samples;  // per-point residuals; empty for aggregates
};

struct ScenarioResult {
  std::string scenario;
  std::uint64_t seed = 0;
  std::vector<CheckRow> checks;
  bool pass = true;
};

/// Deterministic sample cloud for the scenario (engine seeded by the
/// scenario seed; identical inputs give identical points).
std::vector<Eigen::VectorXd> sample_points(const Scenario& s);

/// Runs every check for the scenario kind.  Structural violations raise
/// PreconditionError, quadrature or solver breakdowns raise NumericError;
/// finite residuals above tolerance come back as failed rows instead.
ScenarioResult run_scenario(const Scenario& s);

// ---------------------------------------------------------------------------
// reports

/// JSON report.  The timestamp string is injected so byte-identical reruns
/// stay comparable; everything else depends only on scenario and seed.
std::string report_json(const ScenarioResult& r, const std::string& generated_at);

/// CSV with one row per (check, sample point); aggregate rows leave the
/// sample column empty.
std::string report_csv(const ScenarioResult& r);

std::string iso_timestamp();

}  // namespace splitform
