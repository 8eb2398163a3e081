#include "splitform/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <limits>
#include <random>
#include <utility>

#include "json.hpp"

#include "splitform/algebroid.hpp"
#include "splitform/errors.hpp"
#include "splitform/euler.hpp"

namespace splitform {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using nlohmann::json;
using nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// check annotations

struct AnchorEntry {
  const char* name;
  const char* text;
};

constexpr AnchorEntry kAnchors[] = {
    {"jacobi identity", "the bivector brackets satisfy the Jacobi identity at the sample points"},
    {"normal form principal angle",
     "the pulled back structure agrees with the gauge transform of the model by the quadrature "
     "two-form"},
    {"omega closedness",
     "the exterior derivative of the quadrature two-form matches the pulled back twist minus its "
     "base part"},
    {"omega kernel along the transversal",
     "the quadrature two-form annihilates leaf directions on the transversal"},
    {"omega inverse pairing along the transversal",
     "the quadrature two-form inverts the transverse bivector block on the transversal"},
    {"scaling family independence",
     "rescaling the embedding leaves the transported structure unchanged"},
    {"bivector pushforward",
     "the model bivector pushes forward to the original bivector through the embedding"},
    {"mixed block vanishing", "leaf-transverse components of the model bivector vanish"},
    {"transverse block",
     "the transverse model block agrees with the structure restricted to the transversal"},
    {"symplectic block normalization",
     "a linear frame change brings the constant transverse block to the standard antisymmetric "
     "pairing"},
    {"casimir invariance", "the casimir stays constant along the embedded leaf directions"},
    {"omega matches the expected two-form",
     "the quadrature reproduces the known closed form of the two-form"},
    {"isotropy", "the structure frame is isotropic for the split pairing"},
    {"involutivity", "the structure frame is closed under the twisted bracket"},
    {"eigen section residual", "the distinguished section lies in the +i eigenbundle"},
    {"square identity", "the endomorphism squares to minus the identity"},
    {"pairing orthogonality", "the endomorphism preserves the split pairing"},
    {"gauge form magnitude", "size of the residual gauge two-form left after the normal form"},
    {"bundle map equals the tangent map",
     "the induced bundle map restricts to the tangent map of the embedding"},
    {"fibre product membership",
     "transported frames land in the fibre product of the anchor and the tangent map"},
    {"bundle map round trip", "the bundle map followed by its inverse returns every argument"},
    {"anchor transport", "the anchor intertwines fibre transport with the tangent transport"},
    {"euler pushforward", "the embedding pushes the position field forward onto the vector field"},
    {"dilation intertwining",
     "the embedding conjugates fibre dilation into the rescaled flow of the field"},
    {"inverse agreement", "two independent evaluations of the inverse embedding coincide"},
};

std::string anchor_for(const std::string& name) {
  for (const auto& a : kAnchors)
    if (name == a.name) return a.text;
  return "auxiliary diagnostic";
}

// ---------------------------------------------------------------------------
// result assembly

bool has_row(const ScenarioResult& r, const std::string& name) {
  for (const auto& c : r.checks)
    if (c.name == name) return true;
  return false;
}

void append_row(ScenarioResult& r, std::string name, double value, double tol,
                std::vector<double> samples = {}) {
  CheckRow row;
  row.name = std::move(name);
  row.anchor = anchor_for(row.name);
  row.max_residual = value;
  row.tol = tol;
  row.pass = std::isfinite(tol) ? (std::isfinite(value) && value < tol) : true;
  row.samples = std::move(samples);
  r.pass = r.pass && row.pass;
  r.checks.push_back(std::move(row));
}

void append_samples(ScenarioResult& r, std::string name, std::vector<double> samples, double tol) {
  double worst = 0.0;
  bool poisoned = false;
  for (double s : samples) {
    if (std::isnan(s)) poisoned = true;
    worst = std::max(worst, s);
  }
  if (poisoned) worst = std::numeric_limits<double>::quiet_NaN();
  append_row(r, std::move(name), worst, tol, std::move(samples));
}

void absorb(ScenarioResult& r, const SplittingReport& rep) {
  for (const auto& c : rep.checks) {
    if (has_row(r, c.name)) continue;
    append_row(r, c.name, c.residual, c.tol, c.samples);
  }
}

double linf(const VectorXd& v) { return v.cwiseAbs().maxCoeff(); }

// ---------------------------------------------------------------------------
// JSON access with pointer-carrying failures

[[noreturn]] void fail(const std::string& msg, const std::string& ptr) {
  throw SchemaError(msg, ptr.empty() ? "/" : ptr);
}

const json& require(const json& obj, const char* key, const std::string& ptr) {
  if (!obj.is_object()) fail("expected an object", ptr);
  const auto it = obj.find(key);
  if (it == obj.end()) fail(std::string("missing member '") + key + "'", ptr + "/" + key);
  return *it;
}

std::string get_string(const json& v, const std::string& ptr) {
  if (!v.is_string()) fail("expected a string", ptr);
  return v.get<std::string>();
}

double get_number(const json& v, const std::string& ptr) {
  if (!v.is_number()) fail("expected a number", ptr);
  return v.get<double>();
}

int get_int(const json& v, const std::string& ptr) {
  if (!v.is_number_integer()) fail("expected an integer", ptr);
  return v.get<int>();
}

Expr parse_entry(const json& v, int n_vars, const std::string& ptr) {
  const std::string src = get_string(v, ptr);
  try {
    return parse_expr(src, n_vars);
  } catch (const ParseError& e) {
    fail(e.what(), ptr);
  }
}

std::vector<Expr> parse_expr_vector(const json& v, int count, int n_vars, const std::string& ptr) {
  if (!v.is_array() || static_cast<int>(v.size()) != count)
    fail("expected an array of " + std::to_string(count) + " expression strings", ptr);
  std::vector<Expr> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i)
    out.push_back(parse_entry(v[i], n_vars, ptr + "/" + std::to_string(i)));
  return out;
}

std::vector<std::vector<Expr>> parse_expr_matrix(const json& v, int rows, int cols, int n_vars,
                                                 const std::string& ptr) {
  if (!v.is_array() || static_cast<int>(v.size()) != rows)
    fail("expected " + std::to_string(rows) + " rows", ptr);
  std::vector<std::vector<Expr>> out(rows);
  for (int i = 0; i < rows; ++i)
    out[i] = parse_expr_vector(v[i], cols, n_vars, ptr + "/" + std::to_string(i));
  return out;
}

std::vector<VectorXd> probe_points(int dim) {
  std::vector<VectorXd> pts;
  pts.push_back(VectorXd::Zero(dim));
  for (int a = 0; a < dim; ++a) {
    VectorXd p = VectorXd::Zero(dim);
    p[a] = 0.1;
    pts.push_back(p);
  }
  VectorXd mixed(dim);
  for (int i = 0; i < dim; ++i) mixed[i] = (i % 2 ? -1.0 : 1.0) * (0.06 + 0.01 * i);
  pts.push_back(mixed);
  return pts;
}

void check_antisymmetric(const std::vector<std::vector<Expr>>& m, int n_vars,
                         const std::string& ptr) {
  const int n = static_cast<int>(m.size());
  for (const auto& p : probe_points(n_vars)) {
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) {
        const double sum = eval<double>(m[i][j], p.data(), n_vars) +
                           (i == j ? 0.0 : eval<double>(m[j][i], p.data(), n_vars));
        if (std::abs(sum) > 1e-9) fail("the matrix is not antisymmetric", ptr);
      }
  }
}

Bivector to_bivector(const Chart& chart, const std::vector<std::vector<Expr>>& m) {
  Bivector pi = Bivector::zero(chart);
  for (int i = 0; i < chart.dim; ++i)
    for (int j = i + 1; j < chart.dim; ++j) pi.set(i, j, m[i][j]);
  return pi;
}

TwoForm to_twoform(const Chart& chart, const std::vector<std::vector<Expr>>& m) {
  TwoForm w = TwoForm::zero(chart);
  for (int i = 0; i < chart.dim; ++i)
    for (int j = i + 1; j < chart.dim; ++j) w.set(i, j, m[i][j]);
  return w;
}

MatrixXd parse_numeric_matrix(const json& v, int rows, int cols, const std::string& ptr) {
  if (!v.is_array() || static_cast<int>(v.size()) != rows)
    fail("expected " + std::to_string(rows) + " numeric rows", ptr);
  MatrixXd out(rows, cols);
  for (int i = 0; i < rows; ++i) {
    const json& row = v[i];
    const std::string rptr = ptr + "/" + std::to_string(i);
    if (!row.is_array() || static_cast<int>(row.size()) != cols)
      fail("expected " + std::to_string(cols) + " numbers", rptr);
    for (int j = 0; j < cols; ++j)
      out(i, j) = get_number(row[j], rptr + "/" + std::to_string(j));
  }
  return out;
}

VectorXd parse_numeric_vector(const json& v, int count, const std::string& ptr) {
  if (!v.is_array() || static_cast<int>(v.size()) != count)
    fail("expected " + std::to_string(count) + " numbers", ptr);
  VectorXd out(count);
  for (int i = 0; i < count; ++i) out[i] = get_number(v[i], ptr + "/" + std::to_string(i));
  return out;
}

ScenarioKind kind_from_string(const std::string& s, const std::string& ptr) {
  if (s == "poisson") return ScenarioKind::kPoisson;
  if (s == "dirac") return ScenarioKind::kDirac;
  if (s == "gcs") return ScenarioKind::kGcs;
  if (s == "algebroid") return ScenarioKind::kAlgebroid;
  if (s == "euler") return ScenarioKind::kEuler;
  fail("unknown kind '" + s + "'", ptr);
}

}  // namespace

std::string to_string(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::kPoisson: return "poisson";
    case ScenarioKind::kDirac: return "dirac";
    case ScenarioKind::kGcs: return "gcs";
    case ScenarioKind::kAlgebroid: return "algebroid";
    case ScenarioKind::kEuler: return "euler";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// parsing

Scenario parse_scenario(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw SchemaError(e.what(), "/");
  }
  if (!doc.is_object()) fail("the document root must be an object", "/");

  Scenario s;
  s.name = get_string(require(doc, "name", ""), "/name");
  if (s.name.empty()) fail("the name must not be empty", "/name");
  s.kind = kind_from_string(get_string(require(doc, "kind", ""), "/kind"), "/kind");

  const int dim = get_int(require(doc, "dim", ""), "/dim");
  if (dim < 1 || dim > 12) fail("dim must lie in [1, 12]", "/dim");
  double chart_radius = 1.0;
  if (const auto it = doc.find("chart_radius"); it != doc.end()) {
    chart_radius = get_number(*it, "/chart_radius");
    if (!(chart_radius > 0.0)) fail("chart_radius must be positive", "/chart_radius");
  }
  s.chart = Chart::ball(dim, VectorXd::Zero(dim), chart_radius);

  const json& tv = require(doc, "transversal", "");
  if (!tv.is_object()) fail("expected an object", "/transversal");
  s.leaf_dim = get_int(require(tv, "p", "/transversal"), "/transversal/p");
  if (s.leaf_dim < 0 || s.leaf_dim > dim) fail("p must lie in [0, dim]", "/transversal/p");

  if (const auto it = doc.find("sampling"); it != doc.end()) {
    const json& sp = *it;
    if (!sp.is_object()) fail("expected an object", "/sampling");
    if (const auto c = sp.find("count"); c != sp.end()) {
      s.sampling.count = get_int(*c, "/sampling/count");
      if (s.sampling.count < 1) fail("count must be positive", "/sampling/count");
    }
    if (const auto r = sp.find("radius"); r != sp.end()) {
      s.sampling.radius = get_number(*r, "/sampling/radius");
      if (!(s.sampling.radius > 0.0)) fail("radius must be positive", "/sampling/radius");
    }
    if (const auto sd = sp.find("seed"); sd != sp.end()) {
      if (!sd->is_number_integer() || (sd->is_number_integer() && !sd->is_number_unsigned() &&
                                       sd->get<long long>() < 0))
        fail("seed must be a non-negative integer", "/sampling/seed");
      s.sampling.seed = sd->get<std::uint64_t>();
    }
  }
  if (s.sampling.radius * std::sqrt(static_cast<double>(dim)) > chart_radius)
    fail("the sampling box leaves the chart; shrink the sampling radius", "/sampling/radius");

  if (const auto it = doc.find("tolerances"); it != doc.end()) {
    const json& tl = *it;
    if (!tl.is_object()) fail("expected an object", "/tolerances");
    for (const auto& [key, value] : tl.items()) {
      const std::string ptr = "/tolerances/" + key;
      const double t = get_number(value, ptr);
      if (!(t > 0.0)) fail("tolerances must be positive", ptr);
      if (key == "angle")
        s.config.angle_tol = t;
      else if (key == "closedness")
        s.config.closed_tol = t;
      else if (key == "boundary_tangent")
        s.config.boundary_tangent_tol = t;
      else if (key == "boundary_inverse")
        s.config.boundary_inverse_tol = t;
      else if (key == "family")
        s.config.family_tol = t;
      else if (key == "pushforward")
        s.config.push_tol = t;
      else if (key == "eigen")
        s.config.eigen_tol = t;
      else if (key == "section")
        s.config.section_tol = t;
      else
        fail("unknown tolerance '" + key + "'", ptr);
    }
  }

  if (const auto it = doc.find("quadrature"); it != doc.end()) {
    const json& q = *it;
    if (!q.is_object()) fail("expected an object", "/quadrature");
    if (const auto nd = q.find("nodes"); nd != q.end()) {
      s.config.quad.nodes = get_int(*nd, "/quadrature/nodes");
      if (s.config.quad.nodes < 2) fail("nodes must be at least 2", "/quadrature/nodes");
    }
    if (const auto dt = q.find("doubling_tol"); dt != q.end()) {
      s.config.quad.doubling_tol = get_number(*dt, "/quadrature/doubling_tol");
      if (!(s.config.quad.doubling_tol > 0.0))
        fail("doubling_tol must be positive", "/quadrature/doubling_tol");
    }
  }

  switch (s.kind) {
    case ScenarioKind::kPoisson: {
      auto m = parse_expr_matrix(require(doc, "bivector", ""), dim, dim, dim, "/bivector");
      check_antisymmetric(m, dim, "/bivector");
      s.bivector = to_bivector(s.chart, m);
      if (const auto it = doc.find("casimir"); it != doc.end())
        s.casimir = parse_entry(*it, dim, "/casimir");
      if (const auto it = doc.find("expected_omega"); it != doc.end()) {
        auto w = parse_expr_matrix(*it, dim, dim, dim, "/expected_omega");
        check_antisymmetric(w, dim, "/expected_omega");
        s.expected_omega = to_twoform(s.chart, w);
      }
      break;
    }
    case ScenarioKind::kDirac: {
      if (s.leaf_dim != 0)
        fail("graph scenarios split at the origin: transversal p must be 0", "/transversal/p");
      auto m = parse_expr_matrix(require(doc, "two_form", ""), dim, dim, dim, "/two_form");
      check_antisymmetric(m, dim, "/two_form");
      s.two_form = to_twoform(s.chart, m);
      if (const auto it = doc.find("twist"); it != doc.end()) {
        const std::string tw = get_string(*it, "/twist");
        if (tw == "exterior-derivative")
          s.twisted = true;
        else if (tw != "none")
          fail("twist must be 'none' or 'exterior-derivative'", "/twist");
      }
      break;
    }
    case ScenarioKind::kGcs: {
      auto m = parse_expr_matrix(require(doc, "j_matrix", ""), 2 * dim, 2 * dim, dim, "/j_matrix");
      std::vector<Expr> flat;
      flat.reserve(4 * dim * dim);
      for (auto& row : m)
        for (auto& e : row) flat.push_back(std::move(e));
      s.gcs = GCSData{s.chart, std::move(flat)};
      break;
    }
    case ScenarioKind::kAlgebroid: {
      s.field = VectorField{s.chart,
                            parse_expr_vector(require(doc, "section", ""), dim, dim, "/section")};
      break;
    }
    case ScenarioKind::kEuler: {
      s.field =
          VectorField{s.chart, parse_expr_vector(require(doc, "field", ""), dim, dim, "/field")};
      break;
    }
  }

  if (const auto fr = tv.find("frame"); fr != tv.end()) {
    if (s.kind != ScenarioKind::kPoisson && s.kind != ScenarioKind::kDirac)
      fail("a transversal frame is only supported for poisson and dirac scenarios",
           "/transversal/frame");
    AffineChange change;
    change.A = parse_numeric_matrix(*fr, dim, dim, "/transversal/frame");
    change.b = VectorXd::Zero(dim);
    if (const auto off = tv.find("offset"); off != tv.end())
      change.b = parse_numeric_vector(*off, dim, "/transversal/offset");
    if (std::abs(change.A.determinant()) < 1e-10)
      fail("the transversal frame is singular", "/transversal/frame");
    if (s.bivector) s.bivector = change_coordinates(change, s.chart, *s.bivector);
    if (s.expected_omega) s.expected_omega = change_coordinates(change, s.chart, *s.expected_omega);
    if (s.two_form) s.two_form = change_coordinates(change, s.chart, *s.two_form);
    if (s.casimir) s.casimir = substitute(*s.casimir, change.forward_exprs());
  }

  return s;
}

// ---------------------------------------------------------------------------
// builtin catalog

namespace {

Scenario make_canonical_r4() {
  Scenario s;
  s.name = "canonical-r4";
  s.description = "constant symplectic bivector on a four dimensional chart, split at the origin";
  s.kind = ScenarioKind::kPoisson;
  s.chart = Chart::ball(4, VectorXd::Zero(4), 1.1);
  s.leaf_dim = 0;
  s.sampling.seed = 11;
  Bivector pi = Bivector::zero(s.chart);
  pi.set(0, 1, Expr::constant(-1.0));
  pi.set(2, 3, Expr::constant(-1.0));
  s.bivector = pi;
  TwoForm w0 = TwoForm::zero(s.chart);
  w0.set(0, 1, Expr::constant(1.0));
  w0.set(2, 3, Expr::constant(1.0));
  s.expected_omega = w0;
  return s;
}

Scenario make_so3_star() {
  Scenario s;
  s.name = "so3-star";
  s.description = "linear rotational bivector with the fixed axis translated off the origin";
  s.kind = ScenarioKind::kPoisson;
  s.chart = Chart::ball(3, VectorXd::Zero(3), 0.8);
  s.leaf_dim = 1;
  s.sampling.seed = 12;
  const Expr x1 = Expr::variable(0), x2 = Expr::variable(1), x3 = Expr::variable(2);
  Bivector pi = Bivector::zero(s.chart);
  pi.set(0, 1, x3);
  pi.set(0, 2, Expr::constant(0.0) - x2);
  pi.set(1, 2, Expr::constant(1.0) + x1);
  s.bivector = pi;
  const Expr shifted = Expr::constant(1.0) + x1;
  s.casimir = shifted * shifted + x2 * x2 + x3 * x3;
  return s;
}

Scenario make_heisenberg() {
  Scenario s;
  s.name = "heisenberg";
  s.description = "rank two bivector whose transverse pairing grows along the leaf";
  s.kind = ScenarioKind::kPoisson;
  s.chart = Chart::ball(3, VectorXd::Zero(3), 0.7);
  s.leaf_dim = 1;
  s.sampling.seed = 13;
  Bivector pi = Bivector::zero(s.chart);
  pi.set(1, 2, Expr::constant(1.0) + Expr::variable(0));
  s.bivector = pi;
  s.casimir = Expr::variable(0);
  return s;
}

Scenario make_twisted_graph() {
  Scenario s;
  s.name = "twisted-graph";
  s.description = "graph of an exponential area form, twisted by its exterior derivative";
  s.kind = ScenarioKind::kDirac;
  s.chart = Chart::ball(3, VectorXd::Zero(3), 0.9);
  s.leaf_dim = 0;
  s.sampling.seed = 14;
  TwoForm w = TwoForm::zero(s.chart);
  w.set(0, 1, exp(Expr::variable(2)));
  s.two_form = w;
  s.twisted = true;
  return s;
}

Scenario make_gcs_product_shear() {
  Scenario s;
  s.name = "gcs-product-shear";
  s.description =
      "product of a complex factor and a symplectic factor, sheared by a constant two-form";
  s.kind = ScenarioKind::kGcs;
  s.chart = Chart::ball(4, VectorXd::Zero(4), 0.9);
  s.leaf_dim = 2;
  s.sampling.seed = 15;
  const Chart c2 = Chart::unguarded(2);
  const std::vector<Expr> j = {Expr::constant(0.0), Expr::constant(-1.0), Expr::constant(1.0),
                               Expr::constant(0.0)};
  const GCSData cplx = gcs_from_complex_structure(c2, j);
  TwoForm w0 = TwoForm::zero(c2);
  w0.set(0, 1, Expr::constant(1.0));
  const GCSData sum = gcs_direct_sum(cplx, gcs_from_symplectic(w0));
  TwoForm shear = TwoForm::zero(s.chart);
  shear.set(0, 2, Expr::constant(0.7));
  s.gcs = bfield(shear, GCSData{s.chart, sum.J});
  return s;
}

Scenario make_tangent_algebroid() {
  Scenario s;
  s.name = "tangent-algebroid";
  s.description = "tangent bundle with a curved admissible section over a one dimensional leaf";
  s.kind = ScenarioKind::kAlgebroid;
  s.chart = Chart::ball(3, VectorXd::Zero(3), 1.2);
  s.leaf_dim = 1;
  s.sampling.seed = 16;
  const Expr y = Expr::variable(0), x1 = Expr::variable(1), x2 = Expr::variable(2);
  std::vector<Expr> comps(3);
  comps[0] = Expr::constant(0.3) * x1 * x2 - Expr::constant(0.1) * x1 * x1;
  comps[1] = x1 + Expr::constant(0.2) * x1 * x1 + Expr::constant(0.1) * x1 * x2;
  comps[2] = x2 - Expr::constant(0.15) * x2 * x2 + Expr::constant(0.05) * y * x1 * x2;
  s.field = VectorField{s.chart, comps};
  return s;
}

struct BuiltinDef {
  const char* name;
  Scenario (*make)();
  const char* anchor;
};

constexpr BuiltinDef kBuiltins[] = {
    {"canonical-r4", &make_canonical_r4,
     "the quadrature two-form equals the constant symplectic form and the solved section is the "
     "position field"},
    {"so3-star", &make_so3_star,
     "splitting around a one dimensional leaf through a regular point of a linear rotational "
     "bivector"},
    {"heisenberg", &make_heisenberg,
     "splitting for a rank two bivector whose symplectic leaves vary with the base point"},
    {"twisted-graph", &make_twisted_graph,
     "normal form of the graph of a two-form in the bracket twisted by the exterior derivative of "
     "that form"},
    {"gcs-product-shear", &make_gcs_product_shear,
     "recovering a complex times symplectic product from its shear by a constant two-form"},
    {"tangent-algebroid", &make_tangent_algebroid,
     "the induced bundle map of the tangent algebroid is the tangent map of the embedding"},
};

}  // namespace

Scenario builtin_scenario(const std::string& name) {
  for (const auto& b : kBuiltins)
    if (name == b.name) return b.make();
  throw SchemaError("unknown scenario '" + name + "'", "/name");
}

const std::vector<CatalogEntry>& scenario_catalog() {
  static const std::vector<CatalogEntry> entries = [] {
    std::vector<CatalogEntry> out;
    for (const auto& b : kBuiltins) {
      const Scenario s = b.make();
      out.push_back({s.name, to_string(s.kind), s.description, b.anchor});
    }
    return out;
  }();
  return entries;
}

// ---------------------------------------------------------------------------
// runner

std::vector<VectorXd> sample_points(const Scenario& s) {
  std::mt19937_64 rng(s.sampling.seed);
  std::uniform_real_distribution<double> u(-s.sampling.radius, s.sampling.radius);
  std::vector<VectorXd> pts;
  pts.reserve(s.sampling.count);
  for (int k = 0; k < s.sampling.count; ++k) {
    VectorXd p(s.chart.dim);
    for (int i = 0; i < s.chart.dim; ++i) p[i] = u(rng);
    pts.push_back(std::move(p));
  }
  return pts;
}

namespace {

void run_poisson(const Scenario& s, const std::vector<VectorXd>& pts, ScenarioResult& out) {
  const Bivector& pi = *s.bivector;
  const Transversal nu = s.transversal();
  const Trivector jac = jacobiator(pi);
  std::vector<double> jrows;
  jrows.reserve(pts.size());
  for (const auto& p : pts) jrows.push_back(jac.max_abs(p));
  append_samples(out, "jacobi identity", jrows, 1e-8);

  absorb(out, weinstein_split(pi, nu, pts, s.config));

  const int k = nu.normal_dim();
  if (k == 0) return;

  const DiracFrame E = graph_of_bivector(pi, pts);
  const TwistedCourant bg = TwistedCourant::untwisted(pi.chart);
  const OneForm alpha = alpha_for_cosymplectic(pi, nu);
  const VectorField X = sharp_field(pi, alpha);
  const CourantSection eps{X, alpha};
  absorb(out, dirac_normal_form(E, bg, nu, eps, pts, s.config, &pi));

  if (!s.casimir && !s.expected_omega) return;
  const TubularEmbedding emb = linearize(X.as_map(), nu, s.config.lin);
  const SmoothMap psi = emb.psi();
  if (s.casimir) {
    std::vector<Expr> grad(s.chart.dim);
    for (int i = 0; i < s.chart.dim; ++i) grad[i] = derivative(*s.casimir, i);
    std::vector<double> rows;
    rows.reserve(pts.size());
    for (const auto& w : pts) {
      const VectorXd q = psi.value(w);
      const MatrixXd J = psi.jacobian(w);
      VectorXd g(s.chart.dim);
      for (int i = 0; i < s.chart.dim; ++i) g[i] = eval<double>(grad[i], q.data(), s.chart.dim);
      double worst = 0.0;
      for (int j = nu.leaf_dim; j < s.chart.dim; ++j)
        worst = std::max(worst, std::abs(g.dot(J.col(j))));
      rows.push_back(worst);
    }
    append_samples(out, "casimir invariance", rows, s.config.push_tol);
  }
  if (s.expected_omega) {
    const TwoFormEval om =
        omega_quadrature(alpha, X, ThreeForm::zero(pi.chart), emb, s.config.quad);
    std::vector<double> rows;
    rows.reserve(pts.size());
    for (const auto& w : pts)
      rows.push_back((om.matrix(w) - s.expected_omega->matrix(w)).cwiseAbs().maxCoeff());
    append_samples(out, "omega matches the expected two-form", rows, 1e-8);
  }
}

void run_dirac(const Scenario& s, const std::vector<VectorXd>& pts, ScenarioResult& out) {
  const TwoForm& w2 = *s.two_form;
  const ThreeForm eta = s.twisted ? exterior_derivative(w2) : ThreeForm::zero(s.chart);
  const TwistedCourant bg{s.chart, eta};
  const DiracFrame E = graph_of_twoform(w2, bg, pts);
  const DiracReport dv = validate_dirac(E, bg, pts, 1e-7);
  append_row(out, "isotropy", dv.max_pairing_residual, 1e-7);
  append_row(out, "involutivity", dv.max_involutivity_residual, 1e-7);
  const VectorField X = VectorField::euler(s.chart);
  const CourantSection eps{X, interior_product(X, w2)};
  absorb(out, dirac_normal_form(E, bg, s.transversal(), eps, pts, s.config));
}

void run_gcs(const Scenario& s, const std::vector<VectorXd>& pts, ScenarioResult& out) {
  const GCSData& J = *s.gcs;
  const GCSReport gv = validate_gcs(J, pts, s.config.eigen_tol);
  append_row(out, "square identity", gv.max_square_residual, s.config.eigen_tol);
  append_row(out, "pairing orthogonality", gv.max_orthogonality_residual, s.config.eigen_tol);
  absorb(out, gcs_normal_form(J, s.transversal(), pts, s.config));
}

void run_algebroid(const Scenario& s, const std::vector<VectorXd>& pts, ScenarioResult& out) {
  const LieAlgebroid L = tangent_algebroid(s.chart);
  Section eps;
  eps.comps = s.field->comps;
  AlgebroidConfig acfg;
  acfg.linearize = s.config.lin;
  const AlgebroidNormalForm nf = algebroid_normal_form(L, s.transversal(), eps, acfg);
  const SmoothMap psi = nf.psi();

  std::mt19937_64 rng(s.sampling.seed ^ 0x9e3779b97f4a7c15ull);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const int n = s.chart.dim;
  const int p = s.leaf_dim;
  std::vector<double> tangent, member, round_trip, anchor;
  for (const auto& v : pts) {
    const MatrixXd J = psi.jacobian(v);
    double worst = 0.0;
    for (int trial = 0; trial < 3; ++trial) {
      VectorXd w(n);
      for (int i = 0; i < n; ++i) w[i] = u(rng);
      VectorXd eta = VectorXd::Zero(n);
      for (int a = 0; a < p; ++a) eta[a] = w[a];
      worst = std::max(worst, linf(nf.psi_tilde(v, eta, w) - J * w));
    }
    tangent.push_back(worst);
    const std::vector<VectorXd> one{v};
    member.push_back(nf.image_residual(one));
    round_trip.push_back(nf.round_trip_residual(one));
    anchor.push_back(nf.anchor_residual(one, {1.0, 0.5, 0.25, 0.0}));
  }
  append_samples(out, "bundle map equals the tangent map", tangent, s.config.push_tol);
  append_samples(out, "fibre product membership", member, s.config.push_tol);
  append_samples(out, "bundle map round trip", round_trip, s.config.push_tol);
  append_samples(out, "anchor transport", anchor, s.config.push_tol);
}

void run_euler(const Scenario& s, const std::vector<VectorXd>& pts, ScenarioResult& out) {
  const TubularEmbedding emb = linearize(s.field->as_map(), s.transversal(), s.config.lin);
  const SmoothMap psi = emb.psi();
  const SmoothMap inv = emb.psi_inverse();
  std::vector<double> push, dil, agree;
  for (const auto& v : pts) {
    const std::vector<VectorXd> one{v};
    push.push_back(emb.pushforward_residual(one));
    dil.push_back(emb.intertwine_residual(one, {0.25, 0.5, 0.75}));
    const VectorXd q = psi.value(v);
    agree.push_back(linf(inv.value(q) - emb.psi_inverse_via_dilation(q)));
  }
  append_samples(out, "euler pushforward", push, s.config.push_tol);
  append_samples(out, "dilation intertwining", dil, s.config.family_tol);
  append_samples(out, "inverse agreement", agree, 1e-4);
}

}  // namespace

ScenarioResult run_scenario(const Scenario& s) {
  ScenarioResult r;
  r.scenario = s.name;
  r.seed = s.sampling.seed;
  const auto pts = sample_points(s);
  switch (s.kind) {
    case ScenarioKind::kPoisson:
      if (!s.bivector) throw SchemaError("poisson scenario without bivector data", "/bivector");
      run_poisson(s, pts, r);
      break;
    case ScenarioKind::kDirac:
      if (!s.two_form) throw SchemaError("dirac scenario without two-form data", "/two_form");
      run_dirac(s, pts, r);
      break;
    case ScenarioKind::kGcs:
      if (!s.gcs) throw SchemaError("gcs scenario without endomorphism data", "/j_matrix");
      run_gcs(s, pts, r);
      break;
    case ScenarioKind::kAlgebroid:
      if (!s.field) throw SchemaError("algebroid scenario without section data", "/section");
      run_algebroid(s, pts, r);
      break;
    case ScenarioKind::kEuler:
      if (!s.field) throw SchemaError("euler scenario without field data", "/field");
      run_euler(s, pts, r);
      break;
  }
  return r;
}

// ---------------------------------------------------------------------------
// reports

std::string report_json(const ScenarioResult& r, const std::string& generated_at) {
  ordered_json doc;
  doc["scenario"] = r.scenario;
  doc["seed"] = r.seed;
  doc["generated_at"] = generated_at;
  doc["checks"] = ordered_json::array();
  for (const auto& c : r.checks) {
    ordered_json row;
    row["name"] = c.name;
    row["paper_anchor"] = c.anchor;
    row["max_residual"] = c.max_residual;
    if (std::isfinite(c.tol))
      row["tol"] = c.tol;
    else
      row["tol"] = nullptr;
    row["pass"] = c.pass;
    row["samples"] = c.samples;
    doc["checks"].push_back(std::move(row));
  }
  doc["verdict"] = r.pass ? "pass" : "fail";
  return doc.dump(2) + "\n";
}

std::string report_csv(const ScenarioResult& r) {
  std::string out = "scenario,check,sample,residual\n";
  char buf[64];
  const auto emit = [&](const std::string& check, const std::string& idx, double value) {
    std::snprintf(buf, sizeof buf, "%.17g", value);
    out += r.scenario;
    out += ',';
    out += check;
    out += ',';
    out += idx;
    out += ',';
    out += buf;
    out += '\n';
  };
  for (const auto& c : r.checks) {
    if (c.samples.empty()) {
      emit(c.name, "", c.max_residual);
      continue;
    }
    for (std::size_t i = 0; i < c.samples.size(); ++i)
      emit(c.name, std::to_string(i), c.samples[i]);
  }
  return out;
}

std::string iso_timestamp() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace splitform
