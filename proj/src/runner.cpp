#include "masslab/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <set>
#include <sstream>

#include <boost/uuid/detail/sha1.hpp>
#include <toml.hpp>

#include "masslab/bubbles.hpp"
#include "masslab/constants.hpp"
#include "masslab/error.hpp"
#include "masslab/explorer.hpp"
#include "masslab/families.hpp"
#include "masslab/fem3d.hpp"
#include "masslab/mass.hpp"
#include "masslab/profile_io.hpp"
#include "masslab/svg.hpp"
#include "masslab/yamabe.hpp"

namespace masslab {

namespace {

[[noreturn]] void config_error(const std::string& field, const std::string& what) {
  fail(ErrorKind::Config, "field '" + field + "': " + what);
}

double as_double(const toml::node& v, const std::string& path) {
  if (const auto* i = v.as_integer()) return static_cast<double>(i->get());
  if (const auto* f = v.as_floating_point()) return f->get();
  config_error(path, "expected a number");
}

std::int64_t as_int(const toml::node& v, const std::string& path) {
  if (const auto* i = v.as_integer()) return i->get();
  config_error(path, "expected an integer");
}

std::string as_string(const toml::node& v, const std::string& path) {
  if (const auto* s = v.as_string()) return s->get();
  config_error(path, "expected a string");
}

std::vector<double> as_doubles(const toml::node& v, const std::string& path) {
  const auto* arr = v.as_array();
  if (!arr) config_error(path, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < arr->size(); ++i) out.push_back(as_double(*arr->get(i), path + "[" + std::to_string(i) + "]"));
  return out;
}

std::size_t as_count(const toml::node& v, const std::string& path) {
  const auto x = as_int(v, path);
  if (x < 0) config_error(path, "must be non-negative");
  return static_cast<std::size_t>(x);
}

void read_tolerances(const toml::table& t, Tolerances& tol) {
  for (auto&& [key, v] : t) {
    const std::string k(key.str());
    const std::string path = "tolerances." + k;
    if (k == "dual_gap") tol.dual_gap = as_double(v, path);
    else if (k == "drift") tol.drift = as_double(v, path);
    else if (k == "margin") tol.margin = as_double(v, path);
    else if (k == "jgeq_trials") tol.jgeq_trials = as_count(v, path);
    else if (k == "bubble_slack") tol.bubble_slack = as_double(v, path);
    else if (k == "blowup_lambda") tol.blowup_lambda = as_double(v, path);
    else if (k == "fem_relative") tol.fem_relative = as_double(v, path);
    else if (k == "fem_zero_mass") tol.fem_zero_mass = as_double(v, path);
    else if (k == "blend_noise") tol.blend_noise = as_double(v, path);
    else if (k == "blend_rate") tol.blend_rate = as_double(v, path);
    else config_error(path, "unknown key");
  }
}

ExperimentConfig from_table(const toml::table& t) {
  ExperimentConfig c;
  for (auto&& [key, v] : t) {
    const std::string k(key.str());
    if (k == "command") c.command = as_string(v, k);
    else if (k == "n") c.n = static_cast<int>(as_int(v, k));
    else if (k == "a") c.a = as_double(v, k);
    else if (k == "a_grid") c.a_grid = as_doubles(v, k);
    else if (k == "resolution") c.resolution = as_count(v, k);
    else if (k == "family") c.family = as_string(v, k);
    else if (k == "theta") c.theta = as_doubles(v, k);
    else if (k == "theta_neg") c.theta_neg = as_doubles(v, k);
    else if (k == "seed") c.seed = static_cast<std::uint64_t>(as_int(v, k));
    else if (k == "output") c.output = as_string(v, k);
    else if (k == "budget") c.budget = as_count(v, k);
    else if (k == "level") c.level = static_cast<int>(as_int(v, k));
    else if (k == "blend") c.blend = as_string(v, k);
    else if (k == "epsilons") c.epsilons = as_doubles(v, k);
    else if (k == "offsets") c.offsets = as_doubles(v, k);
    else if (k == "eta_smoothness") c.eta_smoothness = static_cast<int>(as_int(v, k));
    else if (k == "tolerances") {
      const auto* tt = v.as_table();
      if (!tt) config_error(k, "expected a table");
      read_tolerances(*tt, c.tol);
    } else {
      config_error(k, "unknown key");
    }
  }
  return c;
}

std::string num_str(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv(const std::vector<std::vector<std::string>>& rows) {
  std::string out;
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (i) out += ',';
      const bool quote = r[i].find_first_of(",\"\n") != std::string::npos;
      if (quote) {
        out += '"';
        for (char ch : r[i]) out += ch == '"' ? std::string("\"\"") : std::string(1, ch);
        out += '"';
      } else {
        out += r[i];
      }
    }
    out += '\n';
  }
  return out;
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

nlohmann::json jnum(double x) {
  if (!std::isfinite(x)) return nullptr;
  return x;
}

struct Outcome {
  nlohmann::json payload;
  std::vector<AuditCount> audits;
  std::vector<std::pair<std::string, std::string>> files;

  void audit(const std::string& name, bool ok, std::size_t count = 1) {
    for (auto& a : audits)
      if (a.name == name) {
        (ok ? a.passed : a.failed) += count;
        return;
      }
    audits.push_back({name, ok ? count : 0, ok ? 0 : count});
  }
};

GridOptions grid(std::size_t resolution) {
  GridOptions g;
  g.resolution = resolution;
  return g;
}

MetricFamily family_of(const ExperimentConfig& c) { return make_family(c.family, c.n); }

WarpedProfile member_of(const ExperimentConfig& c) { return family_of(c)(c.theta).primary; }

Outcome run_constants(const ExperimentConfig& c) {
  Outcome o;
  const double a = *c.a;
  const DimensionalConstants k = compute_chain(c.n, a, c.eta_smoothness);
  o.payload["constants"] = to_json(k);
  nlohmann::json checks = nlohmann::json::array();
  for (const auto& ch : verify_chain(k)) {
    checks.push_back({{"name", ch.name}, {"lhs", jnum(ch.lhs)}, {"rhs", jnum(ch.rhs)}, {"holds", ch.holds()}});
    o.audit("constant chain", ch.holds());
  }
  o.payload["chain_checks"] = checks;
  const double fq = F_n_quadrature(c.n);
  const double fc = F_n_closed_form(c.n);
  o.payload["F_n"] = {{"quadrature", fq}, {"closed_form", fc}, {"difference", std::abs(fq - fc)}};
  o.payload["sigma"] = {{"bubble_identity", sigma_sphere(c.n)}, {"closed_form", sigma_sphere_closed_form(c.n)}};
  const MassUpperBounds ub = mass_upper_bounds(c.n, a);
  o.payload["mass_upper_bounds"] = {{"simple", ub.simple}, {"refined", ub.refined}};
  o.audit("C_n >= 0", k.C_n >= 0.0);
  std::vector<std::vector<std::string>> rows{{"quantity", "value"}};
  for (const auto& [name, v] : {std::pair<std::string, double>{"C_n", k.C_n}, {"D_n", k.D_n}, {"B_n", k.B_n},
                                {"zeta", k.zeta}, {"alpha0", k.alpha0}, {"delta", k.delta}, {"F_n", k.F_n},
                                {"G_n", k.G_n}, {"d_n", k.d_n}, {"sigma", k.sigma}})
    rows.push_back({name, num_str(v)});
  o.files.push_back({"constants.csv", csv(rows)});
  return o;
}

Outcome run_mass(const ExperimentConfig& c) {
  Outcome o;
  const WarpedProfile p = member_of(c);
  const CutoffEta eta{c.n, c.eta_smoothness};
  const DiscreteOperator op(p, grid(c.resolution));
  const MassResult r = solve_mass(op, eta);
  o.payload["family"] = c.family;
  o.payload["theta"] = c.theta;
  o.payload["mass"] = to_json(r);
  o.audit("dual mass extraction", r.extraction_gap() <= c.tol.dual_gap);
  const double lower = test_function_lower_bound(eta);
  o.payload["lower_bound"] = lower;
  o.audit("mass >= test-function lower bound", r.m >= lower);
  // default spectral grid, then fixed quadratic elements, whose algebraic order stays visible
  // where the spectral values have reached rounding level
  std::vector<std::vector<std::string>> rows{{"grid", "resolution", "nodes", "mass", "gap"}};
  for (const bool quadratic : {false, true}) {
    nlohmann::json series = nlohmann::json::array();
    std::vector<double> ms;
    for (std::size_t res : {c.resolution / 4, c.resolution / 2, c.resolution}) {
      GridOptions g = grid(std::max<std::size_t>(res, 64));
      if (quadratic) g.min_degree = g.max_degree = 2;
      const MassResult rk = solve_mass(DiscreteOperator(p, g), eta);
      ms.push_back(rk.m);
      series.push_back({{"resolution", g.resolution}, {"nodes", rk.nodes}, {"mass", rk.m}});
      rows.push_back({quadratic ? "quadratic" : "spectral", std::to_string(g.resolution), std::to_string(rk.nodes),
                      num_str(rk.m), num_str(rk.extraction_gap())});
    }
    const double d1 = std::abs(ms[0] - ms[1]);
    const double d2 = std::abs(ms[1] - ms[2]);
    const auto order = d1 > 1e-12 && d2 > 1e-12 ? jnum(std::log2(d1 / d2)) : nlohmann::json(nullptr);
    o.payload[quadratic ? "convergence_quadratic" : "convergence"] = {{"series", series}, {"observed_order", order}};
  }
  if (c.a) {
    const JgeqReport j = quadratic_lower_bound_audit(op, eta, *c.a, c.tol.jgeq_trials, c.seed);
    o.payload["jgeq"] = {{"a", *c.a}, {"trials", j.trials}, {"violations", j.violations}, {"min_slack", j.min_slack}};
    o.audit("J(u) >= C - C' X + a X^2", j.violations == 0, std::max<std::size_t>(j.trials, 1));
  }
  o.files.push_back({"mass_convergence.csv", csv(rows)});
  return o;
}

Outcome run_yamabe(const ExperimentConfig& c) {
  Outcome o;
  const WarpedProfile p = member_of(c);
  const DiscreteOperator op(p, grid(c.resolution));
  const YamabeResult y = minimize_yamabe(op);
  o.payload["family"] = c.family;
  o.payload["theta"] = c.theta;
  o.payload["Y_upper"] = y.Y_estimate;
  o.payload["lambda1"] = y.lambda1;
  o.payload["iterations"] = y.iterations;
  o.payload["converged"] = y.converged;
  o.payload["sigma_sphere"] = sigma_sphere(c.n);
  const bool sign_ok = (y.Y_estimate > 0) == (y.lambda1 > 0) && (y.Y_estimate < 0) == (y.lambda1 < 0);
  o.audit("sign(Y) = sign(lambda_1)", sign_ok);
  o.audit("Y <= sigma(S^n)", y.Y_estimate <= sigma_sphere(c.n) * (1.0 + 1e-9));
  std::vector<std::vector<std::string>> rows{{"iteration", "Q"}};
  for (std::size_t i = 0; i < y.history.size(); ++i) rows.push_back({std::to_string(i), num_str(y.history[i])});
  o.files.push_back({"yamabe_history.csv", csv(rows)});
  return o;
}

Outcome run_bubble(const ExperimentConfig& c) {
  Outcome o;
  const WarpedProfile p = member_of(c);
  const CutoffEta eta{c.n, c.eta_smoothness};
  auto op = std::make_shared<const DiscreteOperator>(p, grid(c.resolution));
  const MassResult mr = solve_mass(*op, eta);
  const DimensionalConstants k = compute_chain(c.n, *c.a, c.eta_smoothness);
  const BubbleAssembly as = build_assembly(op, mr, k);
  const QuotientAudit q = quotient_bound_audit(as, c.tol.bubble_slack, false, c.resolution);
  o.payload["family"] = c.family;
  o.payload["theta"] = c.theta;
  o.payload["mass"] = mr.m;
  o.payload["assembly"] = to_json(as);
  o.payload["audit"] = to_json(q);
  std::vector<std::vector<std::string>> rows{{"check", "lhs", "rhs", "tol", "holds"}};
  for (const auto& p2 : as.predicates()) {
    o.audit("smallness predicates", p2.ok());
    rows.push_back({p2.name, "", num_str(p2.margin), "", p2.ok() ? "true" : "false"});
  }
  for (const auto& ch : q.checks) {
    const bool quotient = ch.name.rfind("Q(psi)", 0) == 0;
    const bool step1 = ch.name.rfind("step 1 cap", 0) == 0;
    o.audit(quotient ? "quotient bound" : step1 ? "step 1 cap" : "bubble displays", ch.holds());
    rows.push_back({ch.name, num_str(ch.lhs), num_str(ch.rhs), num_str(ch.tol), ch.holds() ? "true" : "false"});
  }
  o.files.push_back({"bubble_audit.csv", csv(rows)});
  return o;
}

Outcome run_explore(const ExperimentConfig& c) {
  Outcome o;
  const MetricFamily fam = family_of(c);
  SearchOptions so;
  so.budget = c.budget;
  so.seed = c.seed;
  so.margin = c.tol.margin;
  so.eval.resolution = c.resolution;
  so.eval.eta_smoothness = c.eta_smoothness;
  so.eval.jgeq_trials = c.tol.jgeq_trials;
  so.eval.jgeq_seed = c.seed;
  const MassFunctionEstimate est = explore(fam, c.a_grid, so);
  const BoundAuditReport rep = bound_audit_all(est, false);
  o.payload["estimate"] = to_json(est);
  o.payload["bound_audit"] = to_json(rep);
  for (const auto& t : rep.tallies) {
    if (t.checked == 0) continue;
    o.audit(t.name, true, t.checked - t.violated);
    if (t.violated) o.audit(t.name, false, t.violated);
  }
  std::size_t feasible_count = 0;
  std::size_t drift_bad = 0;
  std::string jsonl;
  for (const auto& s : est.samples) {
    auto j = to_json(s.point);
    j["level"] = s.a;
    j["direction"] = to_string(s.direction);
    j["feasible"] = feasible(s.point, s.a, est.margin);
    jsonl += j.dump() + "\n";
    if (!s.point.mass_defined) continue;
    if (feasible(s.point, s.a, est.margin)) ++feasible_count;
    if (std::isfinite(s.point.drift)) {
      const bool ok = s.point.drift <= c.tol.drift;
      drift_bad += ok ? 0 : 1;
      o.audit("mass drift at double resolution", ok);
    }
  }
  o.payload["evaluations"] = est.samples.size();
  o.payload["feasible_evaluations"] = feasible_count;
  o.audit("audit completeness", rep.entries.size() == feasible_count);
  bool monotone = true;
  for (std::size_t i = 1; i < est.a_grid.size(); ++i) {
    const auto &s0 = est.sup_env[i - 1], &s1 = est.sup_env[i];
    const auto &i0 = est.inf_env[i - 1], &i1 = est.inf_env[i];
    if (est.a_grid[i] > est.a_grid[i - 1]) {
      if (s0.defined && s1.defined && s1.value > s0.value) monotone = false;
      if (i0.defined && i1.defined && i1.value < i0.value) monotone = false;
    }
  }
  o.audit("envelope monotonicity", monotone);
  bool ordered = true;
  for (std::size_t i = 0; i < est.a_grid.size(); ++i)
    if (est.sup_env[i].defined && est.inf_env[i].value > est.sup_env[i].value) ordered = false;
  o.audit("inf_env <= sup_env", ordered);
  o.files.push_back({"explore_samples.jsonl", jsonl});

  std::vector<std::vector<std::string>> rows{{"a", "sup_env", "inf_env", "simple_bound", "refined_bound"}};
  PlotSeries sup{"sup_env", {}, {}, "#1f77b4"}, inf{"inf_env", {}, {}, "#2ca02c"};
  PlotSeries simple{"D_n^2/(4a)", {}, {}, "#d62728", false, true}, refined{"d_n bound", {}, {}, "#ff7f0e", false, true};
  for (std::size_t i = 0; i < est.a_grid.size(); ++i) {
    const double a = est.a_grid[i];
    const MassUpperBounds ub = mass_upper_bounds(c.n, a);
    const double sv = est.sup_env[i].defined ? est.sup_env[i].value : std::nan("");
    const double iv = est.inf_env[i].defined ? est.inf_env[i].value : std::nan("");
    rows.push_back({num_str(a), num_str(sv), num_str(iv), num_str(ub.simple), num_str(ub.refined)});
    for (auto* s : {&sup, &inf, &simple, &refined}) s->x.push_back(a);
    sup.y.push_back(sv);
    inf.y.push_back(iv);
    simple.y.push_back(ub.simple);
    refined.y.push_back(ub.refined);
  }
  o.files.push_back({"explore_envelopes.csv", csv(rows)});
  PlotSpec spec{"mass envelopes: " + c.family, "a", "mass", false, true};
  o.files.push_back({"explore_envelopes.svg", line_plot(spec, {sup, inf, simple, refined})});
  return o;
}

Outcome run_fem(const ExperimentConfig& c) {
  Outcome o;
  const CutoffEta eta{3, c.eta_smoothness};
  std::vector<std::vector<std::string>> rows{{"metric", "quantity", "radial", "fem", "rel_diff", "level"}};
  nlohmann::json metrics = nlohmann::json::array();
  for (const auto& id : fem_reference_ids()) {
    const WarpedProfile p = fem_reference_profile(id);
    const DiscreteOperator op(p, grid(c.resolution));
    const double m_rad = solve_mass(op, eta).m;
    const double l_rad = op.smallest_eigenvalues(1)[0];
    const FemMetric metric = warped_fem_metric(p);
    const bool zero_mass = std::abs(m_rad) < 1e-8;
    // levels below the chart-size gate are reported without it
    nlohmann::json levels = nlohmann::json::array();
    std::vector<double> mass_err, lambda_err;
    for (int level : {c.level - 1, c.level}) {
      if (level < 1) continue;
      const SimplicialManifold mfd = attach_metric(build_sphere_mesh(level), metric);
      const double l_fem = fem_lambda1(fem_operator(mfd));
      const std::size_t chart = chart_vertex_count(mfd);
      const bool gated = level == c.level;
      const double m_fem = fem_mass_value(mfd, eta, gated ? 200 : 0);
      const double dm = zero_mass ? std::abs(m_fem - m_rad) : std::abs(m_fem - m_rad) / std::abs(m_rad);
      const double dl = std::abs(l_fem - l_rad) / std::abs(l_rad);
      mass_err.push_back(dm);
      lambda_err.push_back(dl);
      rows.push_back({id, zero_mass ? "mass (absolute diff)" : "mass", num_str(m_rad), num_str(m_fem), num_str(dm),
                      std::to_string(level)});
      rows.push_back({id, "lambda1", num_str(l_rad), num_str(l_fem), num_str(dl), std::to_string(level)});
      levels.push_back({{"level", level}, {"mass", m_fem}, {"lambda1", l_fem}, {"chart_vertices", chart},
                        {"vertices", mfd.mesh.vertices.size()}});
    }
    metrics.push_back({{"id", id}, {"radial_mass", m_rad}, {"radial_lambda1", l_rad}, {"levels", levels}});
    const double mass_tol = zero_mass ? c.tol.fem_zero_mass : c.tol.fem_relative;
    o.audit("fem mass agreement", mass_err.back() <= mass_tol);
    o.audit("fem lambda1 agreement", lambda_err.back() <= c.tol.fem_relative);
    if (mass_err.size() == 2) {
      o.audit("fem refinement reduces mass discrepancy", mass_err[1] < mass_err[0]);
      o.audit("fem refinement reduces lambda1 discrepancy", lambda_err[1] < lambda_err[0]);
    }
  }
  o.payload["level"] = c.level;
  o.payload["metrics"] = metrics;
  o.files.push_back({"fem_check.csv", csv(rows)});
  return o;
}

Outcome run_blend(const ExperimentConfig& c) {
  Outcome o;
  const BlendPair pair = blend_pair(c.blend);
  const BlendTable t = blend_convergence_experiment(pair.g, pair.h, c.epsilons, grid(c.resolution));
  o.payload["blend"] = c.blend;
  o.payload["Y_reference"] = t.Y_reference;
  o.payload["fitted_rate"] = jnum(t.fitted_rate);
  o.payload["tail_decreasing"] = t.tail_decreasing;
  o.payload["max_deviation"] = t.max_deviation;
  o.payload["conformally_trivial"] = pair.conformally_trivial;
  nlohmann::json rows_j = nlohmann::json::array();
  std::vector<std::vector<std::string>> rows{{"epsilon", "Y", "deviation"}};
  PlotSeries dev{"|Y(g_eps) - Y(g)|", {}, {}};
  for (const auto& r : t.rows) {
    rows_j.push_back({{"epsilon", r.epsilon}, {"Y", r.Y}, {"deviation", r.deviation}});
    rows.push_back({num_str(r.epsilon), num_str(r.Y), num_str(r.deviation)});
    dev.x.push_back(r.epsilon);
    dev.y.push_back(r.deviation);
  }
  o.payload["rows"] = rows_j;
  if (pair.conformally_trivial) {
    o.audit("blend deviation at noise level", t.max_deviation <= c.tol.blend_noise);
  } else {
    o.audit("blend deviations strictly decrease", t.tail_decreasing);
    o.audit("blend fitted rate", std::isfinite(t.fitted_rate) && t.fitted_rate >= c.tol.blend_rate);
  }
  o.files.push_back({"blend_convergence.csv", csv(rows)});
  PlotSpec spec{"blend convergence: " + c.blend, "epsilon", "deviation", true, true};
  o.files.push_back({"blend_convergence.svg", line_plot(spec, {dev})});
  return o;
}

Outcome run_blowup(const ExperimentConfig& c) {
  Outcome o;
  const MetricFamily fam = family_of(c);
  const WarpedProfile g = fam(c.theta).primary;
  const WarpedProfile h = fam(c.theta_neg).primary;
  BlowupOptions bo;
  bo.resolution = c.resolution;
  bo.tolerance = c.tol.blowup_lambda;
  bo.offsets = c.offsets;
  bo.eta_smoothness = c.eta_smoothness;
  const BlowupTable t = mass_blowup_experiment(g, h, bo);
  o.payload["family"] = c.family;
  o.payload["theta_plus"] = c.theta;
  o.payload["theta_neg"] = c.theta_neg;
  o.payload["table"] = to_json(t);
  o.audit("|lambda_1(g_t_inf)| <= tolerance", std::abs(t.lambda1_at_t_inf) <= c.tol.blowup_lambda);
  o.audit("masses increase towards t_inf", t.increasing);
  std::vector<std::vector<std::string>> rows{{"t", "t_minus_t_inf", "lambda1", "Y_upper", "mass"}};
  PlotSeries ms{"mass", {}, {}};
  for (const auto& r : t.rows) {
    rows.push_back({num_str(r.t), num_str(r.t - t.t_inf), num_str(r.lambda1), num_str(r.Y_upper), num_str(r.mass)});
    ms.x.push_back(r.t - t.t_inf);
    ms.y.push_back(r.mass);
  }
  o.files.push_back({"blowup.csv", csv(rows)});
  PlotSpec spec{"mass along g_t", "t - t_inf", "mass", true, true};
  o.files.push_back({"blowup.svg", line_plot(spec, {ms})});
  return o;
}

}  // namespace

std::vector<std::string> command_names() {
  return {"constants", "mass", "yamabe", "bubble-audit", "explore", "fem-check", "blend-convergence", "blowup"};
}

ExperimentConfig config_from_toml_string(const std::string& text) {
  try {
    return from_table(toml::parse(text));
  } catch (const toml::parse_error& e) {
    std::ostringstream os;
    os << "TOML syntax error: " << e.description() << " at line " << e.source().begin.line;
    fail(ErrorKind::Config, os.str());
  }
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Config, "cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_toml_string(ss.str());
}

ExperimentConfig validate_config(ExperimentConfig c) {
  const auto cmds = command_names();
  if (std::find(cmds.begin(), cmds.end(), c.command) == cmds.end())
    config_error("command", "unknown command '" + c.command + "'");
  if (c.n < 3 || c.n > 8) config_error("n", "must lie in [3, 8]");
  if (c.resolution < 64 || c.resolution > 8192) config_error("resolution", "must lie in [64, 8192]");
  if (c.eta_smoothness != 5 && c.eta_smoothness != 7) config_error("eta_smoothness", "must be 5 or 7");
  if (c.budget < 1 || c.budget > 100000) config_error("budget", "must lie in [1, 100000]");
  const double sigma = sigma_sphere(c.n);
  const auto check_level = [&](double a, const std::string& field) {
    if (!(a > 0.0 && a < sigma)) config_error(field, "level must lie in (0, sigma(S^n)) = (0, " + num_str(sigma) + ")");
  };
  const auto tol_positive = [](double v, const std::string& f) {
    if (!(v > 0.0)) config_error("tolerances." + f, "must be positive");
  };
  tol_positive(c.tol.dual_gap, "dual_gap");
  tol_positive(c.tol.drift, "drift");
  tol_positive(c.tol.margin, "margin");
  tol_positive(c.tol.bubble_slack, "bubble_slack");
  tol_positive(c.tol.blowup_lambda, "blowup_lambda");
  tol_positive(c.tol.fem_relative, "fem_relative");
  tol_positive(c.tol.fem_zero_mass, "fem_zero_mass");
  tol_positive(c.tol.blend_noise, "blend_noise");

  const auto needs_family = [&](const std::string& fallback, bool default_theta) {
    if (c.family.empty()) c.family = fallback;
    const auto ids = family_ids();
    if (std::find(ids.begin(), ids.end(), c.family) == ids.end()) config_error("family", "unknown family '" + c.family + "'");
    MetricFamily f;
    try {
      f = make_family(c.family, c.n);
    } catch (const Error& e) {
      config_error("family", e.what());
    }
    if (c.theta.empty() && default_theta) c.theta = f.reference;
    if (!c.theta.empty()) {
      if (c.theta.size() != f.dimension())
        config_error("theta", "family " + c.family + " has " + std::to_string(f.dimension()) + " parameters");
      if (!f.in_bounds(c.theta)) config_error("theta", "outside the parameter box of " + c.family);
    }
    return f;
  };

  if (c.command == "constants") {
    if (!c.a) c.a = 1.0;
    check_level(*c.a, "a");
  } else if (c.command == "mass" || c.command == "yamabe") {
    needs_family("sphere-flat", true);
    if (c.a) check_level(*c.a, "a");
  } else if (c.command == "bubble-audit") {
    needs_family("rp-bump", true);
    if (!c.a) c.a = 1.0;
    check_level(*c.a, "a");
  } else if (c.command == "explore") {
    needs_family("sphere-flat", false);
    if (!c.theta.empty()) config_error("theta", "explore searches the whole box; remove theta");
    if (c.a_grid.empty()) c.a_grid = c.a ? std::vector<double>{*c.a} : std::vector<double>{1.0, 2.0, 3.0};
    for (std::size_t i = 0; i < c.a_grid.size(); ++i) check_level(c.a_grid[i], "a_grid[" + std::to_string(i) + "]");
  } else if (c.command == "fem-check") {
    if (c.n != 3) config_error("n", "fem-check works on 3-manifolds");
    if (c.level < 1 || c.level > 4) config_error("level", "must lie in [1, 4]");
  } else if (c.command == "blend-convergence") {
    const auto ids = blend_pair_ids();
    if (std::find(ids.begin(), ids.end(), c.blend) == ids.end()) config_error("blend", "unknown blend pair '" + c.blend + "'");
    if (c.n != blend_pair(c.blend).g.dimension())
      config_error("n", "blend pair " + c.blend + " lives in dimension " + std::to_string(blend_pair(c.blend).g.dimension()));
    if (c.epsilons.size() < 2) config_error("epsilons", "need at least two values");
    for (std::size_t i = 0; i < c.epsilons.size(); ++i)
      if (!(c.epsilons[i] > 0.0 && c.epsilons[i] < 0.5)) config_error("epsilons[" + std::to_string(i) + "]", "must lie in (0, 0.5)");
  } else if (c.command == "blowup") {
    if (c.family.empty()) c.family = "sphere-squash";
    if (c.family == "sphere-squash" && c.n != 4) config_error("n", "sphere-squash lives in dimension 4");
    const MetricFamily f = needs_family("sphere-squash", true);
    if (c.theta_neg.empty()) {
      if (c.family != "sphere-squash") config_error("theta_neg", "required for family " + c.family);
      c.theta_neg = {f.reference[0], 1.5};
    }
    if (c.theta_neg.size() != f.dimension() || !f.in_bounds(c.theta_neg))
      config_error("theta_neg", "must be a point of the parameter box of " + c.family);
    if (c.offsets.empty()) config_error("offsets", "need at least one offset");
    for (std::size_t i = 0; i < c.offsets.size(); ++i)
      if (!(c.offsets[i] > 0.0 && c.offsets[i] < 1.0)) config_error("offsets[" + std::to_string(i) + "]", "must lie in (0, 1)");
  }
  return c;
}

nlohmann::json to_json(const Tolerances& t) {
  return {{"dual_gap", t.dual_gap},         {"drift", t.drift},
          {"margin", t.margin},             {"jgeq_trials", t.jgeq_trials},
          {"bubble_slack", t.bubble_slack}, {"blowup_lambda", t.blowup_lambda},
          {"fem_relative", t.fem_relative}, {"fem_zero_mass", t.fem_zero_mass},
          {"blend_noise", t.blend_noise},   {"blend_rate", t.blend_rate}};
}

nlohmann::json config_to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["command"] = c.command;
  j["n"] = c.n;
  j["a"] = c.a ? nlohmann::json(*c.a) : nlohmann::json(nullptr);
  j["a_grid"] = c.a_grid;
  j["resolution"] = c.resolution;
  j["family"] = c.family;
  j["theta"] = c.theta;
  j["theta_neg"] = c.theta_neg;
  j["seed"] = c.seed;
  j["budget"] = c.budget;
  j["level"] = c.level;
  j["blend"] = c.blend;
  j["epsilons"] = c.epsilons;
  j["offsets"] = c.offsets;
  j["eta_smoothness"] = c.eta_smoothness;
  j["tolerances"] = to_json(c.tol);
  return j;
}

std::string content_hash(const std::string& text) {
  boost::uuids::detail::sha1 h;
  const std::string header = "blob " + std::to_string(text.size()) + std::string(1, '\0');
  h.process_bytes(header.data(), header.size());
  h.process_bytes(text.data(), text.size());
  boost::uuids::detail::sha1::digest_type d;
  h.get_digest(d);
  std::ostringstream os;
  os << std::hex << std::setfill('0');
  // the digest type is five 32-bit words in older Boost and twenty bytes in newer ones
  constexpr std::size_t parts = sizeof(d) / sizeof(d[0]);
  constexpr int width = static_cast<int>(2 * (20 / parts));
  for (std::size_t i = 0; i < parts; ++i) os << std::setw(width) << static_cast<std::uint64_t>(d[i]);
  return os.str();
}

RunOutput run(const ExperimentConfig& cfg) {
  RunOutput out;
  RunRecord& r = out.record;
  r.command = cfg.command;
  r.config = config_to_json(cfg);
  r.config_hash = content_hash(r.config.dump());
  r.tolerances = to_json(cfg.tol);
  r.started = utc_now();
  try {
    Outcome o;
    if (cfg.command == "constants") o = run_constants(cfg);
    else if (cfg.command == "mass") o = run_mass(cfg);
    else if (cfg.command == "yamabe") o = run_yamabe(cfg);
    else if (cfg.command == "bubble-audit") o = run_bubble(cfg);
    else if (cfg.command == "explore") o = run_explore(cfg);
    else if (cfg.command == "fem-check") o = run_fem(cfg);
    else if (cfg.command == "blend-convergence") o = run_blend(cfg);
    else if (cfg.command == "blowup") o = run_blowup(cfg);
    else fail(ErrorKind::Config, "unknown command '" + cfg.command + "'");
    nlohmann::json audits = nlohmann::json::array();
    bool failed = false;
    for (const auto& a : o.audits) {
      audits.push_back({{"check", a.name}, {"passed", a.passed}, {"failed", a.failed}});
      failed = failed || a.failed > 0;
    }
    o.payload["audits"] = audits;
    r.payload = std::move(o.payload);
    r.status = failed ? "violation" : "ok";
    out.files = std::move(o.files);
  } catch (const Error& e) {
    r.status = "error";
    r.error = e.what();
    r.payload = {{"error_kind", std::string(to_string(e.kind()))}, {"message", e.what()}, {"audits", nlohmann::json::array()}};
  } catch (const std::exception& e) {
    r.status = "error";
    r.error = e.what();
    r.payload = {{"error_kind", "Internal"}, {"message", e.what()}, {"audits", nlohmann::json::array()}};
  }
  r.version = content_hash(r.payload.dump());
  r.finished = utc_now();
  return out;
}

nlohmann::json to_json(const RunRecord& r) {
  nlohmann::json j;
  j["command"] = r.command;
  j["config_hash"] = r.config_hash;
  j["version"] = r.version;
  j["started"] = r.started;
  j["finished"] = r.finished;
  j["status"] = r.status;
  if (!r.error.empty()) j["error"] = r.error;
  j["config"] = r.config;
  j["tolerances"] = r.tolerances;
  j["payload"] = r.payload;
  return j;
}

RunRecord record_from_json(const nlohmann::json& j) {
  RunRecord r;
  try {
    r.command = j.at("command").get<std::string>();
    r.config_hash = j.at("config_hash").get<std::string>();
    r.version = j.at("version").get<std::string>();
    r.status = j.at("status").get<std::string>();
    r.started = j.value("started", "");
    r.finished = j.value("finished", "");
    r.error = j.value("error", "");
    r.config = j.at("config");
    r.tolerances = j.value("tolerances", nlohmann::json::object());
    r.payload = j.at("payload");
    if (!r.payload.contains("audits") || !r.payload["audits"].is_array())
      fail(ErrorKind::InvalidArgument, "record has no audit list");
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::InvalidArgument, std::string("not a run record: ") + e.what());
  }
  return r;
}

void write_atomic(const std::filesystem::path& path, const std::string& content) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::InvalidArgument, "cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) fail(ErrorKind::InvalidArgument, "write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void write_run(const RunOutput& out, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& [name, content] : out.files) write_atomic(dir / name, content);
  write_atomic(dir / (out.record.command + ".json"), to_json(out.record).dump(2) + "\n");
}

std::string Report::table() const {
  std::ostringstream os;
  std::size_t w = 5;
  for (const auto& r : rows) w = std::max(w, r.check.size());
  os << std::left << std::setw(static_cast<int>(w)) << "check" << "  " << std::right << std::setw(8) << "passed"
     << std::setw(8) << "failed" << "\n";
  os << std::string(w + 18, '-') << "\n";
  for (const auto& r : rows)
    os << std::left << std::setw(static_cast<int>(w)) << r.check << "  " << std::right << std::setw(8) << r.passed
       << std::setw(8) << r.failed << "\n";
  os << "records: " << records << " (ok " << ok << ", violation " << violations << ", error " << errors << ")\n";
  return os.str();
}

int Report::exit_code() const {
  if (records == 0) return 2;
  bool failed = violations > 0 || errors > 0;
  for (const auto& r : rows) failed = failed || r.failed > 0;
  return failed ? 1 : 0;
}

Report report(const std::filesystem::path& dir) {
  require(std::filesystem::is_directory(dir), ErrorKind::InvalidArgument, "not a directory: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  Report rep;
  std::map<std::string, ReportRow> rows;
  for (const auto& f : files) {
    RunRecord r;
    try {
      std::ifstream in(f);
      r = record_from_json(nlohmann::json::parse(in));
    } catch (const std::exception& e) {
      rep.skipped.push_back(f.filename().string() + ": " + e.what());
      continue;
    }
    ++rep.records;
    if (r.status == "ok") ++rep.ok;
    else if (r.status == "violation") ++rep.violations;
    else ++rep.errors;
    for (const auto& a : r.payload["audits"]) {
      auto& row = rows[a.value("check", "?")];
      row.check = a.value("check", "?");
      row.passed += a.value("passed", std::size_t{0});
      row.failed += a.value("failed", std::size_t{0});
    }
  }
  require(rep.records > 0, ErrorKind::InvalidArgument, "no run records in " + dir.string());
  for (auto& [name, row] : rows) rep.rows.push_back(row);
  return rep;
}

}  // namespace masslab
