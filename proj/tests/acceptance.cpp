// Runs the quantitative acceptance checks at their stated tolerances, one line per check.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <memory>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "masslab/bubbles.hpp"
#include "masslab/constants.hpp"
#include "masslab/error.hpp"
#include "masslab/explorer.hpp"
#include "masslab/families.hpp"
#include "masslab/fem3d.hpp"
#include "masslab/mass.hpp"
#include "masslab/runner.hpp"
#include "masslab/yamabe.hpp"

using namespace masslab;
using std::numbers::pi;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

GridOptions grid(std::size_t m, std::size_t degree = 0) {
  GridOptions g;
  g.resolution = m;
  if (degree) g.min_degree = g.max_degree = degree;
  return g;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

Outcome sphere_mass_zero() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto fam = make_family("sphere-flat", 3);
  const WarpedProfile p = fam(fam.reference).primary;
  const CutoffEta eta{3, 5};
  std::vector<double> spectral, quadratic;
  for (std::size_t m : {128, 256, 512}) {
    spectral.push_back(solve_mass(DiscreteOperator(p, grid(m)), eta).m);
    quadratic.push_back(solve_mass(DiscreteOperator(p, grid(m, 2)), eta).m);
  }
  const double time = seconds_since(t0);
  // exact mass is 0, so |m| is the error
  const double q1 = std::log2(std::abs(quadratic[0]) / std::abs(quadratic[1]));
  const double q2 = std::log2(std::abs(quadratic[1]) / std::abs(quadratic[2]));
  const bool floor = std::abs(spectral[0]) <= 1e-8 && std::abs(spectral[1]) <= 1e-8;
  std::ostringstream os;
  os << "|m(512)| = " << fmt("%.1e", std::abs(spectral[2])) << " (spectral; 128/256 already at "
     << fmt("%.0e", std::max(std::abs(spectral[0]), std::abs(spectral[1]))) << ", order not resolvable above rounding); "
     << "quadratic elements |m| = " << fmt("%.2e", std::abs(quadratic[0])) << ", " << fmt("%.2e", std::abs(quadratic[1]))
     << ", " << fmt("%.2e", std::abs(quadratic[2])) << " -> orders " << fmt("%.2f", q1) << ", " << fmt("%.2f", q2)
     << "; " << fmt("%.2f", time) << " s";
  const bool pass = std::abs(spectral[2]) <= 1e-3 && std::abs(quadratic[2]) <= 1e-3 && floor && q1 >= 2 && q2 >= 2 && time < 10;
  return {pass, os.str()};
}

Outcome scaling_law() {
  const WarpedProfile p = make_family("rp-bump", 3)(std::vector<double>{2.0, 0.1, -0.08}).primary;
  const CutoffEta eta{3, 5};
  const double m = solve_mass(DiscreteOperator(p, grid(512)), eta).m;
  bool pass = std::abs(m) > 1e-3;
  std::ostringstream os;
  os << "m(g) = " << fmt("%.6f", m);
  for (double b : {1.5, 4.0}) {
    const double mb = solve_mass(DiscreteOperator(rescale(p, b), grid(512)), eta).m;
    const double err = std::abs(mb - m / std::sqrt(b));
    pass = pass && err <= 1e-6 * (1 + std::abs(m));
    os << "; b = " << b << ": |m(bg) - b^-1/2 m(g)| = " << fmt("%.1e", err);
  }
  return {pass, os.str()};
}

std::vector<std::pair<std::string, WarpedProfile>> shipped_metrics() {
  std::vector<std::pair<std::string, WarpedProfile>> out;
  for (const auto& id : family_ids())
    for (int n : {3, 4}) {
      MetricFamily f;
      try {
        f = make_family(id, n);
      } catch (const Error&) {
        continue;
      }
      const auto member = f(f.reference);
      out.push_back({id + "/n" + std::to_string(n), member.primary});
    }
  for (const auto& id : fem_reference_ids()) out.push_back({id, fem_reference_profile(id)});
  out.push_back({"rp-bump/deformed", make_family("rp-bump", 3)(std::vector<double>{2.5, 0.12, -0.1}).primary});
  out.push_back({"sphere-flat/deformed", make_family("sphere-flat", 3)(std::vector<double>{1.2, 0.9, -0.4}).primary});
  out.push_back({"sphere-squash/deformed", make_family("sphere-squash", 4)(std::vector<double>{2.0, 0.8}).primary});
  return out;
}

Outcome dual_extraction() {
  double worst = 0.0;
  std::string where;
  std::size_t count = 0;
  for (const auto& [name, p] : shipped_metrics()) {
    const MassResult r = solve_mass(DiscreteOperator(p, grid(512)), CutoffEta{p.dimension(), 5});
    ++count;
    if (r.extraction_gap() >= worst) {
      worst = r.extraction_gap();
      where = name;
    }
  }
  return {worst <= 1e-8, std::to_string(count) + " metrics, max |(-J(beta)) - beta(p)| = " + fmt("%.1e", worst) + " (" + where + ")"};
}

Outcome constants_pipeline() {
  const auto t0 = std::chrono::steady_clock::now();
  const DimensionalConstants c = compute_chain(3, 1.0);
  const double fq = F_n_quadrature(3);
  const double sigma_closed = (1.0 / 8.0) * 3 * 2 * std::pow(2 * pi * pi, 2.0 / 3.0);
  const double time = seconds_since(t0);
  const bool pass = c.C_n >= 0 && std::abs(fq - pi * pi / 4) <= 1e-10 && c.zeta == std::sqrt(4 * pi) / 2 &&
                    std::abs(sigma_sphere(3) - sigma_closed) <= 1e-6 && time < 1.0;
  std::ostringstream os;
  os << "C_3 = " << fmt("%.6f", c.C_n) << ", |F_3 - pi^2/4| = " << fmt("%.1e", std::abs(fq - pi * pi / 4))
     << ", zeta_3 = " << fmt("%.15f", c.zeta) << ", |sigma - closed form| = " << fmt("%.1e", std::abs(sigma_sphere(3) - sigma_closed))
     << " (sigma = " << fmt("%.6f", sigma_sphere(3)) << "); " << fmt("%.3f", time) << " s";
  return {pass, os.str()};
}

Outcome yamabe_solver() {
  const YamabeResult round = minimize_yamabe(DiscreteOperator(round_profile(3, 1.0), grid(256)));
  const double rel = std::abs(round.Y_estimate - 5.478) / 5.478;
  const auto squash = make_family("sphere-squash", 4);
  std::vector<WarpedProfile> set{round_profile(3, 1.0),
                                 make_family("sphere-flat", 3)(std::vector<double>{2.5, 0.7, 0.3}).primary,
                                 make_family("rp-bump", 3)(std::vector<double>{2.0, 0.1, -0.1}).primary};
  for (const auto& th : std::vector<std::vector<double>>{{2.0, -0.3}, {2.0, 1.0}, {1.5, 1.2}, {2.0, 1.2}, {2.0, 1.35}, {3.0, 1.2}, {3.0, 1.5}})
    set.push_back(squash(th).primary);
  std::size_t agree = 0, negative = 0;
  for (const auto& p : set) {
    const YamabeResult y = minimize_yamabe(DiscreteOperator(p, grid(256)));
    agree += (y.Y_estimate > 0) == (y.lambda1 > 0) && (y.Y_estimate < 0) == (y.lambda1 < 0) ? 1 : 0;
    negative += y.lambda1 < 0 ? 1 : 0;
  }
  std::ostringstream os;
  os << "round S^3: Y = " << fmt("%.5f", round.Y_estimate) << " (" << fmt("%.1e", rel) << " from 5.478); sign(Y) = sign(lambda_1) on "
     << agree << "/" << set.size() << " metrics (" << negative << " with lambda_1 < 0)";
  return {rel <= 0.01 && agree == set.size() && set.size() >= 10, os.str()};
}

Outcome blend_lemma() {
  const std::vector<double> eps{0.4, 0.2, 0.1, 0.05};
  const BlendPair rf = blend_pair("round-flat");
  const BlendTable trivial = blend_convergence_experiment(rf.g, rf.h, eps, grid(256));
  const BlendPair sq = blend_pair("squash");
  const BlendTable t = blend_convergence_experiment(sq.g, sq.h, eps, grid(256));
  std::ostringstream os;
  os << "round/flat blend is conformally round: max deviation " << fmt("%.1e", trivial.max_deviation)
     << "; squashed S^4 / squashed flat blend: deviations";
  for (const auto& r : t.rows) os << " " << fmt("%.2e", r.deviation);
  os << ", fitted rate " << fmt("%.2f", t.fitted_rate);
  return {trivial.max_deviation <= 1e-7 && t.tail_decreasing && t.fitted_rate >= 1.0, os.str()};
}

Outcome bound_audits() {
  std::size_t evaluations = 0, audited = 0, violations = 0, jgeq_metrics = 0, jgeq_trials = 0, jgeq_bad = 0;
  std::size_t families = 0;
  for (const auto& id : {"sphere-flat", "rp-bump", "union"}) {
    SearchOptions so;
    so.budget = 30;
    so.seed = 7;
    so.eval.jgeq_trials = 100;
    const MassFunctionEstimate est = explore(make_family(id, 3), {1.0, 2.0, 3.0}, so);
    const BoundAuditReport rep = bound_audit_all(est, false);
    evaluations += est.samples.size();
    audited += rep.entries.size();
    violations += rep.violations();
    for (const auto& s : est.samples)
      if (s.point.jgeq_trials > 0) {
        ++jgeq_metrics;
        jgeq_trials += s.point.jgeq_trials;
        jgeq_bad += s.point.jgeq_violations;
        if (s.point.jgeq_trials < 100) ++jgeq_bad;
      }
    ++families;
  }
  std::ostringstream os;
  os << evaluations << " evaluations over " << families << " families, " << audited << " audited against both bounds: "
     << violations << " violations; J lower bound: " << jgeq_metrics << " metrics x 100 fields, " << jgeq_bad << " violations";
  return {evaluations >= 500 && audited >= 500 && violations == 0 && jgeq_bad == 0 && jgeq_metrics >= 500, os.str()};
}

Outcome bubble_audit() {
  const auto fam = make_family("rp-bump", 3);
  const std::vector<std::vector<double>> thetas{{2.0, 0.0, 0.0},  {2.0, 0.1, -0.05}, {2.5, 0.12, 0.1},
                                                {1.6, -0.1, 0.1}, {3.0, 0.05, 0.15}, {2.2, -0.15, -0.15}};
  std::size_t feasible = 0, passed = 0;
  double min_margin = 1e300, min_pred = 1e300, worst_closed = 0.0;
  for (const auto& th : thetas) {
    for (double a : {1.0, 3.0}) {
      auto op = std::make_shared<const DiscreteOperator>(fam(th).primary, grid(256));
      const MassResult m = solve_mass(*op, CutoffEta{3, 5});
      const YamabeResult y = minimize_yamabe(*op);
      if (!(m.m > 0 && y.Y_estimate > a)) continue;
      ++feasible;
      const BubbleAssembly as = build_assembly(op, m, compute_chain(3, a));
      const QuotientAudit q = quotient_bound_audit(as, 1e-6, false);
      bool ok = q.Q_direct <= q.bound + 1e-6 && q.passed();
      for (const auto& p : as.predicates()) {
        ok = ok && p.margin > 0;
        min_pred = std::min(min_pred, p.margin);
      }
      const BubbleEnergies& e = q.energies;
      const double closed = std::max(std::abs(e.E3 - e.E3_boundary), std::abs(e.E4 - e.E4_boundary));
      worst_closed = std::max(worst_closed, closed);
      ok = ok && closed <= 1e-8;
      min_margin = std::min(min_margin, q.bound - q.Q_direct);
      passed += ok ? 1 : 0;
    }
  }
  std::ostringstream os;
  os << passed << "/" << feasible << " assemblies pass (A > 0); min bound - Q(psi) " << fmt("%.3e", min_margin) << " (slack 1e-6)"
     << ", min predicate margin " << fmt("%.3e", min_pred) << ", max closed-form vs boundary gap " << fmt("%.1e", worst_closed);
  return {feasible >= 5 && passed == feasible, os.str()};
}

Outcome fem_crosscheck() {
  const CutoffEta eta{3, 5};
  bool pass = true;
  std::ostringstream os;
  for (const auto& id : {"rp3-flat", "rp3-warp"}) {
    const WarpedProfile p = fem_reference_profile(id);
    const DiscreteOperator op(p, grid(512));
    const double m = solve_mass(op, eta).m;
    const double l = op.smallest_eigenvalues(1)[0];
    const FemMetric metric = warped_fem_metric(p);
    double dm[2], dl[2];
    for (int level : {2, 3}) {
      const auto mfd = attach_metric(build_sphere_mesh(level), metric);
      dm[level - 2] = std::abs(fem_mass_value(mfd, eta, level == 3 ? 200 : 0) - m) / std::abs(m);
      dl[level - 2] = std::abs(fem_lambda1(fem_operator(mfd)) - l) / std::abs(l);
    }
    pass = pass && dm[1] <= 0.05 && dl[1] <= 0.05 && dm[1] < dm[0] && dl[1] < dl[0];
    os << id << ": mass " << fmt("%.1f", 100 * dm[0]) << "% -> " << fmt("%.1f", 100 * dm[1]) << "%, lambda_1 "
       << fmt("%.1f", 100 * dl[0]) << "% -> " << fmt("%.1f", 100 * dl[1]) << "% (level 2 -> 3); ";
  }
  return {pass, os.str()};
}

Outcome mass_blowup() {
  const auto fam = make_family("sphere-squash", 4);
  const BlowupTable t = mass_blowup_experiment(fam(std::vector<double>{2.0, 0.0}).primary, fam(std::vector<double>{2.0, 1.5}).primary);
  std::ostringstream os;
  os << "t_inf = " << fmt("%.10f", t.t_inf) << ", |lambda_1| = " << fmt("%.1e", std::abs(t.lambda1_at_t_inf)) << "; masses";
  for (const auto& r : t.rows) os << " " << fmt("%.5f", r.mass);
  os << ", growth " << fmt("%.1f", t.growth) << "x";
  return {std::abs(t.lambda1_at_t_inf) <= 1e-6 && t.increasing && t.growth > 10.0, os.str()};
}

Outcome determinism() {
  const std::vector<std::string> configs{
      "command = \"constants\"\na = 2.0\n",
      "command = \"mass\"\nfamily = \"rp-bump\"\ntheta = [2.2, 0.1, 0.0]\na = 1.0\n",
      "command = \"yamabe\"\nn = 4\nfamily = \"sphere-squash\"\ntheta = [2.0, 1.2]\n",
      "command = \"bubble-audit\"\n",
      "command = \"explore\"\nfamily = \"rp-bump\"\nbudget = 6\na_grid = [1.0, 3.0]\nseed = 3\n",
      "command = \"blowup\"\nn = 4\nresolution = 128\n"};
  std::size_t same = 0;
  for (const auto& text : configs) {
    const ExperimentConfig c = validate_config(config_from_toml_string(text));
    const RunOutput a = run(c), b = run(c);
    same += a.record.payload.dump() == b.record.payload.dump() && a.files == b.files && a.record.version == b.record.version ? 1 : 0;
  }
  return {same == configs.size(), std::to_string(same) + "/" + std::to_string(configs.size()) + " experiments byte-identical on rerun"};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> checks{
      {"sphere mass zero", sphere_mass_zero}, {"scaling law", scaling_law},
      {"dual mass extraction", dual_extraction}, {"constants pipeline", constants_pipeline},
      {"yamabe solver", yamabe_solver}, {"blend convergence", blend_lemma},
      {"bound audits", bound_audits}, {"bubble audit", bubble_audit},
      {"fem cross-check", fem_crosscheck}, {"mass blow-up", mass_blowup},
      {"determinism", determinism}};
  int failures = 0;
  for (std::size_t i = 0; i < checks.size(); ++i) {
    Outcome o;
    try {
      o = checks[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failures += o.pass ? 0 : 1;
    std::printf("%s %2zu %-22s %s\n", o.pass ? "PASS" : "FAIL", i + 1, checks[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu acceptance checks failed\n", failures, checks.size());
  return failures == 0 ? 0 : 1;
}
