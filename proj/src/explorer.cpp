#include "masslab/explorer.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "masslab/constants.hpp"
#include "masslab/error.hpp"
#include "masslab/kernels.hpp"

namespace masslab {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

nlohmann::json num(double x) {
  if (!std::isfinite(x)) return nullptr;
  return x;
}

nlohmann::json nums(const std::vector<double>& v) {
  nlohmann::json j = nlohmann::json::array();
  for (double x : v) j.push_back(num(x));
  return j;
}

std::string describe(const std::exception& e) { return e.what(); }

GridOptions grid(std::size_t resolution) {
  GridOptions g;
  g.resolution = resolution;
  return g;
}

PointRecord component_record(const DiscreteOperator& op, const EvalOptions& options) {
  PointRecord rec;
  rec.n = op.dimension();
  rec.mass = kNaN;
  rec.mass_double = kNaN;
  rec.drift = kNaN;
  rec.lambda1 = op.smallest_eigenvalues(1)[0];
  try {
    rec.Y_upper = minimize_yamabe(op, options.yamabe).Y_estimate;
  } catch (const Error& e) {
    rec.Y_upper = kNaN;
    rec.error = describe(e);
  }
  rec.component_Y = {rec.Y_upper};
  rec.component_lambda1 = {rec.lambda1};
  return rec;
}

PointRecord evaluate_primary(const WarpedProfile& profile, const EvalOptions& options) {
  const DiscreteOperator op(profile, grid(options.resolution));
  PointRecord rec = component_record(op, options);
  if (!rec.error.empty()) return rec;
  if (!op.positive()) {
    rec.error = "NotPositive: lambda_1 <= 0, mass undefined";
    return rec;
  }
  const CutoffEta eta{profile.dimension(), options.eta_smoothness};
  try {
    rec.mass = solve_mass(op, eta).m;
    rec.mass_defined = true;
    if (options.drift_check) {
      const DiscreteOperator fine(profile, grid(2 * options.resolution));
      rec.mass_double = solve_mass(fine, eta).m;
      rec.drift = std::abs(rec.mass_double - rec.mass) / (1.0 + std::abs(rec.mass_double));
    }
    if (options.jgeq_trials > 0 && options.jgeq_level > 0.0) {
      const JgeqReport j = quadratic_lower_bound_audit(op, eta, options.jgeq_level, options.jgeq_trials,
                                                       options.jgeq_seed);
      rec.jgeq_trials = j.trials;
      rec.jgeq_violations = j.violations;
      rec.jgeq_min_slack = j.min_slack;
      rec.jgeq_level = options.jgeq_level;
    }
  } catch (const Error& e) {
    rec.mass_defined = false;
    rec.mass = kNaN;
    rec.error = describe(e);
  }
  return rec;
}

}  // namespace

PointRecord evaluate_component(const WarpedProfile& profile, const EvalOptions& options) {
  return component_record(DiscreteOperator(profile, grid(options.resolution)), options);
}

PointRecord disjoint_union(const PointRecord& a, const PointRecord& b, bool p_in_first) {
  require(a.n == b.n, ErrorKind::InvalidArgument, "disjoint union of components of different dimension");
  const PointRecord& p = p_in_first ? a : b;
  const PointRecord& q = p_in_first ? b : a;
  PointRecord u = p;
  u.Y_upper = std::min(a.Y_upper, b.Y_upper);
  u.lambda1 = std::min(a.lambda1, b.lambda1);
  if (std::isnan(a.Y_upper) || std::isnan(b.Y_upper)) u.Y_upper = kNaN;
  u.component_Y = p.component_Y;
  u.component_Y.insert(u.component_Y.end(), q.component_Y.begin(), q.component_Y.end());
  u.component_lambda1 = p.component_lambda1;
  u.component_lambda1.insert(u.component_lambda1.end(), q.component_lambda1.begin(), q.component_lambda1.end());
  if (!q.error.empty()) u.error = u.error.empty() ? q.error : u.error + "; " + q.error;
  return u;
}

PointRecord evaluate_point(const MetricFamily& family, std::span<const double> theta, const EvalOptions& options) {
  const FamilyMember member = family(theta);
  PointRecord rec = evaluate_primary(member.primary, options);
  if (member.other) rec = disjoint_union(rec, evaluate_component(*member.other, options));
  rec.family = family.id;
  rec.n = family.n;
  rec.theta.assign(theta.begin(), theta.end());
  return rec;
}

std::string to_string(Direction d) { return d == Direction::Max ? "max" : "min"; }

bool feasible(const PointRecord& r, double a, double margin) {
  return r.mass_defined && std::isfinite(r.mass) && std::isfinite(r.Y_upper) && r.Y_upper - a >= margin;
}

namespace {

class Search {
 public:
  Search(const MetricFamily& family, double a, Direction dir, const SearchOptions& options)
      : family_(family), a_(a), dir_(dir), opt_(options) {
    opt_.eval.jgeq_level = opt_.eval.jgeq_trials > 0 ? a : 0.0;
    // the design depends on (seed, a, direction) only
    std::seed_seq seq{static_cast<std::uint32_t>(options.seed), static_cast<std::uint32_t>(options.seed >> 32),
                      static_cast<std::uint32_t>(std::bit_cast<std::uint64_t>(a)),
                      static_cast<std::uint32_t>(std::bit_cast<std::uint64_t>(a) >> 32),
                      static_cast<std::uint32_t>(dir == Direction::Max ? 1 : 2)};
    rng_.seed(seq);
  }

  SearchResult run() {
    const std::size_t k = family_.dimension();
    const std::size_t budget = opt_.budget;
    require(budget >= 1, ErrorKind::InvalidArgument, "search budget must be positive");
    const auto design_size = std::min(
        budget, std::max(k + 1, static_cast<std::size_t>(std::floor(opt_.lhs_fraction * static_cast<double>(budget)))));
    const auto design = latin_hypercube(design_size, k);
    const auto design_values = evaluate_batch(design);
    std::vector<std::size_t> order(design.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) { return design_values[i] < design_values[j]; });
    const std::size_t restarts = std::min(opt_.restarts, order.size());
    for (std::size_t r = 0; r < restarts; ++r) {
      const std::size_t left = budget - result_.records.size();
      const std::size_t share = left / (restarts - r);
      if (share < k + 2) {
        // too little left to split: one last descent with all of it
        if (left >= k + 2) nelder_mead(design[order[r]], left);
        break;
      }
      nelder_mead(design[order[r]], share);
    }
    finish();
    return std::move(result_);
  }

 private:
  using Point = std::vector<double>;

  double uniform() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }

  std::vector<Point> latin_hypercube(std::size_t count, std::size_t k) {
    std::vector<Point> pts(count, Point(k));
    for (std::size_t d = 0; d < k; ++d) {
      std::vector<std::size_t> perm(count);
      std::iota(perm.begin(), perm.end(), 0);
      for (std::size_t i = count; i > 1; --i) std::swap(perm[i - 1], perm[rng_() % i]);
      for (std::size_t i = 0; i < count; ++i)
        pts[i][d] = (static_cast<double>(perm[i]) + uniform()) / static_cast<double>(count);
    }
    return pts;
  }

  std::vector<double> theta_of(const Point& u) const {
    std::vector<double> th(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) {
      const double c = std::clamp(u[i], 0.0, 1.0);
      th[i] = family_.lower[i] + c * (family_.upper[i] - family_.lower[i]);
    }
    return th;
  }

  double objective(const PointRecord& r) const {
    if (feasible(r, a_, opt_.margin)) return dir_ == Direction::Max ? -r.mass : r.mass;
    if (!std::isfinite(r.Y_upper)) return 1e6;
    return 1e3 + std::max(0.0, a_ + opt_.margin - r.Y_upper);
  }

  std::vector<double> evaluate_batch(const std::vector<Point>& pts) {
    auto recs = parallel_map(pts.size(), [&](std::size_t i) {
      const auto th = theta_of(pts[i]);
      return evaluate_point(family_, th, opt_.eval);
    });
    std::vector<double> values;
    values.reserve(recs.size());
    for (auto& r : recs) {
      values.push_back(objective(r));
      result_.records.push_back(std::move(r));
    }
    return values;
  }

  double evaluate_one(const Point& u) { return evaluate_batch({u})[0]; }

  static Point clamp(Point u) {
    for (double& x : u) x = std::clamp(x, 0.0, 1.0);
    return u;
  }

  void nelder_mead(const Point& start, std::size_t share) {
    const std::size_t k = start.size();
    const std::size_t stop = result_.records.size() + share;
    std::vector<Point> simplex{clamp(start)};
    for (std::size_t i = 0; i < k; ++i) {
      Point v = simplex[0];
      v[i] += v[i] + opt_.initial_step <= 1.0 ? opt_.initial_step : -opt_.initial_step;
      simplex.push_back(clamp(v));
    }
    std::vector<double> f = evaluate_batch(simplex);
    const auto remaining = [&] { return result_.records.size() < stop ? stop - result_.records.size() : 0; };
    while (remaining() > 0) {
      std::vector<std::size_t> idx(k + 1);
      std::iota(idx.begin(), idx.end(), 0);
      std::stable_sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) { return f[i] < f[j]; });
      std::vector<Point> s2;
      std::vector<double> f2;
      for (std::size_t i : idx) {
        s2.push_back(simplex[i]);
        f2.push_back(f[i]);
      }
      simplex = std::move(s2);
      f = std::move(f2);
      double diameter = 0.0;
      for (std::size_t i = 1; i <= k; ++i)
        for (std::size_t d = 0; d < k; ++d) diameter = std::max(diameter, std::abs(simplex[i][d] - simplex[0][d]));
      if (diameter < 1e-6 && std::abs(f[k] - f[0]) <= 1e-12 * (1.0 + std::abs(f[0]))) break;

      Point c(k, 0.0);
      for (std::size_t i = 0; i < k; ++i)
        for (std::size_t d = 0; d < k; ++d) c[d] += simplex[i][d] / static_cast<double>(k);
      const auto along = [&](double s) {
        Point p(k);
        for (std::size_t d = 0; d < k; ++d) p[d] = c[d] + s * (simplex[k][d] - c[d]);
        return clamp(p);
      };
      const Point xr = along(-1.0);
      const double fr = evaluate_one(xr);
      if (fr < f[0]) {
        if (remaining() == 0) {
          simplex[k] = xr;
          f[k] = fr;
          break;
        }
        const Point xe = along(-2.0);
        const double fe = evaluate_one(xe);
        simplex[k] = fe < fr ? xe : xr;
        f[k] = std::min(fe, fr);
      } else if (fr < f[k - 1]) {
        simplex[k] = xr;
        f[k] = fr;
      } else {
        if (remaining() == 0) break;
        const bool outside = fr < f[k];
        const Point xc = along(outside ? -0.5 : 0.5);
        const double fc = evaluate_one(xc);
        if (fc < (outside ? fr : f[k])) {
          simplex[k] = xc;
          f[k] = fc;
        } else {
          if (remaining() < k) break;
          std::vector<Point> shrunk;
          for (std::size_t i = 1; i <= k; ++i) {
            Point p(k);
            for (std::size_t d = 0; d < k; ++d) p[d] = simplex[0][d] + 0.5 * (simplex[i][d] - simplex[0][d]);
            shrunk.push_back(p);
          }
          const auto fs = evaluate_batch(shrunk);
          for (std::size_t i = 1; i <= k; ++i) {
            simplex[i] = shrunk[i - 1];
            f[i] = fs[i - 1];
          }
        }
      }
    }
  }

  void finish() {
    result_.a = a_;
    result_.direction = dir_;
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < result_.records.size(); ++i) {
      const auto& r = result_.records[i];
      if (!feasible(r, a_, opt_.margin)) continue;
      ++result_.feasible_count;
      if (!best) {
        best = i;
        continue;
      }
      const double m = result_.records[*best].mass;
      if (dir_ == Direction::Max ? r.mass > m : r.mass < m) best = i;
    }
    if (best) result_.best = result_.records[*best];
  }

  const MetricFamily& family_;
  double a_;
  Direction dir_;
  SearchOptions opt_;
  std::mt19937_64 rng_;
  SearchResult result_;
};

void check_level(int n, double a) {
  require(a > 0.0 && a < sigma_sphere(n), ErrorKind::InvalidArgument,
          "level a must lie in (0, sigma(S^n))");
}

}  // namespace

SearchResult search_envelope(const MetricFamily& family, double a, Direction direction, const SearchOptions& options) {
  check_level(family.n, a);
  SearchResult res = Search(family, a, direction, options).run();
  if (res.feasible_count == 0) {
    std::ostringstream os;
    os << "family " << family.id << " never certified Y > " << a << " in " << res.records.size() << " evaluations";
    fail(ErrorKind::NoFeasiblePoint, os.str());
  }
  return res;
}

MassFunctionEstimate explore(const MetricFamily& family, const std::vector<double>& a_grid, const SearchOptions& options) {
  require(!a_grid.empty(), ErrorKind::InvalidArgument, "empty a grid");
  MassFunctionEstimate est;
  est.family = family.id;
  est.n = family.n;
  est.a_grid = a_grid;
  est.margin = options.margin;
  for (double a : a_grid) check_level(family.n, a);
  for (double a : a_grid) {
    for (Direction dir : {Direction::Max, Direction::Min}) {
      SearchResult res = Search(family, a, dir, options).run();
      if (res.feasible_count == 0) {
        std::ostringstream os;
        os << "NoFeasiblePoint: " << to_string(dir) << " search at a = " << a;
        est.notes.push_back(os.str());
      }
      for (auto& r : res.records) est.samples.push_back({a, dir, std::move(r)});
    }
  }
  for (double a : a_grid) {
    EnvelopePoint hi{a, false, kNaN, {}};
    EnvelopePoint lo{a, false, kNaN, {}};
    for (const auto& s : est.samples) {
      if (!feasible(s.point, a, options.margin)) continue;
      if (!hi.defined || s.point.mass > hi.value) hi = {a, true, s.point.mass, s.point.theta};
      if (!lo.defined || s.point.mass < lo.value) lo = {a, true, s.point.mass, s.point.theta};
    }
    est.sup_env.push_back(hi);
    est.inf_env.push_back(lo);
  }
  return est;
}

MassFunctionEstimate union_envelope(const MassFunctionEstimate& a, const MassFunctionEstimate& b) {
  require(a.n == b.n, ErrorKind::InvalidArgument, "union of estimates of different dimension");
  require(a.a_grid == b.a_grid, ErrorKind::InvalidArgument, "union of estimates on different a grids");
  MassFunctionEstimate u;
  u.family = a.family + "+" + b.family;
  u.n = a.n;
  u.a_grid = a.a_grid;
  u.margin = std::max(a.margin, b.margin);
  const auto pick = [](const EnvelopePoint& x, const EnvelopePoint& y, bool take_max) {
    if (!x.defined) return y;
    if (!y.defined) return x;
    if (take_max) return y.value > x.value ? y : x;
    return y.value < x.value ? y : x;
  };
  for (std::size_t i = 0; i < a.a_grid.size(); ++i) {
    u.sup_env.push_back(pick(a.sup_env[i], b.sup_env[i], true));
    u.inf_env.push_back(pick(a.inf_env[i], b.inf_env[i], false));
  }
  u.samples = a.samples;
  u.samples.insert(u.samples.end(), b.samples.begin(), b.samples.end());
  u.notes = a.notes;
  u.notes.insert(u.notes.end(), b.notes.begin(), b.notes.end());
  return u;
}

std::size_t BoundAuditReport::violations() const {
  std::size_t v = 0;
  for (const auto& t : tallies) v += t.violated;
  return v;
}

BoundAuditReport bound_audit_all(const MassFunctionEstimate& estimate, bool throw_on_violation) {
  BoundAuditReport rep;
  AuditTally simple{"mass <= D_n^2/(4a)"};
  AuditTally refined{"mass <= d_n (sigma - a)^(1/n) / a"};
  AuditTally lower{"mass >= test-function lower bound"};
  AuditTally jgeq{"J(u) >= C - C' X + a X^2"};
  const double lower_bound = test_function_lower_bound(CutoffEta{estimate.n, 5});
  std::string witness;
  for (std::size_t i = 0; i < estimate.samples.size(); ++i) {
    const auto& s = estimate.samples[i];
    if (!feasible(s.point, s.a, estimate.margin)) continue;
    const MassUpperBounds ub = mass_upper_bounds(estimate.n, s.a);
    AuditEntry e;
    e.sample = i;
    e.a = s.a;
    e.mass = s.point.mass;
    e.simple_bound = ub.simple;
    e.refined_bound = ub.refined;
    e.lower_bound = lower_bound;
    e.simple_ok = e.mass <= e.simple_bound;
    e.refined_ok = e.mass <= e.refined_bound;
    e.lower_ok = e.mass >= e.lower_bound;
    e.jgeq_trials = s.point.jgeq_trials;
    e.jgeq_violations = s.point.jgeq_violations;
    ++simple.checked;
    ++refined.checked;
    ++lower.checked;
    jgeq.checked += e.jgeq_trials;
    simple.violated += e.simple_ok ? 0 : 1;
    refined.violated += e.refined_ok ? 0 : 1;
    lower.violated += e.lower_ok ? 0 : 1;
    jgeq.violated += e.jgeq_violations;
    if (!e.ok() && witness.empty()) {
      std::ostringstream os;
      os.precision(17);
      os << "sample " << i << " of " << estimate.family << " at a = " << s.a << ": mass " << e.mass;
      if (!e.simple_ok) os << " > " << e.simple_bound << " (D_n^2/(4a))";
      else if (!e.refined_ok) os << " > " << e.refined_bound << " (d_n bound)";
      else if (!e.lower_ok) os << " < " << e.lower_bound << " (lower bound)";
      else os << ", " << e.jgeq_violations << " J audit violations";
      os << ", theta = [";
      for (std::size_t k = 0; k < s.point.theta.size(); ++k) os << (k ? ", " : "") << s.point.theta[k];
      os << "]";
      witness = os.str();
    }
    rep.entries.push_back(e);
  }
  rep.tallies = {simple, refined, lower, jgeq};
  if (throw_on_violation && !witness.empty()) fail(ErrorKind::Violation, witness);
  return rep;
}

namespace {

BlowupRow blowup_row(const WarpedProfile& g, const WarpedProfile& h, double t, const BlowupOptions& o) {
  const WarpedProfile p = interpolate_metrics(g, h, t);
  const DiscreteOperator op(p, grid(o.resolution));
  BlowupRow row;
  row.t = t;
  row.lambda1 = op.smallest_eigenvalues(1)[0];
  row.Y_upper = minimize_yamabe(op, o.yamabe).Y_estimate;
  row.mass = solve_mass(op, CutoffEta{p.dimension(), o.eta_smoothness}).m;
  return row;
}

}  // namespace

BlowupTable mass_blowup_experiment(const WarpedProfile& g_plus, const WarpedProfile& h_neg, const BlowupOptions& options) {
  const auto lambda = [&](double t) {
    const DiscreteOperator op(interpolate_metrics(g_plus, h_neg, t), grid(options.resolution));
    return op.smallest_eigenvalues(1)[0];
  };
  const double l_plus = lambda(1.0);
  const double l_neg = lambda(0.0);
  if (!(l_plus > 0.0 && l_neg < 0.0)) {
    std::ostringstream os;
    os << "lambda_1 does not change sign on [0, 1]: lambda_1(h) = " << l_neg << ", lambda_1(g) = " << l_plus;
    fail(ErrorKind::NoSignChange, os.str());
  }
  BlowupTable table;
  double lo = 0.0, hi = 1.0, l_lo = l_neg;
  for (int it = 0; it < 200; ++it) {
    if (std::abs(l_lo) <= options.tolerance && hi - lo <= 1e-12) break;
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double l = lambda(mid);
    ++table.bisections;
    if (l <= 0.0) {
      lo = mid;
      l_lo = l;
    } else {
      hi = mid;
    }
  }
  require(std::abs(l_lo) <= options.tolerance, ErrorKind::NonConvergence,
          "bisection did not reach |lambda_1| <= tolerance (lambda_1 jumps across t_inf?)");
  table.t_inf = lo;
  table.lambda1_at_t_inf = l_lo;
  table.endpoint = blowup_row(g_plus, h_neg, 1.0, options);
  for (double d : options.offsets) {
    require(d > 0.0 && lo + d <= 1.0, ErrorKind::InvalidArgument, "offsets must keep t_inf + d in (t_inf, 1]");
    table.rows.push_back(blowup_row(g_plus, h_neg, lo + d, options));
  }
  table.increasing = !table.rows.empty();
  for (std::size_t i = 1; i < table.rows.size(); ++i)
    if (!(table.rows[i].mass > table.rows[i - 1].mass)) table.increasing = false;
  if (!table.rows.empty()) table.growth = table.rows.back().mass / table.rows.front().mass;
  return table;
}

nlohmann::json to_json(const PointRecord& r) {
  nlohmann::json j;
  j["family"] = r.family;
  j["n"] = r.n;
  j["theta"] = nums(r.theta);
  j["Y_upper"] = num(r.Y_upper);
  j["lambda1"] = num(r.lambda1);
  j["component_Y"] = nums(r.component_Y);
  j["component_lambda1"] = nums(r.component_lambda1);
  j["mass_defined"] = r.mass_defined;
  j["mass"] = num(r.mass);
  j["mass_double"] = num(r.mass_double);
  j["drift"] = num(r.drift);
  if (!r.error.empty()) j["error"] = r.error;
  if (r.jgeq_trials > 0) {
    j["jgeq"] = {{"level", r.jgeq_level},
                 {"trials", r.jgeq_trials},
                 {"violations", r.jgeq_violations},
                 {"min_slack", num(r.jgeq_min_slack)}};
  }
  return j;
}

nlohmann::json to_json(const EnvelopePoint& e) {
  return {{"a", e.a}, {"defined", e.defined}, {"value", num(e.value)}, {"theta", nums(e.theta)}};
}

nlohmann::json to_json(const MassFunctionEstimate& e, bool include_samples) {
  nlohmann::json j;
  j["family"] = e.family;
  j["n"] = e.n;
  j["a_grid"] = e.a_grid;
  j["margin"] = e.margin;
  j["sup_env"] = nlohmann::json::array();
  j["inf_env"] = nlohmann::json::array();
  for (const auto& p : e.sup_env) j["sup_env"].push_back(to_json(p));
  for (const auto& p : e.inf_env) j["inf_env"].push_back(to_json(p));
  j["samples"] = e.samples.size();
  j["notes"] = e.notes;
  if (include_samples) {
    j["records"] = nlohmann::json::array();
    for (const auto& s : e.samples) {
      auto r = to_json(s.point);
      r["level"] = s.a;
      r["direction"] = to_string(s.direction);
      j["records"].push_back(std::move(r));
    }
  }
  return j;
}

nlohmann::json to_json(const BoundAuditReport& r) {
  nlohmann::json j;
  j["audited"] = r.entries.size();
  j["violations"] = r.violations();
  j["tallies"] = nlohmann::json::array();
  for (const auto& t : r.tallies) j["tallies"].push_back({{"check", t.name}, {"checked", t.checked}, {"violated", t.violated}});
  return j;
}

nlohmann::json to_json(const BlowupTable& t) {
  const auto row = [](const BlowupRow& r) {
    return nlohmann::json{{"t", r.t}, {"lambda1", num(r.lambda1)}, {"Y_upper", num(r.Y_upper)}, {"mass", num(r.mass)}};
  };
  nlohmann::json j;
  j["t_inf"] = t.t_inf;
  j["lambda1_at_t_inf"] = t.lambda1_at_t_inf;
  j["bisections"] = t.bisections;
  j["endpoint"] = row(t.endpoint);
  j["rows"] = nlohmann::json::array();
  for (const auto& r : t.rows) j["rows"].push_back(row(r));
  j["increasing"] = t.increasing;
  j["growth"] = num(t.growth);
  return j;
}

}  // namespace masslab
