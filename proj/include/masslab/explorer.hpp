#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "masslab/families.hpp"
#include "masslab/mass.hpp"
#include "masslab/yamabe.hpp"

namespace masslab {

struct EvalOptions {
  std::size_t resolution = 256;
  /// Re-solve the mass at twice the resolution and record the drift.
  bool drift_check = true;
  int eta_smoothness = 5;
  /// Random fields for the J lower-bound audit at level `jgeq_level` (0 skips it).
  std::size_t jgeq_trials = 0;
  double jgeq_level = 0.0;
  std::uint64_t jgeq_seed = 0;
  YamabeOptions yamabe;
};

/// One evaluated metric (or disjoint union). mass is NaN unless mass_defined.
struct PointRecord {
  std::string family;
  int n = 3;
  std::vector<double> theta;
  double Y_upper = 0.0;  // minimized quotient; an upper bound for Y
  double lambda1 = 0.0;
  std::vector<double> component_Y;  // per component, the one containing p first
  std::vector<double> component_lambda1;
  bool mass_defined = false;
  double mass = 0.0;
  double mass_double = 0.0;  // at twice the resolution
  double drift = 0.0;        // |mass_double - mass| / (1 + |mass_double|)
  std::string error;         // kind and message when something was not computed
  std::size_t jgeq_trials = 0;
  std::size_t jgeq_violations = 0;
  double jgeq_min_slack = 0.0;
  double jgeq_level = 0.0;
};

/// Y, lambda_1 and (when lambda_1 > 0) the mass at the flat pole; NotPositive and solver
/// failures become records with mass_defined = false. Throws InvalidArgument outside the box.
PointRecord evaluate_point(const MetricFamily& family, std::span<const double> theta, const EvalOptions& options = {});

/// Y and lambda_1 of a single closed component without a mass.
PointRecord evaluate_component(const WarpedProfile& profile, const EvalOptions& options = {});

/// Record of M + N with p in the first (`p_in_first`) or second component: Y and lambda_1 are
/// the minima, the mass is copied from p's component. InvalidArgument on a dimension mismatch.
PointRecord disjoint_union(const PointRecord& a, const PointRecord& b, bool p_in_first = true);

enum class Direction { Max, Min };
std::string to_string(Direction d);

struct SearchOptions {
  std::size_t budget = 60;  // point evaluations per search
  std::uint64_t seed = 1;
  std::size_t restarts = 2;
  double lhs_fraction = 0.4;  // share of the budget spent on the Latin-hypercube design
  double initial_step = 0.15;  // simplex size in box-normalized coordinates
  double margin = 1e-3;        // records need Y_upper - a >= margin
  EvalOptions eval;
};

/// Feasible at level a: mass defined and Y_upper - a >= margin.
bool feasible(const PointRecord& r, double a, double margin);

struct SearchResult {
  double a = 0.0;
  Direction direction = Direction::Max;
  PointRecord best;
  std::vector<PointRecord> records;  // every evaluation, in order
  std::size_t feasible_count = 0;
};

/// Nelder-Mead on the box-normalized parameters with an infeasibility penalty, restarted from
/// the best Latin-hypercube points. Deterministic given the seed. NoFeasiblePoint when no
/// evaluation certifies Y > a.
SearchResult search_envelope(const MetricFamily& family, double a, Direction direction, const SearchOptions& options);

struct EnvelopePoint {
  double a = 0.0;
  bool defined = false;
  double value = 0.0;
  std::vector<double> theta;
};

/// One evaluation tagged with the level and direction of the search that produced it.
struct SampleRecord {
  double a = 0.0;
  Direction direction = Direction::Max;
  PointRecord point;
};

struct MassFunctionEstimate {
  std::string family;
  int n = 3;
  std::vector<double> a_grid;
  double margin = 1e-3;
  std::vector<EnvelopePoint> sup_env;
  std::vector<EnvelopePoint> inf_env;
  std::vector<SampleRecord> samples;
  std::vector<std::string> notes;  // searches that found no feasible point
};

/// Runs a max and a min search per level, then forms the envelopes from every sample: the max
/// (min) mass over samples certified at level a. Since certified sets shrink as a grows, the
/// envelopes are monotone in a.
MassFunctionEstimate explore(const MetricFamily& family, const std::vector<double>& a_grid, const SearchOptions& options);

/// Envelopes of the disjoint union of two explored families: per level the max (min) of the
/// two component envelopes.
MassFunctionEstimate union_envelope(const MassFunctionEstimate& a, const MassFunctionEstimate& b);

struct AuditEntry {
  std::size_t sample = 0;
  double a = 0.0;
  double mass = 0.0;
  double simple_bound = 0.0;   // D_n^2 / (4a)
  double refined_bound = 0.0;  // d_n (sigma - a)^{1/n} / a
  double lower_bound = 0.0;    // a-independent, from a fixed test function
  std::size_t jgeq_trials = 0;
  std::size_t jgeq_violations = 0;
  bool simple_ok = true;
  bool refined_ok = true;
  bool lower_ok = true;
  bool ok() const { return simple_ok && refined_ok && lower_ok && jgeq_violations == 0; }
};

struct AuditTally {
  std::string name;
  std::size_t checked = 0;
  std::size_t violated = 0;
};

struct BoundAuditReport {
  std::vector<AuditEntry> entries;  // one per feasible sample
  std::vector<AuditTally> tallies;
  std::size_t violations() const;
};

/// Checks every feasible sample at its level against both upper bounds, the test-function
/// lower bound and its J audit. Throws Violation naming the first witness unless
/// `throw_on_violation` is false.
BoundAuditReport bound_audit_all(const MassFunctionEstimate& estimate, bool throw_on_violation = true);

struct BlowupRow {
  double t = 0.0;
  double lambda1 = 0.0;
  double Y_upper = 0.0;
  double mass = 0.0;
};

struct BlowupOptions {
  std::size_t resolution = 256;
  double tolerance = 1e-6;  // on |lambda_1(g_{t_inf})|
  std::vector<double> offsets{0.1, 0.03, 0.01};
  int eta_smoothness = 5;
  YamabeOptions yamabe;
};

struct BlowupTable {
  double t_inf = 0.0;
  double lambda1_at_t_inf = 0.0;
  std::size_t bisections = 0;
  BlowupRow endpoint;           // t = 1
  std::vector<BlowupRow> rows;  // t_inf + offsets, in the given order
  bool increasing = false;      // masses strictly increase as t decreases to t_inf
  double growth = 0.0;          // last mass / first mass
};

/// Along g_t = t g + (1 - t) h: bisects t_inf = max{t : lambda_1(g_t) <= 0}, then tabulates
/// lambda_1, Y_upper and the mass at t_inf + offsets. NoSignChange unless lambda_1(g) > 0 and
/// lambda_1(h) < 0.
BlowupTable mass_blowup_experiment(const WarpedProfile& g_plus, const WarpedProfile& h_neg,
                                   const BlowupOptions& options = {});

nlohmann::json to_json(const PointRecord& r);
nlohmann::json to_json(const EnvelopePoint& e);
nlohmann::json to_json(const MassFunctionEstimate& e, bool include_samples = false);
nlohmann::json to_json(const BoundAuditReport& r);
nlohmann::json to_json(const BlowupTable& t);

}  // namespace masslab
