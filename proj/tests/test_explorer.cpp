#include <doctest.h>

#include <cmath>

#include "masslab/error.hpp"
#include "masslab/explorer.hpp"
#include "masslab/families.hpp"

using namespace masslab;

namespace {
ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::InvalidArgument;
}

PointRecord record(double Y, double lambda1, double mass) {
  PointRecord r;
  r.family = "synthetic";
  r.Y_upper = Y;
  r.lambda1 = lambda1;
  r.component_Y = {Y};
  r.component_lambda1 = {lambda1};
  r.mass_defined = true;
  r.mass = mass;
  return r;
}

SearchOptions quick(std::size_t budget) {
  SearchOptions o;
  o.budget = budget;
  o.eval.resolution = 128;
  return o;
}
}  // namespace

TEST_CASE("reference point of the sphere family") {
  const auto fam = make_family("sphere-flat", 3);
  const PointRecord r = evaluate_point(fam, fam.reference);
  CHECK(r.mass_defined);
  CHECK(std::abs(r.mass) < 1e-6);
  CHECK(r.drift <= 1e-4);
  CHECK(r.Y_upper == doctest::Approx(5.478).epsilon(0.01));
  CHECK(r.Y_upper <= 5.4780 * (1 + 1e-3));
  CHECK(kind_of([&] { (void)evaluate_point(fam, std::vector<double>{10.0, 0.5, 0.0}); }) == ErrorKind::InvalidArgument);
}

TEST_CASE("negative lambda_1 gives a mass-undefined record") {
  const auto fam = make_family("sphere-squash", 4);
  const PointRecord r = evaluate_point(fam, std::vector<double>{2.0, 1.5});
  CHECK(r.lambda1 < 0.0);
  CHECK_FALSE(r.mass_defined);
  CHECK(std::isnan(r.mass));
  CHECK_FALSE(feasible(r, 0.1, 1e-3));
}

TEST_CASE("disjoint union") {
  const PointRecord A = record(5.0, 0.7, 0.02);
  const PointRecord same = disjoint_union(A, A);
  CHECK(same.Y_upper == A.Y_upper);
  CHECK(same.mass == A.mass);
  const PointRecord B = record(0.3, 0.01, 0.5);
  const PointRecord u = disjoint_union(A, B);
  CHECK(u.Y_upper == 0.3);
  CHECK(u.lambda1 == 0.01);
  CHECK(u.mass == 0.02);
  CHECK(disjoint_union(A, B, false).mass == 0.5);
  PointRecord C = B;
  C.n = 4;
  CHECK(kind_of([&] { (void)disjoint_union(A, C); }) == ErrorKind::InvalidArgument);
}

TEST_CASE("union family: the round component caps Y") {
  const auto fam = make_family("union", 3);
  const PointRecord r = evaluate_point(fam, std::vector<double>{2.0, 0.0, 0.0, 1.0});
  REQUIRE(r.component_Y.size() == 2);
  CHECK(r.Y_upper == std::min(r.component_Y[0], r.component_Y[1]));
  const PointRecord alone = evaluate_point(make_family("rp-bump", 3), std::vector<double>{2.0, 0.0, 0.0});
  CHECK(r.mass == alone.mass);
}

TEST_CASE("max search on the sphere family stays at zero and is deterministic") {
  const auto fam = make_family("sphere-flat", 3);
  const SearchResult a = search_envelope(fam, 2.0, Direction::Max, quick(12));
  const SearchResult b = search_envelope(fam, 2.0, Direction::Max, quick(12));
  CHECK(a.records.size() <= 12);
  CHECK(a.records.size() > 5);
  CHECK(std::abs(a.best.mass) < 1e-6);
  REQUIRE(a.records.size() == b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    CHECK(a.records[i].theta == b.records[i].theta);
    CHECK(to_json(a.records[i]).dump() == to_json(b.records[i]).dump());
  }
  SearchOptions other = quick(12);
  other.seed = 2;
  CHECK(search_envelope(fam, 2.0, Direction::Max, other).records[0].theta != a.records[0].theta);
}

TEST_CASE("no feasible point above the sphere constant") {
  const auto fam = make_family("rp-bump", 3);
  CHECK(kind_of([&] { (void)search_envelope(fam, 5.47, Direction::Max, quick(5)); }) == ErrorKind::NoFeasiblePoint);
}

TEST_CASE("envelopes are monotone and unions take max and min") {
  const auto fam = make_family("rp-bump", 3);
  const MassFunctionEstimate e = explore(fam, {1.0, 3.0}, quick(8));
  REQUIRE(e.sup_env.size() == 2);
  CHECK(e.sup_env[1].value <= e.sup_env[0].value);
  CHECK(e.inf_env[1].value >= e.inf_env[0].value);
  CHECK(e.samples.size() <= 2 * 2 * 8);
  CHECK(bound_audit_all(e).violations() == 0);

  MassFunctionEstimate other = e;
  for (auto& p : other.sup_env) p.value += 1.0;
  for (auto& p : other.inf_env) p.value -= 1.0;
  const MassFunctionEstimate u = union_envelope(e, other);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(u.sup_env[i].value == other.sup_env[i].value);
    CHECK(u.inf_env[i].value == other.inf_env[i].value);
  }
}

TEST_CASE("bound audit flags a synthetic violation") {
  MassFunctionEstimate e;
  e.family = "synthetic";
  e.n = 3;
  e.a_grid = {1.0};
  e.sup_env = {EnvelopePoint{1.0, true, 1e6, {}}};
  e.inf_env = {EnvelopePoint{1.0, true, 1e6, {}}};
  e.samples = {SampleRecord{1.0, Direction::Max, record(5.0, 0.5, 1e6)}};
  CHECK(kind_of([&] { (void)bound_audit_all(e); }) == ErrorKind::Violation);
  const BoundAuditReport r = bound_audit_all(e, false);
  CHECK(r.violations() == 2);  // both upper bounds
  CHECK_FALSE(r.entries.at(0).simple_ok);
}

TEST_CASE("blowup needs a sign change; t = 1 is the positive endpoint") {
  const auto fam = make_family("sphere-squash", 4);
  const auto g = fam(std::vector<double>{2.0, 0.0}).primary;
  const auto h = fam(std::vector<double>{2.0, 1.5}).primary;
  BlowupOptions o;
  o.resolution = 128;
  CHECK(kind_of([&] { (void)mass_blowup_experiment(g, g, o); }) == ErrorKind::NoSignChange);
  const BlowupTable t = mass_blowup_experiment(g, h, o);
  CHECK(std::abs(t.lambda1_at_t_inf) <= 1e-6);
  const PointRecord eg = evaluate_component(g, EvalOptions{.resolution = 128});
  CHECK(t.endpoint.t == 1.0);
  CHECK(t.endpoint.lambda1 == doctest::Approx(eg.lambda1).epsilon(1e-12));
  CHECK(t.endpoint.Y_upper == doctest::Approx(eg.Y_upper).epsilon(1e-9));
  CHECK(t.increasing);
}
