#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "masslab/error.hpp"
#include "masslab/runner.hpp"

using namespace masslab;
namespace fs = std::filesystem;

namespace {
std::string config_error(const std::string& toml) {
  try {
    (void)validate_config(config_from_toml_string(toml));
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Config);
    return e.what();
  }
  FAIL("expected a config error");
  return {};
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("masslab-test-" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

ExperimentConfig cfg(const std::string& toml) { return validate_config(config_from_toml_string(toml)); }
}  // namespace

TEST_CASE("config parsing and validation") {
  const auto c = cfg("command = \"explore\"\nfamily = \"rp-bump\"\na_grid = [1, 2.5]\nbudget = 10\n[tolerances]\ndrift = 1e-5\n");
  CHECK(c.a_grid == std::vector<double>{1.0, 2.5});
  CHECK(c.tol.drift == 1e-5);
  CHECK(c.budget == 10);
  CHECK(cfg("command = \"mass\"").family == "sphere-flat");
  CHECK(cfg("command = \"mass\"").theta == std::vector<double>{2.0, 0.5, 0.0});
  CHECK(cfg("command = \"blowup\"\nn = 4").theta_neg == std::vector<double>{2.0, 1.5});

  CHECK(config_error("command = \"mass\"\nresolutoin = 64").find("'resolutoin'") != std::string::npos);
  CHECK(config_error("command = \"mass\"\n[tolerances]\ndrfit = 1").find("'tolerances.drfit'") != std::string::npos);
  CHECK(config_error("command = \"mass\"\nn = \"three\"").find("'n'") != std::string::npos);
  CHECK(config_error("command = \"mass\"\ntheta = [1, \"x\"]").find("'theta[1]'") != std::string::npos);
  CHECK(config_error("command = \"fly\"").find("'command'") != std::string::npos);
  CHECK(config_error("command = \"constants\"\na = 6.0").find("'a'") != std::string::npos);
  CHECK(config_error("command = \"mass\"\ntheta = [2.0]").find("'theta'") != std::string::npos);
  CHECK(config_error("command = \"mass\"\nfamily = \"sphere-squash\"").find("'family'") != std::string::npos);
  CHECK(config_error("command = \"fem-check\"\nn = 4").find("'n'") != std::string::npos);
  CHECK(config_error("command = \"explore\"\na_grid = [1, 9]").find("'a_grid[1]'") != std::string::npos);
  CHECK(config_error("command = [").find("TOML") != std::string::npos);
}

TEST_CASE("git-style content hash") {
  CHECK(content_hash("") == "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
  CHECK(content_hash("hello\n") == "ce013625030ba8dba906f756967f9e9ca394464a");
}

TEST_CASE("constants and mass records") {
  const RunOutput c = run(cfg("command = \"constants\"\nn = 3\na = 1.0"));
  CHECK(c.exit_code() == 0);
  CHECK(c.record.payload["constants"]["C_n"].get<double>() >= 0.0);
  CHECK(c.record.payload["F_n"]["quadrature"].get<double>() == doctest::Approx(2.4674).epsilon(1e-4));

  const RunOutput m = run(cfg("command = \"mass\"\nfamily = \"sphere-flat\"\nn = 3"));
  CHECK(m.record.status == "ok");
  CHECK(std::abs(m.record.payload["mass"]["m"].get<double>()) < 1e-6);
}

TEST_CASE("computational errors are embedded in the record") {
  const RunOutput r = run(cfg("command = \"mass\"\nn = 4\nfamily = \"sphere-squash\"\ntheta = [2.0, 1.5]"));
  CHECK(r.record.status == "error");
  CHECK(r.exit_code() == 1);
  CHECK(r.record.payload["error_kind"] == "NotPositive");
}

TEST_CASE("reruns give byte-identical payloads") {
  for (const std::string toml : {"command = \"mass\"\nfamily = \"rp-bump\"\nresolution = 128\na = 1.0\n",
                                 "command = \"explore\"\nfamily = \"rp-bump\"\nbudget = 4\na_grid = [2.0]\nresolution = 64\n"}) {
    const ExperimentConfig c = cfg(toml);
    const RunOutput a = run(c), b = run(c);
    CHECK(a.record.payload.dump() == b.record.payload.dump());
    CHECK(a.record.version == b.record.version);
    CHECK(a.record.config_hash == b.record.config_hash);
    CHECK(a.files == b.files);
  }
}

TEST_CASE("write, reload and report") {
  const fs::path dir = scratch("report");
  CHECK_THROWS_AS(report(dir), Error);

  const RunOutput out = run(cfg("command = \"constants\""));
  write_run(out, dir);
  CHECK(fs::exists(dir / "constants.json"));
  CHECK(fs::exists(dir / "constants.csv"));
  std::ifstream in(dir / "constants.json");
  const RunRecord back = record_from_json(nlohmann::json::parse(in));
  CHECK(back.payload.dump() == out.record.payload.dump());

  Report ok = report(dir);
  CHECK(ok.records == 1);
  CHECK(ok.exit_code() == 0);
  for (const auto& r : ok.rows) CHECK(r.failed == 0);

  std::ofstream(dir / "garbage.json") << "{ not json";
  nlohmann::json bad = to_json(out.record);
  bad["status"] = "violation";
  bad["payload"]["audits"] = nlohmann::json::array({{{"check", "mass <= D_n^2/(4a)"}, {"passed", 3}, {"failed", 1}}});
  write_atomic(dir / "injected.json", bad.dump());
  const Report r = report(dir);
  CHECK(r.records == 2);
  CHECK(r.skipped.size() == 1);
  CHECK(r.violations == 1);
  CHECK(r.exit_code() == 1);
  CHECK(r.table().find("mass <= D_n^2/(4a)") != std::string::npos);
  fs::remove_all(dir);
}
