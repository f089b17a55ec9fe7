#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace masslab {

/// Every tolerance the runner applies, with its default.
struct Tolerances {
  double dual_gap = 1e-8;         // |(-J(beta)) - beta(p)|
  double drift = 1e-4;            // explorer mass drift at double resolution (relative to 1 + |m|)
  double margin = 1e-3;           // Y_upper - a needed to certify a level
  std::size_t jgeq_trials = 100;  // random fields per audited metric
  double bubble_slack = 1e-6;     // on Q(psi) <= sigma - G^n A^n/(B + A)^n
  double blowup_lambda = 1e-6;    // |lambda_1(g_{t_inf})|
  double fem_relative = 0.05;     // fem vs radial, mass and lambda_1
  double fem_zero_mass = 0.05;    // |m| for metrics with vanishing mass
  double blend_noise = 1e-7;      // deviation bound for conformally trivial blends
  double blend_rate = 1.0;        // minimal fitted blend rate
};

struct ExperimentConfig {
  std::string command;
  int n = 3;
  std::optional<double> a;
  std::vector<double> a_grid;
  std::size_t resolution = 256;
  std::string family;          // per-command default when empty
  std::vector<double> theta;   // family reference point when empty
  std::vector<double> theta_neg;  // blowup: the member with lambda_1 < 0
  std::uint64_t seed = 1;
  std::string output = "masslab-out";
  std::size_t budget = 40;     // evaluations per envelope search
  int level = 3;               // fem mesh level
  std::string blend = "round-flat";
  std::vector<double> epsilons{0.4, 0.2, 0.1, 0.05};
  std::vector<double> offsets{0.1, 0.03, 0.01};
  int eta_smoothness = 5;
  Tolerances tol;
};

std::vector<std::string> command_names();

/// Reads a TOML file. Unknown keys and wrong types throw Config naming the field path.
ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig config_from_toml_string(const std::string& text);

/// Fills per-command defaults and checks every field; throws Config with the field path.
ExperimentConfig validate_config(ExperimentConfig cfg);

/// Everything that determines the payload (the output directory is excluded).
nlohmann::json config_to_json(const ExperimentConfig& cfg);
nlohmann::json to_json(const Tolerances& t);

/// Hex SHA-1 of "blob <size>\0<text>", as git hashes a file.
std::string content_hash(const std::string& text);

struct AuditCount {
  std::string name;
  std::size_t passed = 0;
  std::size_t failed = 0;
};

struct RunRecord {
  std::string command;
  std::string config_hash;
  std::string version;  // content hash of the serialized payload
  std::string started;
  std::string finished;
  std::string status;   // ok, violation, error
  std::string error;
  nlohmann::json config;
  nlohmann::json tolerances;
  nlohmann::json payload;  // deterministic given config; carries "audits"
};

struct RunOutput {
  RunRecord record;
  std::vector<std::pair<std::string, std::string>> files;  // name, content
  int exit_code() const { return record.status == "ok" ? 0 : 1; }
};

/// Runs a validated config. Library errors become status "error", failed audits status
/// "violation"; both give exit code 1.
RunOutput run(const ExperimentConfig& cfg);

nlohmann::json to_json(const RunRecord& r);
RunRecord record_from_json(const nlohmann::json& j);

/// Writes every file and <command>.json into `dir` (write to a temporary, then rename).
void write_run(const RunOutput& out, const std::filesystem::path& dir);
void write_atomic(const std::filesystem::path& path, const std::string& content);

struct ReportRow {
  std::string check;
  std::size_t passed = 0;
  std::size_t failed = 0;
};

struct Report {
  std::size_t records = 0;
  std::size_t ok = 0;
  std::size_t violations = 0;
  std::size_t errors = 0;
  std::vector<std::string> skipped;  // unreadable files, with the reason
  std::vector<ReportRow> rows;       // sorted by check name
  std::string table() const;
  int exit_code() const;
};

/// Aggregates the audits of every record in `dir`. Throws InvalidArgument when the directory
/// holds no readable record.
Report report(const std::filesystem::path& dir);

}  // namespace masslab
