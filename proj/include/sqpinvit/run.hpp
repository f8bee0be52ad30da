#pragma once

#include <optional>
#include <string>

#include "sqpinvit/model.hpp"
#include "sqpinvit/subspace.hpp"

namespace sqpinvit {

/// Experiment configuration; normally parsed from a JSON file with CLI
/// overrides on top. Exactly one of model / coeffs_path defines the problem.
struct RunConfig {
  std::optional<ModelSpec> model;
  std::string coeffs_path;

  std::string mode = "outer";  // inner | outer | subspace
  int D = 1;
  Real tau = 1e-6;
  Real c0 = 0.1;
  Real alpha = 1.0;
  Real t_eig = 0.5;
  Real eps_num = -1.0;

  std::string constants_source = "oracle";  // oracle | extrapolate | user
  Real user_c = 0.0;
  Real user_delta = 0.0;
  Real user_lambda1_lower = 0.0;
  std::vector<int> k_low = {12, 14};
  Index oracle_cap = 4000;

  int max_inner = 500;
  int max_outer = 64;
  Real eta0 = 0.0;  // 0: the derived default
  unsigned seed = 0;
  std::string out_dir = ".";
  bool deterministic_output = false;  // zero wall times (byte-stable reruns)
  bool dense_check = true;            // emit dense_check.json when the cap admits
};

struct RunResult {
  int exit_code = 0;  // 0 ok, 2 config, 3 non-convergence, 4 oracle cap
  std::string message;
  Real lambda = 0.0;
  std::vector<Real> lambdas;
  SolveStatus status = SolveStatus::Converged;
};

RunConfig config_from_json_file(const std::string& path);

/// Executes the configured run; writes trace.csv, ranks.csv, summary.json
/// (and dense_check.json when the sector is oracle-sized) into out_dir.
RunResult run(const RunConfig& config);

/// Oracle-augmented run report: exact errors next to the certified bounds,
/// rows with violated admissibility omitted. Requires the dense oracle.
RunResult compare_with_oracle(const RunConfig& config);

}  // namespace sqpinvit
