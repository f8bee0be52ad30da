#include <CLI11.hpp>

#include <iostream>

#include "sqpinvit/run.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Rank-adaptive preconditioned inverse iteration for second-quantized "
               "Hamiltonians on block-sparse matrix product states"};
  std::string config_path;
  std::string coeffs_path;
  std::string out_dir;
  std::string mode;
  double tau = -1.0;
  long oracle_cap = -1;
  int d = -1;
  bool oracle_compare = false;

  app.add_option("config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_option("--coeffs", coeffs_path, "coefficient file (overrides the config problem)");
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--mode", mode, "inner | outer | subspace");
  app.add_option("--tau", tau, "termination tolerance");
  app.add_option("--oracle-cap", oracle_cap, "dense-oracle sector-dimension cap");
  app.add_option("--d", d, "number of eigenpairs (subspace mode)");
  app.add_flag("--oracle-compare", oracle_compare,
               "also emit oracle_report.json with exact errors next to the bounds");
  CLI11_PARSE(app, argc, argv);

  sqpinvit::RunConfig cfg;
  try {
    if (!config_path.empty()) cfg = sqpinvit::config_from_json_file(config_path);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }
  if (!coeffs_path.empty()) {
    cfg.coeffs_path = coeffs_path;
    cfg.model.reset();
  }
  if (!out_dir.empty()) cfg.out_dir = out_dir;
  if (!mode.empty()) cfg.mode = mode;
  if (tau >= 0.0) cfg.tau = tau;
  if (oracle_cap > 0) cfg.oracle_cap = oracle_cap;
  if (d > 0) cfg.D = d;

  sqpinvit::RunResult r =
      oracle_compare ? sqpinvit::compare_with_oracle(cfg) : sqpinvit::run(cfg);
  if (r.exit_code != 0) {
    std::cerr << "error (" << r.exit_code << "): " << r.message << "\n";
  } else if (!r.lambdas.empty()) {
    std::cout << "lambdas:";
    for (double l : r.lambdas) std::cout << ' ' << l;
    std::cout << "\n";
  } else {
    std::cout << "lambda: " << r.lambda << "\n";
  }
  return r.exit_code;
}
