#include <CLI11.hpp>
#include <iostream>

#include "qsgs/run.hpp"

using namespace qsgs;

int main(int argc, char** argv) {
  CLI::App app{"quasisymmetric equilibria in designer metrics"};
  app.set_version_flag("--version", QSGS_VERSION);
  app.require_subcommand(1);

  std::string config_path, out_dir;
  std::uint64_t seed = 0;
  std::vector<int> grid;
  bool autoscale = false;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--seed", seed, "RNG seed for property suites");
    sub->add_option("--grid", grid, "N_r N_theta")->expected(2);
    sub->add_option("--autoscale-boundary", autoscale, "rescale the boundary to the base area");
  };
  CLI::App* solve = app.add_subcommand("solve", "single deformation solve");
  CLI::App* study = app.add_subcommand("study", "scaling study over the amplitude list");
  CLI::App* ids = app.add_subcommand("identities", "randomized identity suite");
  CLI::App* base = app.add_subcommand("base-state-check", "base state, H1 and H2");
  for (CLI::App* s : {solve, study, ids, base}) add_common(s);

  CLI11_PARSE(app, argc, argv);

  RunConfig c;
  try {
    if (!config_path.empty()) c = load_config(config_path);
    CLI::App* sub = app.get_subcommands().front();
    if (sub->count("--out")) c.out_dir = out_dir;
    if (sub->count("--seed")) c.seed = seed;
    if (sub->count("--grid")) {
      c.nr = grid[0];
      c.nt = grid[1];
    }
    if (sub->count("--autoscale-boundary")) c.autoscale_boundary = autoscale;
    validate(c);

    if (*solve) return run_solve(c, std::cout);
    if (*study) return run_study(c, std::cout);
    if (*ids) return run_identities(c, std::cout);
    return run_base_state_check(c, std::cout);
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
