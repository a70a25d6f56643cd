// Command-line front end: bdgkit <groundstate|bdg|perturb|validate|timing>
//   --config PATH [--out DIR] [--seed U64]

#include <CLI11.hpp>
#include <iostream>

#include "bdgkit/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Ground states and Bogoliubov excitation spectra of two-component condensates"};
  app.require_subcommand(1);
  // Options given after the subcommand name belong to the main app as well;
  // subcommands inherit this setting, so it precedes add_subcommand.
  app.fallthrough();

  std::string config;
  std::string out = "out";
  std::optional<std::uint64_t> seed;
  app.add_option("--config", config, "key = value configuration file")->required();
  app.add_option("--out", out, "output directory");
  app.add_option("--seed", seed, "seed for the eigensolver's starting block");

  using Command = int (*)(const bdgkit::RunConfig&, const std::filesystem::path&, std::ostream&);
  Command command = nullptr;
  const std::pair<const char*, Command> commands[] = {
      {"groundstate", bdgkit::cmd_groundstate},
      {"bdg", bdgkit::cmd_bdg},
      {"perturb", bdgkit::cmd_perturb},
      {"validate", bdgkit::cmd_validate},
      {"timing", bdgkit::cmd_timing},
  };
  const char* help[] = {
      "minimize the energy and store the ground state",
      "compute the lowest excitations, write spectrum.csv and mode files",
      "write perturbed densities for stored modes",
      "convergence, dense-oracle and invariant checks; exit 0 iff all pass",
      "eigensolver wall time over the sweep sizes",
  };
  for (std::size_t i = 0; i < std::size(commands); ++i) {
    app.add_subcommand(commands[i].first, help[i])->callback([&command, c = commands[i].second] {
      command = c;
    });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    auto cfg = bdgkit::load_config(config);
    if (seed) cfg.solver.seed = *seed;
    return command(cfg, out, std::cout);
  } catch (const bdgkit::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return bdgkit::exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 4;
  }
}
