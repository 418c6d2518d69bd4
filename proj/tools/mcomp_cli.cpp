#include <iostream>

#include <CLI11.hpp>

#include "mcomp/cli/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Market completeness diagnostics: validate, price, complete, hedge, flagship"};
  app.require_subcommand(1);

  mcomp::cli::Invocation inv;
  std::uint64_t seed = 0;
  int workers = 0;
  std::string out;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", inv.config, "JSON run configuration")->required();
    sub->add_option("--out", out, "output directory (overrides output.dir)");
    sub->add_option("--seed", seed, "Monte Carlo seed (overrides mc.seed)");
    sub->add_option("--workers", workers, "worker threads (default: MCOMP_WORKERS or hardware)")
        ->check(CLI::Range(1, 1024));
    sub->add_option("--format", inv.format, "tabular output format")->check(CLI::IsMember({"csv", "json"}));
  };
  auto* validate = app.add_subcommand("validate", "assumption probes and analytic envelope checks");
  auto* price = app.add_subcommand("price", "solve the pricing PDE");
  auto* complete = app.add_subcommand("complete", "completeness verdict");
  auto* hedge = app.add_subcommand("hedge", "Monte Carlo replication of a target claim");
  auto* flagship = app.add_subcommand("flagship", "full stochastic volatility pipeline and report bundle");
  for (auto* sub : {validate, price, complete, hedge, flagship}) add_common(sub);
  hedge->add_option("--target", inv.target, "claim to replicate")
      ->check(CLI::IsMember({"call", "digital", "forward", "put"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return mcomp::cli::kConfigError;
  }

  for (auto* sub : app.get_subcommands()) {
    if (sub->count("--out")) inv.out = out;
    if (sub->count("--seed")) inv.seed = seed;
    if (sub->count("--workers")) inv.workers = workers;
    return mcomp::cli::run_command(sub->get_name(), inv, std::cout, std::cerr);
  }
  return mcomp::cli::kConfigError;
}
