// Experiment runner for the double obstacle lab.
//
//   fbl_cli <solve|analyze|blowup|boundary|report> --config FILE [--out DIR] [--threads N] [--seed S]
//
// Exit status: 0 success, 1 invalid input (config, files, parameters), 2 numerical failure.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "fbl/config.hpp"
#include "fbl/pipeline.hpp"

namespace {

int exit_code(fbl::ErrorKind k) {
  switch (k) {
    case fbl::ErrorKind::numerical:
    case fbl::ErrorKind::not_a_graph: return 2;
    default: return 1;
  }
}

struct Args {
  std::string config;
  std::optional<std::string> out;
  int threads = 1;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* sub, Args& a) {
  sub->add_option("--config", a.config, "experiment config file")->required();
  sub->add_option("--out", a.out, "output directory (overrides the config)");
  sub->add_option("--threads", a.threads, "worker threads")->check(CLI::PositiveNumber);
  sub->add_option("--seed", a.seed, "seed for randomized centre selection (overrides the config)");
}

int run(const std::string& cmd, const Args& a) {
  using namespace fbl::pipeline;
  fbl::ExperimentConfig cfg = fbl::load_experiment(a.config);
  RunOptions opt;
  opt.out = a.out ? std::filesystem::path(*a.out) : cfg.output;
  opt.threads = a.threads;
  const std::uint64_t seed = a.seed ? *a.seed : cfg.seed;

  Files files;
  if (cmd == "solve") {
    const Solved s = obtain(cfg, cfg.problem.h, opt.threads);
    const auto j = run_solve(cfg, s, files);
    std::cout << "converged in " << j["solve"]["iterations"] << " sweeps, d2_sup " << j["solve"]["d2_sup"] << "\n";
  } else if (cmd == "analyze") {
    const Solved s = obtain(cfg, cfg.problem.h, opt.threads);
    const auto j = run_analyze(cfg, s, seed, files);
    std::cout << "weiss violation " << j["weiss"]["monotone_violation"] << ", acf violation "
              << j["acf"]["monotone_violation"] << "\n";
  } else if (cmd == "blowup") {
    const double h = cfg.blowup.h > 0.0 ? cfg.blowup.h : cfg.problem.h;
    const Solved s = obtain(cfg, h, opt.threads);
    const auto j = run_blowup(cfg, s, files);
    std::cout << "verdict " << j["verdict"].get<std::string>() << "\n";
  } else if (cmd == "boundary") {
    const Solved s = obtain(cfg, cfg.problem.h, opt.threads);
    const auto j = run_boundary(cfg, s, files);
    std::cout << j["curves"]["gamma"] << " Gamma curves, " << j["curves"]["gamma_psi"] << " Gamma^psi curves\n";
  } else {
    const auto j = run_report(cfg, seed, opt.threads, files);
    for (const auto& c : j["checks"])
      std::cout << (c["pass"].get<bool>() ? "PASS " : "FAIL ") << c["name"].get<std::string>() << "\n";
    std::cout << (j["all_pass"].get<bool>() ? "all checks passed" : "some checks failed") << "\n";
  }
  write_all(opt, files);
  std::cout << "wrote " << files.size() << " files to " << opt.out.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Double obstacle problem lab"};
  app.require_subcommand(1);
  Args args;
  std::string chosen;
  for (const char* name : {"solve", "analyze", "blowup", "boundary", "report"}) {
    static const std::map<std::string, std::string> help{
        {"solve", "solve the configured problem; writes u.csv, mask.csv, report.json"},
        {"analyze", "Weiss, ACF, thickness, non-degeneracy and directional checks"},
        {"blowup", "blowup study at the Gamma point nearest the configured centre"},
        {"boundary", "extract Gamma and Gamma^psi; C1 and Lipschitz diagnostics"},
        {"report", "run everything and bundle all verdicts into report.json"}};
    CLI::App* sub = app.add_subcommand(name, help.at(name));
    add_common(sub, args);
    sub->callback([&chosen, name] { chosen = name; });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }
  try {
    return run(chosen, args);
  } catch (const fbl::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
