// mdt — missing-data-techniques speech recognition workbench CLI.
//
// Subcommands run one pipeline stage each against the artifact directory
// named by the config; `run-all` runs every stage in order, skipping stages
// whose artifacts are already up to date. Exit codes: 0 success, 1
// validation error (bad flags, bad config, missing prerequisite artifacts),
// 2 runtime failure.

#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "mdt/experiment.hpp"

namespace {

struct CliOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> jobs;
  std::optional<std::string> out_dir;
};

int run(const std::string& subcommand, const CliOptions& opt) {
  mdt::Config cfg = mdt::Config::parse_file(opt.config_path);
  mdt::Experiment experiment(cfg, opt.seed, opt.jobs, opt.out_dir);
  if (subcommand == "run-all") {
    experiment.run_all();
  } else {
    experiment.run_stage(mdt::parse_stage(subcommand));
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "missing-data-techniques speech recognition workbench\n"
      "stages: gen-corpus features train-hmm oracle-masks align\n"
      "        train-estimators decode evaluate report run-all"};
  app.require_subcommand(1);

  CliOptions opt;
  std::string invoked;

  const char* names[] = {"gen-corpus", "features",  "train-hmm",
                         "oracle-masks", "align",   "train-estimators",
                         "decode",     "evaluate",  "report",
                         "run-all"};
  for (const char* name : names) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", opt.config_path, "experiment config file")
        ->required();
    sub->add_option_function<std::uint64_t>(
        "--seed", [&opt](const std::uint64_t& v) { opt.seed = v; },
        "override the config master seed");
    sub->add_option_function<unsigned>(
        "--jobs", [&opt](const unsigned& v) { opt.jobs = v; },
        "worker threads (0 = hardware)");
    sub->add_option_function<std::string>(
        "--out", [&opt](const std::string& v) { opt.out_dir = v; },
        "override the config output directory");
    sub->callback([&invoked, name] { invoked = name; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help();
    return 1;
  }

  try {
    return run(invoked, opt);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "runtime failure: " << e.what() << "\n";
    return 2;
  }
}
