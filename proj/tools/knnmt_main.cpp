#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "knnmt/commands.hpp"
#include "knnmt/error.hpp"
#include "knnmt/run_config.hpp"
#include "knnmt/sweep.hpp"
#include "knnmt/version.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitInvariant = 4;

struct Common {
  std::string config;
  std::vector<std::string> overrides;
  std::size_t threads = 1;
};

void add_common(CLI::App* cmd, Common& c, bool with_threads) {
  cmd->add_option("-c,--config", c.config, "RunConfig JSON file (defaults when omitted)");
  cmd->add_option("--set", c.overrides, "Override a config value, e.g. --set score.lambda=0.3");
  if (with_threads) cmd->add_option("--threads", c.threads, "Worker threads")->check(CLI::PositiveNumber);
}

int fail(int code, const std::string& kind, const std::string& what) {
  std::cerr << "knnmt: " << kind << ": " << what << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Perturbed kNN-MT decoding toolkit"};
  app.set_version_flag("--version", std::string(knnmt::version()));
  app.require_subcommand(1);

  Common common;
  auto* gen = app.add_subcommand("gen-corpus", "Write the synthetic train/valid/test splits");
  auto* train = app.add_subcommand("train", "Train the count model");
  auto* build = app.add_subcommand("build", "Build the datastore and IVF index");
  auto* decode = app.add_subcommand("decode", "Decode the test split into N-best candidates");
  auto* print = app.add_subcommand("print-config", "Print the resolved config");
  for (auto* cmd : {gen, train, build, print}) add_common(cmd, common, false);
  add_common(decode, common, true);
  bool force_ref = false;
  decode->add_flag("--force-ref", force_ref, "Also write forced-decoding log-likelihoods of the references");

  auto* eval = app.add_subcommand("eval", "Score candidate files");
  knnmt::EvalOptions eo;
  add_common(eval, common, false);
  eval->add_option("--candidates", eo.candidates, "Candidates JSONL (default: output.candidates)");
  eval->add_option("--candidates-b", eo.candidates_b, "Second system, enables MergedBLEU");
  eval->add_option("--base", eo.base, "Base system candidates, enables DEQ");
  eval->add_option("--refs", eo.refs, "Reference corpus TSV (default: the config's test split)");
  eval->add_option("--loglik", eo.loglik, "Log-likelihood JSONL from decode --force-ref, enables MADLL");
  eval->add_option("--scores", eo.scores, "Fluency scores JSONL, enables SPLL");
  eval->add_flag("--mock-fluency", eo.mock_fluency, "SPLL with the length mock scorer");
  eval->add_option("--out", eo.out, "Report path (default: output.report)");

  auto* sweep = app.add_subcommand("sweep", "Run a hyperparameter sweep");
  std::string sweep_path, plot_path;
  std::size_t sweep_threads = 1;
  sweep->add_option("spec", sweep_path, "Sweep spec JSON")->required();
  sweep->add_option("--threads", sweep_threads, "Worker threads")->check(CLI::PositiveNumber);
  sweep->add_option("--plot", plot_path, "Also write an SVG scatter of DP against BLEU@N");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*sweep) {
      knnmt::cmd_sweep(knnmt::parse_sweep_spec(knnmt::read_json_file(sweep_path)), sweep_threads, plot_path);
      return 0;
    }
    const knnmt::RunConfig config = knnmt::load_run_config(common.config, common.overrides);
    if (*print) {
      std::cout << knnmt::to_json(config).dump(2) << "\n";
    } else if (*gen) {
      knnmt::cmd_gen_corpus(config);
    } else if (*train) {
      knnmt::cmd_train(config);
    } else if (*build) {
      knnmt::cmd_build(config);
    } else if (*decode) {
      knnmt::cmd_decode(config, force_ref, common.threads);
    } else if (*eval) {
      if (eo.candidates.empty()) eo.candidates = config.output.candidates;
      if (eo.refs.empty()) eo.refs = config.corpus.test_path();
      if (eo.out.empty()) eo.out = config.output.report;
      knnmt::cmd_eval(eo);
    }
  } catch (const knnmt::ConfigError& e) {
    return fail(kExitConfig, "config error", e.what());
  } catch (const knnmt::InvariantViolation& e) {
    return fail(kExitInvariant, "invariant violation", e.what());
  } catch (const knnmt::FormatError& e) {
    return fail(kExitData, "data error", e.what());
  } catch (const knnmt::IoError& e) {
    return fail(kExitData, "I/O error", e.what());
  } catch (const knnmt::InvalidInput& e) {
    return fail(kExitData, "invalid input", e.what());
  } catch (const std::exception& e) {
    return fail(1, "error", e.what());
  }
  return 0;
}
