#pragma once

// Hyperparameter sweeps: a base RunConfig, axes whose cartesian product
// gives the config points, and replicate seeds. Every (point, seed) is
// decoded and scored in memory; DEQ is measured against the same config
// with perturbation switched off.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "knnmt/commands.hpp"
#include "knnmt/evaluation.hpp"
#include "knnmt/run_config.hpp"

namespace knnmt {

struct SweepAxis {
  std::string key;  // dotted config path
  std::vector<Json> values;
};

struct SweepSpec {
  Json base = default_config_json();
  /// Explicit override sets, each {"key.path": value, ...}; combined with
  /// every axis combination. Empty means a single empty set.
  std::vector<Json> points;
  std::vector<SweepAxis> axes;
  std::vector<std::uint64_t> seeds{0};
  /// Config fields set to the replicate seed.
  std::vector<std::string> seed_fields{"perturb.seed", "decode.seed"};
  bool regenerate_corpus = false;
  bool madll = false;
  std::size_t max_points = 512;
  std::string output = "work/sweep.csv";
};

/// Strict parse. Axes are [{"key", "values"}] or [{"key", "from", "to",
/// "step"}]; "base_config" names a RunConfig file used instead of "base".
SweepSpec parse_sweep_spec(const Json& doc);
Json to_json(const SweepSpec& spec);

struct SweepPoint {
  std::size_t point = 0;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, Json>> settings;
  RunConfig config;
};

/// All (point, seed) configs in output order. Throws ConfigError when the
/// count exceeds max_points, before anything runs.
std::vector<SweepPoint> expand_sweep(const SweepSpec& spec);

struct PointResult {
  CoreMetrics metrics;
  std::optional<double> madll;
};

/// Decodes the test split under `config` and scores it.
PointResult evaluate_config(const RunConfig& config, const GeneratedCorpus& corpus,
                            const Artifacts& artifacts, bool with_madll);

struct SweepRow {
  SweepPoint point;
  PointResult result;
  std::optional<double> deq;
};

std::vector<SweepRow> run_sweep(const SweepSpec& spec, std::size_t threads);

/// One header comment line, a column line, then one line per row.
std::string sweep_csv(const SweepSpec& spec, const std::vector<SweepRow>& rows);

/// Scatter of DP against BLEU@N.
std::string sweep_svg(const std::vector<SweepRow>& rows);

void cmd_sweep(const SweepSpec& spec, std::size_t threads, const std::string& plot_path);

}  // namespace knnmt
