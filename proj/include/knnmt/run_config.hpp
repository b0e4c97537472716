#pragma once

// Declarative run configuration shared by every CLI command. Documents are
// JSON objects; unknown keys and wrongly typed values are rejected with
// the dotted key path. Precedence, lowest first: built-in defaults, the
// config file, then `--set key.path=value` overrides.

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "knnmt/corpus_gen.hpp"
#include "knnmt/decode.hpp"
#include "knnmt/pipeline.hpp"
#include "knnmt/table_model.hpp"

namespace knnmt {

using Json = nlohmann::json;

/// How static-noise h_m / h_s are read: as the noise mean and std
/// themselves, or as multipliers of the validation distance mean and std.
enum class StaticScale { absolute, validation };

std::string to_string(StaticScale scale);
StaticScale parse_static_scale(const std::string& name);

struct CorpusSection {
  std::string dir = "data";
  std::uint64_t seed = 0;
  CorpusSpec spec;

  std::string train_path() const { return dir + "/train.tsv"; }
  std::string valid_path() const { return dir + "/valid.tsv"; }
  std::string test_path() const { return dir + "/test.tsv"; }
  std::string test_ref_b_path() const { return dir + "/test.ref_b.tsv"; }
  std::string manifest_path() const { return dir + "/corpus.json"; }
};

struct ModelSection {
  std::string path = "work/model.json";
  TableModelParams params;
};

struct DatastoreSection {
  std::string path = "work/datastore.knnd";
  std::string index_path = "work/datastore.knni";
  std::string manifest_path = "work/datastore.json";
  std::size_t clusters = 64;  // 0 skips the index
  std::size_t kmeans_iters = 20;
  std::uint64_t kmeans_seed = 0;
};

struct OutputSection {
  std::string candidates = "work/candidates.jsonl";
  std::string loglik = "work/loglik.jsonl";
  std::string report = "work/report.json";
};

struct RunConfig {
  CorpusSection corpus;
  ModelSection model;
  DatastoreSection datastore;
  PipelineConfig pipeline;
  StaticScale static_scale = StaticScale::absolute;
  DecodeConfig decode;
  OutputSection output;

  /// Range checks on the assembled values; throws ConfigError.
  void validate() const;
};

/// Every field, seeds included.
Json to_json(const RunConfig& config);

/// Strict conversion. Seeds must be given explicitly.
RunConfig run_config_from_json(const Json& doc);

/// Applies "a.b.c=value" to `doc`. The value is parsed as JSON when
/// possible and taken as a string otherwise.
void apply_override(Json& doc, const std::string& assignment);

/// Default document with every field present.
Json default_config_json();

/// Reads `path` (empty for defaults only), applies overrides, converts.
RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides);

Json read_json_file(const std::string& path);

}  // namespace knnmt
