#pragma once

// The CLI subcommands and the in-memory steps they are built from. Each
// command reads a resolved RunConfig and writes files that embed it.

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "knnmt/corpus_gen.hpp"
#include "knnmt/datastore.hpp"
#include "knnmt/evaluation.hpp"
#include "knnmt/ivf.hpp"
#include "knnmt/pipeline.hpp"
#include "knnmt/run_config.hpp"
#include "knnmt/table_model.hpp"

namespace knnmt {

struct Artifacts {
  TableModel model;
  Datastore datastore;
  std::optional<IvfIndex> index;
};

/// FNV-1a 64 of a byte string, printed as 16 hex digits.
std::string checksum_hex(std::string_view bytes);
std::string file_checksum(const std::string& path);

/// Corpus named by the config: read from corpus.dir, or generated from
/// corpus.seed when `regenerate` is set. test_ref_b is empty when the
/// file does not exist.
GeneratedCorpus load_corpus(const RunConfig& config, bool regenerate);

/// Throws ConfigError("corpus.train", ...) if a training token is not in
/// the model's vocabulary.
Datastore build_datastore_checked(const TableModel& model, const ParallelCorpus& train);

/// Trains, builds the datastore and (if clusters > 0) the IVF index.
Artifacts build_artifacts(const RunConfig& config, const ParallelCorpus& train);

/// Fills static-noise parameters from validation statistics when the
/// config asks for validation scaling; otherwise returns the config as is.
PipelineConfig resolve_pipeline_config(const RunConfig& config, const Artifacts& artifacts,
                                       const ParallelCorpus& valid);

Pipeline make_pipeline(const RunConfig& config, const Artifacts& artifacts,
                       const PipelineConfig& resolved);

/// Header record used by every output: version plus resolved config.
Json run_header(const RunConfig& config, const PipelineConfig& resolved);

CandidateFile decode_candidates(const RunConfig& config, const Pipeline& pipeline,
                                const ParallelCorpus& test, std::size_t threads);

LoglikFile forced_logliks(const RunConfig& config, const Pipeline& pipeline,
                          const ParallelCorpus& test, const ParallelCorpus& test_ref_b,
                          std::size_t threads);

void cmd_gen_corpus(const RunConfig& config);
void cmd_train(const RunConfig& config);
void cmd_build(const RunConfig& config);
/// Writes output.candidates; with `force_ref`, also output.loglik.
void cmd_decode(const RunConfig& config, bool force_ref, std::size_t threads);

struct EvalOptions {
  std::string candidates;
  std::string candidates_b;
  std::string base;
  std::string refs;
  std::string loglik;
  std::string scores;
  bool mock_fluency = false;
  std::string out;
};

/// Returns the report, also written to options.out when non-empty.
Json cmd_eval(const EvalOptions& options);

}  // namespace knnmt
