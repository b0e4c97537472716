#include "knnmt/commands.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "knnmt/binio.hpp"
#include "knnmt/decode.hpp"
#include "knnmt/error.hpp"
#include "knnmt/parallel.hpp"
#include "knnmt/perturb.hpp"
#include "knnmt/version.hpp"

namespace knnmt {

namespace fs = std::filesystem;

namespace {

void ensure_parent(const std::string& path) {
  const fs::path parent = fs::path(path).parent_path();
  if (parent.empty()) return;
  std::error_code ec;
  fs::create_directories(parent, ec);
  if (ec) throw IoError("cannot create directory " + parent.string() + ": " + ec.message());
}

void require_file(const std::string& path, const std::string& what, const std::string& step) {
  if (!fs::exists(path))
    throw IoError(what + " " + path + " not found; run `knnmt " + step + "` first");
}

void write_text(const std::string& path, const std::string& text) {
  ensure_parent(path);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out << text;
  out.flush();
  if (!out) throw IoError("write failed for " + path);
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

Json corpus_counts(const ParallelCorpus& corpus) {
  std::size_t target_tokens = 0;
  for (const auto& p : corpus) target_tokens += p.target.size();
  return {{"pairs", corpus.size()}, {"target_tokens", target_tokens}};
}

}  // namespace

std::string checksum_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string file_checksum(const std::string& path) { return checksum_hex(read_text(path)); }

GeneratedCorpus load_corpus(const RunConfig& config, bool regenerate) {
  if (regenerate) return generate_corpus(config.corpus.spec, config.corpus.seed);
  const auto& c = config.corpus;
  require_file(c.train_path(), "training corpus", "gen-corpus");
  GeneratedCorpus out;
  out.train = read_corpus(c.train_path());
  if (fs::exists(c.valid_path())) out.valid = read_corpus(c.valid_path());
  if (fs::exists(c.test_path())) out.test = read_corpus(c.test_path());
  if (fs::exists(c.test_ref_b_path())) out.test_ref_b = read_corpus(c.test_ref_b_path());
  return out;
}

Datastore build_datastore_checked(const TableModel& model, const ParallelCorpus& train) {
  for (std::size_t i = 0; i < train.size(); ++i) {
    for (const auto& w : train[i].target)
      if (!model.target_vocab().contains(w))
        throw ConfigError("corpus.train", "line " + std::to_string(i + 1) + ": target token '" + w +
                                              "' is not in the model vocabulary; retrain with `knnmt train`");
    for (const auto& w : train[i].source)
      if (!model.source_vocab().contains(w))
        throw ConfigError("corpus.train", "line " + std::to_string(i + 1) + ": source token '" + w +
                                              "' is not in the model vocabulary; retrain with `knnmt train`");
  }
  return build_model_datastore(model, train);
}

namespace {

std::optional<IvfIndex> build_index(const RunConfig& config, const Datastore& ds) {
  if (config.datastore.clusters == 0) return std::nullopt;
  try {
    return build_ivf(ds, config.datastore.clusters, config.datastore.kmeans_iters,
                     config.datastore.kmeans_seed);
  } catch (const InvalidInput& e) {
    throw ConfigError("datastore.clusters", e.what());
  }
}

}  // namespace

Artifacts build_artifacts(const RunConfig& config, const ParallelCorpus& train) {
  TableModel model = TableModel::train(train, config.model.params);
  Datastore ds = build_datastore_checked(model, train);
  std::optional<IvfIndex> index = build_index(config, ds);
  return {std::move(model), std::move(ds), std::move(index)};
}

PipelineConfig resolve_pipeline_config(const RunConfig& config, const Artifacts& artifacts,
                                       const ParallelCorpus& valid) {
  PipelineConfig resolved = config.pipeline;
  auto& p = resolved.perturb;
  if (p.kind == PerturbKind::static_noise && config.static_scale == StaticScale::validation) {
    if (valid.empty())
      throw ConfigError("perturb.static_scale", "validation scaling needs a non-empty validation split");
    const auto queries = teacher_forced_queries(artifacts.model, valid);
    const DistanceStats stats =
        estimate_distance_stats(artifacts.datastore, queries, config.pipeline.search.k);
    p.h_m *= stats.mean;
    p.h_s *= stats.std;
  }
  return resolved;
}

Pipeline make_pipeline(const RunConfig&, const Artifacts& artifacts, const PipelineConfig& resolved) {
  return Pipeline(artifacts.model, &artifacts.datastore,
                  artifacts.index ? &*artifacts.index : nullptr, resolved);
}

Json run_header(const RunConfig& config, const PipelineConfig& resolved) {
  Json h = {{"version", version()}, {"config", to_json(config)}};
  if (resolved.perturb.kind == PerturbKind::static_noise)
    h["static_noise"] = {{"mean", resolved.perturb.h_m}, {"stddev", resolved.perturb.h_s}};
  return h;
}

CandidateFile decode_candidates(const RunConfig& config, const Pipeline& pipeline,
                                const ParallelCorpus& test, std::size_t threads) {
  const TableModel& model = pipeline.model();
  std::vector<std::vector<TokenId>> sources;
  sources.reserve(test.size());
  for (const auto& p : test) sources.push_back(model.encode_source(p.source));
  const auto lists = decode_corpus(pipeline, config.decode, sources, threads);

  CandidateFile file;
  file.header = run_header(config, pipeline.config());
  for (std::size_t i = 0; i < lists.size(); ++i) {
    CandidateRecord r;
    r.id = i;
    r.source = test[i].source;
    for (const auto& h : lists[i].hypotheses) {
      r.hyps.push_back(model.target_vocab().decode(h.tokens));
      r.logprobs.push_back(h.logprob);
    }
    file.records.push_back(std::move(r));
  }
  return file;
}

LoglikFile forced_logliks(const RunConfig& config, const Pipeline& pipeline,
                          const ParallelCorpus& test, const ParallelCorpus& test_ref_b,
                          std::size_t threads) {
  if (!test_ref_b.empty() && test_ref_b.size() != test.size())
    throw FormatError("second reference set has " + std::to_string(test_ref_b.size()) +
                          " pairs, test set has " + std::to_string(test.size()),
                      0);
  const TableModel& model = pipeline.model();
  LoglikFile file;
  file.header = run_header(config, pipeline.config());
  file.records.resize(test.size());
  const auto score = [&](const SentencePair& pair, std::uint64_t i) -> std::optional<double> {
    const auto source = model.encode_source(pair.source);
    const auto target = model.encode_target(pair.target);
    const ForcedResult r = forced_decode(pipeline, source, target, i);
    if (r.zero_probability) return std::nullopt;
    return r.logprob;
  };
  parallel_for(test.size(), threads, [&](std::size_t i) {
    auto& rec = file.records[i];
    rec.id = i;
    rec.ref_a = score(test[i], i);
    if (!test_ref_b.empty()) {
      if (test_ref_b[i].source != test[i].source)
        throw FormatError("references disagree on the source sentence", i + 1, FormatError::line);
      rec.ref_b = score(test_ref_b[i], i);
    }
  });
  return file;
}

void cmd_gen_corpus(const RunConfig& config) {
  const auto& c = config.corpus;
  const GeneratedCorpus corpus = generate_corpus(c.spec, c.seed);
  ensure_parent(c.train_path());
  write_corpus(corpus.train, c.train_path());
  write_corpus(corpus.valid, c.valid_path());
  write_corpus(corpus.test, c.test_path());
  write_corpus(corpus.test_ref_b, c.test_ref_b_path());
  Json manifest = {{"header", {{"version", version()}, {"config", to_json(config)["corpus"]}}}};
  for (const auto& [name, path, split] :
       {std::tuple{"train", c.train_path(), &corpus.train}, std::tuple{"valid", c.valid_path(), &corpus.valid},
        std::tuple{"test", c.test_path(), &corpus.test},
        std::tuple{"test_ref_b", c.test_ref_b_path(), &corpus.test_ref_b}}) {
    Json entry = corpus_counts(*split);
    entry["checksum"] = file_checksum(path);
    manifest["splits"][name] = entry;
  }
  write_text(c.manifest_path(), manifest.dump(2) + "\n");
}

void cmd_train(const RunConfig& config) {
  const GeneratedCorpus corpus = load_corpus(config, false);
  const TableModel model = TableModel::train(corpus.train, config.model.params);
  ensure_parent(config.model.path);
  model.save(config.model.path);
}

void cmd_build(const RunConfig& config) {
  require_file(config.model.path, "model", "train");
  const TableModel model = TableModel::load(config.model.path);
  if (!(model.params() == config.model.params))
    throw ConfigError("model", "parameters differ from the trained model at " + config.model.path +
                                   "; retrain with `knnmt train`");
  const GeneratedCorpus corpus = load_corpus(config, false);
  const Datastore ds = build_datastore_checked(model, corpus.train);
  const auto& d = config.datastore;
  ensure_parent(d.path);
  write_datastore_file(ds, d.path);
  Json manifest = {{"header", {{"version", version()}, {"config", to_json(config)}}},
                   {"entries", ds.size()},
                   {"dim", ds.dim()},
                   {"vocab_size", ds.vocab_size()},
                   {"datastore_checksum", file_checksum(d.path)}};
  if (auto index = build_index(config, ds)) {
    ensure_parent(d.index_path);
    write_ivf_file(*index, d.index_path);
    manifest["clusters"] = index->n_clusters();
    manifest["index_checksum"] = file_checksum(d.index_path);
  }
  write_text(d.manifest_path, manifest.dump(2) + "\n");
}

void cmd_decode(const RunConfig& config, bool force_ref, std::size_t threads) {
  require_file(config.model.path, "model", "train");
  require_file(config.datastore.path, "datastore", "build");
  if (config.pipeline.search.use_ivf) require_file(config.datastore.index_path, "index", "build");
  Artifacts art{TableModel::load(config.model.path), read_datastore_file(config.datastore.path),
                std::nullopt};
  if (config.pipeline.search.use_ivf) art.index = read_ivf_file(config.datastore.index_path);

  const auto& c = config.corpus;
  require_file(c.test_path(), "test corpus", "gen-corpus");
  const ParallelCorpus test = read_corpus(c.test_path());
  ParallelCorpus valid;
  if (config.pipeline.perturb.kind == PerturbKind::static_noise &&
      config.static_scale == StaticScale::validation) {
    require_file(c.valid_path(), "validation corpus", "gen-corpus");
    valid = read_corpus(c.valid_path());
  }
  const PipelineConfig resolved = resolve_pipeline_config(config, art, valid);
  const Pipeline pipeline = make_pipeline(config, art, resolved);

  const CandidateFile candidates = decode_candidates(config, pipeline, test, threads);
  ensure_parent(config.output.candidates);
  write_candidates(candidates, config.output.candidates);

  if (force_ref) {
    ParallelCorpus ref_b;
    if (fs::exists(c.test_ref_b_path())) ref_b = read_corpus(c.test_ref_b_path());
    const LoglikFile ll = forced_logliks(config, pipeline, test, ref_b, threads);
    ensure_parent(config.output.loglik);
    write_loglik(ll, config.output.loglik);
  }
}

Json cmd_eval(const EvalOptions& o) {
  if (o.candidates.empty()) throw ConfigError("--candidates", "a candidate file is required");
  if (o.refs.empty()) throw ConfigError("--refs", "a reference file is required");
  const CandidateFile a = read_candidates(o.candidates);
  std::optional<CandidateFile> b, base;
  std::optional<LoglikFile> ll;
  std::optional<std::vector<std::vector<double>>> scores;
  if (!o.candidates_b.empty()) b = read_candidates(o.candidates_b);
  if (!o.base.empty()) base = read_candidates(o.base);
  if (!o.loglik.empty()) ll = read_loglik(o.loglik);
  if (!o.scores.empty()) scores = read_scores(o.scores, a.records);

  EvalInputs in;
  in.candidates = &a;
  in.candidates_b = b ? &*b : nullptr;
  in.base = base ? &*base : nullptr;
  in.refs = read_references(o.refs);
  in.loglik = ll ? &*ll : nullptr;
  in.fluency_scores = scores ? &*scores : nullptr;
  in.mock_fluency = o.mock_fluency;
  Json report = make_report(in);
  report["header"]["inputs"] = {{"candidates", o.candidates}, {"candidates_b", o.candidates_b},
                                {"base", o.base},             {"refs", o.refs},
                                {"loglik", o.loglik},         {"scores", o.scores},
                                {"mock_fluency", o.mock_fluency}};
  if (!o.out.empty()) write_text(o.out, report.dump(2) + "\n");
  return report;
}

}  // namespace knnmt
