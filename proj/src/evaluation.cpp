#include "knnmt/evaluation.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "knnmt/error.hpp"
#include "knnmt/version.hpp"

namespace knnmt {

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  return out;
}

void close_out(std::ofstream& out, const std::string& path) {
  out.flush();
  if (!out) throw IoError("write failed for " + path);
}

// Calls fn(json, line_no) for every non-header line.
template <class F>
Json read_jsonl(const std::string& path, F&& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  Json header = Json::object();
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    Json j = Json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw FormatError(path + ": invalid JSON line", line_no, FormatError::line);
    if (j.contains("header")) {
      header = j["header"];
      continue;
    }
    try {
      fn(j, line_no);
    } catch (const Json::exception& e) {
      throw FormatError(path + ": " + e.what(), line_no, FormatError::line);
    } catch (const InvalidInput& e) {
      throw FormatError(path + ": " + e.what(), line_no, FormatError::line);
    }
  }
  return header;
}

std::uint64_t record_id(const Json& j) {
  if (!j.contains("id") || !j["id"].is_number_unsigned())
    throw InvalidInput("record needs a non-negative integer \"id\"");
  return j["id"].get<std::uint64_t>();
}

Json optional_number(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

std::optional<double> read_optional_number(const Json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return j[key].get<double>();
}

metrics::NBestLists to_lists(const std::vector<CandidateRecord>& records, WordInterner& words) {
  metrics::NBestLists lists;
  lists.reserve(records.size());
  for (const auto& r : records) {
    auto& list = lists.emplace_back();
    for (const auto& h : r.hyps) list.push_back(words.encode(h));
  }
  return lists;
}

std::vector<metrics::Sentence> to_sentences(const std::vector<Words>& refs, WordInterner& words) {
  std::vector<metrics::Sentence> out;
  out.reserve(refs.size());
  for (const auto& r : refs) out.push_back(words.encode(r));
  return out;
}

Json pct(double v) { return 100.0 * v; }

const Json kUndefined = "undefined";

}  // namespace

void write_candidates(const CandidateFile& file, const std::string& path) {
  auto out = open_out(path);
  out << Json{{"header", file.header}}.dump() << '\n';
  for (const auto& r : file.records) {
    Json hyps = Json::array();
    for (std::size_t i = 0; i < r.hyps.size(); ++i)
      hyps.push_back({{"tokens", r.hyps[i]}, {"logprob", r.logprobs[i]}, {"rank", i}});
    out << Json{{"id", r.id}, {"source", join_tokens(r.source)}, {"hyps", hyps}}.dump() << '\n';
  }
  close_out(out, path);
}

CandidateFile read_candidates(const std::string& path) {
  CandidateFile file;
  file.header = read_jsonl(path, [&](const Json& j, std::size_t line_no) {
    CandidateRecord r;
    r.id = record_id(j);
    r.source = split_tokens(j.at("source").get<std::string>());
    const Json& hyps = j.at("hyps");
    if (!hyps.is_array()) throw FormatError(path + ": \"hyps\" must be an array", line_no, FormatError::line);
    for (std::size_t i = 0; i < hyps.size(); ++i) {
      if (hyps[i].at("rank").get<std::size_t>() != i)
        throw FormatError(path + ": hypotheses out of rank order", line_no, FormatError::line);
      r.hyps.push_back(hyps[i].at("tokens").get<Words>());
      r.logprobs.push_back(hyps[i].at("logprob").get<double>());
    }
    file.records.push_back(std::move(r));
  });
  return file;
}

void write_loglik(const LoglikFile& file, const std::string& path) {
  auto out = open_out(path);
  out << Json{{"header", file.header}}.dump() << '\n';
  for (const auto& r : file.records)
    out << Json{{"id", r.id}, {"ref_a", optional_number(r.ref_a)}, {"ref_b", optional_number(r.ref_b)}}
               .dump()
        << '\n';
  close_out(out, path);
}

LoglikFile read_loglik(const std::string& path) {
  LoglikFile file;
  file.header = read_jsonl(path, [&](const Json& j, std::size_t) {
    file.records.push_back({record_id(j), read_optional_number(j, "ref_a"), read_optional_number(j, "ref_b")});
  });
  return file;
}

std::vector<std::vector<double>> read_scores(const std::string& path,
                                             const std::vector<CandidateRecord>& shape) {
  std::vector<std::vector<double>> scores(shape.size());
  std::vector<std::vector<char>> seen(shape.size());
  for (std::size_t i = 0; i < shape.size(); ++i) {
    scores[i].assign(shape[i].hyps.size(), 0.0);
    seen[i].assign(shape[i].hyps.size(), 0);
  }
  read_jsonl(path, [&](const Json& j, std::size_t line_no) {
    const std::uint64_t id = record_id(j);
    const std::size_t rank = j.at("rank").get<std::size_t>();
    if (id >= shape.size() || rank >= scores[id].size())
      throw FormatError(path + ": score for unknown candidate id " + std::to_string(id) + " rank " +
                            std::to_string(rank),
                        line_no);
    if (seen[id][rank]) throw FormatError(path + ": duplicate score", line_no, FormatError::line);
    seen[id][rank] = 1;
    scores[id][rank] = j.at("score").get<double>();
  });
  std::vector<std::string> missing;
  for (std::size_t i = 0; i < seen.size(); ++i)
    for (std::size_t r = 0; r < seen[i].size(); ++r)
      if (!seen[i][r]) missing.push_back(std::to_string(i) + "/" + std::to_string(r));
  if (!missing.empty()) {
    std::string list;
    for (std::size_t i = 0; i < missing.size() && i < 10; ++i) list += (i ? ", " : "") + missing[i];
    throw FormatError(path + ": missing scores for id/rank " + list, 0);
  }
  return scores;
}

TokenId WordInterner::intern(const std::string& word) {
  auto [it, inserted] = ids_.try_emplace(word, static_cast<TokenId>(ids_.size()));
  return it->second;
}

metrics::Sentence WordInterner::encode(const Words& words) {
  metrics::Sentence s;
  s.reserve(words.size());
  for (const auto& w : words) s.push_back(intern(w));
  return s;
}

void check_alignment(const std::vector<CandidateRecord>& records, std::size_t n_refs,
                     const std::string& what) {
  std::vector<std::string> bad;
  std::set<std::uint64_t> present;
  for (std::size_t i = 0; i < records.size(); ++i) {
    present.insert(records[i].id);
    if (records[i].id != i || records[i].id >= n_refs) bad.push_back(std::to_string(records[i].id));
  }
  for (std::uint64_t id = 0; id < n_refs; ++id)
    if (!present.count(id)) bad.push_back(std::to_string(id) + " (missing)");
  if (!bad.empty()) {
    std::string list;
    for (std::size_t i = 0; i < bad.size() && i < 20; ++i) list += (i ? ", " : "") + bad[i];
    if (bad.size() > 20) list += ", ...";
    throw FormatError(what + " is not aligned with the references; offending ids: " + list, 0);
  }
  for (const auto& r : records)
    if (r.hyps.size() != records.front().hyps.size() || r.hyps.empty())
      throw FormatError(what + ": id " + std::to_string(r.id) + " has " +
                            std::to_string(r.hyps.size()) + " hypotheses, expected " +
                            std::to_string(records.front().hyps.size()),
                        0);
}

CoreMetrics core_metrics(const std::vector<CandidateRecord>& records, const std::vector<Words>& refs) {
  check_alignment(records, refs.size(), "candidates");
  WordInterner words;
  const auto lists = to_lists(records, words);
  const auto ref_ids = to_sentences(refs, words);
  CoreMetrics m;
  m.n_best = records.empty() ? 0 : records.front().hyps.size();
  m.dp = m.n_best >= 2 ? metrics::dp(lists) : 0.0;
  m.bleu_1 = metrics::bleu_at_n(lists, ref_ids, 1);
  m.bleu_n = metrics::bleu_at_n(lists, ref_ids, m.n_best);
  m.med_bleu_n = metrics::med_bleu_at_n(lists, ref_ids, m.n_best);
  m.ref_bleu = metrics::ref_bleu(lists, ref_ids);
  if (m.bleu_n < m.bleu_1)
    throw InvariantViolation("BLEU@N (" + std::to_string(m.bleu_n) + ") below BLEU@1 (" +
                             std::to_string(m.bleu_1) + ")");
  return m;
}

Json make_report(const EvalInputs& in) {
  if (!in.candidates) throw InvalidInput("report needs a candidate file");
  const auto& records = in.candidates->records;
  const CoreMetrics core = core_metrics(records, in.refs);

  WordInterner words;
  const auto lists = to_lists(records, words);
  const auto ref_ids = to_sentences(in.refs, words);

  Json r;
  r["header"] = {{"version", version()}, {"candidates", in.candidates->header}};
  r["n_sources"] = records.size();
  r["n_best"] = core.n_best;
  r["DP"] = core.n_best >= 2 ? pct(core.dp) : kUndefined;
  r["BLEU@1"] = pct(core.bleu_1);
  r["BLEU@N"] = pct(core.bleu_n);
  r["MedBLEU@N"] = pct(core.med_bleu_n);
  r["RefBLEU"] = pct(core.ref_bleu);
  for (int n = 1; n <= 4; ++n) {
    const std::string key = "distinct_" + std::to_string(n);
    try {
      r[key] = metrics::distinct_ngram_ratio(lists, n);
    } catch (const InvalidInput&) {
      r[key] = kUndefined;
    }
  }

  if (in.candidates_b) {
    check_alignment(in.candidates_b->records, in.refs.size(), "second candidate file");
    const auto lists_b = to_lists(in.candidates_b->records, words);
    r["MergedBLEU"] = pct(metrics::merged_bleu(lists, lists_b, ref_ids));
  }

  if (in.base) {
    const CoreMetrics base = core_metrics(in.base->records, in.refs);
    if (core.n_best < 2 || base.n_best < 2) {
      r["DEQ"] = kUndefined;
    } else {
      const auto deq = metrics::deq(core.dp, base.dp, core.ref_bleu, base.ref_bleu);
      r["DEQ"] = deq ? Json(*deq) : kUndefined;
    }
  }

  if (in.loglik) {
    std::vector<double> a, b;
    std::size_t excluded = 0;
    std::vector<std::string> bad;
    for (std::size_t i = 0; i < in.loglik->records.size(); ++i) {
      const auto& rec = in.loglik->records[i];
      if (rec.id != i || rec.id >= in.refs.size()) bad.push_back(std::to_string(rec.id));
      if (rec.ref_a && rec.ref_b && std::isfinite(*rec.ref_a) && std::isfinite(*rec.ref_b)) {
        a.push_back(*rec.ref_a);
        b.push_back(*rec.ref_b);
      } else {
        ++excluded;
      }
    }
    if (in.loglik->records.size() != in.refs.size()) bad.push_back("count mismatch");
    if (!bad.empty()) {
      std::string list;
      for (std::size_t i = 0; i < bad.size() && i < 20; ++i) list += (i ? ", " : "") + bad[i];
      throw FormatError("log-likelihood file is not aligned; offending ids: " + list, 0);
    }
    r["MADLL"] = a.empty() ? kUndefined : Json(metrics::madll(a, b));
    r["MADLL_pairs"] = a.size();
    r["MADLL_excluded"] = excluded;
  }

  if (in.fluency_scores || in.mock_fluency) {
    metrics::LengthMockScorer mock;
    static constexpr std::pair<metrics::SpllStat, const char*> kStats[] = {
        {metrics::SpllStat::max, "SPLL_max"},
        {metrics::SpllStat::min, "SPLL_min"},
        {metrics::SpllStat::mean, "SPLL_mean"}};
    std::size_t skipped = 0;
    for (const auto& [stat, key] : kStats) {
      const auto res = in.fluency_scores ? metrics::spll_from_scores(lists, *in.fluency_scores, stat)
                                         : metrics::spll(lists, mock, stat);
      r[key] = res.value;
      skipped = res.skipped_empty;
    }
    r["SPLL_skipped_empty"] = skipped;
    r["SPLL_scorer"] = in.fluency_scores ? "scores-file" : "mock-length";
  }
  return r;
}

std::vector<Words> read_references(const std::string& path) {
  std::vector<Words> refs;
  for (auto& pair : read_corpus(path)) refs.push_back(std::move(pair.target));
  return refs;
}

}  // namespace knnmt
