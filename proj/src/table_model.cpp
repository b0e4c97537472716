#include "knnmt/table_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "knnmt/rng.hpp"

namespace knnmt {

namespace {

constexpr std::uint64_t kSourceSalt = 0x5352435F454D4244ULL;  // "SRC_EMBD"
constexpr std::uint64_t kProjectionSalt = 0x50524F4A45435431ULL;
constexpr std::size_t kMaxVocab = std::size_t{1} << 20;
constexpr std::size_t kMaxBuckets = std::size_t{1} << 24;

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

void TableModelParams::validate() const {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw InvalidInput("model alpha must be positive");
  if (embed_dim == 0) throw InvalidInput("model embed_dim must be positive");
  if (n_buckets == 0 || n_buckets > kMaxBuckets)
    throw InvalidInput("model n_buckets must be in [1, 2^24]");
}

std::vector<float> token_embedding(TokenId id, std::size_t dim, std::uint64_t seed) {
  if (dim == 0) throw InvalidInput("embedding dim must be positive");
  RngStream rng = RngStream(seed).child(id);
  std::vector<double> v(dim);
  double norm2 = 0.0;
  do {
    norm2 = 0.0;
    for (auto& x : v) {
      x = rng.normal();
      norm2 += x * x;
    }
  } while (norm2 == 0.0);
  const double inv = 1.0 / std::sqrt(norm2);
  std::vector<float> out(dim);
  for (std::size_t d = 0; d < dim; ++d) out[d] = static_cast<float>(v[d] * inv);
  return out;
}

std::uint32_t source_bucket(const std::string& word, std::size_t n_buckets) {
  return static_cast<std::uint32_t>(fnv1a(word) % n_buckets);
}

std::uint64_t TableModel::row_key(std::uint32_t bucket, TokenId prev2, TokenId prev1) {
  return (std::uint64_t{bucket} << 40) | (std::uint64_t{prev2} << 20) | std::uint64_t{prev1};
}

void TableModel::init_tables() {
  const std::size_t dim = params_.embed_dim;
  source_embed_.clear();
  target_embed_.clear();
  source_buckets_.clear();
  for (TokenId id = 0; id < source_vocab_.size(); ++id) {
    const auto e = token_embedding(id, dim, params_.embed_seed ^ kSourceSalt);
    source_embed_.insert(source_embed_.end(), e.begin(), e.end());
    source_buckets_.push_back(source_bucket(source_vocab_.token(id), params_.n_buckets));
  }
  for (TokenId id = 0; id < target_vocab_.size(); ++id) {
    const auto e = token_embedding(id, dim, params_.embed_seed);
    target_embed_.insert(target_embed_.end(), e.begin(), e.end());
  }
  // Gaussian entries with variance 1/dim preserve squared lengths in expectation.
  RngStream rng = RngStream(params_.embed_seed).child(kProjectionSalt);
  projection_.resize(dim * 2 * dim);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dim));
  for (auto& x : projection_) x = rng.normal() * scale;
}

TableModel TableModel::train(const ParallelCorpus& corpus, const TableModelParams& params) {
  params.validate();
  if (corpus.empty()) throw InvalidInput("cannot train on an empty corpus");
  TableModel model;
  model.params_ = params;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (corpus[i].source.empty() || corpus[i].target.empty())
      throw InvalidInput("corpus pair " + std::to_string(i) + " has an empty side");
    for (const auto& w : corpus[i].source) model.source_vocab_.add(w);
    for (const auto& w : corpus[i].target) model.target_vocab_.add(w);
  }
  if (model.source_vocab_.size() > kMaxVocab || model.target_vocab_.size() > kMaxVocab)
    throw InvalidInput("vocabulary exceeds 2^20 entries");

  std::map<std::uint64_t, std::map<TokenId, std::uint64_t>> counts;
  for (const auto& pair : corpus) {
    std::vector<std::uint32_t> buckets;
    for (const auto& w : pair.source) buckets.push_back(source_bucket(w, params.n_buckets));
    std::sort(buckets.begin(), buckets.end());
    buckets.erase(std::unique(buckets.begin(), buckets.end()), buckets.end());
    const auto target = model.encode_target(pair.target);
    for (std::size_t i = 1; i < target.size(); ++i) {
      const TokenId prev1 = target[i - 1];
      const TokenId prev2 = i >= 2 ? target[i - 2] : Vocab::kPad;
      for (std::uint32_t b : buckets) ++counts[row_key(b, prev2, prev1)][target[i]];
    }
  }
  for (auto& [key, row] : counts) {
    Row r;
    for (auto [tok, c] : row) {
      r.counts.emplace_back(tok, c);
      r.total += c;
    }
    model.rows_.emplace(key, std::move(r));
  }
  model.init_tables();
  return model;
}

std::vector<TokenId> TableModel::encode_source(std::span<const std::string> words) const {
  return source_vocab_.encode(words);
}

std::vector<TokenId> TableModel::encode_target(std::span<const std::string> words) const {
  std::vector<TokenId> out{Vocab::kBos};
  for (const auto& w : words) out.push_back(target_vocab_.id(w));
  out.push_back(Vocab::kEos);
  return out;
}

void TableModel::check_inputs(std::span<const TokenId> source, std::span<const TokenId> prefix) const {
  if (source.empty()) throw InvalidInput("model step: empty source sentence");
  if (prefix.empty() || prefix.front() != Vocab::kBos)
    throw InvalidInput("model step: prefix must begin with <s>");
  for (TokenId t : source)
    if (t >= source_vocab_.size()) throw InvalidInput("model step: source id out of range");
  for (TokenId t : prefix)
    if (t >= target_vocab_.size()) throw InvalidInput("model step: target id out of range");
}

std::vector<std::uint32_t> TableModel::buckets_of(std::span<const TokenId> source) const {
  std::vector<std::uint32_t> buckets;
  buckets.reserve(source.size());
  for (TokenId t : source) buckets.push_back(source_buckets_[t]);
  std::sort(buckets.begin(), buckets.end());
  buckets.erase(std::unique(buckets.begin(), buckets.end()), buckets.end());
  return buckets;
}

std::vector<float> TableModel::hidden_state(std::span<const TokenId> source,
                                            std::span<const TokenId> prefix) const {
  check_inputs(source, prefix);
  const std::size_t dim = params_.embed_dim;
  std::vector<double> features(2 * dim, 0.0);
  for (TokenId t : source)
    for (std::size_t d = 0; d < dim; ++d) features[d] += source_embed_[t * dim + d];
  for (std::size_t d = 0; d < dim; ++d) features[d] /= static_cast<double>(source.size());

  const std::size_t n_ctx = std::min<std::size_t>(2, prefix.size());
  for (std::size_t j = prefix.size() - n_ctx; j < prefix.size(); ++j)
    for (std::size_t d = 0; d < dim; ++d) features[dim + d] += target_embed_[prefix[j] * dim + d];
  for (std::size_t d = 0; d < dim; ++d) features[dim + d] /= static_cast<double>(n_ctx);

  std::vector<float> hidden(dim);
  for (std::size_t r = 0; r < dim; ++r) {
    const double* row = projection_.data() + r * 2 * dim;
    double acc = 0.0;
    for (std::size_t c = 0; c < 2 * dim; ++c) acc += row[c] * features[c];
    hidden[r] = static_cast<float>(acc);
  }
  return hidden;
}

TokenDistribution TableModel::p_mt(std::span<const TokenId> source,
                                   std::span<const TokenId> prefix) const {
  check_inputs(source, prefix);
  const std::size_t vocab = target_vocab_.size();
  const TokenId prev1 = prefix.back();
  const TokenId prev2 = prefix.size() >= 2 ? prefix[prefix.size() - 2] : Vocab::kPad;
  // <pad> and <s> are never emitted.
  std::vector<double> mass(vocab, params_.alpha);
  mass[Vocab::kPad] = 0.0;
  mass[Vocab::kBos] = 0.0;
  double total = params_.alpha * static_cast<double>(vocab - 2);
  for (std::uint32_t b : buckets_of(source)) {
    auto it = rows_.find(row_key(b, prev2, prev1));
    if (it == rows_.end()) continue;
    for (auto [tok, c] : it->second.counts) mass[tok] += static_cast<double>(c);
    total += static_cast<double>(it->second.total);
  }
  for (auto& m : mass) m /= total;
  return TokenDistribution(std::move(mass));
}

StepOutput TableModel::step(std::span<const TokenId> source, std::span<const TokenId> prefix) const {
  return {p_mt(source, prefix), hidden_state(source, prefix)};
}

std::uint64_t TableModel::pooled_count(std::span<const TokenId> source,
                                       std::span<const TokenId> prefix, TokenId next) const {
  check_inputs(source, prefix);
  const TokenId prev1 = prefix.back();
  const TokenId prev2 = prefix.size() >= 2 ? prefix[prefix.size() - 2] : Vocab::kPad;
  std::uint64_t sum = 0;
  for (std::uint32_t b : buckets_of(source)) {
    auto it = rows_.find(row_key(b, prev2, prev1));
    if (it == rows_.end()) continue;
    for (auto [tok, c] : it->second.counts)
      if (tok == next) sum += c;
  }
  return sum;
}

bool operator==(const TableModel& a, const TableModel& b) {
  if (!(a.params_ == b.params_) || !(a.source_vocab_ == b.source_vocab_) ||
      !(a.target_vocab_ == b.target_vocab_) || a.rows_.size() != b.rows_.size())
    return false;
  for (const auto& [key, row] : a.rows_) {
    auto it = b.rows_.find(key);
    if (it == b.rows_.end() || it->second.counts != row.counts || it->second.total != row.total)
      return false;
  }
  return true;
}

std::string TableModel::serialize() const {
  nlohmann::json j;
  j["format"] = "knnmt-table-model";
  j["version"] = 1;
  j["params"] = {{"alpha", params_.alpha},
                 {"embed_dim", params_.embed_dim},
                 {"embed_seed", params_.embed_seed},
                 {"n_buckets", params_.n_buckets}};
  j["source_vocab"] = source_vocab_.tokens();
  j["target_vocab"] = target_vocab_.tokens();
  std::vector<std::uint64_t> keys;
  keys.reserve(rows_.size());
  for (const auto& [key, row] : rows_) keys.push_back(key);
  std::sort(keys.begin(), keys.end());
  nlohmann::json rows = nlohmann::json::array();
  for (std::uint64_t key : keys) {
    nlohmann::json counts = nlohmann::json::array();
    for (auto [tok, c] : rows_.at(key).counts) counts.push_back({tok, c});
    rows.push_back({key, std::move(counts)});
  }
  j["rows"] = std::move(rows);
  return j.dump();
}

TableModel TableModel::deserialize(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("model file is not valid JSON: ") + e.what(), e.byte);
  }
  try {
    if (j.at("format") != "knnmt-table-model" || j.at("version") != 1)
      throw FormatError("not a version-1 table model", 0);
    TableModel model;
    const auto& p = j.at("params");
    model.params_.alpha = p.at("alpha").get<double>();
    model.params_.embed_dim = p.at("embed_dim").get<std::size_t>();
    model.params_.embed_seed = p.at("embed_seed").get<std::uint64_t>();
    model.params_.n_buckets = p.at("n_buckets").get<std::size_t>();
    model.params_.validate();
    model.source_vocab_ = Vocab::from_tokens(j.at("source_vocab").get<std::vector<std::string>>());
    model.target_vocab_ = Vocab::from_tokens(j.at("target_vocab").get<std::vector<std::string>>());
    for (const auto& entry : j.at("rows")) {
      Row r;
      for (const auto& tc : entry.at(1)) {
        const auto tok = tc.at(0).get<TokenId>();
        if (tok >= model.target_vocab_.size()) throw FormatError("row token out of range", 0);
        r.counts.emplace_back(tok, tc.at(1).get<std::uint64_t>());
        r.total += r.counts.back().second;
      }
      model.rows_.emplace(entry.at(0).get<std::uint64_t>(), std::move(r));
    }
    model.init_tables();
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed model file: ") + e.what(), 0);
  } catch (const InvalidInput& e) {
    throw FormatError(std::string("malformed model file: ") + e.what(), 0);
  }
}

void TableModel::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << serialize() << '\n';
  if (!out) throw IoError("write failed: " + path);
}

TableModel TableModel::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open model " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return deserialize(ss.str());
}

}  // namespace knnmt
