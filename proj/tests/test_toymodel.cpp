#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <set>

#include "knnmt/corpus.hpp"
#include "knnmt/corpus_gen.hpp"
#include "knnmt/pipeline.hpp"
#include "knnmt/table_model.hpp"
#include "knnmt/vocab.hpp"
#include "support.hpp"

using namespace knnmt;

namespace {

SentencePair pair(const std::string& src, const std::string& tgt) {
  return {split_tokens(src), split_tokens(tgt)};
}

TableModelParams small_params(double alpha = 0.1) {
  TableModelParams p;
  p.alpha = alpha;
  p.embed_dim = 32;
  p.embed_seed = 5;
  p.n_buckets = 1 << 16;
  return p;
}

// Sources share no words, so every pair reads its own count rows.
const ParallelCorpus kMemorized{
    pair("ein kleiner hund", "a small dog runs"),
    pair("zwei rote katzen", "two red cats sleep here"),
    pair("das alte haus", "the old house stands"),
};

}  // namespace

TEST_CASE("vocab reserves the special symbols and is a bijection") {
  Vocab v;
  CHECK(v.size() == 4);
  CHECK(v.token(Vocab::kPad) == "<pad>");
  CHECK(v.token(Vocab::kBos) == "<s>");
  CHECK(v.token(Vocab::kEos) == "</s>");
  CHECK(v.token(Vocab::kUnk) == "<unk>");
  const TokenId a = v.add("apple");
  CHECK(v.add("apple") == a);
  CHECK(v.id("pear") == Vocab::kUnk);
  for (TokenId i = 0; i < v.size(); ++i) CHECK(v.id(v.token(i)) == i);
  CHECK(Vocab::from_tokens(v.tokens()) == v);
  CHECK_THROWS_AS(Vocab::from_tokens({"x", "<s>", "</s>", "<unk>"}), InvalidInput);
  CHECK_THROWS_AS(Vocab::from_tokens({"<pad>", "<s>", "</s>", "<unk>", "a", "a"}), InvalidInput);
  const std::vector<TokenId> ids{Vocab::kBos, a, Vocab::kEos};
  CHECK(v.decode(ids) == std::vector<std::string>{"apple"});
}

TEST_CASE("corpus lines parse and round trip") {
  const auto p = parse_corpus_line("a b c\tx y", 1);
  CHECK(p.source == std::vector<std::string>{"a", "b", "c"});
  CHECK(p.target == std::vector<std::string>{"x", "y"});
  CHECK(format_corpus_line(p) == "a b c\tx y");
  CHECK_THROWS_AS(parse_corpus_line("no tab here", 3), FormatError);
  CHECK_THROWS_AS(parse_corpus_line("a\tb\tc", 3), FormatError);
  CHECK_THROWS_AS(parse_corpus_line("\tb", 3), FormatError);
  CHECK_THROWS_AS(parse_corpus_line("a\t", 3), FormatError);

  const std::string path = "test_toymodel_corpus.tsv";
  write_corpus(kMemorized, path);
  CHECK(read_corpus(path) == kMemorized);
  std::remove(path.c_str());
  CHECK_THROWS_AS(read_corpus("missing/corpus.tsv"), IoError);
}

TEST_CASE("generated corpus honors the split sizes and is deterministic") {
  CorpusSpec spec;
  spec.n_train = 57;
  spec.n_valid = 13;
  spec.n_test = 21;
  const auto a = generate_corpus(spec, 3);
  const auto b = generate_corpus(spec, 3);
  const auto c = generate_corpus(spec, 4);
  CHECK(a.train.size() == 57);
  CHECK(a.valid.size() == 13);
  CHECK(a.test.size() == 21);
  CHECK(a.test_ref_b.size() == 21);
  CHECK(a.train == b.train);
  CHECK(a.test_ref_b == b.test_ref_b);
  CHECK_FALSE(a.train == c.train);
  for (std::size_t i = 0; i < a.test.size(); ++i) {
    CHECK(a.test[i].source == a.test_ref_b[i].source);
    CHECK(a.test[i].target != a.test_ref_b[i].target);
  }
  spec.n_train = 0;
  CHECK_THROWS_AS(generate_corpus(spec, 0), InvalidInput);
}

TEST_CASE("default generated corpus has headroom for diversity") {
  const auto g = generate_corpus(CorpusSpec{}, 0);
  CHECK(g.test.size() >= 100);
  std::set<std::string> target_words;
  for (const auto& p : g.train)
    for (const auto& w : p.target) target_words.insert(w);
  CHECK(target_words.size() >= 50);
}

TEST_CASE("token embeddings are deterministic unit vectors and nearly orthogonal") {
  CHECK(token_embedding(7, 32, 1) == token_embedding(7, 32, 1));
  CHECK(token_embedding(7, 32, 1) != token_embedding(7, 32, 2));
  std::vector<std::vector<float>> e;
  for (TokenId id = 0; id < 100; ++id) {
    e.push_back(token_embedding(id, 32, 9));
    double n2 = 0.0;
    for (float x : e.back()) n2 += double(x) * x;
    CHECK(std::fabs(std::sqrt(n2) - 1.0) <= 1e-6);
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < e.size(); ++i)
    for (std::size_t j = i + 1; j < e.size(); ++j) {
      double dot = 0.0;
      for (std::size_t d = 0; d < 32; ++d) dot += double(e[i][d]) * e[j][d];
      worst = std::max(worst, std::fabs(dot));
    }
  CHECK(worst < 0.75);  // 100 vectors in 32 dims; the typical |cos| is about 0.14
  CHECK_THROWS_AS(token_embedding(0, 0, 0), InvalidInput);
}

TEST_CASE("training rejects bad input and is deterministic") {
  CHECK_THROWS_AS(TableModel::train({}, small_params()), InvalidInput);
  CHECK_THROWS_AS(TableModel::train({SentencePair{{"a"}, {}}}, small_params()), InvalidInput);
  CHECK_THROWS_AS(TableModel::train(kMemorized, small_params(0.0)), InvalidInput);
  const auto a = TableModel::train(kMemorized, small_params());
  const auto b = TableModel::train(kMemorized, small_params());
  CHECK(a == b);
  CHECK(a.serialize() == b.serialize());
  CHECK(TableModel::deserialize(a.serialize()) == a);
  CHECK_THROWS_AS(TableModel::deserialize("{\"format\":1}"), FormatError);
  CHECK_THROWS_AS(TableModel::deserialize("not json"), FormatError);
}

TEST_CASE("step outputs valid distributions and deterministic hidden states") {
  const auto model = TableModel::train(kMemorized, small_params());
  const auto src = model.encode_source(kMemorized[1].source);
  const auto tgt = model.encode_target(kMemorized[1].target);
  for (std::size_t t = 1; t <= tgt.size(); ++t) {
    const std::span<const TokenId> prefix(tgt.data(), t);
    const auto out = model.step(src, prefix);
    CHECK(out.p_mt.is_valid(1e-9));
    CHECK(out.p_mt[Vocab::kPad] == 0.0);
    CHECK(out.p_mt[Vocab::kBos] == 0.0);
    CHECK(out.hidden.size() == 32);
    for (float x : out.hidden) CHECK(std::isfinite(x));
    CHECK(out.hidden == model.hidden_state(src, prefix));
  }
  CHECK_THROWS_AS(model.step({}, std::vector<TokenId>{Vocab::kBos}), InvalidInput);
  CHECK_THROWS_AS(model.step(src, {}), InvalidInput);
  CHECK_THROWS_AS(model.step(src, std::vector<TokenId>{Vocab::kEos}), InvalidInput);
}

TEST_CASE("hidden state depends on the last prefix token") {
  const auto model = TableModel::train(kMemorized, small_params());
  const auto src = model.encode_source(kMemorized[0].source);
  const auto tgt = model.encode_target(kMemorized[0].target);
  auto other = tgt;
  other[2] = model.target_vocab().id("red");
  const std::span<const TokenId> p1(tgt.data(), 3), p2(other.data(), 3);
  CHECK(squared_l2(model.hidden_state(src, p1), model.hidden_state(src, p2)) > 0.0);
}

TEST_CASE("memorized pairs are reproduced by the argmax of p_mt") {
  const auto model = TableModel::train(kMemorized, small_params(1e-3));
  for (const auto& p : kMemorized) {
    const auto src = model.encode_source(p.source);
    const auto tgt = model.encode_target(p.target);
    for (std::size_t t = 1; t < tgt.size(); ++t) {
      const auto dist = model.p_mt(src, std::span<const TokenId>(tgt.data(), t));
      const auto best = std::max_element(dist.probs.begin(), dist.probs.end()) - dist.probs.begin();
      CHECK(static_cast<TokenId>(best) == tgt[t]);
    }
  }
}

TEST_CASE("different sources give different p_mt for the same prefix") {
  const auto model = TableModel::train(kMemorized, small_params());
  const std::vector<TokenId> prefix{Vocab::kBos};
  const auto a = model.p_mt(model.encode_source(kMemorized[0].source), prefix);
  const auto b = model.p_mt(model.encode_source(kMemorized[1].source), prefix);
  CHECK_FALSE(a == b);
}

TEST_CASE("p_mt follows the add-alpha closed form, repeated pairs scale the counts") {
  const double alpha = 0.5;
  const SentencePair p = pair("x y", "u v u w");
  ParallelCorpus once{p}, ten(10, p);
  const auto m1 = TableModel::train(once, small_params(alpha));
  const auto m10 = TableModel::train(ten, small_params(alpha));
  REQUIRE(m1.target_vocab() == m10.target_vocab());

  const auto src = m1.encode_source(p.source);
  REQUIRE(source_bucket("x", 1 << 16) != source_bucket("y", 1 << 16));
  const double buckets = 2.0;
  const double emit = static_cast<double>(m1.target_vocab().size() - 2);  // pad and bos excluded
  const auto tgt = m1.encode_target(p.target);  // <s> u v u w </s>
  const TokenId w = m1.target_vocab().id("w");
  const TokenId v = m1.target_vocab().id("v");

  // Context (v, u) was followed by w once per copy.
  const std::span<const TokenId> prefix(tgt.data(), 4);
  for (auto [model, copies] : {std::pair{&m1, 1.0}, std::pair{&m10, 10.0}}) {
    const auto dist = model->p_mt(src, prefix);
    const double total = alpha * emit + buckets * copies;
    CHECK(dist[w] == doctest::Approx((alpha + buckets * copies) / total).epsilon(1e-12));
    CHECK(dist[v] == doctest::Approx(alpha / total).epsilon(1e-12));
    CHECK(model->pooled_count(src, prefix, w) == static_cast<std::uint64_t>(buckets * copies));
  }
  CHECK_FALSE(m1.p_mt(src, prefix) == m10.p_mt(src, prefix));

  // Unseen context: pure smoothing, uniform over emittable tokens.
  const TokenId u = m1.target_vocab().id("u");
  const std::vector<TokenId> unseen{Vocab::kBos, w, w};
  const auto flat = m1.p_mt(src, unseen);
  for (TokenId t = 2; t < flat.size(); ++t) CHECK(flat[t] == doctest::Approx(1.0 / emit).epsilon(1e-12));
  CHECK(flat[u] == flat[Vocab::kEos]);
}

TEST_CASE("datastore from the model has one entry per target token and self-retrieves") {
  const ParallelCorpus two{pair("a b", "p q r s"), pair("c d e", "t u v w x")};
  const auto model = TableModel::train(two, small_params());
  const Datastore ds = build_model_datastore(model, two);
  CHECK(ds.size() == 11);  // 5 + 6 positions, </s> included
  std::size_t i = 0;
  for (const auto& p : two) {
    const auto src = model.encode_source(p.source);
    const auto tgt = model.encode_target(p.target);
    for (std::size_t t = 1; t < tgt.size(); ++t, ++i) {
      CHECK(ds.value(i) == tgt[t]);
      const auto q = model.hidden_state(src, std::span<const TokenId>(tgt.data(), t));
      const auto ns = search_exact(ds, q, 1);
      REQUIRE(ns.size() == 1);
      CHECK(ns[0].distance == 0.0);
    }
  }
}
