#include "knnmt/corpus_gen.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <vector>

#include "knnmt/error.hpp"
#include "knnmt/rng.hpp"

namespace knnmt {

namespace {

struct Concept {
  const char* source;
  std::vector<const char*> synonyms;
};

enum Slot { kAnimal, kFood, kPlace, kAdj, kVerb, kTime, kNumSlots };

const std::array<std::vector<Concept>, kNumSlots>& grammar_classes() {
  static const std::array<std::vector<Concept>, kNumSlots> classes = {{
      {{"katze", {"cat", "kitty", "feline"}},
       {"hund", {"dog", "puppy", "hound"}},
       {"vogel", {"bird", "sparrow"}},
       {"pferd", {"horse", "pony", "stallion"}},
       {"maus", {"mouse", "rodent"}},
       {"hase", {"rabbit", "bunny", "hare"}},
       {"fuchs", {"fox", "vixen"}},
       {"baer", {"bear", "grizzly"}}},
      {{"brot", {"bread", "loaf", "baguette"}},
       {"apfel", {"apple", "pippin"}},
       {"kaese", {"cheese", "brie"}},
       {"fisch", {"fish", "seafood"}},
       {"kuchen", {"cake", "pastry", "tart"}},
       {"suppe", {"soup", "broth", "stew"}},
       {"nuesse", {"nuts", "acorns"}},
       {"fleisch", {"meat", "beef"}}},
      {{"garten", {"garden", "yard", "backyard"}},
       {"wald", {"forest", "woods", "woodland"}},
       {"haus", {"house", "home", "cottage"}},
       {"feld", {"field", "meadow", "pasture"}},
       {"park", {"park", "playground"}},
       {"kueche", {"kitchen", "pantry"}}},
      {{"gross", {"big", "large", "huge"}},
       {"klein", {"small", "little", "tiny"}},
       {"schnell", {"fast", "quick", "swift"}},
       {"muede", {"tired", "sleepy", "weary"}},
       {"froh", {"happy", "glad", "cheerful", "joyful"}},
       {"hungrig", {"hungry", "starving", "famished"}}},
      {{"isst", {"eats", "devours", "consumes"}},
       {"sieht", {"sees", "notices", "spots"}},
       {"mag", {"likes", "enjoys", "loves"}},
       {"findet", {"finds", "discovers"}},
       {"traegt", {"carries", "holds", "brings"}},
       {"riecht", {"smells", "sniffs"}}},
      {{"heute", {"today", "now"}},
       {"oft", {"often", "frequently"}},
       {"manchmal", {"sometimes", "occasionally"}},
       {"immer", {"always", "constantly"}}},
  }};
  return classes;
}

// A template element is either a literal target word or a slot reference.
struct Element {
  const char* word = nullptr;
  int slot = -1;
};

struct Template {
  const char* marker;
  std::vector<int> source_slots;  // order of concept words on the source side
  std::vector<Element> target;
};

Element w(const char* word) { return {word, -1}; }
Element s(int slot) { return {nullptr, slot}; }

const std::vector<Template>& templates() {
  static const std::vector<Template> t = {
      {"tpl0", {kAdj, kAnimal, kVerb, kFood},
       {w("the"), s(kAdj), s(kAnimal), s(kVerb), w("the"), s(kFood), w(".")}},
      {"tpl1", {kPlace, kVerb, kAnimal, kFood},
       {w("in"), w("the"), s(kPlace), w(","), w("the"), s(kAnimal), s(kVerb), w("a"), s(kFood), w(".")}},
      {"tpl2", {kTime, kVerb, kAnimal, kFood, kPlace},
       {s(kTime), w("the"), s(kAnimal), s(kVerb), w("the"), s(kFood), w("in"), w("the"), s(kPlace), w(".")}},
      {"tpl3", {kAnimal, kPlace, kAdj},
       {w("the"), s(kAnimal), w("in"), w("the"), s(kPlace), w("is"), s(kAdj), w(".")}},
      {"tpl4", {kAdj, kAnimal, kVerb, kTime, kFood},
       {w("a"), s(kAdj), s(kAnimal), s(kTime), s(kVerb), w("some"), s(kFood), w(".")}},
      {"tpl5", {kFood, kAdj, kAnimal},
       {w("the"), s(kFood), w("is"), s(kAdj), w(","), w("says"), w("the"), s(kAnimal), w(".")}},
  };
  return t;
}

struct Meaning {
  std::size_t tpl = 0;
  std::array<std::size_t, kNumSlots> concept_of{};
};

std::size_t class_size(const CorpusSpec& spec, int slot) {
  return std::min(spec.concepts_per_class, grammar_classes()[slot].size());
}

Meaning draw_meaning(const CorpusSpec& spec, RngStream& rng) {
  Meaning m;
  m.tpl = static_cast<std::size_t>(rng.below(templates().size()));
  for (int slot = 0; slot < kNumSlots; ++slot)
    m.concept_of[slot] = static_cast<std::size_t>(rng.below(class_size(spec, slot)));
  return m;
}

std::size_t draw_synonym(std::size_t n, double skew, RngStream& rng) {
  std::vector<double> weights(n);
  double total = 0.0;
  for (std::size_t r = 0; r < n; ++r) total += weights[r] = 1.0 / std::pow(double(r + 1), skew);
  double u = rng.uniform() * total;
  for (std::size_t r = 0; r < n; ++r) {
    if (u < weights[r]) return r;
    u -= weights[r];
  }
  return n - 1;
}

using Choices = std::array<std::size_t, kNumSlots>;

Choices draw_choices(const Meaning& m, double skew, RngStream& rng) {
  Choices c{};
  for (int slot = 0; slot < kNumSlots; ++slot)
    c[slot] = draw_synonym(grammar_classes()[slot][m.concept_of[slot]].synonyms.size(), skew, rng);
  return c;
}

std::vector<std::string> render_source(const Meaning& m) {
  const Template& t = templates()[m.tpl];
  std::vector<std::string> out{t.marker};
  for (int slot : t.source_slots) out.emplace_back(grammar_classes()[slot][m.concept_of[slot]].source);
  return out;
}

std::vector<std::string> render_target(const Meaning& m, const Choices& c) {
  std::vector<std::string> out;
  for (const Element& e : templates()[m.tpl].target) {
    if (e.word) {
      out.emplace_back(e.word);
    } else {
      out.emplace_back(grammar_classes()[e.slot][m.concept_of[e.slot]].synonyms[c[e.slot]]);
    }
  }
  return out;
}

ParallelCorpus draw_split(const CorpusSpec& spec, const RngStream& root, std::uint64_t split,
                          std::size_t n) {
  ParallelCorpus out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    RngStream rng = root.child({split, i});
    const Meaning m = draw_meaning(spec, rng);
    out.push_back({render_source(m), render_target(m, draw_choices(m, spec.synonym_skew, rng))});
  }
  return out;
}

}  // namespace

void CorpusSpec::validate() const {
  if (n_train == 0) throw InvalidInput("corpus spec: n_train must be >= 1");
  if (n_test == 0) throw InvalidInput("corpus spec: n_test must be >= 1");
  if (!(synonym_skew >= 0.0) || !std::isfinite(synonym_skew))
    throw InvalidInput("corpus spec: synonym_skew must be finite and >= 0");
  if (concepts_per_class == 0) throw InvalidInput("corpus spec: concepts_per_class must be >= 1");
}

GeneratedCorpus generate_corpus(const CorpusSpec& spec, std::uint64_t seed) {
  spec.validate();
  const RngStream root(seed);
  GeneratedCorpus out;
  out.train = draw_split(spec, root, 0, spec.n_train);
  out.valid = draw_split(spec, root, 1, spec.n_valid);

  out.test.reserve(spec.n_test);
  out.test_ref_b.reserve(spec.n_test);
  for (std::size_t i = 0; i < spec.n_test; ++i) {
    RngStream rng = root.child({2, i});
    const Meaning m = draw_meaning(spec, rng);
    const Choices a = draw_choices(m, spec.synonym_skew, rng);
    Choices b = draw_choices(m, spec.synonym_skew, rng);
    auto target_a = render_target(m, a);
    auto target_b = render_target(m, b);
    if (target_a == target_b) {
      // Force a paraphrase: switch one used slot that has alternatives.
      std::vector<int> slots;
      for (const Element& e : templates()[m.tpl].target)
        if (e.slot >= 0 && grammar_classes()[e.slot][m.concept_of[e.slot]].synonyms.size() > 1)
          slots.push_back(e.slot);
      const int slot = slots[rng.below(slots.size())];
      const std::size_t n_syn = grammar_classes()[slot][m.concept_of[slot]].synonyms.size();
      b[slot] = (b[slot] + 1 + rng.below(n_syn - 1)) % n_syn;
      target_b = render_target(m, b);
    }
    auto source = render_source(m);
    out.test.push_back({source, std::move(target_a)});
    out.test_ref_b.push_back({std::move(source), std::move(target_b)});
  }
  return out;
}

}  // namespace knnmt
