#include "knnmt/run_config.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "knnmt/error.hpp"

namespace knnmt {

std::string to_string(StaticScale scale) {
  return scale == StaticScale::absolute ? "absolute" : "validation";
}

StaticScale parse_static_scale(const std::string& name) {
  if (name == "absolute") return StaticScale::absolute;
  if (name == "validation") return StaticScale::validation;
  throw InvalidInput("unknown static scale '" + name + "' (expected absolute or validation)");
}

namespace {

std::string join_path(const std::string& prefix, const std::string& key) {
  return prefix.empty() ? key : prefix + "." + key;
}

// Reads fields out of one JSON object and remembers which keys were used.
class Reader {
 public:
  Reader(const Json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw ConfigError(path_, "expected an object");
  }

  Reader section(const std::string& key) {
    seen_.insert(key);
    static const Json empty = Json::object();
    auto it = obj_.find(key);
    return Reader(it == obj_.end() ? empty : *it, join_path(path_, key));
  }

  template <class T>
  void field(const std::string& key, T& out, bool required = false) {
    seen_.insert(key);
    auto it = obj_.find(key);
    const std::string path = join_path(path_, key);
    if (it == obj_.end()) {
      if (required) throw ConfigError(path, "must be set explicitly");
      return;
    }
    convert(*it, out, path);
  }

  template <class E>
  void enum_field(const std::string& key, E& out, E (*parse)(const std::string&)) {
    std::string name;
    bool present = obj_.contains(key);
    field(key, name);
    if (!present) return;
    try {
      out = parse(name);
    } catch (const InvalidInput& e) {
      throw ConfigError(join_path(path_, key), e.what());
    }
  }

  void finish() const {
    for (auto it = obj_.begin(); it != obj_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError(join_path(path_, it.key()), "unknown key");
  }

 private:
  static void convert(const Json& v, double& out, const std::string& path) {
    if (!v.is_number()) throw ConfigError(path, "expected a number");
    out = v.get<double>();
    if (!std::isfinite(out)) throw ConfigError(path, "must be finite");
  }
  static void convert(const Json& v, std::uint64_t& out, const std::string& path) {
    if (v.is_number_unsigned()) {
      out = v.get<std::uint64_t>();
    } else if (v.is_number_integer()) {
      throw ConfigError(path, "must be non-negative");
    } else if (v.is_number_float()) {
      const double d = v.get<double>();
      if (d < 0 || d != std::floor(d) || d > 9.007199254740992e15)
        throw ConfigError(path, "expected a non-negative integer");
      out = static_cast<std::uint64_t>(d);
    } else {
      throw ConfigError(path, "expected a non-negative integer");
    }
  }
  static void convert(const Json& v, bool& out, const std::string& path) {
    if (!v.is_boolean()) throw ConfigError(path, "expected true or false");
    out = v.get<bool>();
  }
  static void convert(const Json& v, std::string& out, const std::string& path) {
    if (!v.is_string()) throw ConfigError(path, "expected a string");
    out = v.get<std::string>();
  }

  const Json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

template <class F>
void in_section(Reader& r, const std::string& key, F&& fn) {
  Reader sub = r.section(key);
  fn(sub);
  sub.finish();
}

void require(bool ok, const std::string& path, const std::string& what) {
  if (!ok) throw ConfigError(path, what);
}

}  // namespace

Json to_json(const RunConfig& c) {
  const auto& s = c.pipeline.search;
  const auto& sc = c.pipeline.score;
  const auto& p = c.pipeline.perturb;
  const auto& d = c.decode;
  Json j;
  j["corpus"] = {{"dir", c.corpus.dir},
                 {"seed", c.corpus.seed},
                 {"n_train", c.corpus.spec.n_train},
                 {"n_valid", c.corpus.spec.n_valid},
                 {"n_test", c.corpus.spec.n_test},
                 {"synonym_skew", c.corpus.spec.synonym_skew},
                 {"concepts_per_class", c.corpus.spec.concepts_per_class}};
  j["model"] = {{"path", c.model.path},
                {"alpha", c.model.params.alpha},
                {"embed_dim", c.model.params.embed_dim},
                {"seed", c.model.params.embed_seed},
                {"n_buckets", c.model.params.n_buckets}};
  j["datastore"] = {{"path", c.datastore.path},
                    {"index_path", c.datastore.index_path},
                    {"manifest_path", c.datastore.manifest_path},
                    {"clusters", c.datastore.clusters},
                    {"kmeans_iters", c.datastore.kmeans_iters},
                    {"kmeans_seed", c.datastore.kmeans_seed}};
  j["search"] = {{"k", s.k}, {"use_ivf", s.use_ivf}, {"n_probe", s.n_probe}};
  j["score"] = {{"temperature", sc.temperature}, {"lambda", sc.lambda}, {"uniquify", sc.uniquify}};
  j["perturb"] = {{"kind", to_string(p.kind)},
                  {"h_m", p.h_m},
                  {"h_s", p.h_s},
                  {"static_scale", to_string(c.static_scale)},
                  {"h_m_adaptive", p.h_m_adaptive},
                  {"h_s_adaptive", p.h_s_adaptive},
                  {"h", p.h},
                  {"allow_unit_h", p.allow_unit_h},
                  {"seed", p.seed}};
  j["decode"] = {{"decoder", to_string(d.decoder)},
                 {"beam_size", d.beam_size},
                 {"groups", d.groups},
                 {"diversity_strength", d.diversity_strength},
                 {"nucleus_p", d.nucleus_p},
                 {"max_len", d.max_len},
                 {"seed", d.seed}};
  j["output"] = {{"candidates", c.output.candidates},
                 {"loglik", c.output.loglik},
                 {"report", c.output.report}};
  return j;
}

Json default_config_json() { return to_json(RunConfig{}); }

RunConfig run_config_from_json(const Json& doc) {
  RunConfig c;
  Reader root(doc, "");
  in_section(root, "corpus", [&](Reader& r) {
    r.field("dir", c.corpus.dir);
    r.field("seed", c.corpus.seed, true);
    r.field("n_train", c.corpus.spec.n_train);
    r.field("n_valid", c.corpus.spec.n_valid);
    r.field("n_test", c.corpus.spec.n_test);
    r.field("synonym_skew", c.corpus.spec.synonym_skew);
    r.field("concepts_per_class", c.corpus.spec.concepts_per_class);
  });
  in_section(root, "model", [&](Reader& r) {
    r.field("path", c.model.path);
    r.field("alpha", c.model.params.alpha);
    r.field("embed_dim", c.model.params.embed_dim);
    r.field("seed", c.model.params.embed_seed, true);
    r.field("n_buckets", c.model.params.n_buckets);
  });
  in_section(root, "datastore", [&](Reader& r) {
    r.field("path", c.datastore.path);
    r.field("index_path", c.datastore.index_path);
    r.field("manifest_path", c.datastore.manifest_path);
    r.field("clusters", c.datastore.clusters);
    r.field("kmeans_iters", c.datastore.kmeans_iters);
    r.field("kmeans_seed", c.datastore.kmeans_seed, true);
  });
  auto& s = c.pipeline.search;
  in_section(root, "search", [&](Reader& r) {
    r.field("k", s.k);
    r.field("use_ivf", s.use_ivf);
    r.field("n_probe", s.n_probe);
  });
  auto& sc = c.pipeline.score;
  in_section(root, "score", [&](Reader& r) {
    r.field("temperature", sc.temperature);
    r.field("lambda", sc.lambda);
    r.field("uniquify", sc.uniquify);
  });
  auto& p = c.pipeline.perturb;
  in_section(root, "perturb", [&](Reader& r) {
    r.enum_field("kind", p.kind, parse_perturb_kind);
    r.field("h_m", p.h_m);
    r.field("h_s", p.h_s);
    r.enum_field("static_scale", c.static_scale, parse_static_scale);
    r.field("h_m_adaptive", p.h_m_adaptive);
    r.field("h_s_adaptive", p.h_s_adaptive);
    r.field("h", p.h);
    r.field("allow_unit_h", p.allow_unit_h);
    r.field("seed", p.seed, true);
  });
  auto& d = c.decode;
  in_section(root, "decode", [&](Reader& r) {
    r.enum_field("decoder", d.decoder, parse_decoder_kind);
    r.field("beam_size", d.beam_size);
    r.field("groups", d.groups);
    r.field("diversity_strength", d.diversity_strength);
    r.field("nucleus_p", d.nucleus_p);
    r.field("max_len", d.max_len);
    r.field("seed", d.seed, true);
  });
  in_section(root, "output", [&](Reader& r) {
    r.field("candidates", c.output.candidates);
    r.field("loglik", c.output.loglik);
    r.field("report", c.output.report);
  });
  root.finish();
  c.validate();
  return c;
}

void RunConfig::validate() const {
  const auto wrap = [](const std::string& path, auto&& fn) {
    try {
      fn();
    } catch (const InvalidInput& e) {
      throw ConfigError(path, e.what());
    }
  };
  wrap("corpus", [&] { corpus.spec.validate(); });
  wrap("model", [&] { model.params.validate(); });
  const auto& s = pipeline.search;
  require(s.k >= 1, "search.k", "must be >= 1");
  require(s.n_probe >= 1, "search.n_probe", "must be >= 1");
  if (s.use_ivf) {
    require(datastore.clusters >= 1, "datastore.clusters", "an index is required when search.use_ivf is set");
    require(s.n_probe <= datastore.clusters, "search.n_probe", "must not exceed datastore.clusters");
  }
  wrap("score", [&] { pipeline.score.validate(); });
  wrap("perturb", [&] { pipeline.perturb.validate(); });
  wrap("decode", [&] { decode.validate(); });
}

void apply_override(Json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError(assignment, "override must look like key.path=value");
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  Json value = Json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  Json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? dot : dot - start);
    if (key.empty()) throw ConfigError(path, "empty key in override");
    if (!node->is_object()) throw ConfigError(path, "override descends into a non-object");
    if (dot == std::string::npos) {
      (*node)[key] = value;
      return;
    }
    node = &(*node)[key];
    if (node->is_null()) *node = Json::object();
    start = dot + 1;
  }
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return Json::parse(buf.str());
  } catch (const Json::parse_error& e) {
    throw FormatError(path + ": invalid JSON: " + e.what(), e.byte);
  }
}

RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides) {
  Json doc = path.empty() ? default_config_json() : read_json_file(path);
  for (const auto& o : overrides) apply_override(doc, o);
  return run_config_from_json(doc);
}

}  // namespace knnmt
