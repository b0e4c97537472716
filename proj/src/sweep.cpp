#include "knnmt/sweep.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <set>

#include "knnmt/error.hpp"
#include "knnmt/metrics.hpp"
#include "knnmt/parallel.hpp"
#include "knnmt/version.hpp"

namespace knnmt {

namespace {

std::vector<Json> range_values(const Json& axis, const std::string& path) {
  const double from = axis.at("from").get<double>();
  const double to = axis.at("to").get<double>();
  const double step = axis.at("step").get<double>();
  if (!(step > 0.0) || !(to >= from)) throw ConfigError(path, "range needs step > 0 and to >= from");
  const double span = (to - from) / step;
  const auto n = static_cast<long long>(std::llround(span));
  if (std::fabs(span - static_cast<double>(n)) > 1e-6)
    throw ConfigError(path, "range (to - from) must be a whole number of steps");
  std::vector<Json> out;
  for (long long i = 0; i <= n; ++i)
    out.emplace_back(std::round((from + static_cast<double>(i) * step) * 1e9) / 1e9);
  return out;
}

void check_keys(const Json& obj, const std::set<std::string>& allowed, const std::string& path) {
  if (!obj.is_object()) throw ConfigError(path, "expected an object");
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!allowed.count(it.key()))
      throw ConfigError(path.empty() ? it.key() : path + "." + it.key(), "unknown key");
}

std::string value_text(const Json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); }

std::string number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

std::vector<std::string> setting_keys(const std::vector<SweepRow>& rows) {
  std::vector<std::string> keys;
  for (const auto& row : rows)
    for (const auto& [k, v] : row.point.settings)
      if (std::find(keys.begin(), keys.end(), k) == keys.end()) keys.push_back(k);
  return keys;
}

RunConfig base_of(const RunConfig& config) {
  RunConfig base = config;
  const std::uint64_t seed = config.pipeline.perturb.seed;
  base.pipeline.perturb = PerturbConfig{};
  base.pipeline.perturb.seed = seed;
  base.static_scale = StaticScale::absolute;
  return base;
}

std::string artifact_key(const RunConfig& c, bool regenerate) {
  const Json j = to_json(c);
  return Json{{"corpus", j["corpus"]}, {"model", j["model"]}, {"datastore", j["datastore"]},
              {"regenerate", regenerate}}
      .dump();
}

struct Prepared {
  GeneratedCorpus corpus;
  Artifacts artifacts;
};

}  // namespace

SweepSpec parse_sweep_spec(const Json& doc) {
  check_keys(doc, {"base", "base_config", "points", "axes", "seeds", "seed_fields", "regenerate_corpus",
                   "madll", "max_points", "output"},
             "");
  SweepSpec spec;
  try {
    if (doc.contains("base") && doc.contains("base_config"))
      throw ConfigError("base_config", "give either base or base_config, not both");
    if (doc.contains("base")) spec.base = doc["base"];
    if (doc.contains("base_config")) spec.base = read_json_file(doc["base_config"].get<std::string>());
    if (!spec.base.is_object()) throw ConfigError("base", "expected an object");
    if (doc.contains("points")) {
      for (std::size_t i = 0; i < doc["points"].size(); ++i) {
        const Json& p = doc["points"][i];
        if (!p.is_object()) throw ConfigError("points[" + std::to_string(i) + "]", "expected an object");
        spec.points.push_back(p);
      }
    }
    if (doc.contains("axes")) {
      for (std::size_t i = 0; i < doc["axes"].size(); ++i) {
        const Json& a = doc["axes"][i];
        const std::string path = "axes[" + std::to_string(i) + "]";
        SweepAxis axis;
        if (a.contains("values")) {
          check_keys(a, {"key", "values"}, path);
          axis.values = a["values"].get<std::vector<Json>>();
        } else {
          check_keys(a, {"key", "from", "to", "step"}, path);
          axis.values = range_values(a, path);
        }
        axis.key = a.at("key").get<std::string>();
        if (axis.values.empty()) throw ConfigError(path, "axis has no values");
        spec.axes.push_back(std::move(axis));
      }
    }
    if (doc.contains("seeds")) spec.seeds = doc["seeds"].get<std::vector<std::uint64_t>>();
    if (spec.seeds.empty()) throw ConfigError("seeds", "at least one seed is required");
    if (doc.contains("seed_fields")) spec.seed_fields = doc["seed_fields"].get<std::vector<std::string>>();
    if (doc.contains("regenerate_corpus")) spec.regenerate_corpus = doc["regenerate_corpus"].get<bool>();
    if (doc.contains("madll")) spec.madll = doc["madll"].get<bool>();
    if (doc.contains("max_points")) spec.max_points = doc["max_points"].get<std::size_t>();
    if (doc.contains("output")) spec.output = doc["output"].get<std::string>();
  } catch (const Json::exception& e) {
    throw ConfigError("sweep", e.what());
  }
  return spec;
}

Json to_json(const SweepSpec& spec) {
  Json axes = Json::array();
  for (const auto& a : spec.axes) axes.push_back({{"key", a.key}, {"values", a.values}});
  return {{"base", spec.base},
          {"points", spec.points},
          {"axes", axes},
          {"seeds", spec.seeds},
          {"seed_fields", spec.seed_fields},
          {"regenerate_corpus", spec.regenerate_corpus},
          {"madll", spec.madll},
          {"max_points", spec.max_points},
          {"output", spec.output}};
}

std::vector<SweepPoint> expand_sweep(const SweepSpec& spec) {
  std::vector<Json> sets = spec.points.empty() ? std::vector<Json>{Json::object()} : spec.points;
  std::size_t total = sets.size() * spec.seeds.size();
  for (const auto& a : spec.axes) total *= a.values.size();
  if (total > spec.max_points)
    throw ConfigError("max_points", "sweep has " + std::to_string(total) + " runs, cap is " +
                                        std::to_string(spec.max_points));

  std::vector<std::vector<std::pair<std::string, Json>>> combos;
  for (const auto& set : sets) {
    std::vector<std::pair<std::string, Json>> base;
    for (auto it = set.begin(); it != set.end(); ++it) base.emplace_back(it.key(), it.value());
    combos.push_back(base);
  }
  for (const auto& axis : spec.axes) {
    std::vector<std::vector<std::pair<std::string, Json>>> next;
    for (const auto& c : combos)
      for (const auto& v : axis.values) {
        auto e = c;
        e.emplace_back(axis.key, v);
        next.push_back(std::move(e));
      }
    combos = std::move(next);
  }

  std::vector<SweepPoint> out;
  for (std::size_t p = 0; p < combos.size(); ++p) {
    for (std::uint64_t seed : spec.seeds) {
      Json doc = spec.base;
      for (const auto& [key, value] : combos[p]) apply_override(doc, key + "=" + value.dump());
      for (const auto& field : spec.seed_fields) apply_override(doc, field + "=" + std::to_string(seed));
      try {
        out.push_back({p, seed, combos[p], run_config_from_json(doc)});
      } catch (const ConfigError& e) {
        throw ConfigError(e.key_path(), std::string("sweep point ") + std::to_string(p) + ": " + e.what());
      }
    }
  }
  return out;
}

PointResult evaluate_config(const RunConfig& config, const GeneratedCorpus& corpus,
                            const Artifacts& artifacts, bool with_madll) {
  if (corpus.test.empty()) throw InvalidInput("sweep needs a non-empty test split");
  const PipelineConfig resolved = resolve_pipeline_config(config, artifacts, corpus.valid);
  const Pipeline pipeline = make_pipeline(config, artifacts, resolved);
  const CandidateFile candidates = decode_candidates(config, pipeline, corpus.test, 1);
  std::vector<Words> refs;
  for (const auto& p : corpus.test) refs.push_back(p.target);
  PointResult result;
  result.metrics = core_metrics(candidates.records, refs);
  if (with_madll) {
    if (corpus.test_ref_b.empty()) throw InvalidInput("MADLL needs a second reference set");
    const LoglikFile ll = forced_logliks(config, pipeline, corpus.test, corpus.test_ref_b, 1);
    std::vector<double> a, b;
    for (const auto& r : ll.records)
      if (r.ref_a && r.ref_b) {
        a.push_back(*r.ref_a);
        b.push_back(*r.ref_b);
      }
    if (!a.empty()) result.madll = metrics::madll(a, b);
  }
  return result;
}

std::vector<SweepRow> run_sweep(const SweepSpec& spec, std::size_t threads) {
  const std::vector<SweepPoint> points = expand_sweep(spec);

  std::map<std::string, std::size_t> art_index;
  std::vector<const RunConfig*> art_configs;
  std::map<std::string, std::size_t> eval_index;
  std::vector<RunConfig> eval_configs;
  std::vector<std::size_t> eval_art;
  struct Ids {
    std::size_t eval, base;
  };
  std::vector<Ids> ids;

  const auto add_eval = [&](const RunConfig& c, std::size_t art) {
    auto [it, inserted] = eval_index.try_emplace(to_json(c).dump(), eval_configs.size());
    if (inserted) {
      eval_configs.push_back(c);
      eval_art.push_back(art);
    }
    return it->second;
  };
  for (const auto& p : points) {
    auto [it, inserted] = art_index.try_emplace(artifact_key(p.config, spec.regenerate_corpus),
                                                art_configs.size());
    if (inserted) art_configs.push_back(&p.config);
    ids.push_back({add_eval(p.config, it->second), add_eval(base_of(p.config), it->second)});
  }

  std::vector<std::unique_ptr<Prepared>> prepared(art_configs.size());
  parallel_for(art_configs.size(), threads, [&](std::size_t i) {
    GeneratedCorpus corpus = load_corpus(*art_configs[i], spec.regenerate_corpus);
    Artifacts art = build_artifacts(*art_configs[i], corpus.train);
    prepared[i] = std::make_unique<Prepared>(Prepared{std::move(corpus), std::move(art)});
  });

  std::vector<PointResult> results(eval_configs.size());
  parallel_for(eval_configs.size(), threads, [&](std::size_t i) {
    const Prepared& prep = *prepared[eval_art[i]];
    results[i] = evaluate_config(eval_configs[i], prep.corpus, prep.artifacts, spec.madll);
  });

  std::vector<SweepRow> rows;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const PointResult& sys = results[ids[i].eval];
    const PointResult& base = results[ids[i].base];
    std::optional<double> deq;
    if (sys.metrics.n_best >= 2)
      deq = metrics::deq(sys.metrics.dp, base.metrics.dp, sys.metrics.ref_bleu, base.metrics.ref_bleu);
    rows.push_back({points[i], sys, deq});
  }
  return rows;
}

std::string sweep_csv(const SweepSpec& spec, const std::vector<SweepRow>& rows) {
  std::string out = "# knnmt " + std::string(version()) + " sweep " + to_json(spec).dump() + "\n";
  const auto keys = setting_keys(rows);
  out += "point,seed";
  for (const auto& k : keys) out += "," + csv_field(k);
  out += ",DP,BLEU@1,BLEU@N,RefBLEU,DEQ";
  if (spec.madll) out += ",MADLL";
  out += "\n";
  for (const auto& row : rows) {
    out += std::to_string(row.point.point) + "," + std::to_string(row.point.seed);
    for (const auto& k : keys) {
      std::string cell;
      for (const auto& [sk, v] : row.point.settings)
        if (sk == k) cell = value_text(v);
      out += "," + csv_field(cell);
    }
    const CoreMetrics& m = row.result.metrics;
    out += "," + number(100 * m.dp) + "," + number(100 * m.bleu_1) + "," + number(100 * m.bleu_n) + "," +
           number(100 * m.ref_bleu) + "," + (row.deq ? number(*row.deq) : "undefined");
    if (spec.madll) out += "," + (row.result.madll ? number(*row.result.madll) : "undefined");
    out += "\n";
  }
  return out;
}

std::string sweep_svg(const std::vector<SweepRow>& rows) {
  constexpr double W = 480, H = 360, L = 60, R = 20, T = 20, B = 50;
  double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
  for (const auto& r : rows) {
    x0 = std::min(x0, 100 * r.result.metrics.dp);
    x1 = std::max(x1, 100 * r.result.metrics.dp);
    y0 = std::min(y0, 100 * r.result.metrics.bleu_n);
    y1 = std::max(y1, 100 * r.result.metrics.bleu_n);
  }
  if (rows.empty()) x0 = y0 = 0, x1 = y1 = 1;
  if (x1 - x0 < 1e-9) x0 -= 0.5, x1 += 0.5;
  if (y1 - y0 < 1e-9) y0 -= 0.5, y1 += 0.5;
  const auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  const auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };

  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + number(W) + "\" height=\"" +
                  number(H) + "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<line x1=\"" + number(L) + "\" y1=\"" + number(H - B) + "\" x2=\"" + number(W - R) + "\" y2=\"" +
       number(H - B) + "\" stroke=\"black\"/>\n";
  s += "<line x1=\"" + number(L) + "\" y1=\"" + number(T) + "\" x2=\"" + number(L) + "\" y2=\"" +
       number(H - B) + "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = x0 + (x1 - x0) * i / 4, yv = y0 + (y1 - y0) * i / 4;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", xv);
    s += "<text x=\"" + number(px(xv)) + "\" y=\"" + number(H - B + 16) +
         "\" font-size=\"10\" text-anchor=\"middle\">" + buf + "</text>\n";
    std::snprintf(buf, sizeof buf, "%.2f", yv);
    s += "<text x=\"" + number(L - 6) + "\" y=\"" + number(py(yv) + 3) +
         "\" font-size=\"10\" text-anchor=\"end\">" + buf + "</text>\n";
  }
  s += "<text x=\"" + number((L + W - R) / 2) + "\" y=\"" + number(H - 12) +
       "\" font-size=\"12\" text-anchor=\"middle\">DP</text>\n";
  s += "<text x=\"14\" y=\"" + number((T + H - B) / 2) + "\" font-size=\"12\" text-anchor=\"middle\" " +
       "transform=\"rotate(-90 14 " + number((T + H - B) / 2) + ")\">BLEU@N</text>\n";
  for (const auto& r : rows)
    s += "<circle cx=\"" + number(px(100 * r.result.metrics.dp)) + "\" cy=\"" +
         number(py(100 * r.result.metrics.bleu_n)) + "\" r=\"3\" fill=\"steelblue\"/>\n";
  s += "</svg>\n";
  return s;
}

void cmd_sweep(const SweepSpec& spec, std::size_t threads, const std::string& plot_path) {
  const auto rows = run_sweep(spec, threads);
  const auto write = [](const std::string& path, const std::string& text) {
    const auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path);
    out << text;
    out.flush();
    if (!out) throw IoError("write failed for " + path);
  };
  write(spec.output, sweep_csv(spec, rows));
  if (!plot_path.empty()) write(plot_path, sweep_svg(rows));
}

}  // namespace knnmt
