#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "knnmt/run_config.hpp"
#include "knnmt/sweep.hpp"

using namespace knnmt;

namespace {

// Minimal document: the seeds are the only required fields.
Json seeds_only() {
  return Json::parse(R"({
    "corpus": {"seed": 1}, "model": {"seed": 2}, "datastore": {"kmeans_seed": 3},
    "perturb": {"seed": 4}, "decode": {"seed": 5}})");
}

std::string config_error_path(const Json& doc) {
  try {
    run_config_from_json(doc);
  } catch (const ConfigError& e) {
    return e.key_path();
  }
  return "<no error>";
}

}  // namespace

TEST_CASE("defaults round trip through JSON") {
  const RunConfig c = run_config_from_json(default_config_json());
  CHECK(to_json(c) == default_config_json());
  CHECK(c.decode.beam_size == 20);
  CHECK(c.decode.groups == 20);
  CHECK(c.decode.diversity_strength == 0.5);
  CHECK(c.decode.decoder == DecoderKind::dbs);
  CHECK(run_config_from_json(to_json(c)).decode.seed == c.decode.seed);
}

TEST_CASE("seeds must be explicit") {
  const RunConfig c = run_config_from_json(seeds_only());
  CHECK(c.corpus.seed == 1);
  CHECK(c.model.params.embed_seed == 2);
  CHECK(c.datastore.kmeans_seed == 3);
  CHECK(c.pipeline.perturb.seed == 4);
  CHECK(c.decode.seed == 5);
  for (auto [section, key] : {std::pair{"corpus", "seed"}, std::pair{"model", "seed"},
                              std::pair{"datastore", "kmeans_seed"}, std::pair{"perturb", "seed"},
                              std::pair{"decode", "seed"}}) {
    Json doc = seeds_only();
    doc[section].erase(key);
    CHECK(config_error_path(doc) == std::string(section) + "." + key);
  }
}

TEST_CASE("unknown keys and wrong types name the key path") {
  Json doc = seeds_only();
  doc["score"]["lamda"] = 0.3;
  CHECK(config_error_path(doc) == "score.lamda");
  doc = seeds_only();
  doc["extra"] = 1;
  CHECK(config_error_path(doc) == "extra");
  doc = seeds_only();
  doc["decode"]["beam_size"] = "twenty";
  CHECK(config_error_path(doc) == "decode.beam_size");
  doc = seeds_only();
  doc["perturb"]["kind"] = "gaussian";
  CHECK(config_error_path(doc) == "perturb.kind");
  doc = seeds_only();
  doc["score"] = 5;
  CHECK(config_error_path(doc) == "score");
}

TEST_CASE("range checks report their section") {
  Json doc = seeds_only();
  doc["score"]["lambda"] = 1.5;
  CHECK(config_error_path(doc) == "score");
  doc = seeds_only();
  doc["decode"]["groups"] = 40;
  CHECK(config_error_path(doc) == "decode.groups");
  doc = seeds_only();
  doc["search"]["use_ivf"] = true;
  doc["search"]["n_probe"] = 100;
  CHECK(config_error_path(doc) == "search.n_probe");
  doc = seeds_only();
  doc["perturb"]["kind"] = "randomize";
  doc["perturb"]["h"] = 1.0;
  CHECK(config_error_path(doc) == "perturb");
}

TEST_CASE("overrides apply on top of the file") {
  Json doc = seeds_only();
  apply_override(doc, "score.lambda=0.25");
  apply_override(doc, "perturb.kind=randomize");
  apply_override(doc, "score.uniquify=true");
  apply_override(doc, "corpus.dir=some/dir");
  const RunConfig c = run_config_from_json(doc);
  CHECK(c.pipeline.score.lambda == 0.25);
  CHECK(c.pipeline.perturb.kind == PerturbKind::randomize);
  CHECK(c.pipeline.score.uniquify);
  CHECK(c.corpus.dir == "some/dir");
  CHECK_THROWS_AS(apply_override(doc, "no_equals_sign"), ConfigError);
  CHECK_THROWS_AS(apply_override(doc, "score..lambda=1"), ConfigError);
  CHECK_THROWS_AS(apply_override(doc, "score.lambda.x=1"), ConfigError);

  const std::string path = "test_config_file.json";
  {
    std::ofstream out(path);
    out << seeds_only().dump();
  }
  const RunConfig from_file = load_run_config(path, {"search.k=16"});
  CHECK(from_file.pipeline.search.k == 16);
  CHECK(from_file.decode.seed == 5);
  std::remove(path.c_str());
  CHECK_THROWS_AS(load_run_config("missing.json", {}), IoError);
  CHECK(load_run_config("", {}).pipeline.search.k == 8);
}

TEST_CASE("sweep spec parsing and expansion") {
  const SweepSpec spec = parse_sweep_spec(Json::parse(R"({
    "axes": [{"key": "perturb.h", "from": 1.5, "to": 2.5, "step": 0.1}],
    "points": [{"perturb.kind": "randomize"}],
    "seeds": [0, 1]})"));
  REQUIRE(spec.axes.size() == 1);
  CHECK(spec.axes[0].values.size() == 11);
  CHECK(spec.axes[0].values.front() == 1.5);
  CHECK(spec.axes[0].values.back() == 2.5);
  CHECK(spec.axes[0].values[3] == 1.8);
  const auto points = expand_sweep(spec);
  CHECK(points.size() == 22);
  CHECK(points[0].point == 0);
  CHECK(points[0].seed == 0);
  CHECK(points[1].point == 0);
  CHECK(points[1].seed == 1);
  CHECK(points[2].point == 1);
  CHECK(points[21].config.pipeline.perturb.h == 2.5);
  CHECK(points[21].config.pipeline.perturb.seed == 1);
  CHECK(points[21].config.decode.seed == 1);
  CHECK(points[21].config.pipeline.perturb.kind == PerturbKind::randomize);
  CHECK(parse_sweep_spec(to_json(spec)).axes[0].values == spec.axes[0].values);
}

TEST_CASE("sweep cap is enforced before any work") {
  SweepSpec spec;
  spec.axes = {{"search.k", {4, 8, 16, 32}}, {"score.lambda", {0.1, 0.2, 0.3}}};
  spec.seeds = {0, 1, 2};
  spec.max_points = 35;
  try {
    expand_sweep(spec);
    FAIL("expected the cap to trigger");
  } catch (const ConfigError& e) {
    CHECK(e.key_path() == "max_points");
  }
  spec.max_points = 36;
  CHECK(expand_sweep(spec).size() == 36);
  CHECK(SweepSpec{}.max_points == 512);
}

TEST_CASE("sweep spec errors") {
  CHECK_THROWS_AS(parse_sweep_spec(Json::parse(R"({"axis": []})")), ConfigError);
  CHECK_THROWS_AS(parse_sweep_spec(Json::parse(R"({"axes": [{"key": "perturb.h"}]})")), ConfigError);
  CHECK_THROWS_AS(
      parse_sweep_spec(Json::parse(R"({"axes": [{"key": "perturb.h", "from": 2, "to": 1, "step": 0.1}]})")),
      ConfigError);
  // Invalid values surface during expansion with the config key path.
  const SweepSpec bad = parse_sweep_spec(Json::parse(R"({"axes": [{"key": "score.lambda", "values": [0.5, 2.0]}]})"));
  CHECK_THROWS_AS(expand_sweep(bad), ConfigError);
}
