#include <doctest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "knnmt/commands.hpp"
#include "knnmt/corpus.hpp"
#include "knnmt/evaluation.hpp"

namespace fs = std::filesystem;
using Json = nlohmann::json;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
}

// Fresh directory holding a small config; commands run with it as cwd.
struct Workspace {
  fs::path dir;
  explicit Workspace(const std::string& name) : dir(fs::current_path() / ("cli_" + name)) {
    fs::remove_all(dir);
    fs::create_directories(dir / "work");
    Json cfg = knnmt::default_config_json();
    cfg["corpus"]["n_train"] = 80;
    cfg["corpus"]["n_valid"] = 10;
    cfg["corpus"]["n_test"] = 8;
    cfg["corpus"]["seed"] = 4;
    cfg["datastore"]["clusters"] = 4;
    cfg["decode"]["beam_size"] = 4;
    cfg["decode"]["groups"] = 2;
    cfg["perturb"]["kind"] = "randomize";
    cfg["perturb"]["h"] = 2.0;
    cfg["perturb"]["seed"] = 6;
    cfg["decode"]["seed"] = 6;
    spit(dir / "config.json", cfg.dump(2));
  }
  int run(const std::string& args) const {
    const std::string cmd = "cd '" + dir.string() + "' && '" + KNNMT_CLI + "' " + args +
                            " > last_stdout.txt 2> last_stderr.txt";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }
  int run_cfg(const std::string& cmd, const std::string& extra = "") const {
    return run(cmd + " -c config.json " + extra);
  }
  std::string stderr_text() const { return slurp(dir / "last_stderr.txt"); }
  std::string read(const std::string& rel) const { return slurp(dir / rel); }
  Json json(const std::string& rel) const { return Json::parse(read(rel)); }
};

void run_all(const Workspace& w) {
  REQUIRE(w.run_cfg("gen-corpus") == 0);
  REQUIRE(w.run_cfg("train") == 0);
  REQUIRE(w.run_cfg("build") == 0);
  REQUIRE(w.run_cfg("decode", "--force-ref") == 0);
  REQUIRE(w.run_cfg("eval", "--mock-fluency --loglik work/loglik.jsonl") == 0);
}

std::string candidates_from(const std::vector<knnmt::SentencePair>& test, std::size_t copies) {
  knnmt::CandidateFile f;
  f.header = {{"producer", "test"}};
  for (std::size_t i = 0; i < test.size(); ++i) {
    knnmt::CandidateRecord r;
    r.id = i;
    r.source = test[i].source;
    for (std::size_t c = 0; c < copies; ++c) {
      r.hyps.push_back(test[i].target);
      r.logprobs.push_back(-1.0);
    }
    f.records.push_back(r);
  }
  const std::string tmp = "cli_candidates_tmp.jsonl";
  knnmt::write_candidates(f, tmp);
  std::string text = slurp(tmp);
  fs::remove(tmp);
  return text;
}

}  // namespace

TEST_CASE("full pipeline runs and every command is byte reproducible") {
  const Workspace w("repro");
  run_all(w);
  const std::vector<std::string> outputs{
      "data/train.tsv", "data/valid.tsv", "data/test.tsv",  "data/test.ref_b.tsv", "data/corpus.json",
      "work/model.json", "work/datastore.knnd", "work/datastore.knni", "work/datastore.json",
      "work/candidates.jsonl", "work/loglik.jsonl", "work/report.json"};
  std::vector<std::string> first;
  for (const auto& o : outputs) {
    first.push_back(w.read(o));
    CHECK_FALSE(first.back().empty());
  }
  run_all(w);
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    INFO(outputs[i]);
    CHECK(w.read(outputs[i]) == first[i]);
  }

  const Json report = w.json("work/report.json");
  CHECK(report["n_best"] == 4);
  CHECK(report["n_sources"] == 8);
  CHECK(report["BLEU@N"].get<double>() >= report["BLEU@1"].get<double>());
  CHECK(report.contains("MADLL"));
  CHECK(report["SPLL_mean"] == -1.0);
  CHECK(report["header"]["candidates"]["config"]["perturb"]["kind"] == "randomize");

  // Candidates embed the resolved config and have N hypotheses per source.
  const auto cands = knnmt::read_candidates((w.dir / "work/candidates.jsonl").string());
  CHECK(cands.records.size() == 8);
  for (const auto& r : cands.records) CHECK(r.hyps.size() == 4);
  CHECK(cands.header.contains("version"));
  CHECK(cands.header["config"]["decode"]["beam_size"] == 4);

  const Json manifest = w.json("work/datastore.json");
  std::size_t tokens = 0;
  for (const auto& p : knnmt::read_corpus((w.dir / "data/train.tsv").string())) tokens += p.target.size() + 1;
  CHECK(manifest["entries"] == tokens);
}

TEST_CASE("more decoder threads give identical candidates") {
  const Workspace w("threads");
  REQUIRE(w.run_cfg("gen-corpus") == 0);
  REQUIRE(w.run_cfg("train") == 0);
  REQUIRE(w.run_cfg("build") == 0);
  REQUIRE(w.run_cfg("decode") == 0);
  const std::string one = w.read("work/candidates.jsonl");
  REQUIRE(w.run_cfg("decode", "--threads 3") == 0);
  CHECK(w.read("work/candidates.jsonl") == one);
}

TEST_CASE("default decode emits twenty hypotheses per source") {
  const Workspace w("twenty");
  REQUIRE(w.run_cfg("gen-corpus") == 0);
  REQUIRE(w.run_cfg("train") == 0);
  REQUIRE(w.run_cfg("build") == 0);
  REQUIRE(w.run_cfg("decode", "--set decode.beam_size=20 --set decode.groups=20") == 0);
  for (const auto& r : knnmt::read_candidates((w.dir / "work/candidates.jsonl").string()).records)
    CHECK(r.hyps.size() == 20);
}

TEST_CASE("build over a two sentence corpus stores eleven entries") {
  const Workspace w("eleven");
  fs::create_directories(w.dir / "data");
  spit(w.dir / "data/train.tsv", "a b c\tw x y z\nd e\tv u t s r\n");
  REQUIRE(w.run_cfg("train") == 0);
  REQUIRE(w.run_cfg("build", "--set datastore.clusters=2") == 0);
  CHECK(w.json("work/datastore.json")["entries"] == 11);
  const std::string sum = w.json("work/datastore.json")["datastore_checksum"].dump();
  REQUIRE(w.run_cfg("build", "--set datastore.clusters=2") == 0);
  CHECK(w.json("work/datastore.json")["datastore_checksum"].dump() == sum);

  // Training data with words the model never saw.
  spit(w.dir / "data/train.tsv", "a b c\tw x y q\n");
  CHECK(w.run_cfg("build", "--set datastore.clusters=2") == 2);
  CHECK(w.stderr_text().find("corpus.train") != std::string::npos);
}

TEST_CASE("exit codes") {
  const Workspace w("codes");
  CHECK(w.run("--version") == 0);
  CHECK(w.run("no-such-command") == 2);
  CHECK(w.run_cfg("decode", "--bogus-flag") == 2);
  CHECK(w.run_cfg("train", "--set score.lamda=0.2") == 2);
  CHECK(w.stderr_text().find("score.lamda") != std::string::npos);
  CHECK(w.run_cfg("train", "--set decode.beam_size=0") == 2);

  // Missing artifacts name the step to run.
  CHECK(w.run_cfg("train") == 3);
  CHECK(w.stderr_text().find("gen-corpus") != std::string::npos);
  REQUIRE(w.run_cfg("gen-corpus") == 0);
  CHECK(w.run_cfg("build") == 3);
  CHECK(w.stderr_text().find("knnmt train") != std::string::npos);
  REQUIRE(w.run_cfg("train") == 0);
  CHECK(w.run_cfg("decode") == 3);
  CHECK(w.stderr_text().find("knnmt build") != std::string::npos);

  REQUIRE(w.run_cfg("build") == 0);
  std::string ds = w.read("work/datastore.knnd");
  ds[0] = 'Z';
  spit(w.dir / "work/datastore.knnd", ds);
  CHECK(w.run_cfg("decode") == 3);

  spit(w.dir / "bad.jsonl", "{\"header\":{}}\n{\"id\":0,\"hyps\":\n");
  CHECK(w.run_cfg("eval", "--candidates bad.jsonl") == 3);
  CHECK(w.stderr_text().find("line 2") != std::string::npos);

  // Candidate ids that do not line up with the references.
  const auto test = knnmt::read_corpus((w.dir / "data/test.tsv").string());
  std::string shifted = candidates_from(test, 2);
  const auto pos = shifted.find("\"id\":3");
  REQUIRE(pos != std::string::npos);
  shifted.replace(pos, 6, "\"id\":9");
  spit(w.dir / "shifted.jsonl", shifted);
  CHECK(w.run_cfg("eval", "--candidates shifted.jsonl") == 3);
  CHECK(w.stderr_text().find("9") != std::string::npos);

  // The second candidate has the higher smoothed sentence BLEU but no
  // 4-gram match, so the oracle pick scores below rank one at corpus level.
  spit(w.dir / "refs.tsv", "s\ta b c d e f g h\n");
  spit(w.dir / "inverted.jsonl",
       "{\"header\":{}}\n"
       "{\"id\":0,\"source\":\"s\",\"hyps\":["
       "{\"tokens\":[\"a\",\"b\",\"c\",\"d\",\"x\",\"x\",\"x\",\"x\",\"x\",\"x\"],\"logprob\":-1,\"rank\":0},"
       "{\"tokens\":[\"a\",\"b\",\"c\",\"x\",\"e\",\"f\",\"g\",\"x\"],\"logprob\":-2,\"rank\":1}]}\n");
  CHECK(w.run_cfg("eval", "--candidates inverted.jsonl --refs refs.tsv") == 4);
}

TEST_CASE("self evaluation and duplicated candidates") {
  const Workspace w("selfeval");
  REQUIRE(w.run_cfg("gen-corpus") == 0);
  const auto test = knnmt::read_corpus((w.dir / "data/test.tsv").string());
  spit(w.dir / "self.jsonl", candidates_from(test, 1));
  REQUIRE(w.run_cfg("eval", "--candidates self.jsonl --out self_report.json") == 0);
  const Json self = w.json("self_report.json");
  CHECK(self["BLEU@1"] == 100.0);
  CHECK(self["DP"] == "undefined");

  spit(w.dir / "dup.jsonl", candidates_from(test, 3));
  REQUIRE(w.run_cfg("eval", "--candidates dup.jsonl --out dup_report.json") == 0);
  CHECK(std::fabs(w.json("dup_report.json")["DP"].get<double>()) <= 1e-9);
  REQUIRE(w.run_cfg("eval", "--candidates dup.jsonl --candidates-b dup.jsonl --base dup.jsonl --out merged.json") == 0);
  CHECK(w.json("merged.json")["MergedBLEU"] == 100.0);
  CHECK(w.json("merged.json")["DEQ"] == "undefined");
}

TEST_CASE("report on the committed fixture matches the golden report") {
  const fs::path data = KNNMT_TEST_DATA;
  const Workspace w("golden");
  REQUIRE(w.run("eval --candidates '" + (data / "fixture_candidates.jsonl").string() + "' --candidates-b '" +
                (data / "fixture_candidates_b.jsonl").string() + "' --base '" +
                (data / "fixture_candidates_b.jsonl").string() + "' --refs '" + (data / "fixture_refs.tsv").string() +
                "' --loglik '" + (data / "fixture_loglik.jsonl").string() + "' --scores '" +
                (data / "fixture_scores.jsonl").string() + "' --out report.json") == 0);
  Json got = w.json("report.json");
  Json want = Json::parse(slurp(data / "fixture_report.json"));
  got.erase("header");
  want.erase("header");
  CHECK(got.dump(2) == want.dump(2));
}

TEST_CASE("generated corpus reproduces the committed checksums") {
  const Workspace w("checksum");
  REQUIRE(w.run("gen-corpus --set corpus.seed=0") == 0);
  const Json got = w.json("data/corpus.json");
  const Json want = Json::parse(slurp(fs::path(KNNMT_TEST_DATA) / "corpus_seed0.json"));
  for (const char* split : {"train", "valid", "test", "test_ref_b"}) {
    INFO(split);
    CHECK(got["splits"][split] == want["splits"][split]);
  }
  // Default split sizes.
  CHECK(got["splits"]["train"]["pairs"] == 600);
  CHECK(got["splits"]["valid"]["pairs"] == 100);
  CHECK(got["splits"]["test"]["pairs"] == 100);
}

TEST_CASE("a single point sweep equals decode followed by eval") {
  const Workspace w("sweep");
  REQUIRE(w.run_cfg("gen-corpus") == 0);
  REQUIRE(w.run_cfg("train") == 0);
  REQUIRE(w.run_cfg("build") == 0);
  REQUIRE(w.run_cfg("decode") == 0);
  REQUIRE(w.run_cfg("eval") == 0);
  const Json report = w.json("work/report.json");

  Json spec;
  spec["base_config"] = "config.json";
  spec["seeds"] = {6};
  spec["output"] = "work/sweep.csv";
  spit(w.dir / "sweep.json", spec.dump());
  REQUIRE(w.run("sweep sweep.json --plot work/sweep.svg") == 0);
  std::istringstream csv(w.read("work/sweep.csv"));
  std::string comment, header, row;
  std::getline(csv, comment);
  std::getline(csv, header);
  std::getline(csv, row);
  CHECK(comment.rfind("# knnmt ", 0) == 0);
  std::vector<std::string> names, values;
  for (std::istringstream h(header); std::getline(h, names.emplace_back(), ',');) {}
  for (std::istringstream r(row); std::getline(r, values.emplace_back(), ',');) {}
  names.pop_back();
  values.pop_back();
  REQUIRE(names.size() == values.size());
  for (const char* key : {"DP", "BLEU@1", "BLEU@N", "RefBLEU"}) {
    const auto it = std::find(names.begin(), names.end(), key);
    REQUIRE(it != names.end());
    const double v = std::stod(values[it - names.begin()]);
    INFO(key);
    CHECK(std::fabs(v - report[key].get<double>()) <= 1e-7);
  }
  CHECK(w.read("work/sweep.svg").find("<svg") != std::string::npos);
  std::string again = w.read("work/sweep.csv");
  REQUIRE(w.run("sweep sweep.json --threads 2") == 0);
  CHECK(w.read("work/sweep.csv") == again);
}
