// Copyright 2026 The LayoutRel Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "layoutrel/config.hpp"
#include "layoutrel/corpus.hpp"
#include "layoutrel/errors.hpp"
#include "layoutrel/pipeline.hpp"

namespace layoutrel {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Scoped scratch directory under the system temp root; wiped on both ends
// so reruns never see stale artifacts.
struct TempOut {
  explicit TempOut(const std::string& name)
      : path((fs::temp_directory_path() / ("layoutrel_" + name)).string()) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempOut() { fs::remove_all(path); }
  std::string path;
};

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  REQUIRE(static_cast<bool>(f));
  std::ostringstream out;
  out << f.rdbuf();
  return out.str();
}

std::vector<json> read_records(const std::string& path) {
  std::ifstream f(path);
  REQUIRE(static_cast<bool>(f));
  std::vector<json> records;
  std::string line;
  while (std::getline(f, line)) {
    if (!line.empty()) records.push_back(json::parse(line));
  }
  return records;
}

const char* kTinyConfig = R"(
seed = 7
corpus.tables = 5
corpus.forms = 5
corpus.paragraphs = 5
corpus.table_rows_hi = 3
corpus.table_cols_hi = 3
split.train = 0.6
split.val = 0.2
encoder.d = 16
encoder.layers = 1
encoder.heads = 2
encoder.ffn = 24
pretrain.steps = 4
pretrain.batch = 2
pretrain.d_local = 8
pretrain.d_global = 8
finetune.epochs = 2
finetune.batch = 2
finetune.d_head = 8
)";

Config tiny_config() { return Config::from_string(kTinyConfig); }

TEST_CASE("config parsing: comments, trimming, and typed access") {
  const Config cfg = Config::from_string(
      "# leading comment\n"
      "  alpha.count =  12  # trailing comment\n"
      "\n"
      "beta.rate=0.25\n"
      "gamma.flag = true\n"
      "delta.name = hello world\n");
  CHECK(cfg.get_int("alpha.count", 0) == 12);
  CHECK(cfg.get_double("beta.rate", 0.0) == 0.25);
  CHECK(cfg.get_bool("gamma.flag", false));
  CHECK(cfg.get_string("delta.name", "") == "hello world");
  CHECK(cfg.get_int("absent", 99) == 99);
  CHECK(cfg.get_double("absent", 1.5) == 1.5);
  CHECK_FALSE(cfg.get_bool("absent", false));
  CHECK(cfg.has("alpha.count"));
  CHECK_FALSE(cfg.has("absent"));

  // Integers parse as doubles too, but not the other way round.
  CHECK(cfg.get_double("alpha.count", 0.0) == 12.0);
  CHECK_THROWS_AS(cfg.get_int("beta.rate", 0), ParseError);
  CHECK_THROWS_AS(cfg.get_bool("alpha.count", false), ParseError);
}

TEST_CASE("config parsing: malformed input is rejected with line numbers") {
  CHECK_THROWS_WITH_AS(Config::from_string("a = 1\nnonsense line\n"),
                       doctest::Contains("line 2"), ParseError);
  CHECK_THROWS_WITH_AS(Config::from_string("a = 1\na = 2\n"), doctest::Contains("duplicate"),
                       ParseError);
  CHECK_THROWS_WITH_AS(Config::from_string("bad key! = 1\n"), doctest::Contains("bad key"),
                       ParseError);
  CHECK_THROWS_AS(Config::from_file("/definitely/not/here.cfg"), StateError);

  Config cfg;
  cfg.set_pair("x.y=3");
  CHECK(cfg.get_int("x.y", 0) == 3);
  CHECK_THROWS_AS(cfg.set_pair("no_equals_sign"), ParseError);
  CHECK_THROWS_AS(cfg.set("spaces in key", "1"), ParseError);
}

TEST_CASE("config hashing: formatting-invariant, value-sensitive") {
  const Config a = Config::from_string("b = 2\na = 1\n");
  const Config b = Config::from_string("# reordered and noisy\na=1\n\nb =   2   # same\n");
  CHECK(a.hash() == b.hash());
  CHECK(a.hash_hex() == b.hash_hex());
  CHECK(a.hash_hex().size() == 16);
  CHECK(a.to_text() == "a = 1\nb = 2\n");

  Config c = Config::from_string("b = 2\na = 1\n");
  c.set("b", "3");
  CHECK(c.hash() != a.hash());
  Config d = Config::from_string("b = 2\na = 1\nextra = 0\n");
  CHECK(d.hash() != a.hash());
}

TEST_CASE("config validation: a clean config passes, every problem is listed") {
  CHECK(validate_config(Config()).empty());
  CHECK(validate_config(tiny_config()).empty());

  Config bad = Config::from_string(
      "mystery.key = 5\n"
      "corpus.tables = frogs\n"
      "corpus.table_rows_lo = 4\n"
      "corpus.table_rows_hi = 3\n"
      "encoder.d = 63\n"
      "pretrain.tasks = everything\n"
      "split.train = 0.9\n"
      "split.val = 0.3\n"
      "pretrain.n_cap = 4\n"
      "eval.threshold = 1.5\n");
  const std::vector<std::string> errors = validate_config(bad);
  const auto mentions = [&](const std::string& needle) {
    return std::any_of(errors.begin(), errors.end(), [&](const std::string& e) {
      return e.find(needle) != std::string::npos;
    });
  };
  CHECK(errors.size() >= 7);
  CHECK(mentions("mystery.key"));
  CHECK(mentions("frogs"));
  CHECK(mentions("table_rows_lo"));
  CHECK(mentions("does not divide"));
  CHECK(mentions("not one of"));
  CHECK(mentions("no test split"));
  CHECK(mentions("n_cap"));
  CHECK(mentions("eval.threshold"));

  CHECK_THROWS_AS(require_valid_config(bad), ValidationError);
  CHECK_NOTHROW(require_valid_config(tiny_config()));
}

TEST_CASE("config sections map onto the typed structs") {
  const Config cfg = tiny_config();
  const EncoderConfig enc = encoder_from_config(cfg);
  CHECK(enc.d == 16);
  CHECK(enc.layers == 1);
  CHECK(enc.heads == 2);
  CHECK(enc.ffn == 24);

  const PretrainConfig pre = pretrain_from_config(cfg);
  CHECK(pre.d_local == 8);
  CHECK(pre.total_steps == 4);
  CHECK(pre.use_lrcm);
  CHECK(pre.use_grcm);

  Config mvlm_only = tiny_config();
  mvlm_only.set("pretrain.tasks", "mvlm");
  CHECK_FALSE(pretrain_from_config(mvlm_only).use_lrcm);
  CHECK_FALSE(pretrain_from_config(mvlm_only).use_grcm);
  mvlm_only.set("pretrain.tasks", "mvlm+lrcm");
  CHECK(pretrain_from_config(mvlm_only).use_lrcm);
  CHECK_FALSE(pretrain_from_config(mvlm_only).use_grcm);

  const FinetuneConfig fc = finetune_from_config(cfg);
  CHECK(fc.d_head == 8);
  CHECK(fc.reweight);
  CHECK(fc.warm_start);

  const CorpusMix mix = mix_from_config(cfg);
  CHECK(mix.tables == 5);
  CHECK(mix.table_rows_hi == 3);
}

TEST_CASE("corpus splits: per-kind fractions with floor rounding") {
  CorpusMix mix;
  mix.tables = 10;
  mix.forms = 10;
  mix.paragraphs = 10;
  const std::vector<Document> docs = gen_corpus(mix, 3);
  const CorpusSplits splits = split_corpus(docs, 0.8, 0.1);
  CHECK(splits.train.size() == 24);
  CHECK(splits.val.size() == 3);
  CHECK(splits.test.size() == 3);

  // Each split holds one block per kind, in corpus order.
  int tables = 0, forms = 0, paragraphs = 0;
  for (const Document& doc : splits.train) {
    tables += doc.kind == DocKind::kTable;
    forms += doc.kind == DocKind::kForm;
    paragraphs += doc.kind == DocKind::kParagraphs;
  }
  CHECK(tables == 8);
  CHECK(forms == 8);
  CHECK(paragraphs == 8);

  // Train, val, and test partition the corpus: digests are disjoint and
  // jointly complete.
  std::vector<std::string> all;
  for (const Document& doc : docs) all.push_back(document_name(doc));
  std::vector<std::string> split_union;
  for (const auto* part : {&splits.train, &splits.val, &splits.test}) {
    for (const Document& doc : *part) split_union.push_back(document_name(doc));
  }
  std::sort(all.begin(), all.end());
  std::sort(split_union.begin(), split_union.end());
  CHECK(all == split_union);

  CHECK_THROWS_AS(split_corpus(docs, 0.0, 0.1), ParamError);
  CHECK_THROWS_AS(split_corpus(docs, 0.8, 0.3), ParamError);
}

TEST_CASE("gen: zero-count corpus, artifact reuse, and force") {
  TempOut out("pipeline_gen");
  Config cfg;
  cfg.set("corpus.tables", "0");
  cfg.set("corpus.forms", "0");
  cfg.set("corpus.paragraphs", "0");

  const GenResult first = run_gen(cfg, out.path, false);
  CHECK(first.documents == 0);
  CHECK_FALSE(first.skipped);
  CHECK(fs::exists(first.corpus_path));
  CHECK(load_corpus(first.corpus_path).empty());

  const GenResult again = run_gen(cfg, out.path, false);
  CHECK(again.skipped);
  CHECK(again.documents == 0);
  const GenResult forced = run_gen(cfg, out.path, true);
  CHECK_FALSE(forced.skipped);
}

TEST_CASE("gen: the written corpus is exactly the seeded generation") {
  TempOut out("pipeline_gen_content");
  const Config cfg = tiny_config();
  const GenResult r = run_gen(cfg, out.path, false);
  CHECK(r.documents == 15);

  const std::vector<Document> loaded = load_corpus(r.corpus_path);
  const std::vector<Document> expected = gen_corpus(mix_from_config(cfg), 7);
  REQUIRE(loaded.size() == expected.size());
  for (std::size_t i = 0; i < loaded.size(); ++i) {
    CHECK(document_name(loaded[i]) == document_name(expected[i]));
  }

  const std::vector<json> records = read_records(r.metrics_path);
  REQUIRE(records.size() == 1);
  CHECK(records.back().at("summary").get<bool>());
  CHECK(records.back().at("tables").get<int>() == 5);
  CHECK(fs::exists(r.dir + "/config.txt"));
  CHECK(read_file(r.dir + "/config.txt") == cfg.to_text());
}

TEST_CASE("pretrain: artifacts, metrics shape, reuse, and cross-root determinism") {
  TempOut out_a("pipeline_pretrain_a");
  TempOut out_b("pipeline_pretrain_b");
  const Config cfg = tiny_config();

  const PretrainResult r = run_pretrain(cfg, out_a.path, false);
  CHECK_FALSE(r.skipped);
  CHECK(r.steps == 4);
  CHECK(fs::exists(r.checkpoint_path));

  const std::vector<json> records = read_records(r.metrics_path);
  REQUIRE(records.size() == 5);  // one per step plus the summary
  for (int k = 0; k < 4; ++k) {
    CHECK(records[static_cast<std::size_t>(k)].at("step").get<int>() == k);
    CHECK(records[static_cast<std::size_t>(k)].count("mvlm") == 1);
  }
  CHECK(records.back().at("summary").get<bool>());

  const Checkpoint ck = load_checkpoint(r.checkpoint_path);
  CHECK(ck.meta.at("encoder.d") == "16");
  CHECK(ck.meta.at("tasks") == "mvlm+lrcm+grcm");
  CHECK(ck.meta.at("config") == cfg.hash_hex());
  bool has_encoder = false, has_rel = false;
  for (const auto& [name, value] : ck.params) {
    if (name.rfind("embed.", 0) == 0) has_encoder = true;
    if (name.rfind("rel.", 0) == 0) has_rel = true;
  }
  CHECK(has_encoder);
  CHECK(has_rel);

  const PretrainResult again = run_pretrain(cfg, out_a.path, false);
  CHECK(again.skipped);
  CHECK(again.total == r.total);
  CHECK(again.grad_norm == r.grad_norm);

  const PretrainResult other = run_pretrain(cfg, out_b.path, false);
  CHECK_FALSE(other.skipped);
  CHECK(read_file(r.metrics_path) == read_file(other.metrics_path));
  CHECK(read_file(r.checkpoint_path) == read_file(other.checkpoint_path));
}

TEST_CASE("pretrain: different seeds produce different checkpoints") {
  TempOut out("pipeline_pretrain_seeds");
  Config cfg = tiny_config();
  const PretrainResult r7 = run_pretrain(cfg, out.path, false);
  cfg.set("seed", "8");
  const PretrainResult r8 = run_pretrain(cfg, out.path, false);
  CHECK(r7.dir != r8.dir);
  CHECK(read_file(r7.checkpoint_path) != read_file(r8.checkpoint_path));
}

TEST_CASE("finetune: warm start from a pre-training checkpoint") {
  TempOut out("pipeline_finetune");
  Config cfg = tiny_config();
  const PretrainResult pre = run_pretrain(cfg, out.path, false);

  cfg.set("kind", "row");
  cfg.set("checkpoint", pre.checkpoint_path);
  const FinetuneResult ft = run_finetune(cfg, out.path, false);
  CHECK_FALSE(ft.skipped);
  CHECK(ft.kind == RelationKind::kRow);
  // Three train tables in batches of two give two steps per epoch.
  CHECK(ft.steps == 4);
  CHECK(ft.final_loss > 0.0);

  const Checkpoint ck = load_checkpoint(ft.checkpoint_path);
  CHECK(ck.meta.at("kind") == "row");
  CHECK(ck.meta.at("finetune.d_head") == "8");
  CHECK(ck.params.count("head.row.f.w1") == 1);

  // The loaded encoder weights start from the pre-trained values, so the
  // fine-tuned encoder must differ from a from-scratch run's encoder.
  const FinetuneResult again = run_finetune(cfg, out.path, false);
  CHECK(again.skipped);
  CHECK(again.final_loss == ft.final_loss);
  CHECK(again.steps == ft.steps);
}

TEST_CASE("finetune: missing kind and mismatched encoder are rejected") {
  TempOut out("pipeline_finetune_errors");
  Config cfg = tiny_config();
  CHECK_THROWS_WITH_AS(run_finetune(cfg, out.path, false), doctest::Contains("kind"),
                       ValidationError);

  const PretrainResult pre = run_pretrain(cfg, out.path, false);
  Config wider = tiny_config();
  wider.set("encoder.d", "32");
  wider.set("encoder.heads", "2");
  wider.set("kind", "row");
  wider.set("checkpoint", pre.checkpoint_path);
  CHECK_THROWS_WITH_AS(run_finetune(wider, out.path, false), doctest::Contains("encoder.d"),
                       StateError);

  Config missing = tiny_config();
  missing.set("kind", "row");
  missing.set("checkpoint", out.path + "/nope.bin");
  CHECK_THROWS_AS(run_finetune(missing, out.path, false), StateError);
}

TEST_CASE("finetune: from-scratch run works without a checkpoint") {
  TempOut out("pipeline_finetune_scratch");
  Config cfg = tiny_config();
  cfg.set("kind", "kv");
  const FinetuneResult ft = run_finetune(cfg, out.path, false);
  CHECK(ft.kind == RelationKind::kKv);
  CHECK(ft.steps == 4);  // three train forms in batches of two, two epochs
  CHECK(fs::exists(ft.checkpoint_path));
}

TEST_CASE("eval: scores the test split and reuses artifacts deterministically") {
  TempOut out("pipeline_eval");
  TempOut out2("pipeline_eval_second");
  Config cfg = tiny_config();
  const PretrainResult pre = run_pretrain(cfg, out.path, false);
  cfg.set("kind", "order");
  cfg.set("checkpoint", pre.checkpoint_path);
  const FinetuneResult ft = run_finetune(cfg, out.path, false);

  Config ecfg = tiny_config();
  ecfg.set("kind", "order");
  ecfg.set("checkpoint", ft.checkpoint_path);
  const EvalResult ev = run_eval(ecfg, out.path, false);
  CHECK_FALSE(ev.skipped);
  CHECK(ev.documents == 1);  // five paragraphs split 3/1/1
  CHECK(ev.pair_f1 >= 0.0);
  CHECK(ev.pair_f1 <= 1.0);
  CHECK(ev.bleu >= 0.0);
  CHECK(ev.bleu <= 1.0);
  CHECK(ev.heuristic_bleu >= 0.0);

  const std::vector<json> records = read_records(ev.metrics_path);
  REQUIRE(records.size() == 2);  // one document plus the summary
  CHECK(records[0].at("kind").get<std::string>() == "order");
  CHECK(records[0].count("bleu") == 1);
  CHECK(records.back().at("summary").get<bool>());

  const EvalResult again = run_eval(ecfg, out.path, false);
  CHECK(again.skipped);
  CHECK(again.pair_f1 == ev.pair_f1);
  CHECK(again.bleu == ev.bleu);

  const EvalResult cross = run_eval(ecfg, out2.path, false);
  CHECK(read_file(ev.metrics_path) == read_file(cross.metrics_path));

  Config no_ckpt = tiny_config();
  no_ckpt.set("kind", "order");
  CHECK_THROWS_WITH_AS(run_eval(no_ckpt, out.path, false), doctest::Contains("checkpoint"),
                       ValidationError);
}

TEST_CASE("dump-features: one record per document with row-stochastic distributions") {
  TempOut out("pipeline_dump");
  Config cfg = tiny_config();
  cfg.set("corpus.tables", "2");
  cfg.set("corpus.forms", "1");
  cfg.set("corpus.paragraphs", "1");
  const DumpResult r = run_dump_features(cfg, out.path, false);
  CHECK(r.documents == 4);

  const std::vector<json> records = read_records(r.features_path);
  REQUIRE(records.size() == 4);
  for (const json& rec : records) {
    const int n = rec.at("entities").get<int>();
    const auto& features = rec.at("features");
    const auto& rg = rec.at("global_relation");
    REQUIRE(static_cast<int>(features.size()) == n);
    CHECK(features[0].size() == 16);  // encoder width
    REQUIRE(static_cast<int>(rg.size()) == n);
    for (const auto& row : rg) {
      double sum = 0.0;
      for (const auto& v : row) sum += v.get<double>();
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    }
  }

  const DumpResult again = run_dump_features(cfg, out.path, false);
  CHECK(again.skipped);
  CHECK(again.documents == 4);
}

TEST_CASE("run tags carry the config hash and the seed") {
  Config cfg = tiny_config();
  CHECK(run_tag(cfg) == cfg.hash_hex() + "-s7");
  cfg.set("seed", "123");
  CHECK(run_tag(cfg) == cfg.hash_hex() + "-s123");
}

}  // namespace
}  // namespace layoutrel
