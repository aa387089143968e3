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

#include "layoutrel/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <utility>

#include "json.hpp"
#include "layoutrel/corpus.hpp"
#include "layoutrel/decode.hpp"
#include "layoutrel/errors.hpp"
#include "layoutrel/rng.hpp"

namespace layoutrel {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::uint64_t seed_of(const Config& cfg) {
  return static_cast<std::uint64_t>(cfg.get_int("seed", 1));
}

// The full key schema. Validation walks this list, so an entry here is what
// makes a key known; everything else is reported as unknown.
enum class KeyType { kInt, kDouble, kBool, kString, kEnum };

struct KeySpec {
  const char* key;
  KeyType type;
  double lo;  // inclusive unless open_lo
  double hi;  // inclusive unless open_hi
  bool open_lo;
  bool open_hi;
  std::vector<const char*> choices;
};

const std::vector<KeySpec>& schema() {
  static const std::vector<KeySpec> specs = {
      {"seed", KeyType::kInt, 0, 1e18, false, false, {}},
      {"kind", KeyType::kEnum, 0, 0, false, false, {"row", "col", "kv", "order"}},
      {"checkpoint", KeyType::kString, 0, 0, false, false, {}},
      {"corpus.tables", KeyType::kInt, 0, 1e6, false, false, {}},
      {"corpus.forms", KeyType::kInt, 0, 1e6, false, false, {}},
      {"corpus.paragraphs", KeyType::kInt, 0, 1e6, false, false, {}},
      {"corpus.table_rows_lo", KeyType::kInt, 2, 10, false, false, {}},
      {"corpus.table_rows_hi", KeyType::kInt, 2, 10, false, false, {}},
      {"corpus.table_cols_lo", KeyType::kInt, 2, 10, false, false, {}},
      {"corpus.table_cols_hi", KeyType::kInt, 2, 10, false, false, {}},
      {"corpus.form_pairs_lo", KeyType::kInt, 1, 12, false, false, {}},
      {"corpus.form_pairs_hi", KeyType::kInt, 1, 12, false, false, {}},
      {"corpus.para_sentences_lo", KeyType::kInt, 2, 20, false, false, {}},
      {"corpus.para_sentences_hi", KeyType::kInt, 2, 20, false, false, {}},
      {"split.train", KeyType::kDouble, 0, 1, true, true, {}},
      {"split.val", KeyType::kDouble, 0, 1, false, true, {}},
      {"encoder.d", KeyType::kInt, 2, 4096, false, false, {}},
      {"encoder.layers", KeyType::kInt, 0, 64, false, false, {}},
      {"encoder.heads", KeyType::kInt, 1, 64, false, false, {}},
      {"encoder.ffn", KeyType::kInt, 1, 65536, false, false, {}},
      {"encoder.max_seq_len", KeyType::kInt, 4, 65536, false, false, {}},
      {"encoder.max_entities", KeyType::kInt, 1, 4096, false, false, {}},
      {"encoder.patch_size", KeyType::kInt, 1, 256, false, false, {}},
      {"pretrain.steps", KeyType::kInt, 1, 1e8, false, false, {}},
      {"pretrain.batch", KeyType::kInt, 1, 4096, false, false, {}},
      {"pretrain.lr", KeyType::kDouble, 0, 100, true, false, {}},
      {"pretrain.mask_rate", KeyType::kDouble, 0, 1, true, true, {}},
      {"pretrain.tau_ema", KeyType::kDouble, 0, 1, true, true, {}},
      {"pretrain.tau_g", KeyType::kDouble, 0, 1000, true, false, {}},
      {"pretrain.d_local", KeyType::kInt, 1, 65536, false, false, {}},
      {"pretrain.d_global", KeyType::kInt, 1, 65536, false, false, {}},
      {"pretrain.n_cap", KeyType::kInt, 1, 4096, false, false, {}},
      {"pretrain.tasks", KeyType::kEnum, 0, 0, false, false,
       {"mvlm", "mvlm+lrcm", "mvlm+lrcm+grcm"}},
      {"pretrain.symmetrized", KeyType::kBool, 0, 0, false, false, {}},
      {"finetune.epochs", KeyType::kInt, 1, 1e6, false, false, {}},
      {"finetune.batch", KeyType::kInt, 1, 4096, false, false, {}},
      {"finetune.lr", KeyType::kDouble, 0, 100, true, false, {}},
      {"finetune.d_head", KeyType::kInt, 1, 65536, false, false, {}},
      {"finetune.reweight", KeyType::kBool, 0, 0, false, false, {}},
      {"finetune.warm_start", KeyType::kBool, 0, 0, false, false, {}},
      {"eval.threshold", KeyType::kDouble, 0, 1, true, true, {}},
  };
  return specs;
}

std::string range_text(const KeySpec& spec) {
  std::ostringstream out;
  out << (spec.open_lo ? "(" : "[") << spec.lo << ", " << spec.hi << (spec.open_hi ? ")" : "]");
  return out.str();
}

// Checks one key against its spec; appends messages instead of throwing so
// every problem in the config is reported together.
void check_key(const Config& cfg, const KeySpec& spec, std::vector<std::string>& errors) {
  if (!cfg.has(spec.key)) return;
  try {
    switch (spec.type) {
      case KeyType::kInt: {
        const double v = static_cast<double>(cfg.get_int(spec.key, 0));
        const bool below = spec.open_lo ? v <= spec.lo : v < spec.lo;
        const bool above = spec.open_hi ? v >= spec.hi : v > spec.hi;
        if (below || above) {
          errors.push_back("config key '" + std::string(spec.key) + "': value " +
                           cfg.get_string(spec.key, "") + " outside " + range_text(spec));
        }
        break;
      }
      case KeyType::kDouble: {
        const double v = cfg.get_double(spec.key, 0.0);
        const bool below = spec.open_lo ? v <= spec.lo : v < spec.lo;
        const bool above = spec.open_hi ? v >= spec.hi : v > spec.hi;
        if (below || above) {
          errors.push_back("config key '" + std::string(spec.key) + "': value " +
                           cfg.get_string(spec.key, "") + " outside " + range_text(spec));
        }
        break;
      }
      case KeyType::kBool:
        cfg.get_bool(spec.key, false);
        break;
      case KeyType::kString:
        break;
      case KeyType::kEnum: {
        const std::string v = cfg.get_string(spec.key, "");
        if (std::find(spec.choices.begin(), spec.choices.end(), v) == spec.choices.end()) {
          std::string menu;
          for (const char* c : spec.choices) {
            if (!menu.empty()) menu += ", ";
            menu += c;
          }
          errors.push_back("config key '" + std::string(spec.key) + "': '" + v +
                           "' is not one of " + menu);
        }
        break;
      }
    }
  } catch (const ParseError& e) {
    errors.push_back(e.what());
  }
}

// lo/hi pair ordering; only fires when both values parse individually.
void check_pair(const Config& cfg, const char* lo_key, const char* hi_key, long lo_def,
                long hi_def, std::vector<std::string>& errors) {
  try {
    const long lo = cfg.get_int(lo_key, lo_def);
    const long hi = cfg.get_int(hi_key, hi_def);
    if (lo > hi) {
      errors.push_back(std::string("config keys '") + lo_key + "'/'" + hi_key + "': " +
                       std::to_string(lo) + " > " + std::to_string(hi));
    }
  } catch (const ParseError&) {
    // already reported by the per-key pass
  }
}

std::string pick_dir(const std::string& out_root, const std::string& command,
                     const std::string& stem) {
  return out_root + "/" + command + "/" + stem;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw StateError("cannot create directory '" + dir + "': " + ec.message());
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw StateError("cannot write '" + path + "'");
  f << content;
  if (!f) throw StateError("short write to '" + path + "'");
}

void write_lines(const std::string& path, const std::vector<std::string>& lines) {
  std::string content;
  for (const std::string& line : lines) {
    content += line;
    content += '\n';
  }
  write_text_file(path, content);
}

// Pulls the summary record back out of an existing metrics file so skipped
// runs can still report their numbers.
json read_summary(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw StateError("cannot open metrics '" + path + "'");
  std::string line, found;
  while (std::getline(f, line)) {
    if (!line.empty()) found = line;
  }
  if (found.empty()) throw StateError("metrics '" + path + "' is empty");
  json j = json::parse(found, nullptr, false);
  if (j.is_discarded() || !j.value("summary", false)) {
    throw StateError("metrics '" + path + "' does not end in a summary record");
  }
  return j;
}

bool artifacts_present(const std::vector<std::string>& paths) {
  for (const std::string& p : paths) {
    if (!fs::exists(p)) return false;
  }
  return true;
}

std::vector<Document> build_corpus(const Config& cfg) {
  return gen_corpus(mix_from_config(cfg), seed_of(cfg));
}

// Tokenizes every document up front so capacity problems surface with the
// offending document's name before any training time is spent.
void preflight_tokenize(const std::vector<Document>& docs, const EncoderConfig& enc) {
  for (const Document& doc : docs) {
    try {
      tokenize(doc, enc);
    } catch (const CapacityError& e) {
      throw CapacityError(document_name(doc) + ": " + e.what());
    }
  }
}

DocKind doc_kind_for(RelationKind kind) {
  switch (kind) {
    case RelationKind::kRow:
    case RelationKind::kCol:
      return DocKind::kTable;
    case RelationKind::kKv:
      return DocKind::kForm;
    case RelationKind::kOrder:
      return DocKind::kParagraphs;
  }
  throw ParamError("unknown relation kind value");
}

std::vector<Document> filter_kind(const std::vector<Document>& docs, DocKind kind) {
  std::vector<Document> out;
  for (const Document& doc : docs) {
    if (doc.kind == kind) out.push_back(doc);
  }
  return out;
}

RelationKind required_kind(const Config& cfg, const char* command) {
  if (!cfg.has("kind")) {
    throw ValidationError(std::string("config key 'kind' is required for ") + command);
  }
  return parse_relation_kind(cfg.get_string("kind", ""));
}

std::string required_checkpoint(const Config& cfg, const char* command) {
  const std::string path = cfg.get_string("checkpoint", "");
  if (path.empty()) {
    throw ValidationError(std::string("config key 'checkpoint' is required for ") + command);
  }
  return path;
}

std::map<std::string, std::string> encoder_meta(const EncoderConfig& enc) {
  return {
      {"encoder.d", std::to_string(enc.d)},
      {"encoder.layers", std::to_string(enc.layers)},
      {"encoder.heads", std::to_string(enc.heads)},
      {"encoder.ffn", std::to_string(enc.ffn)},
      {"encoder.max_seq_len", std::to_string(enc.max_seq_len)},
      {"encoder.max_entities", std::to_string(enc.max_entities)},
      {"encoder.patch_size", std::to_string(enc.patch_size)},
  };
}

int meta_int(const std::map<std::string, std::string>& meta, const std::string& key) {
  const auto it = meta.find(key);
  if (it == meta.end()) throw StateError("checkpoint meta is missing '" + key + "'");
  try {
    return std::stoi(it->second);
  } catch (const std::exception&) {
    throw StateError("checkpoint meta '" + key + "': bad value '" + it->second + "'");
  }
}

// The checkpoint describes the encoder it was trained with; rebuilding from
// the meta block keeps evaluation independent of the caller's encoder keys.
EncoderConfig encoder_from_meta(const std::map<std::string, std::string>& meta) {
  EncoderConfig enc;
  enc.d = meta_int(meta, "encoder.d");
  enc.layers = meta_int(meta, "encoder.layers");
  enc.heads = meta_int(meta, "encoder.heads");
  enc.ffn = meta_int(meta, "encoder.ffn");
  enc.max_seq_len = meta_int(meta, "encoder.max_seq_len");
  enc.max_entities = meta_int(meta, "encoder.max_entities");
  enc.patch_size = meta_int(meta, "encoder.patch_size");
  enc.validate();
  return enc;
}

void require_meta_matches(const EncoderConfig& enc,
                          const std::map<std::string, std::string>& meta) {
  const EncoderConfig from_meta = encoder_from_meta(meta);
  const auto want = encoder_meta(enc);
  const auto got = encoder_meta(from_meta);
  for (const auto& [key, value] : want) {
    if (got.at(key) != value) {
      throw StateError("checkpoint " + key + " = " + got.at(key) +
                       " does not match the config value " + value);
    }
  }
}

bool is_encoder_param_name(const std::string& name) {
  return name.rfind("embed.", 0) == 0 || name.rfind("layer", 0) == 0;
}

ParamSet encoder_subset(const ParamSet& params) {
  ParamSet out;
  for (const auto& [name, value] : params) {
    if (is_encoder_param_name(name)) out[name] = value;
  }
  return out;
}

json matrix_json(const Tensor& t) {
  json rows = json::array();
  for (int r = 0; r < t.shape()[0]; ++r) {
    json row = json::array();
    for (int c = 0; c < t.shape()[1]; ++c) row.push_back(t.at(r, c));
    rows.push_back(row);
  }
  return rows;
}

double mean_of(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  double sum = 0.0;
  for (const double x : xs) sum += x;
  return sum / static_cast<double>(xs.size());
}

}  // namespace

std::vector<std::string> validate_config(const Config& cfg) {
  std::vector<std::string> errors;

  std::set<std::string> known;
  for (const KeySpec& spec : schema()) known.insert(spec.key);
  for (const auto& [key, value] : cfg.entries()) {
    if (!known.count(key)) errors.push_back("unknown config key '" + key + "'");
  }
  for (const KeySpec& spec : schema()) check_key(cfg, spec, errors);

  check_pair(cfg, "corpus.table_rows_lo", "corpus.table_rows_hi", 2, 4, errors);
  check_pair(cfg, "corpus.table_cols_lo", "corpus.table_cols_hi", 2, 4, errors);
  check_pair(cfg, "corpus.form_pairs_lo", "corpus.form_pairs_hi", 2, 6, errors);
  check_pair(cfg, "corpus.para_sentences_lo", "corpus.para_sentences_hi", 4, 10, errors);

  // Cross-key rules, evaluated only on values that parsed cleanly.
  try {
    const double train = cfg.get_double("split.train", 0.8);
    const double val = cfg.get_double("split.val", 0.1);
    if (train + val >= 1.0) {
      errors.push_back("config keys 'split.train'/'split.val': " + std::to_string(train) + " + " +
                       std::to_string(val) + " leaves no test split");
    }
  } catch (const ParseError&) {
  }
  try {
    const long d = cfg.get_int("encoder.d", 64);
    const long heads = cfg.get_int("encoder.heads", 4);
    if (heads > 0 && d % heads != 0) {
      errors.push_back("config key 'encoder.heads': " + std::to_string(heads) +
                       " does not divide encoder.d = " + std::to_string(d));
    }
  } catch (const ParseError&) {
  }
  try {
    const long n_cap = cfg.get_int("pretrain.n_cap", kMaxEntitiesPerDoc);
    const long max_entities = cfg.get_int("encoder.max_entities", kMaxEntitiesPerDoc);
    if (n_cap < max_entities) {
      errors.push_back("config key 'pretrain.n_cap': " + std::to_string(n_cap) +
                       " is below encoder.max_entities = " + std::to_string(max_entities));
    }
  } catch (const ParseError&) {
  }
  try {
    const long max_entities = cfg.get_int("encoder.max_entities", kMaxEntitiesPerDoc);
    long implied = 0;
    if (cfg.get_int("corpus.tables", 30) > 0) {
      implied = std::max(implied, cfg.get_int("corpus.table_rows_hi", 4) *
                                      cfg.get_int("corpus.table_cols_hi", 4));
    }
    if (cfg.get_int("corpus.forms", 30) > 0) {
      implied = std::max(implied, 2 * cfg.get_int("corpus.form_pairs_hi", 6));
    }
    if (cfg.get_int("corpus.paragraphs", 30) > 0) {
      implied = std::max(implied, cfg.get_int("corpus.para_sentences_hi", 10));
    }
    if (implied > max_entities) {
      errors.push_back("config key 'encoder.max_entities': corpus can produce " +
                       std::to_string(implied) + " entities but the budget is " +
                       std::to_string(max_entities));
    }
    if (implied > kMaxEntitiesPerDoc) {
      errors.push_back("config keys 'corpus.*_hi': corpus can produce " + std::to_string(implied) +
                       " entities, above the generator cap of " +
                       std::to_string(kMaxEntitiesPerDoc));
    }
  } catch (const ParseError&) {
  }

  return errors;
}

void require_valid_config(const Config& cfg) {
  const std::vector<std::string> errors = validate_config(cfg);
  if (errors.empty()) return;
  std::string joined;
  for (const std::string& e : errors) {
    if (!joined.empty()) joined += '\n';
    joined += e;
  }
  throw ValidationError(joined);
}

CorpusMix mix_from_config(const Config& cfg) {
  CorpusMix mix;
  mix.tables = static_cast<int>(cfg.get_int("corpus.tables", 30));
  mix.forms = static_cast<int>(cfg.get_int("corpus.forms", 30));
  mix.paragraphs = static_cast<int>(cfg.get_int("corpus.paragraphs", 30));
  mix.table_rows_lo = static_cast<int>(cfg.get_int("corpus.table_rows_lo", mix.table_rows_lo));
  mix.table_rows_hi = static_cast<int>(cfg.get_int("corpus.table_rows_hi", mix.table_rows_hi));
  mix.table_cols_lo = static_cast<int>(cfg.get_int("corpus.table_cols_lo", mix.table_cols_lo));
  mix.table_cols_hi = static_cast<int>(cfg.get_int("corpus.table_cols_hi", mix.table_cols_hi));
  mix.form_pairs_lo = static_cast<int>(cfg.get_int("corpus.form_pairs_lo", mix.form_pairs_lo));
  mix.form_pairs_hi = static_cast<int>(cfg.get_int("corpus.form_pairs_hi", mix.form_pairs_hi));
  mix.para_sentences_lo =
      static_cast<int>(cfg.get_int("corpus.para_sentences_lo", mix.para_sentences_lo));
  mix.para_sentences_hi =
      static_cast<int>(cfg.get_int("corpus.para_sentences_hi", mix.para_sentences_hi));
  return mix;
}

EncoderConfig encoder_from_config(const Config& cfg) {
  EncoderConfig enc;
  enc.d = static_cast<int>(cfg.get_int("encoder.d", enc.d));
  enc.layers = static_cast<int>(cfg.get_int("encoder.layers", enc.layers));
  enc.heads = static_cast<int>(cfg.get_int("encoder.heads", enc.heads));
  enc.ffn = static_cast<int>(cfg.get_int("encoder.ffn", enc.ffn));
  enc.max_seq_len = static_cast<int>(cfg.get_int("encoder.max_seq_len", enc.max_seq_len));
  enc.max_entities = static_cast<int>(cfg.get_int("encoder.max_entities", enc.max_entities));
  enc.patch_size = static_cast<int>(cfg.get_int("encoder.patch_size", enc.patch_size));
  return enc;
}

PretrainConfig pretrain_from_config(const Config& cfg) {
  PretrainConfig pre;
  pre.d_local = static_cast<int>(cfg.get_int("pretrain.d_local", pre.d_local));
  pre.d_global = static_cast<int>(cfg.get_int("pretrain.d_global", pre.d_global));
  pre.n_cap = static_cast<int>(cfg.get_int("pretrain.n_cap", pre.n_cap));
  pre.tau_g = cfg.get_double("pretrain.tau_g", pre.tau_g);
  pre.tau_ema = cfg.get_double("pretrain.tau_ema", pre.tau_ema);
  pre.mask_rate = cfg.get_double("pretrain.mask_rate", pre.mask_rate);
  pre.symmetrized = cfg.get_bool("pretrain.symmetrized", pre.symmetrized);
  pre.lr = cfg.get_double("pretrain.lr", pre.lr);
  pre.total_steps = static_cast<int>(cfg.get_int("pretrain.steps", pre.total_steps));
  const std::string tasks = cfg.get_string("pretrain.tasks", "mvlm+lrcm+grcm");
  pre.use_lrcm = tasks != "mvlm";
  pre.use_grcm = tasks == "mvlm+lrcm+grcm";
  return pre;
}

FinetuneConfig finetune_from_config(const Config& cfg) {
  FinetuneConfig fc;
  fc.d_head = static_cast<int>(cfg.get_int("finetune.d_head", fc.d_head));
  fc.lr = cfg.get_double("finetune.lr", fc.lr);
  fc.reweight = cfg.get_bool("finetune.reweight", fc.reweight);
  fc.warm_start = cfg.get_bool("finetune.warm_start", fc.warm_start);
  return fc;
}

CorpusSplits split_corpus(const std::vector<Document>& docs, double train_frac, double val_frac) {
  if (!(train_frac > 0.0) || val_frac < 0.0 || train_frac + val_frac >= 1.0 + 1e-12) {
    throw ParamError("split_corpus: fractions must satisfy 0 < train, 0 <= val, train + val <= 1");
  }
  CorpusSplits splits;
  for (const DocKind kind : {DocKind::kTable, DocKind::kForm, DocKind::kParagraphs}) {
    std::vector<Document> of_kind = filter_kind(docs, kind);
    const auto n = static_cast<long>(of_kind.size());
    const long n_train = static_cast<long>(std::floor(static_cast<double>(n) * train_frac));
    const long n_val = static_cast<long>(std::floor(static_cast<double>(n) * val_frac));
    for (long i = 0; i < n; ++i) {
      Document& doc = of_kind[static_cast<std::size_t>(i)];
      if (i < n_train) {
        splits.train.push_back(std::move(doc));
      } else if (i < n_train + n_val) {
        splits.val.push_back(std::move(doc));
      } else {
        splits.test.push_back(std::move(doc));
      }
    }
  }
  return splits;
}

std::string run_tag(const Config& cfg) {
  return cfg.hash_hex() + "-s" + std::to_string(seed_of(cfg));
}

GenResult run_gen(const Config& cfg, const std::string& out_root, bool force) {
  require_valid_config(cfg);
  GenResult r;
  r.dir = pick_dir(out_root, "gen", run_tag(cfg));
  r.corpus_path = r.dir + "/corpus.jsonl";
  r.metrics_path = r.dir + "/metrics.jsonl";
  if (!force && artifacts_present({r.corpus_path, r.metrics_path})) {
    r.skipped = true;
    r.documents = read_summary(r.metrics_path).at("documents").get<int>();
    return r;
  }

  const std::vector<Document> docs = build_corpus(cfg);
  int tables = 0, forms = 0, paragraphs = 0;
  for (const Document& doc : docs) {
    if (doc.kind == DocKind::kTable) ++tables;
    if (doc.kind == DocKind::kForm) ++forms;
    if (doc.kind == DocKind::kParagraphs) ++paragraphs;
  }
  r.documents = static_cast<int>(docs.size());

  ensure_dir(r.dir);
  write_text_file(r.dir + "/config.txt", cfg.to_text());
  save_corpus(docs, r.corpus_path);
  const json summary = {{"summary", true},       {"command", "gen"},
                        {"config", cfg.hash_hex()}, {"seed", seed_of(cfg)},
                        {"documents", r.documents}, {"tables", tables},
                        {"forms", forms},           {"paragraphs", paragraphs}};
  write_lines(r.metrics_path, {summary.dump()});
  return r;
}

PretrainResult run_pretrain(const Config& cfg, const std::string& out_root, bool force) {
  require_valid_config(cfg);
  PretrainResult r;
  r.dir = pick_dir(out_root, "pretrain", run_tag(cfg));
  r.checkpoint_path = r.dir + "/checkpoint.bin";
  r.metrics_path = r.dir + "/metrics.jsonl";
  if (!force && artifacts_present({r.checkpoint_path, r.metrics_path})) {
    r.skipped = true;
    const json s = read_summary(r.metrics_path);
    r.steps = s.at("steps").get<long>();
    r.total = s.at("total").get<double>();
    r.mvlm = s.at("mvlm").get<double>();
    r.lrcm = s.at("lrcm").get<double>();
    r.grcm = s.at("grcm").get<double>();
    r.grad_norm = s.at("grad_norm").get<double>();
    return r;
  }

  const std::uint64_t seed = seed_of(cfg);
  const CorpusSplits splits = split_corpus(build_corpus(cfg), cfg.get_double("split.train", 0.8),
                                           cfg.get_double("split.val", 0.1));
  if (splits.train.empty()) throw DegenerateInputError("pretrain: train split is empty");
  const EncoderConfig enc = encoder_from_config(cfg);
  preflight_tokenize(splits.train, enc);
  const PretrainConfig pre = pretrain_from_config(cfg);
  const long steps = cfg.get_int("pretrain.steps", pre.total_steps);
  const long batch_size = cfg.get_int("pretrain.batch", 8);

  Rng init = derive_rng(seed, "init");
  ModelState state = init_model_state(enc, pre, init);

  std::vector<std::string> lines;
  lines.reserve(static_cast<std::size_t>(steps) + 1);
  std::vector<double> tail_total, tail_mvlm, tail_lrcm, tail_grcm;
  const long tail_from = std::max<long>(0, steps - 50);
  double last_grad_norm = 0.0;
  for (long k = 0; k < steps; ++k) {
    Rng picker = derive_rng(seed, "batch", static_cast<std::uint64_t>(k));
    std::vector<Document> batch;
    batch.reserve(static_cast<std::size_t>(batch_size));
    for (long b = 0; b < batch_size; ++b) {
      const auto idx =
          picker.uniform_int(0, static_cast<std::int64_t>(splits.train.size()) - 1);
      batch.push_back(splits.train[static_cast<std::size_t>(idx)]);
    }
    const std::uint64_t step_seed = derive_rng(seed, "step", static_cast<std::uint64_t>(k)).next_u64();
    const StepMetrics m = pretrain_step(state, batch, step_seed);
    const json record = {{"step", m.step},   {"total", m.total}, {"mvlm", m.mvlm},
                         {"lrcm", m.lrcm},   {"grcm", m.grcm},   {"grad_norm", m.grad_norm}};
    lines.push_back(record.dump());
    if (k >= tail_from) {
      tail_total.push_back(m.total);
      tail_mvlm.push_back(m.mvlm);
      tail_lrcm.push_back(m.lrcm);
      tail_grcm.push_back(m.grcm);
    }
    last_grad_norm = m.grad_norm;
  }

  r.steps = steps;
  r.total = mean_of(tail_total);
  r.mvlm = mean_of(tail_mvlm);
  r.lrcm = mean_of(tail_lrcm);
  r.grcm = mean_of(tail_grcm);
  r.grad_norm = last_grad_norm;

  ensure_dir(r.dir);
  write_text_file(r.dir + "/config.txt", cfg.to_text());
  auto meta = encoder_meta(enc);
  meta["command"] = "pretrain";
  meta["tasks"] = cfg.get_string("pretrain.tasks", "mvlm+lrcm+grcm");
  meta["steps"] = std::to_string(steps);
  meta["seed"] = std::to_string(seed);
  meta["config"] = cfg.hash_hex();
  save_checkpoint(r.checkpoint_path, state.online, meta);
  const json summary = {{"summary", true},  {"command", "pretrain"}, {"config", cfg.hash_hex()},
                        {"seed", seed},     {"steps", r.steps},      {"total", r.total},
                        {"mvlm", r.mvlm},   {"lrcm", r.lrcm},        {"grcm", r.grcm},
                        {"grad_norm", r.grad_norm}};
  lines.push_back(summary.dump());
  write_lines(r.metrics_path, lines);
  return r;
}

FinetuneResult run_finetune(const Config& cfg, const std::string& out_root, bool force) {
  require_valid_config(cfg);
  FinetuneResult r;
  r.kind = required_kind(cfg, "finetune");
  const std::string kind_name = to_string(r.kind);
  r.dir = pick_dir(out_root, "finetune", run_tag(cfg) + "-" + kind_name);
  r.checkpoint_path = r.dir + "/state.bin";
  r.metrics_path = r.dir + "/metrics.jsonl";
  if (!force && artifacts_present({r.checkpoint_path, r.metrics_path})) {
    r.skipped = true;
    const json s = read_summary(r.metrics_path);
    r.steps = s.at("steps").get<long>();
    r.final_loss = s.at("final_loss").get<double>();
    return r;
  }

  const std::uint64_t seed = seed_of(cfg);
  const CorpusSplits splits = split_corpus(build_corpus(cfg), cfg.get_double("split.train", 0.8),
                                           cfg.get_double("split.val", 0.1));
  std::vector<Document> train = filter_kind(splits.train, doc_kind_for(r.kind));
  if (train.empty()) {
    throw DegenerateInputError("finetune: train split has no " + kind_name + " documents");
  }
  const EncoderConfig enc = encoder_from_config(cfg);
  preflight_tokenize(train, enc);
  const FinetuneConfig fcfg = finetune_from_config(cfg);

  Rng init = derive_rng(seed, "finetune-init-" + kind_name);
  FinetuneState state = init_finetune_state(enc, fcfg, init);
  const std::string pretrained = cfg.get_string("checkpoint", "");
  if (!pretrained.empty()) {
    const Checkpoint ck = load_checkpoint(pretrained);
    require_meta_matches(enc, ck.meta);
    load_pretrained_encoder(state, encoder_subset(ck.params));
    if (fcfg.warm_start) warm_start_heads(state, ck.params);
  }

  const long epochs = cfg.get_int("finetune.epochs", 50);
  const long batch_size = cfg.get_int("finetune.batch", 8);
  std::vector<std::string> lines;
  double final_loss = 0.0;
  for (long e = 0; e < epochs; ++e) {
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffler = derive_rng(seed, "finetune-batch-" + kind_name, static_cast<std::uint64_t>(e));
    for (std::size_t i = order.size(); i > 1; --i) {
      const auto j = shuffler.uniform_int(0, static_cast<std::int64_t>(i) - 1);
      std::swap(order[i - 1], order[static_cast<std::size_t>(j)]);
    }
    double epoch_loss = 0.0;
    long epoch_docs = 0;
    for (std::size_t at = 0; at < order.size(); at += static_cast<std::size_t>(batch_size)) {
      std::vector<Document> batch;
      for (std::size_t b = at; b < order.size() && b < at + static_cast<std::size_t>(batch_size);
           ++b) {
        batch.push_back(train[order[b]]);
      }
      const FinetuneMetrics m = finetune_step(state, batch, r.kind);
      epoch_loss += m.loss * static_cast<double>(batch.size());
      epoch_docs += static_cast<long>(batch.size());
      const json record = {{"epoch", e},       {"step", m.step},
                           {"loss", m.loss},   {"grad_norm", m.grad_norm},
                           {"kind", kind_name}};
      lines.push_back(record.dump());
    }
    final_loss = epoch_loss / static_cast<double>(epoch_docs);
  }

  r.steps = state.step;
  r.final_loss = final_loss;
  ensure_dir(r.dir);
  write_text_file(r.dir + "/config.txt", cfg.to_text());
  auto meta = encoder_meta(enc);
  meta["command"] = "finetune";
  meta["kind"] = kind_name;
  meta["finetune.d_head"] = std::to_string(fcfg.d_head);
  meta["seed"] = std::to_string(seed);
  meta["config"] = cfg.hash_hex();
  save_checkpoint(r.checkpoint_path, state.params, meta);
  const json summary = {{"summary", true},    {"command", "finetune"},
                        {"config", cfg.hash_hex()}, {"seed", seed},
                        {"kind", kind_name},  {"steps", r.steps},
                        {"final_loss", r.final_loss}};
  lines.push_back(summary.dump());
  write_lines(r.metrics_path, lines);
  return r;
}

EvalResult run_eval(const Config& cfg, const std::string& out_root, bool force) {
  require_valid_config(cfg);
  EvalResult r;
  r.kind = required_kind(cfg, "eval");
  const std::string kind_name = to_string(r.kind);
  const std::string checkpoint = required_checkpoint(cfg, "eval");
  r.dir = pick_dir(out_root, "eval", run_tag(cfg) + "-" + kind_name);
  r.metrics_path = r.dir + "/metrics.jsonl";
  if (!force && artifacts_present({r.metrics_path})) {
    r.skipped = true;
    const json s = read_summary(r.metrics_path);
    r.documents = s.at("documents").get<int>();
    r.pair_f1 = s.at("pair_f1").get<double>();
    r.structure_exact = s.at("structure_exact").get<double>();
    r.bleu = s.value("bleu", 0.0);
    r.heuristic_bleu = s.value("heuristic_bleu", 0.0);
    return r;
  }

  const CorpusSplits splits = split_corpus(build_corpus(cfg), cfg.get_double("split.train", 0.8),
                                           cfg.get_double("split.val", 0.1));
  const std::vector<Document> test = filter_kind(splits.test, doc_kind_for(r.kind));
  if (test.empty()) {
    throw DegenerateInputError("eval: test split has no " + kind_name + " documents");
  }

  const Checkpoint ck = load_checkpoint(checkpoint);
  FinetuneState state;
  state.encoder = encoder_from_meta(ck.meta);
  state.config.d_head = meta_int(ck.meta, "finetune.d_head");
  state.params = ck.params;
  state.validate();
  const double threshold = cfg.get_double("eval.threshold", 0.5);
  preflight_tokenize(test, state.encoder);

  std::vector<std::string> lines;
  std::vector<double> f1s, exacts, bleus, heuristics;
  for (const Document& doc : test) {
    const RelationMatrix pred = predict_relation_matrix(doc, state, r.kind, threshold);
    const RelationMatrix gt = gt_relation_matrix(doc, r.kind);
    const double f1 = pairwise_f1(pred, gt);
    bool exact = false;
    json record = {{"doc", document_name(doc)}, {"kind", kind_name}, {"pair_f1", f1}};
    switch (r.kind) {
      case RelationKind::kRow:
        exact = decode_groups(pred) == doc.labels.row_groups;
        break;
      case RelationKind::kCol:
        exact = decode_groups(pred) == doc.labels.col_groups;
        break;
      case RelationKind::kKv: {
        const std::vector<KvLink> links = decode_kv(pred, doc);
        std::vector<std::pair<int, int>> got;
        for (const KvLink& link : links) got.emplace_back(link.key_id, link.value_id);
        std::vector<std::pair<int, int>> want = doc.labels.kv_links;
        std::sort(want.begin(), want.end());
        exact = got == want;
        break;
      }
      case RelationKind::kOrder: {
        const std::vector<int> decoded = decode_reading_order(pred);
        exact = decoded == doc.labels.reading_order;
        const double b = bleu(decoded, doc.labels.reading_order);
        const double h = bleu(heuristic_order(doc), doc.labels.reading_order);
        bleus.push_back(b);
        heuristics.push_back(h);
        record["bleu"] = b;
        record["heuristic_bleu"] = h;
        break;
      }
    }
    record["exact"] = exact ? 1 : 0;
    f1s.push_back(f1);
    exacts.push_back(exact ? 1.0 : 0.0);
    lines.push_back(record.dump());
  }

  r.documents = static_cast<int>(test.size());
  r.pair_f1 = mean_of(f1s);
  r.structure_exact = mean_of(exacts);
  r.bleu = mean_of(bleus);
  r.heuristic_bleu = mean_of(heuristics);

  ensure_dir(r.dir);
  write_text_file(r.dir + "/config.txt", cfg.to_text());
  json summary = {{"summary", true},
                  {"command", "eval"},
                  {"config", cfg.hash_hex()},
                  {"seed", seed_of(cfg)},
                  {"kind", kind_name},
                  {"documents", r.documents},
                  {"pair_f1", r.pair_f1},
                  {"structure_exact", r.structure_exact}};
  if (r.kind == RelationKind::kOrder) {
    summary["bleu"] = r.bleu;
    summary["heuristic_bleu"] = r.heuristic_bleu;
  }
  lines.push_back(summary.dump());
  write_lines(r.metrics_path, lines);
  return r;
}

DumpResult run_dump_features(const Config& cfg, const std::string& out_root, bool force) {
  require_valid_config(cfg);
  DumpResult r;
  r.dir = pick_dir(out_root, "dump", run_tag(cfg));
  r.features_path = r.dir + "/features.jsonl";
  if (!force && artifacts_present({r.features_path})) {
    r.skipped = true;
    std::ifstream f(r.features_path);
    std::string line;
    while (std::getline(f, line)) {
      if (!line.empty()) ++r.documents;
    }
    return r;
  }

  const std::vector<Document> docs = build_corpus(cfg);
  EncoderConfig enc;
  ParamSet params;
  const std::string checkpoint = cfg.get_string("checkpoint", "");
  if (checkpoint.empty()) {
    enc = encoder_from_config(cfg);
    Rng init = derive_rng(seed_of(cfg), "init");
    params = init_model_state(enc, pretrain_from_config(cfg), init).online;
  } else {
    const Checkpoint ck = load_checkpoint(checkpoint);
    enc = encoder_from_meta(ck.meta);
    params = ck.params;
  }
  preflight_tokenize(docs, enc);
  const double tau_g = cfg.get_double("pretrain.tau_g", 0.5);

  std::vector<std::string> lines;
  lines.reserve(docs.size());
  for (const Document& doc : docs) {
    Tape tape;
    const VarSet w = make_leaves(tape, params, /*requires_grad=*/false);
    const Var m = entity_features(tape, w, tokenize(doc, enc), enc);
    const Var rg = global_relation_distribution(m, tau_g);
    const json record = {{"doc", document_name(doc)},
                         {"kind", to_string(doc.kind)},
                         {"entities", doc.n_entities()},
                         {"features", matrix_json(m.value())},
                         {"global_relation", matrix_json(rg.value())}};
    lines.push_back(record.dump());
  }

  r.documents = static_cast<int>(docs.size());
  ensure_dir(r.dir);
  write_text_file(r.dir + "/config.txt", cfg.to_text());
  write_lines(r.features_path, lines);
  return r;
}

}  // namespace layoutrel
