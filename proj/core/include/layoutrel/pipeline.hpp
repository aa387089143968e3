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
//
// Configuration-driven runs: corpus generation, pre-training, per-kind
// fine-tuning, evaluation, and feature dumps. Every function is a library
// entry point (the command-line tool is a thin shell around them) and every
// stochastic choice flows from the config seed through named derived
// streams, so a config fully determines its artifacts byte for byte.
//
// Artifacts live under <out_root>/<command>/<hash16>-s<seed>[-<kind>] where
// hash16 addresses the canonical config text. A run whose artifacts already
// exist is skipped unless forced; results are then read back from the
// metrics file. The corpus is regenerated in memory by every command from
// the corpus.* keys and the seed instead of being read from the gen
// artifact: generation is pure, so the documents are identical and no
// cross-run file plumbing is needed. The gen command exists to materialize
// the same corpus for external consumers.

#ifndef LAYOUTREL_PIPELINE_HPP_
#define LAYOUTREL_PIPELINE_HPP_

#include <string>
#include <vector>

#include "layoutrel/config.hpp"
#include "layoutrel/document.hpp"
#include "layoutrel/encoder.hpp"
#include "layoutrel/pretrain.hpp"
#include "layoutrel/relhead.hpp"
#include "layoutrel/synth.hpp"

namespace layoutrel {

// Every problem in the config, one message per line item: unknown keys,
// unparseable or out-of-range values, and cross-key contradictions. Empty
// means the config is runnable.
std::vector<std::string> validate_config(const Config& cfg);

// ValidationError carrying every message from validate_config, newline
// separated, so callers fail with the complete list.
void require_valid_config(const Config& cfg);

// Typed views of the config sections, defaults filled in.
CorpusMix mix_from_config(const Config& cfg);
EncoderConfig encoder_from_config(const Config& cfg);
PretrainConfig pretrain_from_config(const Config& cfg);
FinetuneConfig finetune_from_config(const Config& cfg);

// Deterministic per-kind split: the first train_frac of each kind's list
// goes to train, the next val_frac to val, the rest to test. Fractions are
// rounded down per kind, so 300 documents at 0.8/0.1 give 240/30/30.
struct CorpusSplits {
  std::vector<Document> train;
  std::vector<Document> val;
  std::vector<Document> test;
};
CorpusSplits split_corpus(const std::vector<Document>& docs, double train_frac, double val_frac);

// <hash16>-s<seed>, the directory stem every artifact of this config uses.
std::string run_tag(const Config& cfg);

struct GenResult {
  std::string dir;
  std::string corpus_path;
  std::string metrics_path;
  int documents = 0;
  bool skipped = false;
};
GenResult run_gen(const Config& cfg, const std::string& out_root, bool force);

struct PretrainResult {
  std::string dir;
  std::string checkpoint_path;
  std::string metrics_path;
  long steps = 0;
  // Mean over the final tail of steps (at most 50), one decimal story per
  // objective, plus the last step's gradient norm.
  double total = 0.0;
  double mvlm = 0.0;
  double lrcm = 0.0;
  double grcm = 0.0;
  double grad_norm = 0.0;
  bool skipped = false;
};
PretrainResult run_pretrain(const Config& cfg, const std::string& out_root, bool force);

struct FinetuneResult {
  std::string dir;
  std::string checkpoint_path;
  std::string metrics_path;
  RelationKind kind = RelationKind::kRow;
  long steps = 0;
  double final_loss = 0.0;  // mean loss of the last epoch
  bool skipped = false;
};
// Reads "kind" from the config; "checkpoint" names the pre-training
// checkpoint to start from (empty = random encoder, no warm start).
FinetuneResult run_finetune(const Config& cfg, const std::string& out_root, bool force);

struct EvalResult {
  std::string dir;
  std::string metrics_path;
  RelationKind kind = RelationKind::kRow;
  int documents = 0;
  double pair_f1 = 0.0;         // mean ordered-pair F1 over test documents
  double structure_exact = 0.0; // share of documents whose decoded structure matches
  double bleu = 0.0;            // order kind only: mean decoded sequence score
  double heuristic_bleu = 0.0;  // order kind only: position-sort baseline
  bool skipped = false;
};
// Reads "kind" and "checkpoint" (a fine-tuned state, required) from the
// config and scores the test split of the regenerated corpus.
EvalResult run_eval(const Config& cfg, const std::string& out_root, bool force);

struct DumpResult {
  std::string dir;
  std::string features_path;
  int documents = 0;
  bool skipped = false;
};
// Writes per-document entity features and the row-stochastic global
// relation distribution as JSON lines for external visualization. With an
// empty "checkpoint" the freshly initialized online encoder is used.
DumpResult run_dump_features(const Config& cfg, const std::string& out_root, bool force);

}  // namespace layoutrel

#endif  // LAYOUTREL_PIPELINE_HPP_
