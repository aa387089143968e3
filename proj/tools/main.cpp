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
// Command-line front end. Subcommands map one to one onto the pipeline
// stages; this file only parses flags, resolves the output root, applies
// overrides, and prints the human summary. All substance lives in the core
// library so tests and experiments drive the exact same code paths.

#include <cstdlib>
#include <iomanip>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "layoutrel/config.hpp"
#include "layoutrel/errors.hpp"
#include "layoutrel/pipeline.hpp"

namespace {

using layoutrel::Config;

struct CommonArgs {
  std::string config_path;
  std::string out_root;
  std::string seed;
  std::vector<std::string> overrides;
  bool force = false;
};

void add_common(CLI::App* sub, CommonArgs& args) {
  sub->add_option("--config", args.config_path, "run configuration file (key = value lines)");
  sub->add_option("--seed", args.seed, "override the 'seed' config key");
  sub->add_option("--out", args.out_root,
                  "output root (default: $LAYOUTREL_OUT, falling back to ./out)");
  sub->add_option("--set", args.overrides, "dotted-key override, e.g. --set pretrain.steps=500");
  sub->add_flag("--force", args.force, "re-run even when artifacts for this config exist");
}

// Resolution order: --out flag, then the environment, then ./out.
std::string resolve_out_root(const CommonArgs& args) {
  if (!args.out_root.empty()) return args.out_root;
  if (const char* env = std::getenv("LAYOUTREL_OUT"); env != nullptr && *env != '\0') return env;
  return "out";
}

// Loads the config file (or starts empty), applies --set pairs, then the
// dedicated flags, which win because they are the most explicit.
Config resolve_config(const CommonArgs& args,
                      const std::vector<std::pair<std::string, std::string>>& flag_overrides) {
  Config cfg =
      args.config_path.empty() ? Config() : Config::from_file(args.config_path);
  for (const std::string& pair : args.overrides) cfg.set_pair(pair);
  if (!args.seed.empty()) cfg.set("seed", args.seed);
  for (const auto& [key, value] : flag_overrides) {
    if (!value.empty()) cfg.set(key, value);
  }
  return cfg;
}

// Lists every validation problem on stderr; returns false when any exist.
bool config_ok(const Config& cfg) {
  const std::vector<std::string> errors = layoutrel::validate_config(cfg);
  for (const std::string& e : errors) std::cerr << "config error: " << e << "\n";
  return errors.empty();
}

void print_row(const std::string& label, const std::string& value) {
  std::cout << "  " << std::left << std::setw(18) << label << value << "\n";
}

void print_row(const std::string& label, double value) {
  std::ostringstream out;
  out << std::setprecision(6) << value;
  print_row(label, out.str());
}

void print_header(const std::string& command, bool skipped) {
  std::cout << command << (skipped ? " (artifacts up to date, reused)" : "") << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"layoutrel: self-supervised relational document representations"};
  app.require_subcommand(1);

  CommonArgs gen_args, pre_args, ft_args, eval_args, dump_args;
  std::string tasks, ft_kind, ft_checkpoint, eval_kind, eval_checkpoint, eval_threshold,
      dump_checkpoint;

  CLI::App* gen = app.add_subcommand("gen", "generate a synthetic corpus");
  add_common(gen, gen_args);

  CLI::App* pretrain = app.add_subcommand("pretrain", "run the self-supervised loop");
  add_common(pretrain, pre_args);
  pretrain->add_option("--tasks", tasks,
                       "objective set: mvlm, mvlm+lrcm, or mvlm+lrcm+grcm");

  CLI::App* finetune = app.add_subcommand("finetune", "train one relation head");
  add_common(finetune, ft_args);
  finetune->add_option("--kind", ft_kind, "relation kind: row, col, kv, or order");
  finetune->add_option("--checkpoint", ft_checkpoint, "pre-training checkpoint to start from");

  CLI::App* eval = app.add_subcommand("eval", "score a fine-tuned head on the test split");
  add_common(eval, eval_args);
  eval->add_option("--kind", eval_kind, "relation kind: row, col, kv, or order");
  eval->add_option("--checkpoint", eval_checkpoint, "fine-tuned state to evaluate");
  eval->add_option("--threshold", eval_threshold, "decision threshold on relation scores");

  CLI::App* dump = app.add_subcommand("dump-features",
                                      "write entity features and relation distributions");
  add_common(dump, dump_args);
  dump->add_option("--checkpoint", dump_checkpoint, "checkpoint to read weights from");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      const Config cfg = resolve_config(gen_args, {});
      if (!config_ok(cfg)) return 1;
      const auto r = layoutrel::run_gen(cfg, resolve_out_root(gen_args), gen_args.force);
      print_header("gen", r.skipped);
      print_row("corpus", r.corpus_path);
      print_row("documents", std::to_string(r.documents));
    } else if (pretrain->parsed()) {
      const Config cfg = resolve_config(pre_args, {{"pretrain.tasks", tasks}});
      if (!config_ok(cfg)) return 1;
      const auto r = layoutrel::run_pretrain(cfg, resolve_out_root(pre_args), pre_args.force);
      print_header("pretrain", r.skipped);
      print_row("checkpoint", r.checkpoint_path);
      print_row("steps", std::to_string(r.steps));
      print_row("loss total", r.total);
      print_row("loss mvlm", r.mvlm);
      print_row("loss lrcm", r.lrcm);
      print_row("loss grcm", r.grcm);
    } else if (finetune->parsed()) {
      const Config cfg =
          resolve_config(ft_args, {{"kind", ft_kind}, {"checkpoint", ft_checkpoint}});
      if (!config_ok(cfg)) return 1;
      const auto r = layoutrel::run_finetune(cfg, resolve_out_root(ft_args), ft_args.force);
      print_header("finetune " + layoutrel::to_string(r.kind), r.skipped);
      print_row("state", r.checkpoint_path);
      print_row("steps", std::to_string(r.steps));
      print_row("final loss", r.final_loss);
    } else if (eval->parsed()) {
      const Config cfg = resolve_config(
          eval_args, {{"kind", eval_kind},
                      {"checkpoint", eval_checkpoint},
                      {"eval.threshold", eval_threshold}});
      if (!config_ok(cfg)) return 1;
      const auto r = layoutrel::run_eval(cfg, resolve_out_root(eval_args), eval_args.force);
      print_header("eval " + layoutrel::to_string(r.kind), r.skipped);
      print_row("metrics", r.metrics_path);
      print_row("documents", std::to_string(r.documents));
      print_row("pair F1", r.pair_f1);
      print_row("exact structure", r.structure_exact);
      if (r.kind == layoutrel::RelationKind::kOrder) {
        print_row("bleu", r.bleu);
        print_row("heuristic bleu", r.heuristic_bleu);
      }
    } else if (dump->parsed()) {
      const Config cfg = resolve_config(dump_args, {{"checkpoint", dump_checkpoint}});
      if (!config_ok(cfg)) return 1;
      const auto r =
          layoutrel::run_dump_features(cfg, resolve_out_root(dump_args), dump_args.force);
      print_header("dump-features", r.skipped);
      print_row("features", r.features_path);
      print_row("documents", std::to_string(r.documents));
    }
  } catch (const layoutrel::ValidationError& e) {
    std::istringstream lines(e.what());
    std::string line;
    while (std::getline(lines, line)) std::cerr << "config error: " << line << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
