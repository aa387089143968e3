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
// Microbenchmarks for the hot paths: dense kernels, the autodiff tape, the
// encoder forward pass, one pre-training step, and the decoders.

#include <benchmark/benchmark.h>

#include <cstdint>
#include <vector>

#include "layoutrel/autodiff.hpp"
#include "layoutrel/decode.hpp"
#include "layoutrel/encoder.hpp"
#include "layoutrel/pretrain.hpp"
#include "layoutrel/relhead.hpp"
#include "layoutrel/rng.hpp"
#include "layoutrel/synth.hpp"
#include "layoutrel/tensor.hpp"

namespace {

using namespace layoutrel;

Tensor random_matrix(int rows, int cols, std::uint64_t seed) {
  Tensor t({rows, cols});
  Rng rng(seed);
  for (std::int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-1.0, 1.0);
  return t;
}

void bm_tensor_matmul(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const Tensor a = random_matrix(n, n, 1);
  const Tensor b = random_matrix(n, n, 2);
  for (auto _ : state) {
    Tape tape;
    const Var out = matmul(tape.constant(a), tape.constant(b));
    benchmark::DoNotOptimize(out.value()[0]);
  }
  state.SetItemsProcessed(state.iterations() * 2LL * n * n * n);
}
BENCHMARK(bm_tensor_matmul)->Arg(64)->Arg(128)->Arg(256);

void bm_autodiff_mlp_backward(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  const Tensor x = random_matrix(16, d, 3);
  const Tensor w1 = random_matrix(d, 2 * d, 4);
  const Tensor w2 = random_matrix(2 * d, d, 5);
  for (auto _ : state) {
    Tape tape;
    const Var vx = tape.leaf(x);
    const Var h = gelu(matmul(vx, tape.leaf(w1)));
    const Var loss = sum(mul(matmul(h, tape.leaf(w2)), matmul(h, tape.leaf(w2))));
    tape.backward(loss);
    benchmark::DoNotOptimize(vx.grad()[0]);
  }
}
BENCHMARK(bm_autodiff_mlp_backward)->Arg(32)->Arg(64);

void bm_encoder_forward(benchmark::State& state) {
  EncoderConfig cfg;
  cfg.d = 64;
  cfg.layers = static_cast<int>(state.range(0));
  const Document doc = gen_table(4, 4, 17);
  const TokenSeq seq = tokenize(doc, cfg);
  Rng rng(7);
  const ParamSet params = init_encoder_params(cfg, rng);
  for (auto _ : state) {
    Tape tape;
    const VarSet w = make_leaves(tape, params, /*requires_grad=*/false);
    const Var m = entity_features(tape, w, seq, cfg);
    benchmark::DoNotOptimize(m.value()[0]);
  }
}
BENCHMARK(bm_encoder_forward)->Arg(1)->Arg(2)->Arg(4);

void bm_pretrain_step(benchmark::State& state) {
  EncoderConfig enc;
  enc.d = 64;
  enc.layers = 2;
  PretrainConfig pre;
  Rng rng(9);
  ModelState model = init_model_state(enc, pre, rng);
  CorpusMix mix;
  mix.tables = 2;
  mix.forms = 2;
  mix.paragraphs = 2;
  const std::vector<Document> docs = gen_corpus(mix, 23);
  std::uint64_t step_seed = 0;
  for (auto _ : state) {
    const StepMetrics m = pretrain_step(model, {docs[step_seed % docs.size()]}, step_seed);
    benchmark::DoNotOptimize(m.total);
    ++step_seed;
  }
}
BENCHMARK(bm_pretrain_step);

void bm_finetune_step(benchmark::State& state) {
  EncoderConfig enc;
  enc.d = 64;
  enc.layers = 2;
  FinetuneConfig fc;
  Rng rng(11);
  FinetuneState model = init_finetune_state(enc, fc, rng);
  const std::vector<Document> batch = {gen_table(3, 3, 29), gen_table(4, 3, 31)};
  for (auto _ : state) {
    const FinetuneMetrics m = finetune_step(model, batch, RelationKind::kRow);
    benchmark::DoNotOptimize(m.loss);
  }
}
BENCHMARK(bm_finetune_step);

void bm_decode_groups(benchmark::State& state) {
  const Document doc = gen_table(5, 6, 37);
  const RelationMatrix rel = gt_relation_matrix(doc, RelationKind::kRow);
  for (auto _ : state) {
    const auto groups = decode_groups(rel);
    benchmark::DoNotOptimize(groups.size());
  }
}
BENCHMARK(bm_decode_groups);

void bm_bleu(benchmark::State& state) {
  Rng rng(41);
  std::vector<int> ref(20), pred(20);
  for (int i = 0; i < 20; ++i) {
    ref[static_cast<std::size_t>(i)] = i;
    pred[static_cast<std::size_t>(i)] = i;
  }
  std::swap(pred[7], pred[8]);
  std::swap(pred[15], pred[16]);
  for (auto _ : state) {
    benchmark::DoNotOptimize(bleu(pred, ref));
  }
}
BENCHMARK(bm_bleu);

}  // namespace

BENCHMARK_MAIN();
