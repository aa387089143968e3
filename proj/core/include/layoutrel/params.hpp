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
// Named parameter collections and checkpoint files. A checkpoint written
// twice from the same parameters is byte-identical, so checkpoint hashes can
// address artifacts.

#ifndef LAYOUTREL_PARAMS_HPP_
#define LAYOUTREL_PARAMS_HPP_

#include <cstdint>
#include <map>
#include <string>

#include "layoutrel/autodiff.hpp"
#include "layoutrel/rng.hpp"
#include "layoutrel/tensor.hpp"

namespace layoutrel {

// Ordered by name, which fixes both the serialization layout and the
// iteration order of every optimizer loop.
using ParamSet = std::map<std::string, Tensor>;
using VarSet = std::map<std::string, Var>;

// Registers every parameter as a leaf on the tape, same names.
VarSet make_leaves(Tape& tape, const ParamSet& params, bool requires_grad = true);

std::int64_t param_count(const ParamSet& params);
bool all_finite(const ParamSet& params);

// Order-sensitive FNV-1a over names, shapes, and raw value bytes. Equal
// hashes across a code region certify the set was not touched, which is how
// the trainer's no-update guarantees are asserted.
std::uint64_t param_hash(const ParamSet& params);

// Glorot-uniform fan_in x fan_out weight matrix.
Tensor glorot_uniform(int fan_in, int fan_out, Rng& rng);

struct Checkpoint {
  ParamSet params;
  std::map<std::string, std::string> meta;
};

// Binary layout: magic, little-endian manifest length, canonical JSON
// manifest (parameter shapes plus the metadata strings), then the raw
// float64 payload in name order.
void save_checkpoint(const std::string& path, const ParamSet& params,
                     const std::map<std::string, std::string>& meta = {});
Checkpoint load_checkpoint(const std::string& path);

}  // namespace layoutrel

#endif  // LAYOUTREL_PARAMS_HPP_
