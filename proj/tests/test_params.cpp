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

#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <string>

#include "doctest.h"
#include "helpers.hpp"
#include "layoutrel/params.hpp"

namespace layoutrel {
namespace {

using testing::temp_path;

ParamSet sample_params() {
  Rng rng(3);
  ParamSet p;
  p["alpha.w"] = testing::random_tensor({3, 4}, rng);
  p["alpha.b"] = testing::random_tensor({1, 4}, rng);
  p["beta"] = testing::random_tensor({2, 2, 2}, rng);
  // Exercise exact binary round-tripping of awkward values.
  p["beta"][0] = -0.0;
  p["beta"][1] = 1e-300;
  p["beta"][2] = 3.141592653589793;
  return p;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TEST_CASE("leaves carry the parameter values and accept gradients") {
  const ParamSet p = sample_params();
  Tape tape;
  const VarSet vars = make_leaves(tape, p);
  REQUIRE(vars.size() == p.size());
  for (const auto& [name, value] : p) {
    REQUIRE(vars.count(name) == 1);
    CHECK(vars.at(name).value() == value);
  }
  // A scalar touching one leaf must leave gradients there and only there.
  tape.backward(sum(vars.at("alpha.b")));
  for (std::int64_t i = 0; i < p.at("alpha.b").size(); ++i) {
    CHECK(vars.at("alpha.b").grad()[i] == 1.0);
  }
  CHECK(vars.at("alpha.w").grad() == Tensor({3, 4}));
}

TEST_CASE("parameter counting and finiteness") {
  ParamSet p = sample_params();
  CHECK(param_count(p) == 3 * 4 + 4 + 8);
  CHECK(all_finite(p));
  p["beta"][3] = std::numeric_limits<double>::quiet_NaN();
  CHECK_FALSE(all_finite(p));
}

TEST_CASE("glorot weights respect the fan bound") {
  Rng rng(9);
  const Tensor w = glorot_uniform(30, 50, rng);
  const double bound = std::sqrt(6.0 / 80.0);
  double spread = 0.0;
  for (std::int64_t i = 0; i < w.size(); ++i) {
    CHECK(std::abs(w[i]) <= bound);
    spread = std::max(spread, std::abs(w[i]));
  }
  CHECK(spread > 0.5 * bound);  // actually fills the range
  CHECK_THROWS_AS(glorot_uniform(0, 4, rng), ParamError);
}

TEST_CASE("checkpoints round-trip parameters and metadata exactly") {
  const ParamSet p = sample_params();
  const std::map<std::string, std::string> meta = {{"config_hash", "abc123"}, {"step", "42"}};
  const std::string path = temp_path("ckpt_roundtrip.bin");
  save_checkpoint(path, p, meta);
  const Checkpoint back = load_checkpoint(path);
  CHECK(back.meta == meta);
  REQUIRE(back.params.size() == p.size());
  for (const auto& [name, value] : p) {
    REQUIRE(back.params.count(name) == 1);
    const Tensor& b = back.params.at(name);
    REQUIRE(b.shape() == value.shape());
    for (std::int64_t i = 0; i < value.size(); ++i) {
      // Bitwise comparison; distinguishes -0.0 from 0.0.
      CHECK(std::signbit(b[i]) == std::signbit(value[i]));
      CHECK(b[i] == value[i]);
    }
  }
}

TEST_CASE("checkpoint bytes are deterministic") {
  const ParamSet p = sample_params();
  const std::string p1 = temp_path("ckpt_det_a.bin");
  const std::string p2 = temp_path("ckpt_det_b.bin");
  save_checkpoint(p1, p, {{"k", "v"}});
  save_checkpoint(p2, p, {{"k", "v"}});
  CHECK(read_file(p1) == read_file(p2));
}

TEST_CASE("corrupt checkpoints are rejected") {
  const std::string path = temp_path("ckpt_corrupt.bin");
  CHECK_THROWS_AS(load_checkpoint(temp_path("ckpt_missing.bin")), StateError);

  {
    std::ofstream f(path, std::ios::binary);
    f << "definitely not a checkpoint";
  }
  CHECK_THROWS_AS(load_checkpoint(path), ParseError);

  const ParamSet p = sample_params();
  save_checkpoint(path, p);
  std::string bytes = read_file(path);

  {
    // Truncate in the payload.
    std::ofstream f(temp_path("ckpt_short.bin"), std::ios::binary);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 5));
  }
  CHECK_THROWS_WITH_AS(load_checkpoint(temp_path("ckpt_short.bin")),
                       doctest::Contains("truncated"), ParseError);

  {
    // Extra bytes after the payload.
    std::ofstream f(temp_path("ckpt_long.bin"), std::ios::binary);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    f << "xx";
  }
  CHECK_THROWS_WITH_AS(load_checkpoint(temp_path("ckpt_long.bin")),
                       doctest::Contains("trailing"), ParseError);
}

TEST_CASE("empty parameter sets still round-trip") {
  const std::string path = temp_path("ckpt_empty.bin");
  save_checkpoint(path, {}, {{"note", "heads only"}});
  const Checkpoint back = load_checkpoint(path);
  CHECK(back.params.empty());
  CHECK(back.meta.at("note") == "heads only");
}

}  // namespace
}  // namespace layoutrel
