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

#include "layoutrel/params.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <vector>

#include "json.hpp"

namespace layoutrel {

namespace {

using nlohmann::json;

constexpr char kMagic[8] = {'L', 'R', 'C', 'P', '0', '0', '0', '1'};

static_assert(std::numeric_limits<double>::is_iec559, "IEEE-754 doubles required");

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

void put_f64(std::string& out, double d) {
  std::uint64_t bits;
  std::memcpy(&bits, &d, 8);
  put_u64(out, bits);
}

double get_f64(const unsigned char* p) {
  const std::uint64_t bits = get_u64(p);
  double d;
  std::memcpy(&d, &bits, 8);
  return d;
}

}  // namespace

VarSet make_leaves(Tape& tape, const ParamSet& params, bool requires_grad) {
  VarSet vars;
  for (const auto& [name, value] : params) {
    vars.emplace(name, tape.leaf(value, requires_grad));
  }
  return vars;
}

std::int64_t param_count(const ParamSet& params) {
  std::int64_t total = 0;
  for (const auto& [name, value] : params) total += value.size();
  return total;
}

bool all_finite(const ParamSet& params) {
  for (const auto& [name, value] : params) {
    if (!value.all_finite()) return false;
  }
  return true;
}

std::uint64_t param_hash(const ParamSet& params) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const auto mix_u64 = [&h](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xff;
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& [name, value] : params) {
    h = fnv1a64(name, h);
    for (const int dim : value.shape()) mix_u64(static_cast<std::uint64_t>(dim));
    for (std::int64_t i = 0; i < value.size(); ++i) {
      const double d = value[i];
      std::uint64_t bits;
      std::memcpy(&bits, &d, 8);
      mix_u64(bits);
    }
  }
  return h;
}

Tensor glorot_uniform(int fan_in, int fan_out, Rng& rng) {
  if (fan_in <= 0 || fan_out <= 0) throw ParamError("glorot_uniform: fans must be positive");
  const double a = std::sqrt(6.0 / (fan_in + fan_out));
  Tensor w({fan_in, fan_out});
  for (std::int64_t i = 0; i < w.size(); ++i) w[i] = rng.uniform(-a, a);
  return w;
}

void save_checkpoint(const std::string& path, const ParamSet& params,
                     const std::map<std::string, std::string>& meta) {
  json manifest;
  manifest["meta"] = meta;
  json shapes = json::object();
  for (const auto& [name, value] : params) shapes[name] = value.shape();
  manifest["params"] = std::move(shapes);
  const std::string manifest_text = manifest.dump();

  std::string out;
  out.append(kMagic, sizeof(kMagic));
  put_u64(out, manifest_text.size());
  out += manifest_text;
  for (const auto& [name, value] : params) {
    for (std::int64_t i = 0; i < value.size(); ++i) put_f64(out, value[i]);
  }

  std::ofstream f(path, std::ios::binary);
  if (!f) throw StateError("cannot write checkpoint '" + path + "'");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw StateError("write to checkpoint '" + path + "' failed");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw StateError("cannot open checkpoint '" + path + "'");
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < sizeof(kMagic) + 8 || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw ParseError("'" + path + "' is not a checkpoint file");
  }
  const std::uint64_t manifest_len = get_u64(p + sizeof(kMagic));
  const std::size_t header = sizeof(kMagic) + 8;
  if (bytes.size() < header + manifest_len) {
    throw ParseError("checkpoint '" + path + "' is truncated in the manifest");
  }

  json manifest;
  try {
    manifest = json::parse(bytes.substr(header, manifest_len));
  } catch (const json::exception& e) {
    throw ParseError("checkpoint '" + path + "' manifest: " + e.what());
  }

  Checkpoint ckpt;
  try {
    ckpt.meta = manifest.at("meta").get<std::map<std::string, std::string>>();
    std::size_t offset = header + static_cast<std::size_t>(manifest_len);
    for (const auto& [name, jshape] : manifest.at("params").items()) {
      const std::vector<int> shape = jshape.get<std::vector<int>>();
      Tensor t(shape);
      const std::size_t need = static_cast<std::size_t>(t.size()) * 8;
      if (bytes.size() < offset + need) {
        throw ParseError("checkpoint '" + path + "' is truncated in parameter '" + name + "'");
      }
      for (std::int64_t i = 0; i < t.size(); ++i) t[i] = get_f64(p + offset + 8 * i);
      offset += need;
      ckpt.params.emplace(name, std::move(t));
    }
    if (offset != bytes.size()) {
      throw ParseError("checkpoint '" + path + "' has trailing bytes");
    }
  } catch (const json::exception& e) {
    throw ParseError("checkpoint '" + path + "' manifest: " + e.what());
  } catch (const ShapeError& e) {
    throw ParseError("checkpoint '" + path + "' manifest: " + std::string(e.what()));
  }
  return ckpt;
}

}  // namespace layoutrel
