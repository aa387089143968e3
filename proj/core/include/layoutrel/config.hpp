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
// Flat plain-text run configuration. One "key = value" pair per line, '#'
// starts a comment, keys are dotted paths like "pretrain.steps". Values stay
// strings until a typed getter parses them, so unknown or misspelled keys
// survive loading and can be reported exhaustively by the validator in the
// pipeline layer. The canonical text rendering (sorted keys) feeds the
// content-addressing hash, so two configs with equal entries always land in
// the same artifact directory regardless of file formatting.

#ifndef LAYOUTREL_CONFIG_HPP_
#define LAYOUTREL_CONFIG_HPP_

#include <cstdint>
#include <map>
#include <string>

namespace layoutrel {

class Config {
 public:
  Config() = default;

  // ParseError (with line numbers) on malformed lines or duplicate keys;
  // StateError when the file cannot be opened.
  static Config from_file(const std::string& path);
  static Config from_string(const std::string& text);

  // Dotted-key override; replaces any existing value. ParseError on keys
  // that are empty or carry characters outside [A-Za-z0-9_.].
  void set(const std::string& key, const std::string& value);
  // Parses a single "key=value" override as given on a command line.
  void set_pair(const std::string& pair);

  bool has(const std::string& key) const;

  // Typed access with a fallback for absent keys. A present but unparseable
  // value raises ParseError naming the key; validation uses the same
  // parsers to collect every such problem before any work starts.
  std::string get_string(const std::string& key, const std::string& fallback) const;
  long get_int(const std::string& key, long fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  const std::map<std::string, std::string>& entries() const { return entries_; }

  // Canonical "key = value" lines, sorted by key, one trailing newline.
  std::string to_text() const;

  // FNV-1a over the canonical text; the spine of artifact addressing.
  std::uint64_t hash() const;
  // hash as 16 hex digits.
  std::string hash_hex() const;

 private:
  std::map<std::string, std::string> entries_;
};

}  // namespace layoutrel

#endif  // LAYOUTREL_CONFIG_HPP_
