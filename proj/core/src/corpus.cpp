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

#include "layoutrel/corpus.hpp"

#include <cmath>
#include <fstream>

#include "json.hpp"

namespace layoutrel {

namespace {

using nlohmann::json;

json entity_to_json(const Entity& e) {
  json j;
  j["id"] = e.id;
  j["tokens"] = e.tokens;
  j["bbox"] = {e.bbox.x0, e.bbox.y0, e.bbox.x1, e.bbox.y1};
  j["patch"] = e.patch.raw();
  return j;
}

Entity entity_from_json(const json& j) {
  Entity e;
  e.id = j.at("id").get<int>();
  e.tokens = j.at("tokens").get<std::vector<int>>();
  const auto& bb = j.at("bbox");
  if (!bb.is_array() || bb.size() != 4) throw ParseError("bbox must be a 4-element array");
  e.bbox = {bb[0].get<int>(), bb[1].get<int>(), bb[2].get<int>(), bb[3].get<int>()};
  std::vector<double> flat = j.at("patch").get<std::vector<double>>();
  const std::size_t len = flat.size();
  if (len == 0 || len % 3 != 0) throw ParseError("patch length must be a positive multiple of 3");
  const int p = static_cast<int>(std::lround(std::sqrt(static_cast<double>(len / 3))));
  if (static_cast<std::size_t>(p) * p * 3 != len) {
    throw ParseError("patch length " + std::to_string(len) + " is not P*P*3");
  }
  e.patch = Tensor({p, p, 3}, std::move(flat));
  return e;
}

}  // namespace

std::string document_to_json(const Document& doc) {
  json j;
  j["kind"] = to_string(doc.kind);
  j["entities"] = json::array();
  for (const Entity& e : doc.entities) j["entities"].push_back(entity_to_json(e));
  json labels = json::object();
  switch (doc.kind) {
    case DocKind::kTable:
      labels["row_groups"] = doc.labels.row_groups;
      labels["col_groups"] = doc.labels.col_groups;
      break;
    case DocKind::kForm: {
      json links = json::array();
      for (const auto& [k, v] : doc.labels.kv_links) links.push_back({k, v});
      labels["kv_links"] = std::move(links);
      break;
    }
    case DocKind::kParagraphs:
      labels["reading_order"] = doc.labels.reading_order;
      break;
  }
  j["labels"] = std::move(labels);
  return j.dump();
}

Document document_from_json(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw ParseError(std::string("invalid JSON: ") + e.what());
  }
  try {
    Document doc;
    doc.kind = parse_doc_kind(j.at("kind").get<std::string>());
    for (const auto& je : j.at("entities")) doc.entities.push_back(entity_from_json(je));
    const json& labels = j.at("labels");
    switch (doc.kind) {
      case DocKind::kTable:
        doc.labels.row_groups = labels.at("row_groups").get<std::vector<std::vector<int>>>();
        doc.labels.col_groups = labels.at("col_groups").get<std::vector<std::vector<int>>>();
        break;
      case DocKind::kForm:
        for (const auto& link : labels.at("kv_links")) {
          if (!link.is_array() || link.size() != 2) throw ParseError("kv link must be a pair");
          doc.labels.kv_links.emplace_back(link[0].get<int>(), link[1].get<int>());
        }
        break;
      case DocKind::kParagraphs:
        doc.labels.reading_order = labels.at("reading_order").get<std::vector<int>>();
        break;
    }
    return doc;
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad document record: ") + e.what());
  }
}

std::vector<Document> load_corpus(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StateError("cannot open corpus file '" + path + "'");
  std::vector<Document> docs;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      Document doc = document_from_json(line);
      validate_document(doc);
      docs.push_back(std::move(doc));
    } catch (const ParseError& e) {
      throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
    } catch (const ValidationError& e) {
      throw ValidationError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return docs;
}

void save_corpus(const std::vector<Document>& docs, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw StateError("cannot write corpus file '" + path + "'");
  for (const Document& doc : docs) out << document_to_json(doc) << '\n';
  if (!out) throw StateError("write to corpus file '" + path + "' failed");
}

}  // namespace layoutrel
