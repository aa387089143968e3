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
// Corpus files hold one document per line as canonical JSON: object keys
// sorted, numbers in shortest round-trip form. Saving a loaded corpus
// reproduces the file byte for byte, which the pipeline relies on for
// content addressing.

#ifndef LAYOUTREL_CORPUS_HPP_
#define LAYOUTREL_CORPUS_HPP_

#include <string>
#include <vector>

#include "layoutrel/document.hpp"

namespace layoutrel {

// Canonical single-line JSON form of one document (no trailing newline).
std::string document_to_json(const Document& doc);

// Parses one line. Malformed structure raises ParseError; the caller adds
// file/line context. The document is not validated here.
Document document_from_json(const std::string& line);

// Loads and validates every document. Errors carry "line N" context:
// ParseError for malformed records, ValidationError for invariant breaks.
std::vector<Document> load_corpus(const std::string& path);

void save_corpus(const std::vector<Document>& docs, const std::string& path);

}  // namespace layoutrel

#endif  // LAYOUTREL_CORPUS_HPP_
