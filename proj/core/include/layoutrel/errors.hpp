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

#ifndef LAYOUTREL_ERRORS_HPP_
#define LAYOUTREL_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace layoutrel {

// Shape or dimension mismatch between tensors.
struct ShapeError : std::runtime_error {
  explicit ShapeError(const std::string& what) : std::runtime_error(what) {}
};

// Invalid argument value (temperature <= 0, empty batch, unknown kind, ...).
struct ParamError : std::runtime_error {
  explicit ParamError(const std::string& what) : std::runtime_error(what) {}
};

// Structurally valid input on which the operation is undefined
// (all-zero mask, zero masked tokens after resampling, ...).
struct DegenerateInputError : std::runtime_error {
  explicit DegenerateInputError(const std::string& what) : std::runtime_error(what) {}
};

// Document lacks the ground-truth labels required for a relation kind.
struct LabelError : std::runtime_error {
  explicit LabelError(const std::string& what) : std::runtime_error(what) {}
};

// Input exceeds a configured budget (sequence length, entity count).
struct CapacityError : std::runtime_error {
  explicit CapacityError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed serialized record; message names the offending line.
struct ParseError : std::runtime_error {
  explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

// Well-formed record violating a domain invariant; message names the entity.
struct ValidationError : std::runtime_error {
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// Layout augmentation could not find an overlap-free draw.
struct AugmentFailedError : std::runtime_error {
  explicit AugmentFailedError(const std::string& what) : std::runtime_error(what) {}
};

// Inconsistent model state (parameter name/shape mismatch, non-finite loss).
struct StateError : std::runtime_error {
  explicit StateError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace layoutrel

#endif  // LAYOUTREL_ERRORS_HPP_
