// Copyright 2026 The Pipecat Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef PIPECAT_EVAL_HPP_
#define PIPECAT_EVAL_HPP_

#include <cstdint>
#include <string>
#include <unordered_map>

#include "pipecat/ast.hpp"

namespace pipecat {

/// Flat name->value environment. Field names, state variables, and
/// compiler temporaries share one namespace (they cannot collide: fields are
/// dotted, temporaries contain '$').
using Valuation = std::unordered_map<std::string, uint32_t>;

// Arithmetic is uint32 wrapping; relational operators are unsigned; values
// are truncated to the declared bit-width when stored, not when computed.
uint32_t truncate_to_width(uint32_t v, int width);
uint32_t eval_binop(BinOp op, uint32_t a, uint32_t b);
uint32_t eval_expr(const Expr& e, const Valuation& env);

bool eval_literal(const CmpLiteral& lit, const Valuation& env);

}  // namespace pipecat

#endif  // PIPECAT_EVAL_HPP_
