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

#ifndef PIPECAT_PARSER_HPP_
#define PIPECAT_PARSER_HPP_

#include <string>

#include "pipecat/ast.hpp"

namespace pipecat {

/// Parses a .pcat source text into a checked Program. Deterministic: the same
/// text always yields a structurally identical AST. Throws CompileError with
/// SyntaxError / TypeError / NameError codes.
Program parse(const std::string& source_text);

}  // namespace pipecat

#endif  // PIPECAT_PARSER_HPP_
