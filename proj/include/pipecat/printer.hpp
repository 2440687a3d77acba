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

#ifndef PIPECAT_PRINTER_HPP_
#define PIPECAT_PRINTER_HPP_

#include <string>

#include "pipecat/ast.hpp"

namespace pipecat {

// Canonical-form emitters. pretty_print(parse(x)) reparses to an AST
// structurally equal to parse(x).
std::string print_expr(const Expr& e);
std::string print_stmt(const Stmt& s, int indent = 0);
std::string pretty_print(const Program& p);

}  // namespace pipecat

#endif  // PIPECAT_PRINTER_HPP_
