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

#ifndef PIPECAT_GUARDED_DEPS_HPP_
#define PIPECAT_GUARDED_DEPS_HPP_

#include <map>
#include <span>
#include <vector>

#include "pipecat/cfg.hpp"

namespace pipecat {

enum class DepKind { RAW, WAR, WAW };

const char* dep_kind_name(DepKind k);

/// A RAW/WAR/WAW pair between two statements, annotated with the conjunction
/// of both statements' path conditions.
struct GuardedDependency {
  std::string var;
  int from_node = 0;  // precedes to_node in program order
  int to_node = 0;
  DepKind kind = DepKind::RAW;
  PathCondition guard;
  StmtPtr from_stmt;
  StmtPtr to_stmt;
};

/// Every syntactic dependency between statement/apply nodes of the CFG.
std::vector<GuardedDependency> guarded_deps(const Cfg& g,
                                            const std::map<int, PathCondition>& pc);

/// Decides satisfiability of a literal conjunction. Per-field interval and
/// exclusion reasoning over the declared width's value range; fields are
/// independent, so the conjunction is satisfiable iff every field is.
/// `widths` maps field name to bit-width (missing fields default to 32).
bool literals_satisfiable(std::span<const CmpLiteral> lits,
                          const std::map<std::string, int>& widths);

bool guard_satisfiable(const PathCondition& guard,
                       const std::map<std::string, int>& widths);

/// Keeps only dependencies whose guard is satisfiable.
std::vector<GuardedDependency> prune_false_deps(
    const std::vector<GuardedDependency>& deps,
    const std::map<std::string, int>& widths);

std::map<std::string, int> field_widths(const Program& p);

}  // namespace pipecat

#endif  // PIPECAT_GUARDED_DEPS_HPP_
