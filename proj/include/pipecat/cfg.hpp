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

#ifndef PIPECAT_CFG_HPP_
#define PIPECAT_CFG_HPP_

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "pipecat/ast.hpp"

namespace pipecat {

/// Conjunction of branch literals. `opaque` marks a condition that could not
/// be decomposed into literals; such conditions are conservatively treated as
/// satisfiable and block rewriting.
struct PathCondition {
  std::vector<CmpLiteral> literals;
  bool opaque = false;
};

PathCondition conjoin(const PathCondition& a, const PathCondition& b);

struct CfgNode {
  enum class Kind { Entry, Exit, Stmt, Branch, Merge };

  Kind kind = Kind::Stmt;
  int id = 0;
  Span span;
  StmtPtr stmt;  // the Assign/Apply for Stmt nodes, the If for Branch nodes
  // Data effects, with table applies expanded through their actions.
  std::set<std::string> reads;
  std::set<std::string> writes;
};

struct CfgEdge {
  int from = 0;
  int to = 0;
  enum class Label { Plain, Then, Else } label = Label::Plain;
};

/// Well-structured control-flow graph: every Branch has a unique matching
/// Merge and the graph is acyclic. Node ids follow program order.
struct Cfg {
  std::vector<CfgNode> nodes;
  std::vector<CfgEdge> edges;
  int entry = 0;
  int exit = 0;
  std::map<int, int> merge_of_branch;

  std::vector<const CfgEdge*> out_edges(int id) const;
};

/// Builds the CFG of a control block. The program supplies action bodies so
/// apply nodes carry full read/write sets. Throws UnstructuredControl only if
/// an internal pairing invariant breaks (cannot happen for parsed programs).
Cfg build_cfg(const ControlBlock& cb, const Program& p);

/// Decomposes a branch condition into a conjunction of positive literals;
/// nullopt when the shape is unsupported (then the condition is opaque).
std::optional<std::vector<CmpLiteral>> cond_to_literals(const Expr& e);

/// Path condition per CFG node, computed by a depth-first traversal pushing
/// branch conditions at Branch nodes and popping them at Merge nodes.
/// Throws GuardUpdateDetected if any statement (or applied table action)
/// writes a variable used in a branch condition; callers must then skip
/// rewriting altogether.
std::map<int, PathCondition> path_conditions(const Cfg& g);

}  // namespace pipecat

#endif  // PIPECAT_CFG_HPP_
