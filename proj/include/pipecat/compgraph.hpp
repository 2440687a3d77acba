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

#ifndef PIPECAT_COMPGRAPH_HPP_
#define PIPECAT_COMPGRAPH_HPP_

#include <map>
#include <set>
#include <string>
#include <vector>

#include "pipecat/preprocess.hpp"

namespace pipecat {

struct CompNode {
  int id = 0;
  bool stateful = false;
  std::vector<SLStmt> stmts;            // program order
  std::vector<std::string> state_vars;  // sorted; nonempty iff stateful
  std::vector<std::string> inputs;      // external value ids read (sorted)
  std::vector<std::string> outputs;     // ids read by other nodes or observable
  // After normalization a stateful node exports at most one value: a flank of
  // `out_var`, or a stateless value computed into a scratch register. The
  // `normalized` flag pins the export set: replicated copies share internal
  // definitions, so only the designated copy may export each value.
  enum class OutKind { None, Pre, Post, Stateless } out_kind = OutKind::None;
  std::string out_var;
  bool normalized = false;
  Span span;
};

struct CompEdge {
  int from = 0;
  int to = 0;
  std::string field;
};

struct ComputationGraph {
  std::vector<CompNode> nodes;
  std::vector<CompEdge> edges;
  std::set<std::string> pis;                      // free packet-field reads
  std::map<std::string, std::string> po_alias;    // final value id -> field
  std::map<std::string, std::pair<std::string, std::string>> flanks;

  const CompNode* node(int id) const;
  const CompNode* exporter_of(const std::string& id) const;
  std::set<std::string> po_ids() const;
};

/// RAW dependency graph over statements with both flank directions linked,
/// SCC-condensed. Stateful nodes are the SCCs containing flank statements.
ComputationGraph build_graph(const StraightLineAction& s);

/// Enforces the single-output discipline of stateful ALUs: nodes with several
/// outputs are duplicated per output; when no scratch register is available
/// (touched state vars = k) stateless outputs are re-derived from the flanks
/// in extracted successor nodes.
ComputationGraph normalize(ComputationGraph g, int regs_per_stateful_alu);

/// Backwards cone of influence of output `o` (a value id or a declared
/// field): the stateless subgraph feeding it, bounded at PIs and stateful
/// nodes. This is the functional spec used for stateless synthesis.
struct BciSpec {
  std::string target;
  std::vector<int> node_ids;           // stateless members, topological order
  std::vector<std::string> frontier;   // sorted PIs / stateful outputs read
  std::vector<SLStmt> stmts;
};
BciSpec bci(const ComputationGraph& g, const std::string& o);

/// Recomputes edges, inputs and outputs from statement def/use sets. Every
/// exported id must have a unique exporter.
void rewire(ComputationGraph& g);
/// Renumbers node ids in topological order (ties by first statement span).
void renumber(ComputationGraph& g);
bool is_acyclic(const ComputationGraph& g);

/// Evaluates the whole graph on the given inputs; returns every value id
/// plus final state values. Test/verification helper.
struct GraphEval {
  Valuation values;
  Valuation state;
};
GraphEval eval_graph(const ComputationGraph& g, const Program& p,
                     const Valuation& inputs, const Valuation& state);

std::string to_dot(const ComputationGraph& g);

}  // namespace pipecat

#endif  // PIPECAT_COMPGRAPH_HPP_
