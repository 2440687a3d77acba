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

#ifndef PIPECAT_ALLOCATION_HPP_
#define PIPECAT_ALLOCATION_HPP_

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "pipecat/cfg.hpp"
#include "pipecat/synthesis.hpp"
#include "pipecat/target.hpp"

namespace pipecat {

enum class TableDepKind { Match, Action, Successor, ReverseMatch };

const char* table_dep_name(TableDepKind k);
/// Match and action dependencies order strictly; successor and reverse-match
/// tolerate sharing a stage.
bool dep_is_strict(TableDepKind k);

/// One ALU instance to place: an action's resource node replicated per table
/// partition. Anchors (rnode < 0) are placement stand-ins for tables whose
/// actions need no ALU at all; they occupy a table slot but no ALU slot.
struct AllocAlu {
  int id = 0;
  int table = 0;   // index into AllocationProblem::tables
  int action = 0;  // action index within that table (-1 for anchors)
  int rnode = -1;  // ResourceNode id in the action's resource graph
  bool stateful = false;
  bool occupies_alu_slot = true;
  std::vector<std::string> state_vars;
  std::string label;
};

struct PartitionedTable {
  std::string table;  // original table name
  int partition = 0;
  uint64_t entries = 0;
  std::vector<std::string> action_names;
  std::vector<std::vector<int>> action_alus;  // ALU ids per action
};

struct TableDep {
  std::string from;  // original table names
  std::string to;
  TableDepKind kind = TableDepKind::Match;
};

struct AllocationProblem {
  std::vector<PartitionedTable> tables;
  std::vector<AllocAlu> alus;
  std::vector<CompEdge> edges;  // intra-action: from/to are AllocAlu ids
  std::vector<TableDep> table_deps;
  // ALUs that must share a stage (replicated stateful updates; partitions of
  // a stateful table share the physical register).
  std::vector<std::vector<int>> stage_equal_groups;
  // per original table: writes/keys for the key-modification check
  std::map<std::string, std::set<std::string>> table_writes;
  std::map<std::string, std::set<std::string>> table_keys;
};

/// Splits oversized tables into ceil(e_t / N_entries) partitions inheriting
/// all actions, and instantiates every action's resource graph per partition.
AllocationProblem partition_tables(
    const Program& p, const std::map<std::string, ResourceGraph>& action_graphs,
    const TargetSpec& t);

/// Derives the four table-dependency kinds from read/write/key sets in
/// control-block order (conventional, guard-free analysis).
std::vector<TableDep> table_dependencies(const Program& p);

/// Applied tables in control order with the control-flow condition guarding
/// each apply.
struct TableApply {
  std::string name;
  PathCondition gate;
};
std::vector<TableApply> applied_tables(const Program& p);

struct ConstraintSet {
  AllocationProblem problem;
  TargetSpec target;
  std::vector<std::pair<int, int>> strict_before;  // stage_u < stage_v
  std::vector<std::pair<int, int>> loose_before;   // stage_u <= stage_v
  std::vector<int> um;                             // producers needing liveness
  std::map<int, std::vector<int>> need;            // u -> consuming ALUs
  bool infeasible = false;
  std::string infeasible_reason;
};

ConstraintSet build_constraints(const AllocationProblem& ap, const TargetSpec& t);

enum class SolveMode { Optimal, Feasible };

struct AllocationSolution {
  std::vector<int> stage;                       // per AllocAlu id
  std::set<std::pair<int, int>> match_placement;  // (table idx, stage)
  std::vector<std::pair<int, int>> props;       // (producer ALU id, stage)
  int cost = 0;                                 // max used stage
  SolveMode mode = SolveMode::Optimal;
};

/// Deterministic branch-and-bound over stage assignments in topological
/// order, lowest stage first, with capacity and critical-path pruning.
/// Optimal mode minimizes the maximum used stage; feasible mode stops at the
/// first full assignment. nullopt = the program does not fit the target.
std::optional<AllocationSolution> solve(const ConstraintSet& cs, SolveMode mode);

/// Re-checks every constraint family literally; returns human-readable
/// violations (empty = valid). Kept independent of the solver's bookkeeping.
std::vector<std::string> validate_solution(const ConstraintSet& cs,
                                           const AllocationSolution& sol);

/// Ensures the match of every partition is placed at each stage its actions
/// occupy. Throws KeyModifiedByAction if a multi-stage action writes its own
/// table's match key.
AllocationSolution duplicate_multistage_matches(AllocationSolution sol,
                                                const AllocationProblem& ap);

// --- ILP emission -----------------------------------------------------------

/// One linear row: sum(coeff * var) <= rhs.
struct LinRow {
  std::vector<std::pair<std::string, long long>> coeff;
  long long rhs = 0;
};

/// The big-M linearization of (beg < s && s < end) <-> prop, with indicator
/// binaries lo ("beg < s") and hi ("s < end"). Strict inequalities carry
/// integer slack. Shared by the LP emitter and the encoding tests.
std::vector<LinRow> big_m_rows(const std::string& beg, const std::string& end,
                               const std::string& lo, const std::string& hi,
                               const std::string& prop, int s, int M);

/// Evaluates the rows on a concrete assignment.
bool rows_hold(const std::vector<LinRow>& rows,
               const std::map<std::string, long long>& assign);

/// Emits the whole allocation problem in LP text format (big-M encoding,
/// M = N_S + 5). Feasible mode uses the trivial objective.
std::string emit_big_m(const ConstraintSet& cs, SolveMode mode = SolveMode::Optimal);

// --- theorem tooling --------------------------------------------------------

/// Adversarial packing instance: w chains of length n plus one chain of
/// length n+1, all match dependencies. On a 2n-stage target with w tables
/// per stage (w > 2n) its optimum is n+1 stages, but greedy column filling
/// in declaration order rejects it.
Program gen_theorem2_instance(int n, int w);

/// The scripted first-fit baseline: tables in declaration order, each placed
/// in the earliest stage with a free table slot that respects dependencies.
/// Returns the stage count, or nullopt when a table does not fit.
std::optional<int> greedy_table_allocate(const AllocationProblem& ap,
                                         const TargetSpec& t);

}  // namespace pipecat

#endif  // PIPECAT_ALLOCATION_HPP_
