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

#ifndef PIPECAT_PREPROCESS_HPP_
#define PIPECAT_PREPROCESS_HPP_

#include <map>
#include <set>
#include <string>
#include <vector>

#include "pipecat/ast.hpp"
#include "pipecat/eval.hpp"

namespace pipecat {

// Value-id naming: SSA versions append "$<n>"; branch temporaries are
// "$br<n>"; a state var s reads through flank "s$v" and writes back through
// "s$post". '$' cannot appear in source identifiers, so ids never collide.

struct SLStmt {
  enum class Role { Plain, BrTemp, ReadFlank, WriteFlank };

  std::string target;
  ExprPtr rhs;  // over value ids; ReadFlank rhs is the bare state variable
  Role role = Role::Plain;
  std::string state_var;  // flanks only
  Span span;
};

struct StraightLineAction {
  std::string action;
  bool atomic = false;
  std::vector<SLStmt> stmts;
  // state var -> (pre field, post field)
  std::map<std::string, std::pair<std::string, std::string>> flanks;
  std::map<std::string, int> ssa_version;       // base id -> max version
  std::map<std::string, std::string> final_of;  // declared field -> final id
  std::set<std::string> inputs;                 // free field reads (PIs)
  std::vector<uint32_t> constants;              // harvested immediate pool
};

/// Straight-line form: every formerly guarded assignment becomes
/// `x = guard ? rhs : x`, with one boolean temporary per if condition and
/// conjunctions for nesting.
StraightLineAction remove_branches(const ActionBlock& a, const Program& p);

/// Replaces each touched state variable by a pre-flank read and a post-flank
/// write so the update chain later condenses into one strongly connected
/// component.
StraightLineAction add_state_flanks(StraightLineAction s);

/// Single-assignment renaming; post-state reads are canonicalized onto the
/// post flank. Idempotent.
StraightLineAction to_ssa(StraightLineAction s);

/// Fixpoint of constant folding, copy/constant propagation, algebraic
/// identities and dead-code elimination. Flanks and observable finals are
/// never removed; state variables are neither added nor deleted.
StraightLineAction simplify(StraightLineAction s, const Program& p);

/// Interpreter for the straight-line form; the oracle for preprocessing
/// equivalence. Returns (final fields, final state).
struct SLResult {
  Valuation fields;
  Valuation state;
};
SLResult run_straightline(const StraightLineAction& s, const Program& p,
                          const Valuation& fields, const Valuation& state);

int width_of_id(const std::string& id, const Program& p);

StraightLineAction preprocess_action(const ActionBlock& a, const Program& p,
                                     bool run_simplify);

}  // namespace pipecat

#endif  // PIPECAT_PREPROCESS_HPP_
