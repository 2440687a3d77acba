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

#ifndef PIPECAT_SIM_HPP_
#define PIPECAT_SIM_HPP_

#include <map>
#include <string>
#include <vector>

#include "pipecat/alu_grammar.hpp"
#include "pipecat/cfg.hpp"
#include "pipecat/eval.hpp"

namespace pipecat {

/// Packet header fields, metadata and switch state, all width-truncated.
struct PacketState {
  Valuation fields;  // pkt.* and meta.*
  Valuation state;   // state variables

  bool operator==(const PacketState&) const = default;
};

PacketState initial_packet(const Program& p);

/// Control-plane choice of action per (symbolically matched) table. Guard
/// tables pick their own action from the packet contents and are ignored
/// here. Missing entries raise UnmatchedTable.
using MatchOutcomes = std::map<std::string, int>;

/// Transactional source semantics: statements run in order, each applied
/// table runs its selected action to completion before the next statement.
PacketState interpret_source(const Program& p, PacketState pkt,
                             const MatchOutcomes& outcomes);

// ---------------------------------------------------------------------------
// Compiled form: stage-by-stage VLIW execution of placed ALUs.
// ---------------------------------------------------------------------------

struct PlacedAlu {
  int id = 0;
  std::string table;
  int partition = 0;
  int action_index = 0;
  int stage = 0;
  AluConfig cfg;
  std::vector<std::string> inputs;      // value ids read (by input slot)
  std::string out_field;                // value id written ("" = none)
  std::vector<std::string> aliases;     // declared fields also receiving the output
  std::vector<std::string> state_vars;  // by register slot ("" = scratch)
};

struct PlacedTable {
  std::string name;
  int partition = 0;
  std::vector<int> stages;  // sorted; decision is made at stages.front()
  PathCondition gate;       // control-flow condition guarding the apply
  std::vector<std::vector<CmpLiteral>> guards;  // guard tables: first match wins
  std::vector<std::string> action_names;
};

/// A propagation ALU slot: carries `field` produced by ALU `producer` through
/// stage `stage`.
struct PropSlot {
  int producer = 0;
  std::string field;
  int stage = 0;
};

struct CompiledPipeline {
  int stages_used = 0;
  int n_stages = 0;          // target bound
  int n_alus_per_stage = 0;  // target bound (includes the header allowance)
  int n_header_alus = 0;
  bool propagation_alus = true;
  std::vector<PlacedAlu> alus;
  std::vector<PlacedTable> tables;
  std::vector<PropSlot> props;
  std::map<std::string, int> widths;  // declared fields and state vars
  std::vector<StateDecl> state_vars;
};

/// VLIW semantics: within a stage every ALU reads stage-input values and the
/// current registers; writes and register updates commit at stage end.
/// Temporaries must be produced in an earlier stage and carried by
/// propagation slots across any gap; declared fields ride the header
/// transport. Violations raise ConfigError.
PacketState interpret_pipeline(const CompiledPipeline& cp, PacketState pkt,
                               const MatchOutcomes& outcomes);

}  // namespace pipecat

#endif  // PIPECAT_SIM_HPP_
