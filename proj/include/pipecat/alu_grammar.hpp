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

#ifndef PIPECAT_ALU_GRAMMAR_HPP_
#define PIPECAT_ALU_GRAMMAR_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pipecat/ast.hpp"

namespace pipecat {

// ---------------------------------------------------------------------------
// Grammars: finite hole-parameterized template families describing one ALU
// flavor. A stateful template is a guarded-update tree
//
//   cond tree of depth `cond_levels` over rel(lhs [aop rhs'], rhs)
//   per register slot and leaf: arm ::= operand | operand aop operand
//
// with operands drawn from register slots, bound inputs, and an immediate
// pool (the constants of the action text plus {0,1} plus grammar extras).
// A stateless template is a single unit out ::= operand | operand aop
// operand | rel(operand, operand) | rel(a,b) ? c : d.
// ---------------------------------------------------------------------------

struct StatefulGrammar {
  std::string name;
  int registers = 1;
  int max_inputs = 2;
  int cond_levels = 1;  // 0, 1 or 2
  // Whether condition left-hand sides may be an arithmetic combination, and
  // if so whether a register must participate (Banzai flavor) or anything
  // goes (Tofino flavor).
  enum class CondArith { None, RegOnly, Full } cond_arith = CondArith::RegOnly;
  std::vector<BinOp> rel_ops{BinOp::Eq, BinOp::Ne, BinOp::Lt,
                             BinOp::Le, BinOp::Gt, BinOp::Ge};
  std::vector<BinOp> arith_ops{BinOp::Add, BinOp::Sub};       // arm operators
  std::vector<BinOp> cond_arith_ops{BinOp::Add, BinOp::Sub};  // lhs operators
  bool mov_arm = true;       // arm ::= operand
  bool op_arm = true;        // arm ::= operand aop operand
  bool fallthrough_identity_only = false;  // pred_raw: all-false leaf keeps state
  bool allow_scratch_output = true;  // free registers may compute a stateless output
  std::vector<uint32_t> extra_immediates;
};

struct StatelessGrammar {
  std::string name;
  int max_inputs = 2;  // distinct packet operands per ALU
  std::vector<BinOp> arith_ops{BinOp::Add, BinOp::Sub};
  std::vector<BinOp> rel_ops;  // empty = no relational output
  bool ternary = false;        // rel(a,b) ? c : d, chained a only via trees
  bool mov = true;
  std::vector<uint32_t> extra_immediates;
};

struct AluGrammarPair {
  StatefulGrammar stateful;
  StatelessGrammar stateless;
};

/// Loads a grammar pair from a JSON file (see docs/formats.md).
AluGrammarPair load_grammar_file(const std::string& path);
AluGrammarPair builtin_grammar(const std::string& name);  // throws NameError

// ---------------------------------------------------------------------------
// Concrete configurations (every hole filled).
// ---------------------------------------------------------------------------

struct Operand {
  enum class Kind { Reg, Input, Imm };
  Kind kind = Kind::Imm;
  int index = 0;      // register slot or input slot
  uint32_t imm = 0;

  bool operator==(const Operand&) const = default;
};

struct ArmSel {
  bool is_op = false;    // false: mov(a); true: a op b
  BinOp op = BinOp::Add;
  Operand a, b;
};

struct CondSel {
  BinOp rel = BinOp::Eq;
  bool lhs_is_arith = false;
  BinOp lhs_op = BinOp::Sub;
  Operand la, lb;  // lhs = la (lhs_op lb)?
  Operand rb;      // rhs operand
};

struct StatefulConfig {
  std::string grammar;
  std::vector<std::string> input_binding;  // slot -> value id
  std::vector<std::string> reg_binding;    // slot -> state var ("" = scratch)
  std::vector<CondSel> conds;              // size 0 / 1 / 3 (c0, then c1, else c2)
  std::vector<std::vector<ArmSel>> arms;   // [reg slot][leaf]
  enum class Out { None, Pre, Post } out_kind = Out::None;
  int out_reg = 0;
};

struct StatelessConfig {
  std::string grammar;
  enum class Form { Mov, Arith, Rel, Ternary } form = Form::Mov;
  BinOp op = BinOp::Add;  // Arith operator or the Rel/Ternary relation
  Operand a, b, c, d;     // Mov: a; Arith/Rel: a,b; Ternary: rel(a,b) ? c : d
  std::vector<std::string> input_binding;  // slot -> value id
};

/// A fully concrete ALU instance: evaluable on any packet/state valuation.
struct AluConfig {
  bool stateful = false;
  StatefulConfig sf;
  StatelessConfig sl;
};

struct StatefulResult {
  std::vector<uint32_t> regs;  // post values by slot
  uint32_t out = 0;
  bool has_out = false;
};

int stateful_leaf_count(int cond_levels);
/// Evaluates the condition tree; returns the leaf index.
int eval_cond_leaf(const StatefulConfig& c, std::span<const uint32_t> in,
                   std::span<const uint32_t> regs);
StatefulResult eval_stateful(const StatefulConfig& c, std::span<const uint32_t> in,
                             std::span<const uint32_t> regs);
uint32_t eval_stateless(const StatelessConfig& c, std::span<const uint32_t> in);

std::string describe(const AluConfig& c);  // one-line report form

}  // namespace pipecat

#endif  // PIPECAT_ALU_GRAMMAR_HPP_
