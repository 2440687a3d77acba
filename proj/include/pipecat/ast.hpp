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

#ifndef PIPECAT_AST_HPP_
#define PIPECAT_AST_HPP_

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pipecat/diag.hpp"

namespace pipecat {

enum class BinOp {
  Add, Sub, Mul,
  BitAnd, BitOr, BitXor, Shl, Shr,
  Eq, Ne, Lt, Le, Gt, Ge,
  LAnd, LOr,
};

enum class UnOp { Not, BitNot };

const char* binop_text(BinOp op);
bool is_relational(BinOp op);

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

/// Immutable expression tree. Field references use canonical names
/// ("pkt.x", "meta.y"); state variables are referenced by bare name.
struct Expr {
  enum class Kind { IntLit, Field, State, Unary, Binary, Ternary };

  Kind kind;
  Span span;
  uint32_t value = 0;   // IntLit
  std::string name;     // Field / State
  UnOp un{};
  BinOp bin{};
  ExprPtr a, b, c;      // operands; c is the ternary else arm
};

ExprPtr make_lit(uint32_t v, Span s = {});
ExprPtr make_field(const std::string& name, Span s = {});
ExprPtr make_state(const std::string& name, Span s = {});
ExprPtr make_unary(UnOp op, ExprPtr a, Span s = {});
ExprPtr make_binary(BinOp op, ExprPtr a, ExprPtr b, Span s = {});
ExprPtr make_ternary(ExprPtr c, ExprPtr a, ExprPtr b, Span s = {});
bool expr_equal(const Expr& a, const Expr& b);

struct LValue {
  bool is_state = false;
  std::string name;  // canonical field name or state var name
  Span span;
};

struct Stmt;
using StmtPtr = std::shared_ptr<const Stmt>;

struct Stmt {
  enum class Kind { Assign, If, Apply };

  Kind kind;
  Span span;
  // Assign
  LValue lhs;
  ExprPtr rhs;
  // If
  ExprPtr cond;
  std::vector<StmtPtr> then_body;
  std::vector<StmtPtr> else_body;
  // Apply
  std::string table;
};

StmtPtr make_assign(LValue lhs, ExprPtr rhs, Span s = {});
StmtPtr make_if(ExprPtr cond, std::vector<StmtPtr> then_body,
                std::vector<StmtPtr> else_body, Span s = {});
StmtPtr make_apply(const std::string& table, Span s = {});

struct FieldDecl {
  std::string name;  // canonical ("pkt.x" or "meta.x")
  int width = 32;
  Span span;
};

struct StateDecl {
  std::string name;
  int width = 32;
  uint32_t init = 0;
  Span span;
};

struct ActionBlock {
  std::string name;
  bool atomic = false;
  std::vector<StmtPtr> body;
  Span span;
};

/// One equality/inequality test of a field against a constant. Shared by
/// path conditions and by the action-selection guards of rewritten tables.
struct CmpLiteral {
  std::string field;
  BinOp rel = BinOp::Eq;
  uint32_t value = 0;
};

struct Table {
  std::string name;
  std::vector<std::string> keys;  // canonical field names; empty => default table
  uint64_t entries = 1;
  std::vector<std::string> action_names;
  Span span;
  // Guard tables (produced by the if-to-table rewrite) select their action by
  // evaluating one literal conjunction per action; no guard matching => no-op.
  // Empty for ordinary tables, whose outcome is supplied by the control plane.
  std::vector<std::vector<CmpLiteral>> guards;

  bool is_default() const { return keys.empty(); }
  bool is_guard_table() const { return !guards.empty(); }
};

struct ControlBlock {
  std::vector<StmtPtr> body;
  Span span;
};

struct Program {
  std::vector<FieldDecl> fields;  // pkt.* then meta.*, declaration order
  std::vector<StateDecl> state_vars;
  std::vector<ActionBlock> actions;
  std::vector<Table> tables;
  ControlBlock control;

  const FieldDecl* find_field(const std::string& name) const;
  const StateDecl* find_state(const std::string& name) const;
  const ActionBlock* find_action(const std::string& name) const;
  const Table* find_table(const std::string& name) const;
  int width_of(const std::string& name) const;  // field or state; throws NameError
};

}  // namespace pipecat

#endif  // PIPECAT_AST_HPP_
