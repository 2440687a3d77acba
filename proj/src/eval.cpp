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

#include "pipecat/eval.hpp"

namespace pipecat {

uint32_t truncate_to_width(uint32_t v, int width) {
  if (width >= 32) return v;
  return v & ((1u << width) - 1u);
}

uint32_t eval_binop(BinOp op, uint32_t a, uint32_t b) {
  switch (op) {
    case BinOp::Add: return a + b;
    case BinOp::Sub: return a - b;
    case BinOp::Mul: return a * b;
    case BinOp::BitAnd: return a & b;
    case BinOp::BitOr: return a | b;
    case BinOp::BitXor: return a ^ b;
    case BinOp::Shl: return a << (b & 31u);
    case BinOp::Shr: return a >> (b & 31u);
    case BinOp::Eq: return a == b;
    case BinOp::Ne: return a != b;
    case BinOp::Lt: return a < b;
    case BinOp::Le: return a <= b;
    case BinOp::Gt: return a > b;
    case BinOp::Ge: return a >= b;
    case BinOp::LAnd: return (a != 0 && b != 0) ? 1 : 0;
    case BinOp::LOr: return (a != 0 || b != 0) ? 1 : 0;
  }
  return 0;
}

uint32_t eval_expr(const Expr& e, const Valuation& env) {
  switch (e.kind) {
    case Expr::Kind::IntLit:
      return e.value;
    case Expr::Kind::Field:
    case Expr::Kind::State: {
      auto it = env.find(e.name);
      if (it == env.end())
        throw CompileError(Errc::Internal, e.span, "no value for '" + e.name + "'");
      return it->second;
    }
    case Expr::Kind::Unary: {
      uint32_t a = eval_expr(*e.a, env);
      return e.un == UnOp::Not ? (a == 0 ? 1 : 0) : ~a;
    }
    case Expr::Kind::Binary:
      return eval_binop(e.bin, eval_expr(*e.a, env), eval_expr(*e.b, env));
    case Expr::Kind::Ternary:
      return eval_expr(*e.a, env) != 0 ? eval_expr(*e.b, env) : eval_expr(*e.c, env);
  }
  return 0;
}

bool eval_literal(const CmpLiteral& lit, const Valuation& env) {
  auto it = env.find(lit.field);
  if (it == env.end())
    throw CompileError(Errc::Internal, {}, "no value for '" + lit.field + "'");
  return eval_binop(lit.rel, it->second, lit.value) != 0;
}

}  // namespace pipecat
