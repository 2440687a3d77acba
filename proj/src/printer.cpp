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

#include "pipecat/printer.hpp"

#include <sstream>

namespace pipecat {

namespace {

int precedence(const Expr& e) {
  if (e.kind == Expr::Kind::Ternary) return 0;
  if (e.kind == Expr::Kind::Unary) return 11;
  if (e.kind != Expr::Kind::Binary) return 12;
  switch (e.bin) {
    case BinOp::LOr: return 1;
    case BinOp::LAnd: return 2;
    case BinOp::BitOr: return 3;
    case BinOp::BitXor: return 4;
    case BinOp::BitAnd: return 5;
    case BinOp::Eq: case BinOp::Ne: return 6;
    case BinOp::Lt: case BinOp::Le: case BinOp::Gt: case BinOp::Ge: return 7;
    case BinOp::Shl: case BinOp::Shr: return 8;
    case BinOp::Add: case BinOp::Sub: return 9;
    case BinOp::Mul: return 10;
  }
  return 12;
}

void print_expr_prec(std::ostream& os, const Expr& e, int min_prec) {
  int prec = precedence(e);
  bool parens = prec < min_prec;
  if (parens) os << "(";
  switch (e.kind) {
    case Expr::Kind::IntLit: os << e.value; break;
    case Expr::Kind::Field:
    case Expr::Kind::State: os << e.name; break;
    case Expr::Kind::Unary:
      os << (e.un == UnOp::Not ? "!" : "~");
      print_expr_prec(os, *e.a, 11);
      break;
    case Expr::Kind::Binary:
      print_expr_prec(os, *e.a, prec);
      os << " " << binop_text(e.bin) << " ";
      print_expr_prec(os, *e.b, prec + 1);
      break;
    case Expr::Kind::Ternary:
      print_expr_prec(os, *e.a, 1);
      os << " ? ";
      print_expr_prec(os, *e.b, 1);
      os << " : ";
      print_expr_prec(os, *e.c, 0);
      break;
  }
  if (parens) os << ")";
}

void print_stmt_rec(std::ostream& os, const Stmt& s, int indent) {
  std::string pad(indent * 2, ' ');
  switch (s.kind) {
    case Stmt::Kind::Assign:
      os << pad << s.lhs.name << " = " << print_expr(*s.rhs) << ";\n";
      break;
    case Stmt::Kind::Apply:
      os << pad << s.table << ".apply();\n";
      break;
    case Stmt::Kind::If:
      os << pad << "if (" << print_expr(*s.cond) << ") {\n";
      for (const auto& st : s.then_body) print_stmt_rec(os, *st, indent + 1);
      os << pad << "}";
      if (!s.else_body.empty()) {
        os << " else {\n";
        for (const auto& st : s.else_body) print_stmt_rec(os, *st, indent + 1);
        os << pad << "}";
      }
      os << "\n";
      break;
  }
}

}  // namespace

std::string print_expr(const Expr& e) {
  std::ostringstream os;
  print_expr_prec(os, e, 0);
  return os.str();
}

std::string print_stmt(const Stmt& s, int indent) {
  std::ostringstream os;
  print_stmt_rec(os, s, indent);
  return os.str();
}

std::string pretty_print(const Program& p) {
  std::ostringstream os;
  auto fields_of = [&](const std::string& prefix) {
    std::vector<const FieldDecl*> out;
    for (const auto& f : p.fields)
      if (f.name.rfind(prefix + ".", 0) == 0) out.push_back(&f);
    return out;
  };
  for (const char* prefix : {"pkt", "meta"}) {
    auto fs = fields_of(prefix);
    if (fs.empty()) continue;
    os << (std::string(prefix) == "pkt" ? "packet" : "meta") << " {\n";
    for (const auto* f : fs)
      os << "  " << f->name.substr(f->name.find('.') + 1) << " : " << f->width << ";\n";
    os << "}\n";
  }
  if (!p.state_vars.empty()) {
    os << "state {\n";
    for (const auto& s : p.state_vars)
      os << "  " << s.name << " : " << s.width << " = " << s.init << ";\n";
    os << "}\n";
  }
  for (const auto& a : p.actions) {
    os << (a.atomic ? "@atomic action " : "action ") << a.name << "() {\n";
    for (const auto& st : a.body) print_stmt_rec(os, *st, 1);
    os << "}\n";
  }
  for (const auto& t : p.tables) {
    os << "table " << t.name << " {\n  key = {";
    for (size_t i = 0; i < t.keys.size(); i++)
      os << (i ? ", " : "") << t.keys[i];
    os << "};\n  actions = {";
    for (size_t i = 0; i < t.action_names.size(); i++)
      os << (i ? ", " : "") << t.action_names[i];
    os << "};\n  entries = " << t.entries << ";\n}\n";
  }
  os << "control {\n";
  for (const auto& st : p.control.body) print_stmt_rec(os, *st, 1);
  os << "}\n";
  return os.str();
}

}  // namespace pipecat
