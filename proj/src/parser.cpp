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

#include "pipecat/parser.hpp"

#include <cctype>
#include <cstdlib>
#include <set>
#include <sstream>
#include <unordered_map>

namespace pipecat {

const char* errc_name(Errc c) {
  switch (c) {
    case Errc::SyntaxError: return "SyntaxError";
    case Errc::TypeError: return "TypeError";
    case Errc::NameError: return "NameError";
    case Errc::UnstructuredControl: return "UnstructuredControl";
    case Errc::GuardUpdateDetected: return "GuardUpdateDetected";
    case Errc::UnknownOutput: return "UnknownOutput";
    case Errc::NoFit: return "NoFit";
    case Errc::DepthExceeded: return "DepthExceeded";
    case Errc::Infeasible: return "Infeasible";
    case Errc::KeyModifiedByAction: return "KeyModifiedByAction";
    case Errc::UnmatchedTable: return "UnmatchedTable";
    case Errc::ConfigError: return "ConfigError";
    case Errc::SynthesisBudget: return "SynthesisBudget";
    case Errc::Internal: return "Internal";
  }
  return "?";
}

std::string CompileError::format(Errc code, Span span, const std::string& msg) {
  std::ostringstream os;
  if (span.line > 0) os << span.line << ":" << span.col << ": ";
  os << errc_name(code) << ": " << msg;
  return os.str();
}

const char* binop_text(BinOp op) {
  switch (op) {
    case BinOp::Add: return "+";
    case BinOp::Sub: return "-";
    case BinOp::Mul: return "*";
    case BinOp::BitAnd: return "&";
    case BinOp::BitOr: return "|";
    case BinOp::BitXor: return "^";
    case BinOp::Shl: return "<<";
    case BinOp::Shr: return ">>";
    case BinOp::Eq: return "==";
    case BinOp::Ne: return "!=";
    case BinOp::Lt: return "<";
    case BinOp::Le: return "<=";
    case BinOp::Gt: return ">";
    case BinOp::Ge: return ">=";
    case BinOp::LAnd: return "&&";
    case BinOp::LOr: return "||";
  }
  return "?";
}

bool is_relational(BinOp op) {
  switch (op) {
    case BinOp::Eq: case BinOp::Ne: case BinOp::Lt:
    case BinOp::Le: case BinOp::Gt: case BinOp::Ge:
      return true;
    default:
      return false;
  }
}

ExprPtr make_lit(uint32_t v, Span s) {
  auto e = std::make_shared<Expr>();
  e->kind = Expr::Kind::IntLit; e->value = v; e->span = s;
  return e;
}
ExprPtr make_field(const std::string& name, Span s) {
  auto e = std::make_shared<Expr>();
  e->kind = Expr::Kind::Field; e->name = name; e->span = s;
  return e;
}
ExprPtr make_state(const std::string& name, Span s) {
  auto e = std::make_shared<Expr>();
  e->kind = Expr::Kind::State; e->name = name; e->span = s;
  return e;
}
ExprPtr make_unary(UnOp op, ExprPtr a, Span s) {
  auto e = std::make_shared<Expr>();
  e->kind = Expr::Kind::Unary; e->un = op; e->a = std::move(a); e->span = s;
  return e;
}
ExprPtr make_binary(BinOp op, ExprPtr a, ExprPtr b, Span s) {
  auto e = std::make_shared<Expr>();
  e->kind = Expr::Kind::Binary; e->bin = op;
  e->a = std::move(a); e->b = std::move(b); e->span = s;
  return e;
}
ExprPtr make_ternary(ExprPtr c, ExprPtr a, ExprPtr b, Span s) {
  auto e = std::make_shared<Expr>();
  e->kind = Expr::Kind::Ternary; e->a = std::move(c);
  e->b = std::move(a); e->c = std::move(b); e->span = s;
  return e;
}

bool expr_equal(const Expr& a, const Expr& b) {
  if (a.kind != b.kind) return false;
  switch (a.kind) {
    case Expr::Kind::IntLit: return a.value == b.value;
    case Expr::Kind::Field:
    case Expr::Kind::State: return a.name == b.name;
    case Expr::Kind::Unary: return a.un == b.un && expr_equal(*a.a, *b.a);
    case Expr::Kind::Binary:
      return a.bin == b.bin && expr_equal(*a.a, *b.a) && expr_equal(*a.b, *b.b);
    case Expr::Kind::Ternary:
      return expr_equal(*a.a, *b.a) && expr_equal(*a.b, *b.b) && expr_equal(*a.c, *b.c);
  }
  return false;
}

StmtPtr make_assign(LValue lhs, ExprPtr rhs, Span s) {
  auto st = std::make_shared<Stmt>();
  st->kind = Stmt::Kind::Assign; st->lhs = std::move(lhs);
  st->rhs = std::move(rhs); st->span = s;
  return st;
}
StmtPtr make_if(ExprPtr cond, std::vector<StmtPtr> then_body,
                std::vector<StmtPtr> else_body, Span s) {
  auto st = std::make_shared<Stmt>();
  st->kind = Stmt::Kind::If; st->cond = std::move(cond);
  st->then_body = std::move(then_body); st->else_body = std::move(else_body);
  st->span = s;
  return st;
}
StmtPtr make_apply(const std::string& table, Span s) {
  auto st = std::make_shared<Stmt>();
  st->kind = Stmt::Kind::Apply; st->table = table; st->span = s;
  return st;
}

const FieldDecl* Program::find_field(const std::string& name) const {
  for (const auto& f : fields)
    if (f.name == name) return &f;
  return nullptr;
}
const StateDecl* Program::find_state(const std::string& name) const {
  for (const auto& s : state_vars)
    if (s.name == name) return &s;
  return nullptr;
}
const ActionBlock* Program::find_action(const std::string& name) const {
  for (const auto& a : actions)
    if (a.name == name) return &a;
  return nullptr;
}
const Table* Program::find_table(const std::string& name) const {
  for (const auto& t : tables)
    if (t.name == name) return &t;
  return nullptr;
}
int Program::width_of(const std::string& name) const {
  if (const auto* f = find_field(name)) return f->width;
  if (const auto* s = find_state(name)) return s->width;
  throw CompileError(Errc::NameError, {}, "undeclared identifier '" + name + "'");
}

namespace {

enum class Tok {
  End, Ident, Int,
  LBrace, RBrace, LParen, RParen, Semi, Colon, Comma, Dot, At, Question,
  Assign, Plus, Minus, Star, Amp, Pipe, Caret, Shl, Shr,
  Eq, Ne, Lt, Le, Gt, Ge, AndAnd, OrOr, Bang, Tilde,
};

struct Token {
  Tok kind;
  std::string text;
  uint32_t value = 0;
  Span span;
};

class Lexer {
 public:
  explicit Lexer(const std::string& src) : src_(src) {}

  Token next() {
    skip_ws();
    Span sp{line_, col_};
    if (pos_ >= src_.size()) return {Tok::End, "", 0, sp};
    char c = src_[pos_];
    if (std::isalpha((unsigned char)c) || c == '_') {
      size_t start = pos_;
      while (pos_ < src_.size() &&
             (std::isalnum((unsigned char)src_[pos_]) || src_[pos_] == '_'))
        advance();
      return {Tok::Ident, src_.substr(start, pos_ - start), 0, sp};
    }
    if (std::isdigit((unsigned char)c)) {
      size_t start = pos_;
      int base = 10;
      if (c == '0' && pos_ + 1 < src_.size() &&
          (src_[pos_ + 1] == 'x' || src_[pos_ + 1] == 'X')) {
        base = 16;
        advance(); advance();
      }
      while (pos_ < src_.size() && std::isalnum((unsigned char)src_[pos_])) advance();
      std::string text = src_.substr(start, pos_ - start);
      errno = 0;
      char* end = nullptr;
      unsigned long long v =
          std::strtoull(base == 16 ? text.c_str() + 2 : text.c_str(), &end, base);
      if (errno != 0 || (end && *end != '\0') || v > 0xFFFFFFFFull)
        throw CompileError(Errc::SyntaxError, sp, "bad integer literal '" + text + "'");
      return {Tok::Int, text, (uint32_t)v, sp};
    }
    auto two = [&](char a, char b) {
      return c == a && pos_ + 1 < src_.size() && src_[pos_ + 1] == b;
    };
    if (two('=', '=')) { advance(); advance(); return {Tok::Eq, "==", 0, sp}; }
    if (two('!', '=')) { advance(); advance(); return {Tok::Ne, "!=", 0, sp}; }
    if (two('<', '=')) { advance(); advance(); return {Tok::Le, "<=", 0, sp}; }
    if (two('>', '=')) { advance(); advance(); return {Tok::Ge, ">=", 0, sp}; }
    if (two('<', '<')) { advance(); advance(); return {Tok::Shl, "<<", 0, sp}; }
    if (two('>', '>')) { advance(); advance(); return {Tok::Shr, ">>", 0, sp}; }
    if (two('&', '&')) { advance(); advance(); return {Tok::AndAnd, "&&", 0, sp}; }
    if (two('|', '|')) { advance(); advance(); return {Tok::OrOr, "||", 0, sp}; }
    advance();
    switch (c) {
      case '{': return {Tok::LBrace, "{", 0, sp};
      case '}': return {Tok::RBrace, "}", 0, sp};
      case '(': return {Tok::LParen, "(", 0, sp};
      case ')': return {Tok::RParen, ")", 0, sp};
      case ';': return {Tok::Semi, ";", 0, sp};
      case ':': return {Tok::Colon, ":", 0, sp};
      case ',': return {Tok::Comma, ",", 0, sp};
      case '.': return {Tok::Dot, ".", 0, sp};
      case '@': return {Tok::At, "@", 0, sp};
      case '?': return {Tok::Question, "?", 0, sp};
      case '=': return {Tok::Assign, "=", 0, sp};
      case '+': return {Tok::Plus, "+", 0, sp};
      case '-': return {Tok::Minus, "-", 0, sp};
      case '*': return {Tok::Star, "*", 0, sp};
      case '&': return {Tok::Amp, "&", 0, sp};
      case '|': return {Tok::Pipe, "|", 0, sp};
      case '^': return {Tok::Caret, "^", 0, sp};
      case '<': return {Tok::Lt, "<", 0, sp};
      case '>': return {Tok::Gt, ">", 0, sp};
      case '!': return {Tok::Bang, "!", 0, sp};
      case '~': return {Tok::Tilde, "~", 0, sp};
      default:
        throw CompileError(Errc::SyntaxError, sp,
                           std::string("unexpected character '") + c + "'");
    }
  }

 private:
  void advance() {
    if (src_[pos_] == '\n') { line_++; col_ = 1; } else { col_++; }
    pos_++;
  }
  void skip_ws() {
    for (;;) {
      while (pos_ < src_.size() && std::isspace((unsigned char)src_[pos_])) advance();
      if (pos_ + 1 < src_.size() && src_[pos_] == '/' && src_[pos_ + 1] == '/') {
        while (pos_ < src_.size() && src_[pos_] != '\n') advance();
        continue;
      }
      if (pos_ + 1 < src_.size() && src_[pos_] == '/' && src_[pos_ + 1] == '*') {
        Span sp{line_, col_};
        advance(); advance();
        while (pos_ + 1 < src_.size() && !(src_[pos_] == '*' && src_[pos_ + 1] == '/'))
          advance();
        if (pos_ + 1 >= src_.size())
          throw CompileError(Errc::SyntaxError, sp, "unterminated comment");
        advance(); advance();
        continue;
      }
      break;
    }
  }

  const std::string& src_;
  size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
};

class Parser {
 public:
  explicit Parser(const std::string& src) : lex_(src) { shift(); }

  Program parse_program() {
    Program p;
    while (cur_.kind != Tok::End) {
      bool atomic = false;
      Span at_span = cur_.span;
      if (cur_.kind == Tok::At) {
        shift();
        expect_ident("atomic");
        atomic = true;
      }
      if (cur_.kind != Tok::Ident)
        throw err("expected declaration");
      const std::string& kw = cur_.text;
      if (atomic && kw != "action") throw err("@atomic only applies to actions");
      if (kw == "packet") parse_fields(p, "pkt");
      else if (kw == "meta") parse_fields(p, "meta");
      else if (kw == "state") parse_state(p);
      else if (kw == "action") parse_action(p, atomic, at_span);
      else if (kw == "table") parse_table(p);
      else if (kw == "control") parse_control(p);
      else throw err("unknown declaration '" + kw + "'");
    }
    finalize(p);
    return p;
  }

 private:
  CompileError err(const std::string& msg) const {
    return CompileError(Errc::SyntaxError, cur_.span, msg);
  }
  void shift() { cur_ = lex_.next(); }
  Token eat(Tok k, const char* what) {
    if (cur_.kind != k) throw err(std::string("expected ") + what);
    Token t = cur_;
    shift();
    return t;
  }
  std::string eat_ident() { return eat(Tok::Ident, "identifier").text; }
  void expect_ident(const char* text) {
    if (cur_.kind != Tok::Ident || cur_.text != text)
      throw err(std::string("expected '") + text + "'");
    shift();
  }
  bool peek_ident(const char* text) const {
    return cur_.kind == Tok::Ident && cur_.text == text;
  }

  void parse_fields(Program& p, const std::string& prefix) {
    shift();  // 'packet' / 'meta'
    eat(Tok::LBrace, "'{'");
    while (cur_.kind != Tok::RBrace) {
      Span sp = cur_.span;
      std::string name = eat_ident();
      int width = 32;
      if (cur_.kind == Tok::Colon) {
        shift();
        Token w = eat(Tok::Int, "width");
        width = (int)w.value;
        if (width < 1 || width > 32)
          throw CompileError(Errc::TypeError, w.span, "bit-width must be in 1..32");
      }
      eat(Tok::Semi, "';'");
      p.fields.push_back({prefix + "." + name, width, sp});
    }
    shift();  // '}'
  }

  void parse_state(Program& p) {
    shift();
    eat(Tok::LBrace, "'{'");
    while (cur_.kind != Tok::RBrace) {
      Span sp = cur_.span;
      std::string name = eat_ident();
      int width = 32;
      uint32_t init = 0;
      if (cur_.kind == Tok::Colon) {
        shift();
        Token w = eat(Tok::Int, "width");
        width = (int)w.value;
        if (width < 1 || width > 32)
          throw CompileError(Errc::TypeError, w.span, "bit-width must be in 1..32");
      }
      if (cur_.kind == Tok::Assign) {
        shift();
        init = eat(Tok::Int, "initial value").value;
      }
      eat(Tok::Semi, "';'");
      p.state_vars.push_back({name, width, init, sp});
    }
    shift();
  }

  void parse_action(Program& p, bool atomic, Span at_span) {
    Span sp = atomic ? at_span : cur_.span;
    shift();
    std::string name = eat_ident();
    eat(Tok::LParen, "'('");
    eat(Tok::RParen, "')'");
    ActionBlock a;
    a.name = name;
    a.atomic = atomic;
    a.span = sp;
    a.body = parse_block(/*in_action=*/true);
    p.actions.push_back(std::move(a));
  }

  void parse_table(Program& p) {
    Span sp = cur_.span;
    shift();
    Table t;
    t.name = eat_ident();
    t.span = sp;
    eat(Tok::LBrace, "'{'");
    bool saw_key = false, saw_actions = false;
    while (cur_.kind != Tok::RBrace) {
      std::string prop = eat_ident();
      eat(Tok::Assign, "'='");
      if (prop == "key") {
        saw_key = true;
        eat(Tok::LBrace, "'{'");
        while (cur_.kind != Tok::RBrace) {
          t.keys.push_back(parse_field_name());
          if (cur_.kind == Tok::Comma) shift();
        }
        shift();
      } else if (prop == "actions") {
        saw_actions = true;
        eat(Tok::LBrace, "'{'");
        while (cur_.kind != Tok::RBrace) {
          t.action_names.push_back(eat_ident());
          if (cur_.kind == Tok::Comma) shift();
        }
        shift();
      } else if (prop == "entries") {
        Token v = eat(Tok::Int, "entry count");
        if (v.value < 1)
          throw CompileError(Errc::TypeError, v.span, "entries must be >= 1");
        t.entries = v.value;
      } else {
        throw err("unknown table property '" + prop + "'");
      }
      eat(Tok::Semi, "';'");
    }
    shift();
    if (!saw_key || !saw_actions)
      throw CompileError(Errc::SyntaxError, sp, "table needs key and actions");
    p.tables.push_back(std::move(t));
  }

  void parse_control(Program& p) {
    Span sp = cur_.span;
    shift();
    if (!p.control.body.empty() || seen_control_)
      throw CompileError(Errc::SyntaxError, sp, "duplicate control block");
    seen_control_ = true;
    p.control.span = sp;
    p.control.body = parse_block(/*in_action=*/false);
  }

  std::string parse_field_name() {
    Token t = eat(Tok::Ident, "field reference");
    if (t.text != "pkt" && t.text != "meta")
      throw CompileError(Errc::SyntaxError, t.span, "field reference must be pkt.* or meta.*");
    eat(Tok::Dot, "'.'");
    return t.text + "." + eat_ident();
  }

  std::vector<StmtPtr> parse_block(bool in_action) {
    eat(Tok::LBrace, "'{'");
    std::vector<StmtPtr> body;
    while (cur_.kind != Tok::RBrace) body.push_back(parse_stmt(in_action));
    shift();
    return body;
  }

  StmtPtr parse_stmt(bool in_action) {
    Span sp = cur_.span;
    if (peek_ident("if")) {
      shift();
      eat(Tok::LParen, "'('");
      ExprPtr cond = parse_expr();
      eat(Tok::RParen, "')'");
      std::vector<StmtPtr> then_body = parse_block(in_action);
      std::vector<StmtPtr> else_body;
      if (peek_ident("else")) {
        shift();
        if (peek_ident("if")) {
          else_body.push_back(parse_stmt(in_action));
        } else {
          else_body = parse_block(in_action);
        }
      }
      return make_if(std::move(cond), std::move(then_body), std::move(else_body), sp);
    }
    if (cur_.kind == Tok::Ident && (cur_.text == "pkt" || cur_.text == "meta")) {
      std::string name = parse_field_name();
      eat(Tok::Assign, "'='");
      ExprPtr rhs = parse_expr();
      eat(Tok::Semi, "';'");
      return make_assign({false, name, sp}, std::move(rhs), sp);
    }
    // bare identifier: either a state assignment (actions) or table.apply()
    Token id = eat(Tok::Ident, "statement");
    if (cur_.kind == Tok::Dot) {
      shift();
      expect_ident("apply");
      eat(Tok::LParen, "'('");
      eat(Tok::RParen, "')'");
      eat(Tok::Semi, "';'");
      if (in_action)
        throw CompileError(Errc::SyntaxError, sp, "table apply not allowed inside actions");
      return make_apply(id.text, sp);
    }
    if (!in_action)
      throw CompileError(Errc::SyntaxError, sp,
                         "state assignment only allowed inside actions");
    eat(Tok::Assign, "'='");
    ExprPtr rhs = parse_expr();
    eat(Tok::Semi, "';'");
    return make_assign({true, id.text, sp}, std::move(rhs), sp);
  }

  // Precedence climbing: ?: < || < && < | < ^ < & < ==/!= < rel < shift < +- < * < unary
  ExprPtr parse_expr() { return parse_ternary(); }

  ExprPtr parse_ternary() {
    ExprPtr c = parse_bin(0);
    if (cur_.kind == Tok::Question) {
      Span sp = cur_.span;
      shift();
      ExprPtr a = parse_ternary();
      eat(Tok::Colon, "':'");
      ExprPtr b = parse_ternary();
      return make_ternary(std::move(c), std::move(a), std::move(b), sp);
    }
    return c;
  }

  static int prec_of(Tok k) {
    switch (k) {
      case Tok::OrOr: return 1;
      case Tok::AndAnd: return 2;
      case Tok::Pipe: return 3;
      case Tok::Caret: return 4;
      case Tok::Amp: return 5;
      case Tok::Eq: case Tok::Ne: return 6;
      case Tok::Lt: case Tok::Le: case Tok::Gt: case Tok::Ge: return 7;
      case Tok::Shl: case Tok::Shr: return 8;
      case Tok::Plus: case Tok::Minus: return 9;
      case Tok::Star: return 10;
      default: return -1;
    }
  }
  static BinOp op_of(Tok k) {
    switch (k) {
      case Tok::OrOr: return BinOp::LOr;
      case Tok::AndAnd: return BinOp::LAnd;
      case Tok::Pipe: return BinOp::BitOr;
      case Tok::Caret: return BinOp::BitXor;
      case Tok::Amp: return BinOp::BitAnd;
      case Tok::Eq: return BinOp::Eq;
      case Tok::Ne: return BinOp::Ne;
      case Tok::Lt: return BinOp::Lt;
      case Tok::Le: return BinOp::Le;
      case Tok::Gt: return BinOp::Gt;
      case Tok::Ge: return BinOp::Ge;
      case Tok::Shl: return BinOp::Shl;
      case Tok::Shr: return BinOp::Shr;
      case Tok::Plus: return BinOp::Add;
      case Tok::Minus: return BinOp::Sub;
      case Tok::Star: return BinOp::Mul;
      default: throw std::logic_error("op_of");
    }
  }

  ExprPtr parse_bin(int min_prec) {
    ExprPtr lhs = parse_unary();
    for (;;) {
      int prec = prec_of(cur_.kind);
      if (prec < 0 || prec < min_prec) return lhs;
      Tok k = cur_.kind;
      Span sp = cur_.span;
      shift();
      ExprPtr rhs = parse_bin(prec + 1);
      lhs = make_binary(op_of(k), std::move(lhs), std::move(rhs), sp);
    }
  }

  ExprPtr parse_unary() {
    Span sp = cur_.span;
    if (cur_.kind == Tok::Bang) {
      shift();
      return make_unary(UnOp::Not, parse_unary(), sp);
    }
    if (cur_.kind == Tok::Tilde) {
      shift();
      return make_unary(UnOp::BitNot, parse_unary(), sp);
    }
    if (cur_.kind == Tok::Minus) {  // -x desugars to 0 - x
      shift();
      return make_binary(BinOp::Sub, make_lit(0, sp), parse_unary(), sp);
    }
    return parse_primary();
  }

  ExprPtr parse_primary() {
    Span sp = cur_.span;
    if (cur_.kind == Tok::Int) {
      uint32_t v = cur_.value;
      shift();
      return make_lit(v, sp);
    }
    if (cur_.kind == Tok::LParen) {
      shift();
      ExprPtr e = parse_expr();
      eat(Tok::RParen, "')'");
      return e;
    }
    if (cur_.kind == Tok::Ident) {
      if (cur_.text == "pkt" || cur_.text == "meta")
        return make_field(parse_field_name(), sp);
      std::string name = eat_ident();
      return make_state(name, sp);
    }
    throw err("expected expression");
  }

  // ---- checking ----------------------------------------------------------

  void finalize(Program& p) {
    std::set<std::string> names;
    for (const auto& f : p.fields)
      if (!names.insert(f.name).second)
        throw CompileError(Errc::NameError, f.span, "duplicate field '" + f.name + "'");
    for (const auto& s : p.state_vars)
      if (!names.insert(s.name).second)
        throw CompileError(Errc::NameError, s.span, "duplicate declaration '" + s.name + "'");
    std::set<std::string> action_names, table_names;
    for (const auto& a : p.actions)
      if (!action_names.insert(a.name).second)
        throw CompileError(Errc::NameError, a.span, "duplicate action '" + a.name + "'");
    for (const auto& t : p.tables)
      if (!table_names.insert(t.name).second)
        throw CompileError(Errc::NameError, t.span, "duplicate table '" + t.name + "'");

    for (const auto& t : p.tables) {
      for (const auto& k : t.keys)
        if (!p.find_field(k))
          throw CompileError(Errc::NameError, t.span,
                             "table " + t.name + " keys on undeclared field '" + k + "'");
      if (t.action_names.empty())
        throw CompileError(Errc::SyntaxError, t.span, "table " + t.name + " has no actions");
      if (t.keys.empty() && t.action_names.size() != 1)
        throw CompileError(Errc::SyntaxError, t.span,
                           "keyless table " + t.name + " must have exactly one action");
      for (const auto& an : t.action_names)
        if (!p.find_action(an))
          throw CompileError(Errc::NameError, t.span,
                             "table " + t.name + " references unknown action '" + an + "'");
    }
    for (const auto& a : p.actions) check_body(p, a.body, /*in_action=*/true);
    std::set<std::string> applied;
    check_control(p, p.control.body, applied);
  }

  void check_control(const Program& p, const std::vector<StmtPtr>& body,
                     std::set<std::string>& applied) {
    for (const auto& st : body) {
      switch (st->kind) {
        case Stmt::Kind::Apply: {
          if (!p.find_table(st->table))
            throw CompileError(Errc::NameError, st->span, "unknown table '" + st->table + "'");
          if (!applied.insert(st->table).second)
            throw CompileError(Errc::SyntaxError, st->span,
                               "table '" + st->table + "' applied more than once");
          break;
        }
        case Stmt::Kind::Assign:
          if (st->lhs.is_state)
            throw CompileError(Errc::SyntaxError, st->span,
                               "state assignment only allowed inside actions");
          check_assign(p, *st);
          break;
        case Stmt::Kind::If: {
          int w = check_expr(p, *st->cond);
          require_bool(w, st->cond->span);
          check_control(p, st->then_body, applied);
          check_control(p, st->else_body, applied);
          break;
        }
      }
    }
  }

  void check_body(const Program& p, const std::vector<StmtPtr>& body, bool in_action) {
    for (const auto& st : body) {
      switch (st->kind) {
        case Stmt::Kind::Assign: check_assign(p, *st); break;
        case Stmt::Kind::If: {
          int w = check_expr(p, *st->cond);
          require_bool(w, st->cond->span);
          check_body(p, st->then_body, in_action);
          check_body(p, st->else_body, in_action);
          break;
        }
        case Stmt::Kind::Apply:
          throw CompileError(Errc::SyntaxError, st->span, "apply inside action");
      }
    }
  }

  void check_assign(const Program& p, const Stmt& st) {
    int lw = p.width_of(st.lhs.name);  // NameError if undeclared
    if (st.lhs.is_state && !p.find_state(st.lhs.name))
      throw CompileError(Errc::NameError, st.span,
                         "undeclared state variable '" + st.lhs.name + "'");
    int rw = check_expr(p, *st.rhs);
    // width 0 = polymorphic constant, width 1 booleans zero-extend on store
    if (rw != 0 && rw != 1 && rw != lw)
      throw CompileError(Errc::TypeError, st.span,
                         "cannot assign " + std::to_string(rw) + "-bit value to " +
                             std::to_string(lw) + "-bit '" + st.lhs.name + "'");
  }

  void require_bool(int w, Span sp) {
    if (w > 1)
      throw CompileError(Errc::TypeError, sp, "condition must be boolean (width 1)");
  }

  // Returns inferred width: 0 = constant (adapts), otherwise 1..32.
  int check_expr(const Program& p, const Expr& e) {
    switch (e.kind) {
      case Expr::Kind::IntLit: return 0;
      case Expr::Kind::Field:
      case Expr::Kind::State: {
        if (e.kind == Expr::Kind::Field && !p.find_field(e.name))
          throw CompileError(Errc::NameError, e.span, "undeclared field '" + e.name + "'");
        if (e.kind == Expr::Kind::State && !p.find_state(e.name))
          throw CompileError(Errc::NameError, e.span,
                             "undeclared state variable '" + e.name + "'");
        return p.width_of(e.name);
      }
      case Expr::Kind::Unary: {
        int w = check_expr(p, *e.a);
        if (e.un == UnOp::Not) {
          require_bool(w, e.a->span);
          return 1;
        }
        return w;
      }
      case Expr::Kind::Binary: {
        int wa = check_expr(p, *e.a);
        int wb = check_expr(p, *e.b);
        if (e.bin == BinOp::LAnd || e.bin == BinOp::LOr) {
          require_bool(wa, e.a->span);
          require_bool(wb, e.b->span);
          return 1;
        }
        if (e.bin == BinOp::Shl || e.bin == BinOp::Shr) return wa == 0 ? 32 : wa;
        int w = merge_widths(wa, wb, e.span);
        if (is_relational(e.bin)) return 1;
        return w;
      }
      case Expr::Kind::Ternary: {
        int wc = check_expr(p, *e.a);
        require_bool(wc, e.a->span);
        int wa = check_expr(p, *e.b);
        int wb = check_expr(p, *e.c);
        return merge_widths(wa, wb, e.span);
      }
    }
    return 0;
  }

  int merge_widths(int wa, int wb, Span sp) {
    if (wa == 0) return wb;
    if (wb == 0) return wa;
    if (wa == 1 || wb == 1) return std::max(wa, wb);  // booleans zero-extend
    if (wa != wb)
      throw CompileError(Errc::TypeError, sp,
                         "width mismatch: " + std::to_string(wa) + " vs " +
                             std::to_string(wb));
    return wa;
  }

  Lexer lex_;
  Token cur_;
  bool seen_control_ = false;
};

}  // namespace

Program parse(const std::string& source_text) {
  Parser parser(source_text);
  return parser.parse_program();
}

}  // namespace pipecat
