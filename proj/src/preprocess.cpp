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

#include "pipecat/preprocess.hpp"

#include <algorithm>
#include <functional>

namespace pipecat {

namespace {

void harvest_constants(const Expr& e, std::set<uint32_t>& out) {
  switch (e.kind) {
    case Expr::Kind::IntLit: out.insert(e.value); break;
    case Expr::Kind::Unary: harvest_constants(*e.a, out); break;
    case Expr::Kind::Binary:
      harvest_constants(*e.a, out);
      harvest_constants(*e.b, out);
      break;
    case Expr::Kind::Ternary:
      harvest_constants(*e.a, out);
      harvest_constants(*e.b, out);
      harvest_constants(*e.c, out);
      break;
    default: break;
  }
}

ExprPtr map_names(const Expr& e, const std::function<ExprPtr(const Expr&)>& leaf) {
  switch (e.kind) {
    case Expr::Kind::IntLit: return make_lit(e.value, e.span);
    case Expr::Kind::Field:
    case Expr::Kind::State: return leaf(e);
    case Expr::Kind::Unary:
      return make_unary(e.un, map_names(*e.a, leaf), e.span);
    case Expr::Kind::Binary:
      return make_binary(e.bin, map_names(*e.a, leaf), map_names(*e.b, leaf), e.span);
    case Expr::Kind::Ternary:
      return make_ternary(map_names(*e.a, leaf), map_names(*e.b, leaf),
                          map_names(*e.c, leaf), e.span);
  }
  return nullptr;
}

void collect_reads(const Expr& e, std::set<std::string>& out) {
  if (e.kind == Expr::Kind::Field || e.kind == Expr::Kind::State) {
    out.insert(e.name);
    return;
  }
  if (e.a) collect_reads(*e.a, out);
  if (e.b) collect_reads(*e.b, out);
  if (e.c) collect_reads(*e.c, out);
}

}  // namespace

int width_of_id(const std::string& id, const Program& p) {
  std::string base = id.substr(0, id.find('$'));
  if (base.empty()) return 32;  // $br temporaries hold 0/1
  if (const auto* f = p.find_field(base)) return f->width;
  if (const auto* s = p.find_state(base)) return s->width;
  return 32;  // synthesis temporaries
}

StraightLineAction remove_branches(const ActionBlock& a, const Program& p) {
  StraightLineAction out;
  out.action = a.name;
  out.atomic = a.atomic;

  std::set<uint32_t> consts{0, 1};
  int br_count = 0;

  // guard stack entries: ($br name, polarity)
  std::vector<std::pair<std::string, bool>> guards;

  auto guard_expr = [&]() -> ExprPtr {
    ExprPtr acc;
    for (const auto& [name, positive] : guards) {
      ExprPtr lit = make_field(name);
      if (!positive) lit = make_unary(UnOp::Not, lit);
      acc = acc ? make_binary(BinOp::LAnd, acc, lit) : lit;
    }
    return acc;
  };

  std::function<void(const std::vector<StmtPtr>&)> walk =
      [&](const std::vector<StmtPtr>& body) {
        for (const auto& st : body) {
          switch (st->kind) {
            case Stmt::Kind::Assign: {
              harvest_constants(*st->rhs, consts);
              ExprPtr g = guard_expr();
              ExprPtr rhs = st->rhs;
              if (g) {
                ExprPtr self = st->lhs.is_state ? make_state(st->lhs.name)
                                                : make_field(st->lhs.name);
                rhs = make_ternary(g, rhs, self, st->span);
              }
              out.stmts.push_back({st->lhs.name, rhs, SLStmt::Role::Plain, "", st->span});
              break;
            }
            case Stmt::Kind::If: {
              harvest_constants(*st->cond, consts);
              std::string br = "$br" + std::to_string(br_count++);
              out.stmts.push_back({br, st->cond, SLStmt::Role::BrTemp, "", st->span});
              guards.emplace_back(br, true);
              walk(st->then_body);
              guards.back().second = false;
              walk(st->else_body);
              guards.pop_back();
              break;
            }
            case Stmt::Kind::Apply:
              throw CompileError(Errc::Internal, st->span, "apply in action body");
          }
        }
      };
  walk(a.body);
  (void)p;
  out.constants.assign(consts.begin(), consts.end());
  return out;
}

StraightLineAction add_state_flanks(StraightLineAction s) {
  // Discover touched state vars in order of first occurrence.
  std::vector<std::string> order;
  std::set<std::string> seen;
  auto note = [&](const std::string& name) {
    if (seen.insert(name).second) order.push_back(name);
  };
  for (const auto& st : s.stmts) {
    std::function<void(const Expr&)> scan = [&](const Expr& e) {
      if (e.kind == Expr::Kind::State) note(e.name);
      if (e.a) scan(*e.a);
      if (e.b) scan(*e.b);
      if (e.c) scan(*e.c);
    };
    scan(*st.rhs);
    if (st.target.find('.') == std::string::npos && st.target.find('$') == std::string::npos)
      note(st.target);  // bare target = state var
  }

  StraightLineAction out = s;
  out.stmts.clear();
  for (const auto& sv : order) {
    out.flanks[sv] = {sv + "$v", sv + "$post"};
    out.stmts.push_back({sv + "$v", make_state(sv), SLStmt::Role::ReadFlank, sv, {}});
  }
  for (const auto& st : s.stmts) {
    SLStmt ns = st;
    if (seen.count(st.target)) ns.target = st.target + "$v";
    ns.rhs = map_names(*st.rhs, [&](const Expr& e) -> ExprPtr {
      if (e.kind == Expr::Kind::State && seen.count(e.name))
        return make_field(e.name + "$v", e.span);
      return e.kind == Expr::Kind::Field ? make_field(e.name, e.span)
                                         : make_state(e.name, e.span);
    });
    out.stmts.push_back(std::move(ns));
  }
  for (const auto& sv : order)
    out.stmts.push_back(
        {sv + "$post", make_field(sv + "$v"), SLStmt::Role::WriteFlank, sv, {}});
  return out;
}

StraightLineAction to_ssa(StraightLineAction s) {
  StraightLineAction out = s;
  out.stmts.clear();
  out.ssa_version.clear();
  out.final_of.clear();

  std::map<std::string, std::string> current;  // base -> live version id
  std::map<std::string, int> version;
  std::set<std::string> occupied;  // fields start occupied by the packet input

  auto rename_read = [&](const Expr& e) -> ExprPtr {
    if (e.kind == Expr::Kind::State) return make_state(e.name, e.span);
    auto it = current.find(e.name);
    return make_field(it != current.end() ? it->second : e.name, e.span);
  };

  for (const auto& st : s.stmts) {
    SLStmt ns = st;
    ns.rhs = map_names(*st.rhs, rename_read);
    std::string id = st.target;
    // Declared fields start occupied by the packet input (version 1), so
    // their first write already versions up. Temporaries and flanks keep
    // their base name on first definition.
    bool needs_version = occupied.count(st.target) != 0 ||
                         (st.target.find('.') != std::string::npos &&
                          st.target.find('$') == std::string::npos);
    if (needs_version) {
      int v = ++version[st.target];
      id = st.target + "$" + std::to_string(v + 1);
    }
    occupied.insert(st.target);
    current[st.target] = id;
    ns.target = id;
    out.stmts.push_back(std::move(ns));
  }

  for (auto& [base, v] : version) out.ssa_version[base] = v + 1;

  // Move each write flank up to sit right after the definition it copies, so
  // later statements can read the post value through the flank.
  {
    std::vector<SLStmt> reordered;
    std::vector<SLStmt> pending;
    for (auto& st : out.stmts)
      if (st.role == SLStmt::Role::WriteFlank) pending.push_back(st);
    for (auto& st : out.stmts) {
      if (st.role == SLStmt::Role::WriteFlank) continue;
      std::string target = st.target;
      reordered.push_back(std::move(st));
      for (auto it = pending.begin(); it != pending.end();) {
        if (it->rhs->kind == Expr::Kind::Field && it->rhs->name == target) {
          reordered.push_back(*it);
          it = pending.erase(it);
        } else {
          ++it;
        }
      }
    }
    for (auto& st : pending) reordered.push_back(std::move(st));
    out.stmts = std::move(reordered);
  }

  // Canonicalize post-state reads onto the post flank (the flank definition
  // now precedes every such read).
  for (const auto& [sv, fl] : out.flanks) {
    const auto& [pre, post] = fl;
    auto it = current.find(pre);
    if (it == current.end() || it->second == pre) continue;  // never rewritten
    const std::string last = it->second;
    for (auto& st : out.stmts) {
      if (st.role == SLStmt::Role::WriteFlank && st.state_var == sv) continue;
      st.rhs = map_names(*st.rhs, [&](const Expr& e) -> ExprPtr {
        if (e.kind == Expr::Kind::Field && e.name == last)
          return make_field(post, e.span);
        return e.kind == Expr::Kind::Field ? make_field(e.name, e.span)
                                           : make_state(e.name, e.span);
      });
    }
  }

  // Finals of declared fields, and the free-input set. Already-converted
  // input keeps its recorded finals (targets are stable under re-runs).
  if (!s.final_of.empty()) {
    out.final_of = s.final_of;
  } else {
    for (const auto& [base, id] : current)
      if (base.find('.') != std::string::npos && base.find('$') == std::string::npos &&
          id != base)
        out.final_of[base] = id;
  }
  std::set<std::string> defined;
  out.inputs.clear();
  for (const auto& st : out.stmts) {
    std::set<std::string> reads;
    collect_reads(*st.rhs, reads);
    for (const auto& r : reads)
      if (!defined.count(r) && r.find('.') != std::string::npos && st.role != SLStmt::Role::ReadFlank)
        out.inputs.insert(r);
    defined.insert(st.target);
  }
  return out;
}

namespace {

bool is_lit(const ExprPtr& e, uint32_t v) {
  return e->kind == Expr::Kind::IntLit && e->value == v;
}

ExprPtr fold_expr(const ExprPtr& e) {
  switch (e->kind) {
    case Expr::Kind::IntLit:
    case Expr::Kind::Field:
    case Expr::Kind::State:
      return e;
    case Expr::Kind::Unary: {
      ExprPtr a = fold_expr(e->a);
      if (a->kind == Expr::Kind::IntLit) {
        uint32_t v = a->value;
        return make_lit(e->un == UnOp::Not ? (v == 0 ? 1 : 0) : ~v, e->span);
      }
      // !(a rel b) flips the relation
      if (e->un == UnOp::Not && a->kind == Expr::Kind::Binary &&
          is_relational(a->bin)) {
        BinOp flipped;
        switch (a->bin) {
          case BinOp::Eq: flipped = BinOp::Ne; break;
          case BinOp::Ne: flipped = BinOp::Eq; break;
          case BinOp::Lt: flipped = BinOp::Ge; break;
          case BinOp::Le: flipped = BinOp::Gt; break;
          case BinOp::Gt: flipped = BinOp::Le; break;
          case BinOp::Ge: flipped = BinOp::Lt; break;
          default: flipped = a->bin; break;
        }
        return make_binary(flipped, a->a, a->b, e->span);
      }
      if (e->un == UnOp::Not && a->kind == Expr::Kind::Unary && a->un == UnOp::Not &&
          a->a->kind == Expr::Kind::Binary && is_relational(a->a->bin))
        return a->a;
      return make_unary(e->un, a, e->span);
    }
    case Expr::Kind::Binary: {
      ExprPtr a = fold_expr(e->a);
      ExprPtr b = fold_expr(e->b);
      if (a->kind == Expr::Kind::IntLit && b->kind == Expr::Kind::IntLit)
        return make_lit(eval_binop(e->bin, a->value, b->value), e->span);
      switch (e->bin) {
        case BinOp::Add:
          if (is_lit(a, 0)) return b;
          if (is_lit(b, 0)) return a;
          break;
        case BinOp::Sub:
          if (is_lit(b, 0)) return a;
          if (expr_equal(*a, *b)) return make_lit(0, e->span);
          break;
        case BinOp::Mul:
          if (is_lit(a, 1)) return b;
          if (is_lit(b, 1)) return a;
          if (is_lit(a, 0) || is_lit(b, 0)) return make_lit(0, e->span);
          break;
        case BinOp::BitAnd:
          if (is_lit(a, 0) || is_lit(b, 0)) return make_lit(0, e->span);
          if (expr_equal(*a, *b)) return a;
          break;
        case BinOp::BitOr:
        case BinOp::BitXor:
          if (is_lit(a, 0)) return b;
          if (is_lit(b, 0)) return a;
          if (expr_equal(*a, *b))
            return e->bin == BinOp::BitOr ? a : make_lit(0, e->span);
          break;
        case BinOp::Shl:
        case BinOp::Shr:
          if (is_lit(b, 0)) return a;
          break;
        case BinOp::LAnd:
          if (is_lit(a, 1)) return b;
          if (a->kind == Expr::Kind::IntLit && a->value != 0) return b;
          if (is_lit(a, 0)) return make_lit(0, e->span);
          break;
        case BinOp::LOr:
          if (is_lit(a, 0)) return b;
          break;
        default:
          break;
      }
      return make_binary(e->bin, a, b, e->span);
    }
    case Expr::Kind::Ternary: {
      ExprPtr c = fold_expr(e->a);
      ExprPtr a = fold_expr(e->b);
      ExprPtr b = fold_expr(e->c);
      if (c->kind == Expr::Kind::IntLit) return c->value != 0 ? a : b;
      if (expr_equal(*a, *b)) return a;
      // !c ? a : b  ==  c ? b : a
      if (c->kind == Expr::Kind::Unary && c->un == UnOp::Not) {
        std::swap(a, b);
        c = c->a;
      }
      // a nested choice on the same condition is already decided
      if (a->kind == Expr::Kind::Ternary && expr_equal(*a->a, *c)) a = a->b;
      if (b->kind == Expr::Kind::Ternary && expr_equal(*b->a, *c)) b = b->c;
      if (expr_equal(*a, *b)) return a;
      return make_ternary(c, a, b, e->span);
    }
  }
  return e;
}

}  // namespace

StraightLineAction simplify(StraightLineAction s, const Program& p) {
  auto run_fixpoint = [&]() {
    std::set<std::string> protected_ids;
    for (const auto& [base, id] : s.final_of) protected_ids.insert(id);
    for (const auto& [sv, fl] : s.flanks) {
      protected_ids.insert(fl.first);
      protected_ids.insert(fl.second);
    }
    size_t bound = s.stmts.size() + 1;
    for (size_t iter = 0; iter < bound; iter++) {
      bool changed = false;

      // use counts decide which single-use temporaries may inline whole
      std::map<std::string, int> uses;
      for (const auto& st : s.stmts) {
        std::set<std::string> reads;
        collect_reads(*st.rhs, reads);
        for (const auto& r : reads) uses[r]++;
      }

      // copy/constant/expression propagation (defs precede uses)
      std::map<std::string, ExprPtr> subst;
      for (auto& st : s.stmts) {
        ExprPtr rhs = map_names(*st.rhs, [&](const Expr& e) -> ExprPtr {
          auto it = subst.find(e.name);
          if (e.kind == Expr::Kind::Field && it != subst.end()) return it->second;
          return e.kind == Expr::Kind::Field ? make_field(e.name, e.span)
                                             : make_state(e.name, e.span);
        });
        rhs = fold_expr(rhs);
        if (!expr_equal(*rhs, *st.rhs)) changed = true;
        st.rhs = rhs;
        bool substitutable =
            st.role == SLStmt::Role::Plain || st.role == SLStmt::Role::BrTemp;
        if (!substitutable) continue;
        if (rhs->kind == Expr::Kind::IntLit || rhs->kind == Expr::Kind::Field) {
          subst[st.target] = rhs;
        } else if (uses[st.target] == 1 && !protected_ids.count(st.target) &&
                   st.role == SLStmt::Role::Plain) {
          subst[st.target] = rhs;  // single consumer: inline the expression
        }
      }

      // dead code elimination
      std::set<std::string> used;
      for (const auto& st : s.stmts) {
        std::set<std::string> reads;
        collect_reads(*st.rhs, reads);
        used.insert(reads.begin(), reads.end());
      }
      std::vector<SLStmt> kept;
      for (auto& st : s.stmts) {
        bool removable =
            (st.role == SLStmt::Role::Plain || st.role == SLStmt::Role::BrTemp) &&
            !used.count(st.target) && !protected_ids.count(st.target);
        if (removable) {
          changed = true;
          continue;
        }
        kept.push_back(std::move(st));
      }
      s.stmts = std::move(kept);
      if (!changed) break;
    }
  };

  run_fixpoint();

  // A final that is a pure copy chases through to the id it copies, so a
  // primary output can ride the producing ALU instead of a mov stage. Copies
  // of free inputs stay, and two finals never collapse onto one id.
  {
    std::map<std::string, size_t> def_idx;
    for (size_t i = 0; i < s.stmts.size(); i++) def_idx[s.stmts[i].target] = i;
    std::set<std::string> claimed;
    for (const auto& [field, id] : s.final_of) claimed.insert(id);
    for (auto& [field, id] : s.final_of) {
      for (;;) {
        auto it = def_idx.find(id);
        if (it == def_idx.end()) break;
        const SLStmt& st = s.stmts[it->second];
        if (st.role != SLStmt::Role::Plain || st.rhs->kind != Expr::Kind::Field)
          break;
        const std::string& y = st.rhs->name;
        if (!def_idx.count(y)) break;  // free input: the copy stays
        if (claimed.count(y)) break;
        claimed.erase(id);
        claimed.insert(y);
        id = y;
      }
    }
    run_fixpoint();  // the bypassed copy may now be dead
  }

  // Refresh the free-input set.
  std::set<std::string> defined;
  s.inputs.clear();
  for (const auto& st : s.stmts) {
    std::set<std::string> reads;
    collect_reads(*st.rhs, reads);
    for (const auto& r : reads)
      if (!defined.count(r) && r.find('.') != std::string::npos &&
          st.role != SLStmt::Role::ReadFlank)
        s.inputs.insert(r);
    defined.insert(st.target);
  }
  (void)p;
  return s;
}

SLResult run_straightline(const StraightLineAction& s, const Program& p,
                          const Valuation& fields, const Valuation& state) {
  Valuation env = fields;
  Valuation st_out = state;
  for (const auto& [k, v] : state) env[k] = v;  // bare state reads in flanks
  for (const auto& st : s.stmts) {
    uint32_t v = eval_expr(*st.rhs, env);
    env[st.target] = truncate_to_width(v, width_of_id(st.target, p));
  }
  SLResult r;
  r.fields = fields;
  for (const auto& [base, id] : s.final_of) r.fields[base] = env.at(id);
  for (const auto& [sv, fl] : s.flanks) st_out[sv] = env.at(fl.second);
  r.state = st_out;
  return r;
}

StraightLineAction preprocess_action(const ActionBlock& a, const Program& p,
                                     bool run_simplify) {
  StraightLineAction s = to_ssa(add_state_flanks(remove_branches(a, p)));
  if (run_simplify) s = simplify(s, p);
  return s;
}

}  // namespace pipecat
