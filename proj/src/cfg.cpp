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

#include "pipecat/cfg.hpp"

#include <algorithm>
#include <functional>

namespace pipecat {

PathCondition conjoin(const PathCondition& a, const PathCondition& b) {
  PathCondition out = a;
  out.literals.insert(out.literals.end(), b.literals.begin(), b.literals.end());
  out.opaque = a.opaque || b.opaque;
  return out;
}

std::vector<const CfgEdge*> Cfg::out_edges(int id) const {
  std::vector<const CfgEdge*> out;
  for (const auto& e : edges)
    if (e.from == id) out.push_back(&e);
  return out;
}

namespace {

void expr_fields(const Expr& e, std::set<std::string>& out) {
  switch (e.kind) {
    case Expr::Kind::Field:
    case Expr::Kind::State:
      out.insert(e.name);
      break;
    case Expr::Kind::Unary:
      expr_fields(*e.a, out);
      break;
    case Expr::Kind::Binary:
      expr_fields(*e.a, out);
      expr_fields(*e.b, out);
      break;
    case Expr::Kind::Ternary:
      expr_fields(*e.a, out);
      expr_fields(*e.b, out);
      expr_fields(*e.c, out);
      break;
    case Expr::Kind::IntLit:
      break;
  }
}

void body_effects(const std::vector<StmtPtr>& body, std::set<std::string>& reads,
                  std::set<std::string>& writes) {
  for (const auto& st : body) {
    switch (st->kind) {
      case Stmt::Kind::Assign:
        expr_fields(*st->rhs, reads);
        writes.insert(st->lhs.name);
        break;
      case Stmt::Kind::If:
        expr_fields(*st->cond, reads);
        body_effects(st->then_body, reads, writes);
        body_effects(st->else_body, reads, writes);
        break;
      case Stmt::Kind::Apply:
        break;
    }
  }
}

struct Builder {
  const Program& p;
  Cfg g;

  int add_node(CfgNode::Kind kind, StmtPtr stmt, Span span) {
    CfgNode n;
    n.kind = kind;
    n.id = (int)g.nodes.size();
    n.stmt = std::move(stmt);
    n.span = span;
    g.nodes.push_back(std::move(n));
    return g.nodes.back().id;
  }

  void add_edge(int from, int to, CfgEdge::Label label = CfgEdge::Label::Plain) {
    g.edges.push_back({from, to, label});
  }

  // Lays out `body` starting after node `pred`; returns the last node id.
  int build_body(const std::vector<StmtPtr>& body, int pred) {
    for (const auto& st : body) {
      switch (st->kind) {
        case Stmt::Kind::Assign: {
          int id = add_node(CfgNode::Kind::Stmt, st, st->span);
          auto& n = g.nodes[id];
          expr_fields(*st->rhs, n.reads);
          n.writes.insert(st->lhs.name);
          add_edge(pred, id);
          pred = id;
          break;
        }
        case Stmt::Kind::Apply: {
          int id = add_node(CfgNode::Kind::Stmt, st, st->span);
          auto& n = g.nodes[id];
          const Table* t = p.find_table(st->table);
          if (t != nullptr) {
            for (const auto& k : t->keys) n.reads.insert(k);
            for (const auto& an : t->action_names) {
              const ActionBlock* a = p.find_action(an);
              if (a != nullptr) body_effects(a->body, n.reads, n.writes);
            }
            for (const auto& gset : t->guards)
              for (const auto& lit : gset) n.reads.insert(lit.field);
          }
          add_edge(pred, id);
          pred = id;
          break;
        }
        case Stmt::Kind::If: {
          int branch = add_node(CfgNode::Kind::Branch, st, st->span);
          expr_fields(*st->cond, g.nodes[branch].reads);
          add_edge(pred, branch);
          int then_end = branch;
          if (!st->then_body.empty()) {
            size_t mark = g.edges.size();
            then_end = build_body(st->then_body, branch);
            g.edges[mark].label = CfgEdge::Label::Then;
          }
          int else_end = branch;
          if (!st->else_body.empty()) {
            size_t mark = g.edges.size();
            else_end = build_body(st->else_body, branch);
            g.edges[mark].label = CfgEdge::Label::Else;
          }
          int merge = add_node(CfgNode::Kind::Merge, nullptr, st->span);
          g.merge_of_branch[branch] = merge;
          add_edge(then_end, merge,
                   then_end == branch ? CfgEdge::Label::Then : CfgEdge::Label::Plain);
          add_edge(else_end, merge,
                   else_end == branch ? CfgEdge::Label::Else : CfgEdge::Label::Plain);
          pred = merge;
          break;
        }
      }
    }
    return pred;
  }
};

CmpLiteral negate_literal(const CmpLiteral& l) {
  CmpLiteral out = l;
  switch (l.rel) {
    case BinOp::Eq: out.rel = BinOp::Ne; break;
    case BinOp::Ne: out.rel = BinOp::Eq; break;
    case BinOp::Lt: out.rel = BinOp::Ge; break;
    case BinOp::Le: out.rel = BinOp::Gt; break;
    case BinOp::Gt: out.rel = BinOp::Le; break;
    case BinOp::Ge: out.rel = BinOp::Lt; break;
    default: break;
  }
  return out;
}

}  // namespace

Cfg build_cfg(const ControlBlock& cb, const Program& p) {
  Builder b{p, {}};
  b.g.entry = b.add_node(CfgNode::Kind::Entry, nullptr, cb.span);
  int last = b.build_body(cb.body, b.g.entry);
  b.g.exit = b.add_node(CfgNode::Kind::Exit, nullptr, cb.span);
  b.add_edge(last, b.g.exit);
  for (const auto& [branch, merge] : b.g.merge_of_branch) {
    if (merge <= branch)
      throw CompileError(Errc::UnstructuredControl, b.g.nodes[branch].span,
                         "branch/merge pairing failed");
  }
  return b.g;
}

std::optional<std::vector<CmpLiteral>> cond_to_literals(const Expr& e) {
  if (e.kind == Expr::Kind::Binary) {
    if (e.bin == BinOp::LAnd) {
      auto a = cond_to_literals(*e.a);
      auto b = cond_to_literals(*e.b);
      if (!a || !b) return std::nullopt;
      a->insert(a->end(), b->begin(), b->end());
      return a;
    }
    if (is_relational(e.bin)) {
      const Expr* field = e.a.get();
      const Expr* lit = e.b.get();
      BinOp rel = e.bin;
      if (field->kind == Expr::Kind::IntLit && lit->kind == Expr::Kind::Field) {
        std::swap(field, lit);
        switch (rel) {  // c REL f  =>  f REL' c
          case BinOp::Lt: rel = BinOp::Gt; break;
          case BinOp::Le: rel = BinOp::Ge; break;
          case BinOp::Gt: rel = BinOp::Lt; break;
          case BinOp::Ge: rel = BinOp::Le; break;
          default: break;
        }
      }
      if (field->kind == Expr::Kind::Field && lit->kind == Expr::Kind::IntLit)
        return std::vector<CmpLiteral>{{field->name, rel, lit->value}};
    }
  }
  if (e.kind == Expr::Kind::Unary && e.un == UnOp::Not) {
    auto inner = cond_to_literals(*e.a);
    if (inner && inner->size() == 1)
      return std::vector<CmpLiteral>{negate_literal((*inner)[0])};
  }
  return std::nullopt;
}

std::map<int, PathCondition> path_conditions(const Cfg& g) {
  // Precondition: no write anywhere to a variable read by a branch condition.
  std::set<std::string> cond_vars;
  for (const auto& n : g.nodes)
    if (n.kind == CfgNode::Kind::Branch)
      cond_vars.insert(n.reads.begin(), n.reads.end());
  for (const auto& n : g.nodes) {
    for (const auto& w : n.writes) {
      if (cond_vars.count(w))
        throw CompileError(Errc::GuardUpdateDetected, n.span,
                           "'" + w + "' is written and used in a branch condition");
    }
  }

  std::map<int, PathCondition> pc;
  std::vector<PathCondition> stack;
  auto current = [&]() {
    PathCondition acc;
    for (const auto& c : stack) acc = conjoin(acc, c);
    return acc;
  };

  // Depth-first walk over the structured graph: branch conditions are pushed
  // when entering an arm and popped at the matching merge, so each node sees
  // exactly the conjunction of its enclosing branch literals.
  std::function<void(int, int)> walk = [&](int at, int stop) {
    while (at != stop) {
      const CfgNode& n = g.nodes[at];
      pc[at] = current();
      if (n.kind == CfgNode::Kind::Branch) {
        PathCondition then_pc, else_pc;
        auto lits = cond_to_literals(*n.stmt->cond);
        if (lits) {
          then_pc.literals = *lits;
          if (lits->size() == 1)
            else_pc.literals = {negate_literal((*lits)[0])};
          else
            else_pc.opaque = true;  // negated conjunction is a disjunction
        } else {
          then_pc.opaque = true;
          else_pc.opaque = true;
        }
        int merge = g.merge_of_branch.at(at);
        for (const auto* e : g.out_edges(at)) {
          stack.push_back(e->label == CfgEdge::Label::Else ? else_pc : then_pc);
          walk(e->to, merge);
          stack.pop_back();
        }
        pc[merge] = current();  // merge cancels the branch condition
        at = g.out_edges(merge).at(0)->to;
      } else {
        at = g.out_edges(at).at(0)->to;
      }
    }
  };

  walk(g.entry, g.exit);
  pc[g.exit] = PathCondition{};
  return pc;
}

}  // namespace pipecat
