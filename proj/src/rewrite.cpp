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

#include "pipecat/rewrite.hpp"

#include <algorithm>
#include <functional>
#include <set>

namespace pipecat {

namespace {

std::string fresh_name(const Program& p, const std::string& base, int& counter) {
  for (;;) {
    std::string name = base + std::to_string(counter++);
    if (!p.find_table(name) && !p.find_action(name)) return name;
  }
}

}  // namespace

Program lower_tables(const Program& p) {
  Program out = p;
  int counter = 0;

  std::function<std::vector<StmtPtr>(const std::vector<StmtPtr>&)> walk =
      [&](const std::vector<StmtPtr>& body) {
        std::vector<StmtPtr> result;
        for (const auto& st : body) {
          switch (st->kind) {
            case Stmt::Kind::Assign: {
              std::string name = fresh_name(out, "__dflt", counter);
              ActionBlock a;
              a.name = name;
              a.body = {st};
              a.span = st->span;
              out.actions.push_back(std::move(a));
              Table t;
              t.name = name;
              t.entries = 1;
              t.action_names = {name};
              t.span = st->span;
              out.tables.push_back(std::move(t));
              result.push_back(make_apply(name, st->span));
              break;
            }
            case Stmt::Kind::If:
              result.push_back(make_if(st->cond, walk(st->then_body),
                                       walk(st->else_body), st->span));
              break;
            case Stmt::Kind::Apply:
              result.push_back(st);
              break;
          }
        }
        return result;
      };

  out.control.body = walk(p.control.body);
  return out;
}

namespace {

// One action candidate of a rewritten region: the positive literals of the
// branches taken on its path plus the statements those branches execute.
// Leaves are ordered then-before-else; a packet selects the first leaf whose
// literals all hold, which reproduces the source decision structure exactly.
struct Leaf {
  std::vector<CmpLiteral> lits;
  std::vector<StmtPtr> stmts;
};

// The branch arms enclosing a statement, as (if statement, arm) pairs. Two
// statements may depend on each other only when one home set contains the
// other (same control path); anything else is a cross-branch pair.
using Home = std::set<std::pair<const Stmt*, int>>;

struct Analysis {
  std::vector<Leaf> leaves;
  std::set<std::string> key_fields;
  std::map<const Stmt*, Home> homes;
  bool ok = true;
};

void analyze_body(const std::vector<StmtPtr>& body, const Home& home, Analysis& a,
                  std::vector<Leaf>& out);

// Leaves of a single if statement (without any surrounding prefix literals).
void analyze_if(const Stmt& st, const Home& home, Analysis& a,
                std::vector<Leaf>& out) {
  auto lits = cond_to_literals(*st.cond);
  if (!lits) {
    a.ok = false;
    return;
  }
  for (const auto& l : *lits) {
    if (l.rel != BinOp::Eq) {  // range guards are future work
      a.ok = false;
      return;
    }
    a.key_fields.insert(l.field);
  }
  Home then_home = home, else_home = home;
  then_home.insert({&st, 0});
  else_home.insert({&st, 1});
  std::vector<Leaf> then_leaves, else_leaves;
  analyze_body(st.then_body, then_home, a, then_leaves);
  analyze_body(st.else_body, else_home, a, else_leaves);
  if (!a.ok) return;
  for (auto& leaf : then_leaves) {
    Leaf combined;
    combined.lits = *lits;
    combined.lits.insert(combined.lits.end(), leaf.lits.begin(), leaf.lits.end());
    combined.stmts = std::move(leaf.stmts);
    out.push_back(std::move(combined));
  }
  for (auto& leaf : else_leaves) out.push_back(std::move(leaf));
}

// Leaves of a statement list: assignments attach to every leaf, nested ifs
// multiply leaves in then-first order. Applies make the region unrewritable.
void analyze_body(const std::vector<StmtPtr>& body, const Home& home, Analysis& a,
                  std::vector<Leaf>& out) {
  if (!a.ok) return;
  out = {Leaf{}};
  for (const auto& st : body) {
    switch (st->kind) {
      case Stmt::Kind::Apply:
        a.ok = false;
        return;
      case Stmt::Kind::Assign:
        a.homes[st.get()] = home;
        for (auto& leaf : out) leaf.stmts.push_back(st);
        break;
      case Stmt::Kind::If: {
        std::vector<Leaf> if_leaves;
        analyze_if(*st, home, a, if_leaves);
        if (!a.ok) return;
        std::vector<Leaf> next;
        for (const auto& prefix : out) {
          for (const auto& l : if_leaves) {
            Leaf merged = prefix;
            merged.lits.insert(merged.lits.end(), l.lits.begin(), l.lits.end());
            merged.stmts.insert(merged.stmts.end(), l.stmts.begin(), l.stmts.end());
            next.push_back(std::move(merged));
          }
        }
        out = std::move(next);
        break;
      }
    }
  }
}

bool analyze_top_if(const Stmt& st, Analysis& a) {
  if (st.kind != Stmt::Kind::If) return false;
  analyze_if(st, {}, a, a.leaves);
  return a.ok;
}

bool home_compatible(const Home& a, const Home& b) {
  auto subset = [](const Home& x, const Home& y) {
    return std::includes(y.begin(), y.end(), x.begin(), x.end());
  };
  return subset(a, b) || subset(b, a);
}

uint64_t entries_estimate(const std::set<std::string>& keys,
                          const std::vector<Leaf>& leaves, uint64_t cap) {
  uint64_t product = 1;
  uint64_t limit = cap ? cap : UINT64_MAX;
  for (const auto& key : keys) {
    std::set<uint32_t> consts;
    for (const auto& leaf : leaves)
      for (const auto& l : leaf.lits)
        if (l.field == key) consts.insert(l.value);
    uint64_t n = std::max<uint64_t>(1, consts.size());
    if (product > limit / n) {
      product = limit;
      break;
    }
    product *= n;
  }
  return std::max<uint64_t>(1, std::min(product, limit));
}

struct Rewriter {
  Program& out;
  const std::vector<GuardedDependency>& deps;
  const std::map<std::string, int>& widths;
  const RewriteOptions& opts;
  int counter = 0;

  // True if a surviving dependency connects two distinct branch arms of the
  // candidate region. Sequential statements on one control path (one home a
  // subset of the other) are fine; they stay ordered inside one action.
  bool region_has_internal_dep(const std::vector<Analysis>& members) {
    std::map<const Stmt*, const Home*> homes;
    for (const auto& m : members)
      for (const auto& [st, h] : m.homes) homes[st] = &h;
    for (const auto& d : deps) {
      auto a = homes.find(d.from_stmt.get());
      auto b = homes.find(d.to_stmt.get());
      if (a == homes.end() || b == homes.end()) continue;
      if (!home_compatible(*a->second, *b->second)) return true;
    }
    return false;
  }

  StmtPtr emit_table(const std::vector<Analysis>& members, Span span) {
    // Cross product of member leaves in then-first lexicographic order.
    std::vector<Leaf> combos{Leaf{}};
    for (const auto& m : members) {
      std::vector<Leaf> next;
      for (const auto& c : combos) {
        for (const auto& leaf : m.leaves) {
          Leaf merged = c;
          merged.lits.insert(merged.lits.end(), leaf.lits.begin(), leaf.lits.end());
          merged.stmts.insert(merged.stmts.end(), leaf.stmts.begin(), leaf.stmts.end());
          next.push_back(std::move(merged));
        }
      }
      combos = std::move(next);
    }

    // Drop unsatisfiable combinations. Empty combos must stay as explicit
    // no-ops when a later combo could otherwise match first, so only a
    // trailing run of empties is dropped.
    std::vector<Leaf> kept;
    for (auto& c : combos)
      if (literals_satisfiable(c.lits, widths)) kept.push_back(std::move(c));
    while (!kept.empty() && kept.back().stmts.empty()) kept.pop_back();

    std::set<std::string> keys;
    for (const auto& m : members)
      keys.insert(m.key_fields.begin(), m.key_fields.end());

    Table t;
    t.name = fresh_name(out, "__rw", counter);
    t.span = span;
    t.keys.assign(keys.begin(), keys.end());
    int action_idx = 0;
    for (auto& combo : kept) {
      ActionBlock a;
      a.name = t.name + "_a" + std::to_string(action_idx++);
      a.body = std::move(combo.stmts);
      a.span = span;
      t.action_names.push_back(a.name);
      t.guards.push_back(combo.lits);
      out.actions.push_back(std::move(a));
    }
    t.entries = entries_estimate(keys, combos, opts.max_entries);
    out.tables.push_back(std::move(t));
    return make_apply(out.tables.back().name, span);
  }

  std::vector<StmtPtr> walk(const std::vector<StmtPtr>& body) {
    std::vector<StmtPtr> result;
    size_t i = 0;
    while (i < body.size()) {
      const StmtPtr& st = body[i];
      Analysis first;
      if (st->kind == Stmt::Kind::If && analyze_top_if(*st, first) &&
          (int)first.leaves.size() <= opts.max_leaves) {
        // Greedy maximal run of consecutive rewritable ifs.
        std::vector<Analysis> members{std::move(first)};
        size_t leaves = members[0].leaves.size();
        size_t j = i + 1;
        while (j < body.size() && body[j]->kind == Stmt::Kind::If) {
          Analysis next;
          if (!analyze_top_if(*body[j], next)) break;
          if (leaves * next.leaves.size() > (size_t)opts.max_leaves) break;
          std::vector<Analysis> extended = members;
          extended.push_back(std::move(next));
          if (region_has_internal_dep(extended)) break;
          leaves *= extended.back().leaves.size();
          members = std::move(extended);
          j++;
        }
        if (!region_has_internal_dep(members)) {
          result.push_back(emit_table(members, st->span));
          i = j;
          continue;
        }
        // fall through: region blocked by a surviving dependency
      }
      if (st->kind == Stmt::Kind::If) {
        result.push_back(
            make_if(st->cond, walk(st->then_body), walk(st->else_body), st->span));
      } else {
        result.push_back(st);
      }
      i++;
    }
    return result;
  }
};

}  // namespace

Program rewrite_to_tables(const Program& p, const Cfg& cfg,
                          const std::vector<GuardedDependency>& deps,
                          const RewriteOptions& opts) {
  (void)cfg;  // deps carry the statement identities we need
  Program out = p;
  auto widths = field_widths(p);
  Rewriter rw{out, deps, widths, opts};
  out.control.body = rw.walk(p.control.body);
  return out;
}

}  // namespace pipecat
