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

#include "pipecat/allocation.hpp"

#include <algorithm>
#include <functional>
#include <sstream>

#include "pipecat/parser.hpp"

namespace pipecat {

const char* table_dep_name(TableDepKind k) {
  switch (k) {
    case TableDepKind::Match: return "match";
    case TableDepKind::Action: return "action";
    case TableDepKind::Successor: return "successor";
    case TableDepKind::ReverseMatch: return "reverse_match";
  }
  return "?";
}

bool dep_is_strict(TableDepKind k) {
  return k == TableDepKind::Match || k == TableDepKind::Action;
}

namespace {

void expr_fields(const Expr& e, std::set<std::string>& out) {
  if (e.kind == Expr::Kind::Field || e.kind == Expr::Kind::State) {
    out.insert(e.name);
    return;
  }
  if (e.a) expr_fields(*e.a, out);
  if (e.b) expr_fields(*e.b, out);
  if (e.c) expr_fields(*e.c, out);
}

struct TableEffects {
  std::set<std::string> keys;    // match keys plus gate fields
  std::set<std::string> reads;   // action reads
  std::set<std::string> writes;  // action writes
  std::set<std::string> state;   // state vars touched
};

void action_effects(const std::vector<StmtPtr>& body, TableEffects& eff) {
  for (const auto& st : body) {
    switch (st->kind) {
      case Stmt::Kind::Assign:
        expr_fields(*st->rhs, eff.reads);
        eff.writes.insert(st->lhs.name);
        if (st->lhs.is_state) eff.state.insert(st->lhs.name);
        break;
      case Stmt::Kind::If:
        expr_fields(*st->cond, eff.reads);
        action_effects(st->then_body, eff);
        action_effects(st->else_body, eff);
        break;
      case Stmt::Kind::Apply:
        break;
    }
  }
}

// Applied tables in control order, with the literal gate conditions that
// guard them.
struct AppliedTable {
  std::string name;
  PathCondition gate;
};

void collect_applies(const std::vector<StmtPtr>& body, PathCondition gate,
                     std::vector<AppliedTable>& out) {
  for (const auto& st : body) {
    switch (st->kind) {
      case Stmt::Kind::Apply:
        out.push_back({st->table, gate});
        break;
      case Stmt::Kind::If: {
        auto lits = cond_to_literals(*st->cond);
        PathCondition then_gate = gate, else_gate = gate;
        if (lits) {
          then_gate.literals.insert(then_gate.literals.end(), lits->begin(),
                                    lits->end());
          if (lits->size() == 1) {
            CmpLiteral neg = (*lits)[0];
            switch (neg.rel) {
              case BinOp::Eq: neg.rel = BinOp::Ne; break;
              case BinOp::Ne: neg.rel = BinOp::Eq; break;
              case BinOp::Lt: neg.rel = BinOp::Ge; break;
              case BinOp::Le: neg.rel = BinOp::Gt; break;
              case BinOp::Gt: neg.rel = BinOp::Le; break;
              case BinOp::Ge: neg.rel = BinOp::Lt; break;
              default: break;
            }
            else_gate.literals.push_back(neg);
          } else {
            else_gate.opaque = true;
          }
        } else {
          then_gate.opaque = true;
          else_gate.opaque = true;
        }
        collect_applies(st->then_body, then_gate, out);
        collect_applies(st->else_body, else_gate, out);
        break;
      }
      case Stmt::Kind::Assign:
        break;  // bare assignments are lowered before allocation
    }
  }
}

TableEffects effects_of(const Program& p, const Table& t, const PathCondition& gate) {
  TableEffects eff;
  for (const auto& k : t.keys) eff.keys.insert(k);
  for (const auto& lit : gate.literals) eff.keys.insert(lit.field);
  for (const auto& gset : t.guards)
    for (const auto& lit : gset) eff.keys.insert(lit.field);
  for (const auto& an : t.action_names) {
    const ActionBlock* a = p.find_action(an);
    if (a != nullptr) action_effects(a->body, eff);
  }
  return eff;
}

bool intersects(const std::set<std::string>& a, const std::set<std::string>& b) {
  for (const auto& x : a)
    if (b.count(x)) return true;
  return false;
}

}  // namespace

std::vector<TableApply> applied_tables(const Program& p) {
  std::vector<AppliedTable> applied;
  collect_applies(p.control.body, {}, applied);
  std::vector<TableApply> out;
  for (auto& a : applied) out.push_back({a.name, a.gate});
  return out;
}

std::vector<TableDep> table_dependencies(const Program& p) {
  std::vector<AppliedTable> applied;
  collect_applies(p.control.body, {}, applied);

  std::map<std::string, TableEffects> eff;
  for (const auto& at : applied) {
    const Table* t = p.find_table(at.name);
    if (t == nullptr)
      throw CompileError(Errc::NameError, {}, "unknown table '" + at.name + "'");
    eff[at.name] = effects_of(p, *t, at.gate);
  }

  // state vars may not be shared across tables: registers live in a single
  // stage and sequential cross-table updates cannot be ordered there
  std::map<std::string, std::string> state_owner;
  for (const auto& at : applied) {
    for (const auto& sv : eff[at.name].state) {
      auto [it, fresh] = state_owner.emplace(sv, at.name);
      if (!fresh && it->second != at.name)
        throw CompileError(Errc::Infeasible, {},
                           "state variable '" + sv + "' is shared by tables '" +
                               it->second + "' and '" + at.name + "'");
    }
  }

  std::vector<TableDep> deps;
  for (size_t i = 0; i < applied.size(); i++) {
    for (size_t j = i + 1; j < applied.size(); j++) {
      const auto& a = eff[applied[i].name];
      const auto& b = eff[applied[j].name];
      if (intersects(a.writes, b.keys)) {
        deps.push_back({applied[i].name, applied[j].name, TableDepKind::Match});
        continue;
      }
      if (intersects(a.writes, b.reads) || intersects(a.writes, b.writes)) {
        deps.push_back({applied[i].name, applied[j].name, TableDepKind::Action});
        continue;
      }
      if (intersects(a.keys, b.writes)) {
        deps.push_back(
            {applied[i].name, applied[j].name, TableDepKind::ReverseMatch});
        continue;
      }
      if (intersects(a.reads, b.writes)) {
        deps.push_back(
            {applied[i].name, applied[j].name, TableDepKind::ReverseMatch});
      }
    }
  }
  return deps;
}

AllocationProblem partition_tables(
    const Program& p, const std::map<std::string, ResourceGraph>& action_graphs,
    const TargetSpec& t) {
  AllocationProblem ap;
  ap.table_deps = table_dependencies(p);

  std::vector<AppliedTable> applied;
  collect_applies(p.control.body, {}, applied);

  std::map<std::string, std::vector<int>> state_group_members;

  for (const auto& at : applied) {
    const Table* tbl = p.find_table(at.name);
    uint64_t parts = (tbl->entries + t.n_entries_per_table - 1) / t.n_entries_per_table;
    if (parts < 1) parts = 1;
    for (uint64_t i = 0; i < parts; i++) {
      PartitionedTable pt;
      pt.table = tbl->name;
      pt.partition = (int)i;
      pt.entries = std::min<uint64_t>(t.n_entries_per_table,
                                      tbl->entries - i * t.n_entries_per_table);
      pt.action_names = tbl->action_names;
      int table_idx = (int)ap.tables.size();
      bool any_alu = false;
      for (size_t a = 0; a < tbl->action_names.size(); a++) {
        std::vector<int> ids;
        auto it = action_graphs.find(tbl->action_names[a]);
        if (it != action_graphs.end()) {
          for (const auto& rn : it->second.nodes) {
            AllocAlu alu;
            alu.id = (int)ap.alus.size();
            alu.table = table_idx;
            alu.action = (int)a;
            alu.rnode = rn.id;
            alu.stateful = rn.stateful;
            for (const auto& sv : rn.state_vars)
              if (!sv.empty()) alu.state_vars.push_back(sv);
            alu.label = tbl->name + "[" + std::to_string(i) + "]." +
                        tbl->action_names[a] + "#" + std::to_string(rn.id);
            for (const auto& sv : alu.state_vars)
              state_group_members[sv].push_back(alu.id);
            ids.push_back(alu.id);
            ap.alus.push_back(std::move(alu));
            any_alu = true;
          }
          // intra-action dependencies, shifted to the new ids
          std::map<int, int> to_alu;
          for (size_t k = 0; k < it->second.nodes.size(); k++)
            to_alu[it->second.nodes[k].id] = ids[k];
          for (const auto& e : it->second.edges)
            ap.edges.push_back({to_alu.at(e.from), to_alu.at(e.to), e.field});
        }
        pt.action_alus.push_back(std::move(ids));
      }
      if (!any_alu) {
        AllocAlu anchor;
        anchor.id = (int)ap.alus.size();
        anchor.table = table_idx;
        anchor.action = -1;
        anchor.occupies_alu_slot = false;
        anchor.label = tbl->name + "[" + std::to_string(i) + "].match";
        ap.alus.push_back(std::move(anchor));
      }
      ap.tables.push_back(std::move(pt));
    }
    TableEffects eff = effects_of(p, *tbl, at.gate);
    ap.table_writes[tbl->name] = eff.writes;
    ap.table_keys[tbl->name].insert(tbl->keys.begin(), tbl->keys.end());
  }

  // Merge stage-equality groups that share state vars transitively.
  std::map<int, int> parent;
  std::function<int(int)> find = [&](int x) {
    auto it = parent.find(x);
    if (it == parent.end() || it->second == x) return x;
    return parent[x] = find(it->second);
  };
  for (const auto& [sv, members] : state_group_members)
    for (size_t i = 1; i < members.size(); i++) {
      int a = find(members[0]), b = find(members[i]);
      if (a != b) parent[b] = a;
    }
  std::map<int, std::vector<int>> groups;
  for (const auto& [sv, members] : state_group_members)
    for (int m : members) groups[find(m)].push_back(m);
  for (auto& [root, members] : groups) {
    std::sort(members.begin(), members.end());
    members.erase(std::unique(members.begin(), members.end()), members.end());
    if (members.size() > 1) ap.stage_equal_groups.push_back(members);
  }
  return ap;
}

ConstraintSet build_constraints(const AllocationProblem& ap, const TargetSpec& t) {
  ConstraintSet cs;
  cs.problem = ap;
  cs.target = t;

  // action dependencies
  for (const auto& e : ap.edges) cs.strict_before.push_back({e.from, e.to});

  // table dependencies, expanded over partitions, actions and ALUs
  std::map<std::string, std::vector<int>> units_of_table;
  for (const auto& alu : ap.alus)
    units_of_table[ap.tables[alu.table].table].push_back(alu.id);
  for (const auto& dep : ap.table_deps) {
    for (int u : units_of_table[dep.from]) {
      for (int v : units_of_table[dep.to]) {
        if (dep_is_strict(dep.kind))
          cs.strict_before.push_back({u, v});
        else
          cs.loose_before.push_back({u, v});
      }
    }
  }

  // liveness sets from intra-action edges
  std::set<int> um;
  for (const auto& e : ap.edges) {
    um.insert(e.from);
    cs.need[e.from].push_back(e.to);
  }
  cs.um.assign(um.begin(), um.end());

  // infeasible-by-construction shortcut: a single action deeper than the pipe
  std::map<int, int> depth;
  bool changed = true;
  while (changed) {
    changed = false;
    for (const auto& e : ap.edges) {
      int want = std::max(depth[e.to], depth[e.from] + 1);
      if (want != depth[e.to]) {
        depth[e.to] = want;
        changed = true;
      }
    }
  }
  for (const auto& [id, d] : depth) {
    if (d + 1 > t.n_stages) {
      cs.infeasible = true;
      cs.infeasible_reason = "resource graph of '" + ap.alus[id].label +
                             "' is deeper than the pipeline (" +
                             std::to_string(d + 1) + " > " +
                             std::to_string(t.n_stages) + " stages)";
    }
  }
  return cs;
}

// ---------------------------------------------------------------------------
// Branch-and-bound solver
// ---------------------------------------------------------------------------

namespace {

struct Unit {
  std::vector<int> alus;  // stage-equal ALUs placed together
  int alu_slots = 0;      // ALU capacity consumed
  std::set<int> tables;   // table indices gaining presence
  int down_depth = 0;     // longest strict chain below (in units)
};

struct Solver {
  const ConstraintSet& cs;
  SolveMode mode;

  std::vector<Unit> units;
  std::map<int, int> unit_of;               // alu id -> unit index
  std::vector<std::vector<std::pair<int, bool>>> preds;  // (unit, strict)
  std::vector<std::vector<std::pair<int, bool>>> succs;
  std::vector<int> order;  // topological

  // search state
  std::vector<int> stage_of_unit;
  std::vector<int> alus_used;    // per stage (compute + props)
  std::vector<int> tables_used;  // per stage
  std::map<std::pair<int, int>, int> table_presence;  // (table, stage) -> count
  std::map<int, int> end_of;  // producer alu -> current end
  std::vector<std::pair<int, int>> props;  // (producer, stage)
  int placed_tables = 0;  // partitions with at least one placed unit
  std::map<int, int> table_touch;  // table idx -> placed units touching it

  std::optional<AllocationSolution> best;
  long long nodes_explored = 0;

  explicit Solver(const ConstraintSet& c, SolveMode m) : cs(c), mode(m) {}

  bool build_units() {
    const auto& ap = cs.problem;
    std::map<int, int> group_of;
    for (size_t g = 0; g < ap.stage_equal_groups.size(); g++)
      for (int id : ap.stage_equal_groups[g]) group_of[id] = (int)g;
    std::map<int, int> unit_of_group;
    for (const auto& alu : ap.alus) {
      int u;
      auto git = group_of.find(alu.id);
      if (git != group_of.end() && unit_of_group.count(git->second)) {
        u = unit_of_group[git->second];
      } else {
        u = (int)units.size();
        units.push_back({});
        if (git != group_of.end()) unit_of_group[git->second] = u;
      }
      units[u].alus.push_back(alu.id);
      if (alu.occupies_alu_slot) units[u].alu_slots++;
      units[u].tables.insert(alu.table);
      unit_of[alu.id] = u;
    }
    preds.assign(units.size(), {});
    succs.assign(units.size(), {});
    auto link = [&](int a, int b, bool strict) {
      int ua = unit_of.at(a), ub = unit_of.at(b);
      if (ua == ub) return strict ? false : true;  // strict self-edge = cycle
      preds[ub].push_back({ua, strict});
      succs[ua].push_back({ub, strict});
      return true;
    };
    for (const auto& [a, b] : cs.strict_before)
      if (!link(a, b, true)) return false;
    for (const auto& [a, b] : cs.loose_before)
      if (!link(a, b, false)) return false;

    // topological order (Kahn), ties by smallest alu id
    std::vector<int> indeg(units.size(), 0);
    for (size_t u = 0; u < units.size(); u++) {
      std::set<int> ps;
      for (const auto& [pu, strict] : preds[u]) ps.insert(pu);
      indeg[u] = (int)ps.size();
    }
    std::set<std::pair<int, int>> ready;  // (min alu id, unit)
    for (size_t u = 0; u < units.size(); u++)
      if (indeg[u] == 0) ready.insert({units[u].alus.front(), (int)u});
    std::vector<std::set<int>> succ_units(units.size());
    for (size_t u = 0; u < units.size(); u++)
      for (const auto& [su, strict] : succs[u]) succ_units[u].insert(su);
    while (!ready.empty()) {
      auto [key, u] = *ready.begin();
      ready.erase(ready.begin());
      order.push_back(u);
      for (int su : succ_units[u])
        if (--indeg[su] == 0) ready.insert({units[su].alus.front(), su});
    }
    if (order.size() != units.size()) return false;  // cyclic constraints

    // longest strict chain below each unit
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      int u = *it;
      int d = 0;
      for (const auto& [su, strict] : succs[u])
        d = std::max(d, units[su].down_depth + (strict ? 1 : 0));
      units[u].down_depth = d;
    }
    return true;
  }

  int cap_alus() const { return cs.target.n_alus_per_stage - cs.target.n_header_alus; }

  // Places unit u at stage s if all capacities hold; returns an undo token.
  struct Undo {
    std::vector<std::pair<int, int>> presence_added;  // (table, stage)
    std::vector<std::pair<int, int>> end_changed;     // (producer, old end)
    int props_added = 0;
    int alus_added_stage = 0;
    int unit = -1;
  };

  bool try_place(int u, int s, Undo& undo) {
    const auto& ap = cs.problem;
    undo.unit = u;
    // precedence
    for (const auto& [pu, strict] : preds[u]) {
      int ps = stage_of_unit[pu];
      if (ps < 0) continue;  // not placed yet (loose cross order) -- cannot
                             // happen with topological order
      if (strict ? (ps >= s) : (ps > s)) return false;
    }
    // ALU capacity
    if (alus_used[s] + units[u].alu_slots > cap_alus()) return false;
    // table capacity
    int new_tables = 0;
    for (int tbl : units[u].tables)
      if (!table_presence.count({tbl, s})) new_tables++;
    if (tables_used[s] + new_tables > cs.target.n_tables_per_stage) return false;

    // propagation slots for producers feeding this unit
    if (cs.target.propagation_alus) {
      std::vector<std::pair<int, int>> extended;
      auto fail = [&]() {
        for (auto& [pr, st] : extended) alus_used[st]--;
        for (auto it = undo.end_changed.rbegin(); it != undo.end_changed.rend();
             ++it) {
          if (it->second < 0)
            end_of.erase(it->first);
          else
            end_of[it->first] = it->second;
        }
        undo.end_changed.clear();
        return false;
      };
      for (int alu : units[u].alus) {
        for (const auto& e : ap.edges) {
          if (e.to != alu) continue;
          int producer = e.from;
          int beg = stage_of_unit[unit_of.at(producer)];
          if (beg < 0) return fail();  // producer must precede topologically
          int old_end = end_of.count(producer) ? end_of[producer] : beg + 1;
          int new_end = std::max(old_end, s);
          // new prop stages: [old_end, new_end)
          bool over = false;
          for (int ps = old_end; ps < new_end; ps++) {
            if (ps <= beg) continue;
            if (alus_used[ps] + 1 > cap_alus()) {
              over = true;
              break;
            }
            alus_used[ps]++;
            extended.push_back({producer, ps});
          }
          if (over) return fail();
          if (new_end != old_end) {
            undo.end_changed.push_back({producer, end_of.count(producer)
                                                      ? end_of[producer]
                                                      : -1});
            end_of[producer] = new_end;
          }
        }
      }
      for (auto& [pr, st] : extended) {
        props.push_back({pr, st});
        undo.props_added++;
      }
    }

    // commit
    stage_of_unit[u] = s;
    alus_used[s] += units[u].alu_slots;
    undo.alus_added_stage = s;
    for (int tbl : units[u].tables) {
      auto key = std::make_pair(tbl, s);
      if (!table_presence.count(key)) {
        tables_used[s]++;
        undo.presence_added.push_back(key);
      }
      table_presence[key]++;
      if (++table_touch[tbl] == 1) placed_tables++;
    }
    return true;
  }

  void unplace(const Undo& undo) {
    int u = undo.unit;
    int s = stage_of_unit[u];
    for (int tbl : units[u].tables) {
      auto key = std::make_pair(tbl, s);
      if (--table_presence[key] == 0) table_presence.erase(key);
      if (--table_touch[tbl] == 0) placed_tables--;
    }
    for (const auto& key : undo.presence_added) tables_used[key.second]--;
    alus_used[s] -= units[u].alu_slots;
    for (int i = 0; i < undo.props_added; i++) {
      alus_used[props.back().second]--;
      props.pop_back();
    }
    for (auto it = undo.end_changed.rbegin(); it != undo.end_changed.rend(); ++it) {
      if (it->second < 0)
        end_of.erase(it->first);
      else
        end_of[it->first] = it->second;
    }
    stage_of_unit[u] = -1;
  }

  // Remaining table-slot capacity within stages 1..bound must cover the
  // partitions that are not yet present anywhere.
  bool pigeonhole_ok(size_t next, int bound) {
    std::set<int> pending;
    for (size_t i = next; i < order.size(); i++)
      for (int tbl : units[order[i]].tables)
        if (table_touch[tbl] == 0) pending.insert(tbl);
    if (pending.empty()) return true;
    long long slots = 0;
    for (int s = 1; s <= bound; s++)
      slots += std::max(0, cs.target.n_tables_per_stage - tables_used[s]);
    return slots >= (long long)pending.size();
  }

  void dfs(size_t next, int current_cost) {
    nodes_explored++;
    if (mode == SolveMode::Feasible && best) return;
    if (next == order.size()) {
      AllocationSolution sol;
      sol.stage.assign(cs.problem.alus.size(), 0);
      for (size_t u = 0; u < units.size(); u++)
        for (int alu : units[u].alus) sol.stage[alu] = stage_of_unit[u];
      for (const auto& [key, cnt] : table_presence)
        sol.match_placement.insert(key);
      sol.props = props;
      std::sort(sol.props.begin(), sol.props.end());
      sol.cost = current_cost;
      sol.mode = mode;
      best = sol;
      return;
    }
    int u = order[next];
    int lb = 1;
    for (const auto& [pu, strict] : preds[u]) {
      int ps = stage_of_unit[pu];
      if (ps >= 0) lb = std::max(lb, ps + (strict ? 1 : 0));
    }
    int ub = cs.target.n_stages - units[u].down_depth;
    for (int s = lb; s <= ub; s++) {
      if (mode == SolveMode::Optimal && best &&
          std::max(current_cost, s + units[u].down_depth) >= best->cost)
        break;  // cannot improve
      Undo undo;
      if (!try_place(u, s, undo)) continue;
      int bound = cs.target.n_stages;
      if (mode == SolveMode::Optimal && best) bound = best->cost - 1;
      if (pigeonhole_ok(next + 1, bound))
        dfs(next + 1, std::max(current_cost, s));
      unplace(undo);
      if (mode == SolveMode::Feasible && best) return;
    }
  }
};

}  // namespace

std::optional<AllocationSolution> solve(const ConstraintSet& cs, SolveMode mode) {
  if (cs.infeasible) return std::nullopt;
  if (cs.problem.alus.empty()) {
    AllocationSolution sol;
    sol.cost = 0;
    sol.mode = mode;
    return sol;  // empty program occupies no stages
  }
  Solver solver(cs, mode);
  if (!solver.build_units()) return std::nullopt;
  solver.stage_of_unit.assign(solver.units.size(), -1);
  solver.alus_used.assign(cs.target.n_stages + 1, 0);
  solver.tables_used.assign(cs.target.n_stages + 1, 0);
  solver.dfs(0, 0);
  if (!solver.best) return std::nullopt;
  auto violations = validate_solution(cs, *solver.best);
  if (!violations.empty())
    throw CompileError(Errc::Internal, {},
                       "solver produced an invalid solution: " + violations.front());
  return solver.best;
}

std::vector<std::string> validate_solution(const ConstraintSet& cs,
                                           const AllocationSolution& sol) {
  std::vector<std::string> bad;
  const auto& ap = cs.problem;
  const auto& t = cs.target;
  if (ap.alus.empty()) return bad;
  auto stage = [&](int alu) { return sol.stage.at(alu); };

  // ALU allocation 1: every ALU within the stage range
  for (const auto& alu : ap.alus)
    if (stage(alu.id) < 1 || stage(alu.id) > t.n_stages)
      bad.push_back("ALU " + alu.label + " outside stage range");

  // match-action pairing (and anchors occupy their table's match)
  for (const auto& alu : ap.alus)
    if (!sol.match_placement.count({alu.table, stage(alu.id)}))
      bad.push_back("ALU " + alu.label + " placed without its match");

  // every partition matched somewhere
  for (size_t i = 0; i < ap.tables.size(); i++) {
    bool any = false;
    for (const auto& [tbl, s] : sol.match_placement)
      if (tbl == (int)i) any = true;
    if (!any)
      bad.push_back("table " + ap.tables[i].table + "[" +
                    std::to_string(ap.tables[i].partition) + "] never matched");
  }

  // match table capacity
  std::map<int, int> m_per_stage;
  for (const auto& [tbl, s] : sol.match_placement) m_per_stage[s]++;
  for (const auto& [s, count] : m_per_stage)
    if (count > t.n_tables_per_stage)
      bad.push_back("stage " + std::to_string(s) + " holds " +
                    std::to_string(count) + " tables");

  // table dependencies
  std::map<std::string, std::vector<int>> units_of_table;
  for (const auto& alu : ap.alus)
    units_of_table[ap.tables[alu.table].table].push_back(alu.id);
  for (const auto& dep : ap.table_deps) {
    for (int u : units_of_table[dep.from]) {
      for (int v : units_of_table[dep.to]) {
        bool ok = dep_is_strict(dep.kind) ? stage(u) < stage(v)
                                          : stage(u) <= stage(v);
        if (!ok)
          bad.push_back(std::string("table dependency ") + table_dep_name(dep.kind) +
                        " violated between " + dep.from + " and " + dep.to);
      }
    }
  }

  // action dependencies
  for (const auto& e : ap.edges)
    if (!(stage(e.from) < stage(e.to)))
      bad.push_back("action dependency violated on '" + e.field + "'");

  // stage-equality groups
  for (const auto& group : ap.stage_equal_groups)
    for (size_t i = 1; i < group.size(); i++)
      if (stage(group[i]) != stage(group[0]))
        bad.push_back("replicated stateful ALUs placed in different stages");

  // propagation family
  std::map<int, int> end_of;
  if (t.propagation_alus) {
    std::map<std::pair<int, int>, int> prop_set;
    for (const auto& [u, s] : sol.props) prop_set[{u, s}]++;
    std::map<int, std::vector<int>> consumers;
    for (const auto& e : ap.edges) consumers[e.from].push_back(e.to);
    for (const auto& [u, cons] : consumers) {
      int beg = stage(u);
      int end = beg + 1;
      for (int v : cons) end = std::max(end, stage(v));
      end_of[u] = end;
      if (!(beg < end)) bad.push_back("end_u <= beg_u for " + ap.alus[u].label);
      if (end > t.n_stages)
        bad.push_back("end_u beyond pipeline for " + ap.alus[u].label);
      for (int s = 1; s <= t.n_stages; s++) {
        bool want = beg < s && s < end;
        bool have = prop_set.count({u, s}) != 0;
        if (want != have)
          bad.push_back("propagation mismatch for " + ap.alus[u].label +
                        " at stage " + std::to_string(s));
      }
    }
    for (const auto& [key, count] : prop_set)
      if (!consumers.count(key.first))
        bad.push_back("spurious propagation slot");
  }

  // per-stage ALU capacity including propagation slots
  std::map<int, int> alus_per_stage;
  for (const auto& alu : ap.alus)
    if (alu.occupies_alu_slot) alus_per_stage[stage(alu.id)]++;
  if (t.propagation_alus)
    for (const auto& [u, s] : sol.props) alus_per_stage[s]++;
  for (const auto& [s, count] : alus_per_stage)
    if (count > t.n_alus_per_stage - t.n_header_alus)
      bad.push_back("stage " + std::to_string(s) + " exceeds ALU capacity");

  // cost consistency
  int max_stage = 0;
  for (const auto& alu : ap.alus) max_stage = std::max(max_stage, stage(alu.id));
  if (sol.cost != max_stage) bad.push_back("cost does not equal max used stage");
  return bad;
}

AllocationSolution duplicate_multistage_matches(AllocationSolution sol,
                                                const AllocationProblem& ap) {
  for (size_t ti = 0; ti < ap.tables.size(); ti++) {
    const auto& pt = ap.tables[ti];
    std::set<int> stages;
    for (const auto& alus : pt.action_alus)
      for (int id : alus) stages.insert(sol.stage.at(id));
    if (stages.size() > 1) {
      const auto& writes = ap.table_writes.at(pt.table);
      const auto& keys = ap.table_keys.at(pt.table);
      for (const auto& k : keys)
        if (writes.count(k))
          throw CompileError(Errc::KeyModifiedByAction, {},
                             "multi-stage action of table '" + pt.table +
                                 "' writes its own match key '" + k + "'");
    }
    for (int s : stages) sol.match_placement.insert({(int)ti, s});
  }
  return sol;
}

// ---------------------------------------------------------------------------
// Big-M ILP emission
// ---------------------------------------------------------------------------

std::vector<LinRow> big_m_rows(const std::string& beg, const std::string& end,
                               const std::string& lo, const std::string& hi,
                               const std::string& prop, int s, int M) {
  std::vector<LinRow> rows;
  // (1) s - beg <= M*lo             ->  -beg - M*lo <= -s
  rows.push_back({{{beg, -1}, {lo, -M}}, -s});
  // (2) s - beg > -M(1-lo)          ->  beg + M*lo <= s + M - 1
  rows.push_back({{{beg, 1}, {lo, M}}, (long long)s + M - 1});
  // (3) s - end < M(1-hi)           ->  end ... -end + M*hi <= M - 1 - s
  rows.push_back({{{end, -1}, {hi, M}}, (long long)M - 1 - s});
  // (4) s - end >= -M*hi            ->  end - M*hi <= s
  rows.push_back({{{end, 1}, {hi, -M}}, s});
  // (5) lo + hi - 2 < M*prop        ->  lo + hi - M*prop <= 1
  rows.push_back({{{lo, 1}, {hi, 1}, {prop, -M}}, 1});
  // (6) lo + hi - 2 >= -M(1-prop)   ->  -lo - hi + M*prop <= M - 2
  rows.push_back({{{lo, -1}, {hi, -1}, {prop, M}}, (long long)M - 2});
  return rows;
}

bool rows_hold(const std::vector<LinRow>& rows,
               const std::map<std::string, long long>& assign) {
  for (const auto& row : rows) {
    long long sum = 0;
    for (const auto& [var, c] : row.coeff) sum += c * assign.at(var);
    if (sum > row.rhs) return false;
  }
  return true;
}

std::string emit_big_m(const ConstraintSet& cs, SolveMode mode) {
  const auto& ap = cs.problem;
  const auto& t = cs.target;
  const int M = t.n_stages + 5;
  std::ostringstream os;

  auto stage_var = [](int u) { return "stage_u" + std::to_string(u); };
  auto stage_bin = [](int u, int s) {
    return "su_" + std::to_string(u) + "_" + std::to_string(s);
  };
  auto m_var = [](int tbl, int s) {
    return "m_" + std::to_string(tbl) + "_" + std::to_string(s);
  };

  std::vector<std::string> rows, binaries, generals;
  auto row = [&](const std::string& text) { rows.push_back(text); };

  // objective
  os << "\\ pipeline resource allocation (" << t.name << ")\n";
  os << "Minimize\n obj: " << (mode == SolveMode::Optimal ? "cost" : "0 cost")
     << "\n";
  os << "Subject To\n";

  for (const auto& alu : ap.alus) {
    generals.push_back(stage_var(alu.id));
    // stage_u = sum_s s * su_us ; sum_s su_us = 1  (ALU allocation 2)
    std::ostringstream link, one;
    link << " link_" << alu.id << ": " << stage_var(alu.id);
    one << " one_" << alu.id << ":";
    for (int s = 1; s <= t.n_stages; s++) {
      binaries.push_back(stage_bin(alu.id, s));
      link << " - " << s << " " << stage_bin(alu.id, s);
      one << (s > 1 ? " + " : " ") << stage_bin(alu.id, s);
    }
    link << " = 0";
    one << " = 1";
    row(link.str());
    row(one.str());
    if (mode == SolveMode::Optimal)
      row(" cost_" + std::to_string(alu.id) + ": cost - " + stage_var(alu.id) +
          " >= 0");
    // match action pairing: su_us <= m_ts
    for (int s = 1; s <= t.n_stages; s++)
      row(" pair_" + std::to_string(alu.id) + "_" + std::to_string(s) + ": " +
          stage_bin(alu.id, s) + " - " + m_var(alu.table, s) + " <= 0");
  }

  for (size_t ti = 0; ti < ap.tables.size(); ti++) {
    for (int s = 1; s <= t.n_stages; s++) binaries.push_back(m_var((int)ti, s));
    std::ostringstream placed;
    placed << " placed_" << ti << ":";
    for (int s = 1; s <= t.n_stages; s++)
      placed << (s > 1 ? " + " : " ") << m_var((int)ti, s);
    placed << " >= 1";
    row(placed.str());
  }

  // match table capacity
  for (int s = 1; s <= t.n_stages; s++) {
    std::ostringstream cap;
    cap << " tcap_" << s << ":";
    for (size_t ti = 0; ti < ap.tables.size(); ti++)
      cap << (ti ? " + " : " ") << m_var((int)ti, s);
    cap << " <= " << t.n_tables_per_stage;
    row(cap.str());
  }

  // precedence: strict via integer slack
  int prec_id = 0;
  for (const auto& [u, v] : cs.strict_before)
    row(" prec_" + std::to_string(prec_id++) + ": " + stage_var(u) + " - " +
        stage_var(v) + " <= -1");
  for (const auto& [u, v] : cs.loose_before)
    row(" prec_" + std::to_string(prec_id++) + ": " + stage_var(u) + " - " +
        stage_var(v) + " <= 0");

  // replicated stateful updates share a stage
  int eq_id = 0;
  for (const auto& group : ap.stage_equal_groups)
    for (size_t i = 1; i < group.size(); i++)
      row(" eq_" + std::to_string(eq_id++) + ": " + stage_var(group[0]) + " - " +
          stage_var(group[i]) + " = 0");

  // propagation constraints
  std::map<int, std::vector<int>> consumers;
  for (const auto& e : ap.edges) consumers[e.from].push_back(e.to);
  if (t.propagation_alus) {
    for (int u : cs.um) {
      std::string beg = "beg_u" + std::to_string(u);
      std::string end = "end_u" + std::to_string(u);
      generals.push_back(beg);
      generals.push_back(end);
      row(" pbeg_" + std::to_string(u) + ": " + beg + " - " + stage_var(u) +
          " = 0");
      row(" pord_" + std::to_string(u) + ": " + beg + " - " + end + " <= -1");
      row(" pend_" + std::to_string(u) + ": " + end + " <= " +
          std::to_string(t.n_stages));
      for (int v : consumers[u])
        row(" puse_" + std::to_string(u) + "_" + std::to_string(v) + ": " + end +
            " - " + stage_var(v) + " >= 0");
      for (int s = 1; s <= t.n_stages; s++) {
        std::string lo = "lo_" + std::to_string(u) + "_" + std::to_string(s);
        std::string hi = "hi_" + std::to_string(u) + "_" + std::to_string(s);
        std::string pr = "prop_" + std::to_string(u) + "_" + std::to_string(s);
        binaries.push_back(lo);
        binaries.push_back(hi);
        binaries.push_back(pr);
        int bi = 0;
        for (const auto& lr : big_m_rows(beg, end, lo, hi, pr, s, M)) {
          std::ostringstream r;
          r << " bigm_" << u << "_" << s << "_" << bi++ << ":";
          bool first = true;
          for (const auto& [var, c] : lr.coeff) {
            if (first)
              r << " " << c << " " << var;
            else
              r << (c >= 0 ? " + " : " - ") << std::llabs(c) << " " << var;
            first = false;
          }
          r << " <= " << lr.rhs;
          row(r.str());
        }
      }
    }
  }

  // per-stage ALU capacity: compute + propagation <= N_alu - N_H
  for (int s = 1; s <= t.n_stages; s++) {
    std::ostringstream cap;
    cap << " acap_" << s << ":";
    bool any = false;
    for (const auto& alu : ap.alus) {
      if (!alu.occupies_alu_slot) continue;
      cap << (any ? " + " : " ") << stage_bin(alu.id, s);
      any = true;
    }
    if (t.propagation_alus)
      for (int u : cs.um) {
        cap << (any ? " + " : " ") << "prop_" << u << "_" << s;
        any = true;
      }
    if (!any) continue;
    cap << " <= " << (t.n_alus_per_stage - t.n_header_alus);
    row(cap.str());
  }

  for (const auto& r : rows) os << r << "\n";
  os << "Bounds\n";
  for (const auto& alu : ap.alus)
    os << " 1 <= " << stage_var(alu.id) << " <= " << t.n_stages << "\n";
  if (mode == SolveMode::Optimal) os << " 0 <= cost <= " << t.n_stages << "\n";
  os << "Generals\n";
  if (mode == SolveMode::Optimal) os << " cost\n";
  for (const auto& g : generals) os << " " << g << "\n";
  os << "Binaries\n";
  std::sort(binaries.begin(), binaries.end());
  binaries.erase(std::unique(binaries.begin(), binaries.end()), binaries.end());
  for (const auto& b : binaries) os << " " << b << "\n";
  os << "End\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// Theorem tooling
// ---------------------------------------------------------------------------

Program gen_theorem2_instance(int n, int w) {
  if (n < 1 || w <= 2 * n)
    throw CompileError(Errc::ConfigError, {},
                       "theorem-2 instance needs w > 2n and n >= 1");
  std::ostringstream src;
  src << "packet {\n";
  for (int i = 0; i <= w; i++) {
    int len = (i == w) ? n + 1 : n;
    for (int j = 0; j <= len; j++) src << "  c" << i << "_f" << j << ";\n";
  }
  src << "}\n";
  for (int i = 0; i <= w; i++) {
    int len = (i == w) ? n + 1 : n;
    for (int j = 0; j < len; j++) {
      src << "action c" << i << "_a" << j << "() { pkt.c" << i << "_f" << (j + 1)
          << " = pkt.c" << i << "_f" << j << " + 1; }\n";
      src << "table c" << i << "_t" << j << " { key = {pkt.c" << i << "_f" << j
          << "}; actions = {c" << i << "_a" << j << "}; entries = 1; }\n";
    }
  }
  src << "control {\n";
  for (int i = 0; i <= w; i++) {
    int len = (i == w) ? n + 1 : n;
    for (int j = 0; j < len; j++) src << "  c" << i << "_t" << j << ".apply();\n";
  }
  src << "}\n";
  return parse(src.str());
}

std::optional<int> greedy_table_allocate(const AllocationProblem& ap,
                                         const TargetSpec& t) {
  // first-fit in declaration order over the table-count proxy
  std::map<std::string, int> placed;  // original name -> stage (last partition)
  std::vector<int> used(t.n_stages + 1, 0);
  int max_stage = 0;
  for (const auto& pt : ap.tables) {
    int lb = 1;
    for (const auto& dep : ap.table_deps) {
      if (dep.to != pt.table) continue;
      auto it = placed.find(dep.from);
      if (it == placed.end()) continue;
      lb = std::max(lb, it->second + (dep_is_strict(dep.kind) ? 1 : 0));
    }
    int s = lb;
    while (s <= t.n_stages && used[s] >= t.n_tables_per_stage) s++;
    if (s > t.n_stages) return std::nullopt;
    used[s]++;
    placed[pt.table] = std::max(placed.count(pt.table) ? placed[pt.table] : 0, s);
    max_stage = std::max(max_stage, s);
  }
  return max_stage;
}

}  // namespace pipecat
