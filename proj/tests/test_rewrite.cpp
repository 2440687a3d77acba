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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "pipecat/allocation.hpp"
#include "pipecat/printer.hpp"
#include "pipecat/rewrite.hpp"
#include "pipecat/sim.hpp"
#include "test_util.hpp"

using namespace pipecat;
namespace tu = pipecat::testutil;

namespace {

Program rewritten(const Program& p, uint64_t max_entries = 0) {
  Cfg cfg = build_cfg(p.control, p);
  auto pc = path_conditions(cfg);
  auto deps = prune_false_deps(guarded_deps(cfg, pc), field_widths(p));
  RewriteOptions opts;
  opts.max_entries = max_entries;
  return rewrite_to_tables(p, cfg, deps, opts);
}

// brute-force oracle for guard satisfiability over 4-bit fields
bool brute_sat(const std::vector<CmpLiteral>& lits) {
  std::set<std::string> fields;
  for (const auto& l : lits) fields.insert(l.field);
  std::vector<std::string> fs(fields.begin(), fields.end());
  uint64_t total = 1;
  for (size_t i = 0; i < fs.size(); i++) total *= 16;
  for (uint64_t pt = 0; pt < total; pt++) {
    Valuation env;
    uint64_t at = pt;
    for (const auto& f : fs) {
      env[f] = (uint32_t)(at % 16);
      at /= 16;
    }
    bool ok = true;
    for (const auto& l : lits)
      if (!eval_literal(l, env)) { ok = false; break; }
    if (ok) return true;
  }
  return false;
}

int table_dep_depth(const Program& p) {
  Program lowered = lower_tables(p);
  auto deps = table_dependencies(lowered);
  auto applies = applied_tables(lowered);
  std::map<std::string, int> depth;
  for (const auto& a : applies) depth[a.name] = 1;
  bool changed = true;
  while (changed) {
    changed = false;
    for (const auto& d : deps) {
      int want = depth[d.from] + (dep_is_strict(d.kind) ? 1 : 0);
      if (want > depth[d.to]) {
        depth[d.to] = want;
        changed = true;
      }
    }
  }
  int best = 0;
  for (const auto& [t, d] : depth) best = std::max(best, d);
  return best;
}

}  // namespace

TEST_CASE("single apply yields a three-node CFG") {
  Program p = parse(
      "packet { k; x; }\naction a() { pkt.x = 1; }\n"
      "table t { key = {pkt.k}; actions = {a}; }\ncontrol { t.apply(); }\n");
  Cfg g = build_cfg(p.control, p);
  CHECK(g.nodes.size() == 3);  // entry, apply, exit
  CHECK(g.nodes[1].reads.count("pkt.k") == 1);
  CHECK(g.nodes[1].writes.count("pkt.x") == 1);
}

TEST_CASE("ME-2 control produces three diamonds in series") {
  Program p = tu::parse_file("benchmarks/me2.pcat");
  Cfg g = build_cfg(p.control, p);
  int branches = 0, merges = 0;
  for (const auto& n : g.nodes) {
    if (n.kind == CfgNode::Kind::Branch) branches++;
    if (n.kind == CfgNode::Kind::Merge) merges++;
  }
  CHECK(branches == 3);
  CHECK(merges == 3);
  CHECK(g.merge_of_branch.size() == 3);
}

TEST_CASE("path conditions: branch literals, merge cancellation, nesting") {
  Program p = parse(
      "packet { f; g; a; b; c; }\n"
      "control {\n"
      "  if (pkt.f == 3) {\n"
      "    if (pkt.g == 1) { pkt.a = 1; }\n"
      "    pkt.b = 2;\n"
      "  }\n"
      "  pkt.c = 3;\n"
      "}\n");
  Cfg g = build_cfg(p.control, p);
  auto pc = path_conditions(g);
  const CfgNode* a_node = nullptr;
  const CfgNode* b_node = nullptr;
  const CfgNode* c_node = nullptr;
  for (const auto& n : g.nodes) {
    if (n.kind != CfgNode::Kind::Stmt) continue;
    if (n.writes.count("pkt.a")) a_node = &n;
    if (n.writes.count("pkt.b")) b_node = &n;
    if (n.writes.count("pkt.c")) c_node = &n;
  }
  REQUIRE(a_node != nullptr);
  // nested then-branch: conjunction of both literals
  REQUIRE(pc.at(a_node->id).literals.size() == 2);
  CHECK(pc.at(a_node->id).literals[0].field == "pkt.f");
  CHECK(pc.at(a_node->id).literals[0].value == 3);
  CHECK(pc.at(a_node->id).literals[1].field == "pkt.g");
  // after the inner merge only the outer literal remains
  REQUIRE(pc.at(b_node->id).literals.size() == 1);
  CHECK(pc.at(b_node->id).literals[0].field == "pkt.f");
  // after the outer merge the condition is empty
  CHECK(pc.at(c_node->id).literals.empty());
  CHECK_FALSE(pc.at(c_node->id).opaque);
}

TEST_CASE("ME-2 body path conditions carry the tested constant") {
  Program p = tu::parse_file("benchmarks/me2.pcat");
  Cfg g = build_cfg(p.control, p);
  auto pc = path_conditions(g);
  std::vector<uint32_t> consts;
  for (const auto& n : g.nodes) {
    if (n.kind != CfgNode::Kind::Stmt) continue;
    REQUIRE(pc.at(n.id).literals.size() == 1);
    CHECK(pc.at(n.id).literals[0].field == "pkt.f");
    consts.push_back(pc.at(n.id).literals[0].value);
  }
  CHECK(consts == std::vector<uint32_t>{1, 2, 3});
}

TEST_CASE("guard updates force the conservative fallback") {
  Program p = parse(
      "packet { f; a; }\n"
      "control {\n"
      "  pkt.f = 1;\n"
      "  if (pkt.f == 1) { pkt.a = 1; }\n"
      "}\n");
  Cfg g = build_cfg(p.control, p);
  try {
    (void)path_conditions(g);
    FAIL("expected GuardUpdateDetected");
  } catch (const CompileError& e) {
    CHECK(e.code() == Errc::GuardUpdateDetected);
  }
}

TEST_CASE("guarded dependency kinds and guards") {
  Program p = parse(
      "packet { f; a; b; }\n"
      "control {\n"
      "  if (pkt.f == 1) { pkt.a = 1; }\n"
      "  if (pkt.f == 2) { pkt.a = 2; }\n"
      "  pkt.b = pkt.a;\n"
      "  pkt.a = 3;\n"
      "}\n");
  Cfg g = build_cfg(p.control, p);
  auto pc = path_conditions(g);
  auto deps = guarded_deps(g, pc);

  bool found_waw = false, found_raw = false, found_war = false;
  for (const auto& d : deps) {
    if (d.kind == DepKind::WAW && d.var == "pkt.a" && d.guard.literals.size() == 2) {
      found_waw = true;
      CHECK(d.guard.literals[0].value == 1);
      CHECK(d.guard.literals[1].value == 2);
    }
    if (d.kind == DepKind::RAW && d.var == "pkt.a" &&
        d.to_stmt->lhs.name == "pkt.b")
      found_raw = true;
    if (d.kind == DepKind::WAR && d.var == "pkt.a") found_war = true;
  }
  CHECK(found_waw);
  CHECK(found_raw);
  CHECK(found_war);
}

TEST_CASE("pruning: contradictions removed, intervals kept") {
  std::map<std::string, int> w{{"pkt.f", 32}};
  CHECK_FALSE(literals_satisfiable(
      std::vector<CmpLiteral>{{"pkt.f", BinOp::Eq, 1}, {"pkt.f", BinOp::Eq, 2}}, w));
  CHECK(literals_satisfiable(
      std::vector<CmpLiteral>{{"pkt.f", BinOp::Gt, 4}, {"pkt.f", BinOp::Lt, 9}}, w));
  CHECK_FALSE(literals_satisfiable(
      std::vector<CmpLiteral>{{"pkt.f", BinOp::Gt, 4}, {"pkt.f", BinOp::Lt, 4}}, w));
  CHECK_FALSE(literals_satisfiable(
      std::vector<CmpLiteral>{
          {"pkt.f", BinOp::Ge, 3}, {"pkt.f", BinOp::Le, 4}, {"pkt.f", BinOp::Ne, 3},
          {"pkt.f", BinOp::Ne, 4}},
      w));
  // width bounds participate
  std::map<std::string, int> w4{{"pkt.f", 4}};
  CHECK_FALSE(literals_satisfiable(
      std::vector<CmpLiteral>{{"pkt.f", BinOp::Gt, 15}}, w4));
  CHECK(literals_satisfiable(std::vector<CmpLiteral>{{"pkt.f", BinOp::Gt, 15}}, w));
}

TEST_CASE("satisfiability checker agrees with 4-bit brute force") {
  tu::Rng rng(7);
  std::map<std::string, int> widths{{"pkt.a", 4}, {"pkt.b", 4}};
  const BinOp rels[] = {BinOp::Eq, BinOp::Ne, BinOp::Lt,
                        BinOp::Le, BinOp::Gt, BinOp::Ge};
  for (int iter = 0; iter < 500; iter++) {
    std::vector<CmpLiteral> lits;
    int n = 1 + (int)rng.below(4);
    for (int i = 0; i < n; i++)
      lits.push_back({rng.below(2) ? "pkt.a" : "pkt.b", rels[rng.below(6)],
                      rng.below(16)});
    CAPTURE(iter);
    CHECK(literals_satisfiable(lits, widths) == brute_sat(lits));
  }
}

TEST_CASE("ME-2: all three pairwise WAW dependencies are pruned") {
  Program p = tu::parse_file("benchmarks/me2.pcat");
  Cfg g = build_cfg(p.control, p);
  auto pc = path_conditions(g);
  auto all = guarded_deps(g, pc);
  int waw = 0;
  for (const auto& d : all)
    if (d.kind == DepKind::WAW) waw++;
  CHECK(waw == 3);
  auto pruned = prune_false_deps(all, field_widths(p));
  CHECK(pruned.empty());
}

TEST_CASE("lower_tables wraps assignments in keyless default tables") {
  Program p = parse(
      "packet { k; a; x; }\naction act() { pkt.x = 1; }\n"
      "table t1 { key = {pkt.k}; actions = {act}; }\n"
      "control { pkt.a = 1; t1.apply(); }\n");
  Program low = lower_tables(p);
  REQUIRE(low.control.body.size() == 2);
  CHECK(low.control.body[0]->kind == Stmt::Kind::Apply);
  CHECK(low.control.body[0]->table == "__dflt0");
  CHECK(low.control.body[1]->table == "t1");
  const Table* dflt = low.find_table("__dflt0");
  REQUIRE(dflt != nullptr);
  CHECK(dflt->is_default());
  CHECK(dflt->entries == 1);

  // applies-only control is untouched; lowering is idempotent
  Program again = lower_tables(low);
  CHECK(pretty_print(again) == pretty_print(low));
}

TEST_CASE("ME-3 lowers to two default tables under the if when not rewritten") {
  Program p = tu::parse_file("benchmarks/me3.pcat");
  Program low = lower_tables(p);
  REQUIRE(low.control.body.size() == 1);
  const Stmt& ifst = *low.control.body[0];
  REQUIRE(ifst.kind == Stmt::Kind::If);
  CHECK(ifst.then_body[0]->kind == Stmt::Kind::Apply);
  CHECK(ifst.else_body[0]->kind == Stmt::Kind::Apply);
  int dflt = 0;
  for (const auto& t : low.tables)
    if (t.is_default()) dflt++;
  CHECK(dflt == 2);
}

TEST_CASE("ME-2 rewrites to one table keyed on the guard field") {
  Program p = tu::parse_file("benchmarks/me2.pcat");
  Program rw = rewritten(p);
  REQUIRE(rw.control.body.size() == 1);
  REQUIRE(rw.control.body[0]->kind == Stmt::Kind::Apply);
  const Table* t = rw.find_table(rw.control.body[0]->table);
  REQUIRE(t != nullptr);
  CHECK(t->keys == std::vector<std::string>{"pkt.f"});
  CHECK(t->action_names.size() == 3);
  CHECK(t->guards.size() == 3);
  CHECK(t->entries == 3);  // product of distinct tested constants
}

TEST_CASE("ME-3 rewrites to one table with two actions") {
  Program p = tu::parse_file("benchmarks/me3.pcat");
  Program rw = rewritten(p);
  REQUIRE(rw.control.body.size() == 1);
  const Table* t = rw.find_table(rw.control.body[0]->table);
  REQUIRE(t != nullptr);
  CHECK(t->keys == std::vector<std::string>{"meta.rate_class"});
  CHECK(t->action_names.size() == 2);
  CHECK(t->entries == 1);
  // the else action is guarded by the catch-all (first-match order)
  CHECK(t->guards[0].size() == 1);
  CHECK(t->guards[1].empty());
}

TEST_CASE("a surviving cross-branch dependency keeps the region intact") {
  Program p = parse(
      "packet { f; g; x; y; }\n"
      "control {\n"
      "  if (pkt.f == 1 && pkt.g == 1) { pkt.x = 1; } else { pkt.y = pkt.x; }\n"
      "}\n");
  Program rw = rewritten(p);
  REQUIRE(rw.control.body.size() == 1);
  CHECK(rw.control.body[0]->kind == Stmt::Kind::If);  // unchanged
  CHECK(rw.tables.empty());
}

TEST_CASE("range guards are left for the gateway path") {
  Program p = parse(
      "packet { f; a; }\n"
      "control { if (pkt.f < 4) { pkt.a = 1; } }\n");
  Program rw = rewritten(p);
  CHECK(rw.control.body[0]->kind == Stmt::Kind::If);
  CHECK(rw.tables.empty());
}

TEST_CASE("rewrite preserves semantics on the exhaustive sweep") {
  const char* files[] = {"benchmarks/me2.pcat", "benchmarks/me3.pcat"};
  for (const char* f : files) {
    CAPTURE(f);
    Program p = tu::parse_file(f);
    Program rw = lower_tables(rewritten(p));
    tu::Sweep sweep = tu::make_sweep(p);
    REQUIRE(sweep.total <= 70000);
    for (uint64_t pt = 0; pt < sweep.total; pt++) {
      PacketState in = tu::packet_at(p, sweep, pt);
      PacketState a = interpret_source(p, in, {});
      PacketState b = interpret_source(rw, in, {});
      REQUIRE(a == b);
    }
  }
}

TEST_CASE("rewrite of nested and mixed regions preserves semantics") {
  Program p = parse(
      "packet { f; g; a; b; c; }\n"
      "control {\n"
      "  if (pkt.f == 1) {\n"
      "    pkt.a = 1;\n"
      "    if (pkt.g == 2) { pkt.b = 2; } else { pkt.b = 3; }\n"
      "    pkt.c = pkt.b;\n"
      "  }\n"
      "  if (pkt.f == 2) { pkt.a = 9; }\n"
      "}\n");
  Program rw = rewritten(p);
  // the two sibling regions merge into one table keyed on both fields
  REQUIRE(rw.control.body.size() == 1);
  const Table* t = rw.find_table(rw.control.body[0]->table);
  REQUIRE(t != nullptr);
  CHECK(t->keys == std::vector<std::string>{"pkt.f", "pkt.g"});
  tu::Sweep sweep = tu::make_sweep(p);
  for (uint64_t pt = 0; pt < sweep.total; pt++) {
    PacketState in = tu::packet_at(p, sweep, pt);
    REQUIRE(interpret_source(p, in, {}) == interpret_source(rw, in, {}));
  }
}

TEST_CASE("rewriting never deepens the table dependency graph") {
  const char* files[] = {"benchmarks/me2.pcat", "benchmarks/me3.pcat",
                         "benchmarks/motivating_v1.pcat"};
  for (const char* f : files) {
    CAPTURE(f);
    Program p = tu::parse_file(f);
    int before = table_dep_depth(p);
    int after = table_dep_depth(rewritten(p));
    CHECK(after <= before);
  }
}

TEST_CASE("entry estimates are capped by the target limit") {
  Program p = parse(
      "packet { f; g; a; b; }\n"
      "control {\n"
      "  if (pkt.f == 1) { pkt.a = 1; }\n"
      "  if (pkt.f == 2) { pkt.a = 2; }\n"
      "  if (pkt.g == 1) { pkt.b = 3; }\n"
      "  if (pkt.g == 2) { pkt.b = 4; }\n"
      "}\n");
  Program rw = rewritten(p, /*max_entries=*/3);
  REQUIRE(rw.tables.size() == 1);
  CHECK(rw.tables[0].entries == 3);  // 2 * 2 capped
}
