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

#include "pipecat/preprocess.hpp"
#include "pipecat/printer.hpp"
#include "test_util.hpp"

using namespace pipecat;
namespace tu = pipecat::testutil;

namespace {

// Independent oracle: direct recursive evaluation of the action body with
// transactional semantics. Deliberately separate from the interpreters under
// test.
struct DirectEval {
  const Program& p;
  Valuation fields;
  Valuation state;

  uint32_t expr(const Expr& e) {
    switch (e.kind) {
      case Expr::Kind::IntLit: return e.value;
      case Expr::Kind::Field: return fields.at(e.name);
      case Expr::Kind::State: return state.at(e.name);
      case Expr::Kind::Unary: {
        uint32_t a = expr(*e.a);
        return e.un == UnOp::Not ? (a == 0 ? 1u : 0u) : ~a;
      }
      case Expr::Kind::Binary: {
        if (e.bin == BinOp::LAnd) return expr(*e.a) != 0 && expr(*e.b) != 0;
        if (e.bin == BinOp::LOr) return expr(*e.a) != 0 || expr(*e.b) != 0;
        return eval_binop(e.bin, expr(*e.a), expr(*e.b));
      }
      case Expr::Kind::Ternary:
        return expr(*e.a) != 0 ? expr(*e.b) : expr(*e.c);
    }
    return 0;
  }

  void body(const std::vector<StmtPtr>& stmts) {
    for (const auto& st : stmts) {
      if (st->kind == Stmt::Kind::Assign) {
        uint32_t v = truncate_to_width(expr(*st->rhs), p.width_of(st->lhs.name));
        (st->lhs.is_state ? state : fields)[st->lhs.name] = v;
      } else if (st->kind == Stmt::Kind::If) {
        if (expr(*st->cond) != 0)
          body(st->then_body);
        else
          body(st->else_body);
      }
    }
  }
};

// Fields the action may read before writing them (sweep dimensions).
void read_first(const std::vector<StmtPtr>& body, bool conditional,
                std::set<std::string>& killed, std::set<std::string>& reads) {
  auto scan = [&](const Expr& e) {
    std::set<std::string> r;
    tu::collect_expr_reads(e, r);
    for (const auto& f : r)
      if (!killed.count(f)) reads.insert(f);
  };
  for (const auto& st : body) {
    if (st->kind == Stmt::Kind::Assign) {
      scan(*st->rhs);
      if (!conditional && !st->lhs.is_state) killed.insert(st->lhs.name);
    } else if (st->kind == Stmt::Kind::If) {
      scan(*st->cond);
      std::set<std::string> k1 = killed, k2 = killed;
      read_first(st->then_body, true, k1, reads);
      read_first(st->else_body, true, k2, reads);
    }
  }
}

void check_action_equivalence(const Program& p, const ActionBlock& a,
                              bool simplified) {
  std::set<std::string> killed, reads;
  read_first(a.body, false, killed, reads);
  std::vector<std::string> dims(reads.begin(), reads.end());
  for (const auto& sv : p.state_vars) dims.push_back(sv.name);
  uint64_t total = 1;
  for (size_t i = 0; i < dims.size(); i++) total *= 16;
  REQUIRE(total <= (1ull << 21));

  StraightLineAction sl = preprocess_action(a, p, simplified);
  for (uint64_t pt = 0; pt < total; pt++) {
    Valuation fields;
    Valuation state;
    for (const auto& f : p.fields) fields[f.name] = 0;
    for (const auto& s : p.state_vars)
      state[s.name] = truncate_to_width(s.init, s.width);
    uint64_t at = pt;
    for (const auto& d : dims) {
      uint32_t v = truncate_to_width((uint32_t)(at % 16), p.width_of(d));
      at /= 16;
      if (state.count(d))
        state[d] = v;
      else
        fields[d] = v;
    }
    DirectEval oracle{p, fields, state};
    oracle.body(a.body);
    SLResult got = run_straightline(sl, p, fields, state);
    CAPTURE(a.name);
    CAPTURE(pt);
    REQUIRE(got.fields == oracle.fields);
    REQUIRE(got.state == oracle.state);
  }
}

}  // namespace

TEST_CASE("branch removal emits condition temporaries and guarded ternaries") {
  Program p = parse(
      "packet { c; x; }\n"
      "action a() { if (pkt.c == 1) { pkt.x = 1; } }\n"
      "control { }\n");
  StraightLineAction sl = remove_branches(p.actions[0], p);
  REQUIRE(sl.stmts.size() == 2);
  CHECK(sl.stmts[0].role == SLStmt::Role::BrTemp);
  CHECK(sl.stmts[0].target == "$br0");
  CHECK(sl.stmts[1].target == "pkt.x");
  REQUIRE(sl.stmts[1].rhs->kind == Expr::Kind::Ternary);
  // the untaken arm keeps the old value
  CHECK(sl.stmts[1].rhs->c->name == "pkt.x");
}

TEST_CASE("if-else branch removal selects between both arms") {
  Program p = parse(
      "packet { c; x; }\n"
      "action a() { if (pkt.c == 1) { pkt.x = 1; } else { pkt.x = 2; } }\n"
      "control { }\n");
  StraightLineAction sl = remove_branches(p.actions[0], p);
  REQUIRE(sl.stmts.size() == 3);
  // x = br ? 1 : x ; x = !br ? 2 : x  -- SSA later chains the versions
  CHECK(sl.stmts[1].rhs->kind == Expr::Kind::Ternary);
  CHECK(sl.stmts[2].rhs->kind == Expr::Kind::Ternary);
}

TEST_CASE("nested guards become conjunctions") {
  Program p = parse(
      "packet { c; d; x; }\n"
      "action a() { if (pkt.c == 1) { if (pkt.d == 1) { pkt.x = 1; } } }\n"
      "control { }\n");
  StraightLineAction sl = remove_branches(p.actions[0], p);
  REQUIRE(sl.stmts.size() == 3);
  const Expr& guard = *sl.stmts[2].rhs->a;
  REQUIRE(guard.kind == Expr::Kind::Binary);
  CHECK(guard.bin == BinOp::LAnd);
}

TEST_CASE("blue decrease yields the expected guarded statement shape") {
  Program p = tu::parse_file("benchmarks/blue_decrease.pcat");
  StraightLineAction sl = remove_branches(*p.find_action("mark_decrease"), p);
  REQUIRE(sl.stmts.size() == 4);  // temp, condition, two guarded updates
  int ternaries = 0;
  for (const auto& st : sl.stmts)
    if (st.rhs->kind == Expr::Kind::Ternary) ternaries++;
  CHECK(ternaries == 2);
}

TEST_CASE("state flanks bracket every touched state variable") {
  Program p = parse(
      "packet { x; }\nstate { cnt = 0; other = 0; }\n"
      "action a() { cnt = cnt + 1; }\n"
      "action b() { cnt = cnt + 1; other = other + cnt; }\n"
      "action c() { pkt.x = cnt; }\n"
      "control { }\n");
  StraightLineAction sa = add_state_flanks(remove_branches(p.actions[0], p));
  REQUIRE(sa.flanks.size() == 1);
  CHECK(sa.flanks.at("cnt") ==
        std::pair<std::string, std::string>{"cnt$v", "cnt$post"});
  CHECK(sa.stmts.front().role == SLStmt::Role::ReadFlank);
  CHECK(sa.stmts.back().role == SLStmt::Role::WriteFlank);

  StraightLineAction sb = add_state_flanks(remove_branches(p.actions[1], p));
  CHECK(sb.flanks.size() == 2);  // one pair per touched variable

  // read-only use: the post flank copies the pre value
  StraightLineAction sc =
      to_ssa(add_state_flanks(remove_branches(p.actions[2], p)));
  REQUIRE(sc.flanks.count("cnt"));
  const SLStmt* post = nullptr;
  for (const auto& st : sc.stmts)
    if (st.role == SLStmt::Role::WriteFlank) post = &st;
  REQUIRE(post != nullptr);
  CHECK(post->rhs->name == "cnt$v");
}

TEST_CASE("ssa renames repeated writes and is idempotent") {
  Program p = parse(
      "packet { x; }\n"
      "action a() { pkt.x = 1; pkt.x = pkt.x + 1; }\n"
      "control { }\n");
  StraightLineAction sl =
      to_ssa(add_state_flanks(remove_branches(p.actions[0], p)));
  REQUIRE(sl.stmts.size() == 2);
  CHECK(sl.stmts[0].target == "pkt.x$2");
  CHECK(sl.stmts[1].target == "pkt.x$3");
  CHECK(sl.stmts[1].rhs->a->name == "pkt.x$2");
  CHECK(sl.final_of.at("pkt.x") == "pkt.x$3");

  StraightLineAction again = to_ssa(sl);
  REQUIRE(again.stmts.size() == sl.stmts.size());
  for (size_t i = 0; i < sl.stmts.size(); i++) {
    CHECK(again.stmts[i].target == sl.stmts[i].target);
    CHECK(expr_equal(*again.stmts[i].rhs, *sl.stmts[i].rhs));
  }
}

TEST_CASE("every flowlet temporary is assigned exactly once after ssa") {
  Program p = tu::parse_file("benchmarks/flowlet.pcat");
  StraightLineAction sl = to_ssa(
      add_state_flanks(remove_branches(*p.find_action("choose_hop"), p)));
  std::set<std::string> targets;
  for (const auto& st : sl.stmts) {
    CAPTURE(st.target);
    CHECK(targets.insert(st.target).second);
  }
}

TEST_CASE("simplify folds constants, collapses ternaries and removes dead code") {
  Program p = parse(
      "packet { a; b; c; x; y; }\n"
      "action f() {\n"
      "  pkt.x = 3 + 4;\n"
      "  pkt.y = pkt.c == 0 ? pkt.a : pkt.a;\n"
      "}\n"
      "control { }\n");
  StraightLineAction sl = preprocess_action(p.actions[0], p, true);
  REQUIRE(sl.stmts.size() == 2);
  CHECK(sl.stmts[0].rhs->kind == Expr::Kind::IntLit);
  CHECK(sl.stmts[0].rhs->value == 7);
  CHECK(sl.stmts[1].rhs->kind == Expr::Kind::Field);  // ternary with equal arms

  // a dead temporary disappears; x - x folds to zero
  Program q = parse(
      "packet { a; b; o; }\nmeta { t; z; }\n"
      "action g() {\n"
      "  meta.t = pkt.a + pkt.b;\n"
      "  meta.z = pkt.a - pkt.a;\n"
      "  pkt.o = meta.z + 5;\n"
      "}\n"
      "control { }\n");
  StraightLineAction slq = preprocess_action(q.actions[0], q, true);
  const SLStmt& out = slq.stmts.back();
  CHECK(out.rhs->kind == Expr::Kind::IntLit);
  CHECK(out.rhs->value == 5);
}

TEST_CASE("dead internal temporaries are eliminated") {
  Program p = parse(
      "packet { a; b; o; }\n"
      "action f() {\n"
      "  pkt.o = pkt.a;\n"
      "  pkt.o = pkt.b;\n"
      "}\n"
      "control { }\n");
  // the first write is never read and is not the final: it disappears
  StraightLineAction sl = preprocess_action(p.actions[0], p, true);
  REQUIRE(sl.stmts.size() == 1);
  CHECK(sl.final_of.at("pkt.o") == sl.stmts[0].target);
}

TEST_CASE("simplify is idempotent and preserves the state variable set") {
  const char* files[] = {"benchmarks/blue_decrease.pcat", "benchmarks/conga.pcat",
                         "benchmarks/flowlet.pcat",
                         "benchmarks/counter_mutation.pcat"};
  for (const char* f : files) {
    Program p = tu::parse_file(f);
    for (const auto& a : p.actions) {
      CAPTURE(f);
      CAPTURE(a.name);
      StraightLineAction once = preprocess_action(a, p, true);
      StraightLineAction twice = simplify(once, p);
      REQUIRE(once.stmts.size() == twice.stmts.size());
      for (size_t i = 0; i < once.stmts.size(); i++)
        CHECK(expr_equal(*once.stmts[i].rhs, *twice.stmts[i].rhs));
      CHECK(once.flanks == twice.flanks);
      // state variables are neither added nor deleted
      std::set<std::string> touched;
      for (const auto& st : once.stmts)
        if (!st.state_var.empty()) touched.insert(st.state_var);
      CHECK(touched.size() == once.flanks.size());
    }
  }
}

TEST_CASE("counter mutation folds to a bare increment under simplify") {
  Program p = tu::parse_file("benchmarks/counter_mutation.pcat");
  StraightLineAction sl = preprocess_action(*p.find_action("bump"), p, true);
  const SLStmt* update = nullptr;
  for (const auto& st : sl.stmts)
    if (st.target.rfind("count$v$", 0) == 0) update = &st;
  REQUIRE(update != nullptr);
  std::set<std::string> reads;
  tu::collect_expr_reads(*update->rhs, reads);
  CHECK(reads == std::set<std::string>{"count$v"});
}

TEST_CASE("preprocessing preserves semantics exhaustively (4-bit)") {
  const char* files[] = {
      "benchmarks/blue_increase.pcat",  "benchmarks/blue_decrease.pcat",
      "benchmarks/sampling.pcat",       "benchmarks/snap_heavy_hitter.pcat",
      "benchmarks/conga.pcat",          "benchmarks/flowlet.pcat",
      "benchmarks/dns_ttl_change.pcat", "benchmarks/counter_mutation.pcat"};
  for (const char* f : files) {
    Program p = tu::parse_file(f);
    for (const auto& a : p.actions) {
      CAPTURE(f);
      check_action_equivalence(p, a, true);
      check_action_equivalence(p, a, false);
    }
  }
}
