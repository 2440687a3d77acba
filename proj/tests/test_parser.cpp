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

#include "pipecat/parser.hpp"
#include "pipecat/printer.hpp"
#include "test_util.hpp"

using namespace pipecat;

TEST_CASE("minimal action parses to a single assignment") {
  Program p = parse(
      "packet { x; y; }\n"
      "action a() { pkt.x = pkt.y + 1; }\n"
      "control { }\n");
  REQUIRE(p.actions.size() == 1);
  REQUIRE(p.actions[0].body.size() == 1);
  const Stmt& st = *p.actions[0].body[0];
  CHECK(st.kind == Stmt::Kind::Assign);
  CHECK(st.lhs.name == "pkt.x");
  CHECK(st.rhs->kind == Expr::Kind::Binary);
}

TEST_CASE("ME-2 control block has three top-level ifs") {
  Program p = testutil::parse_file("benchmarks/me2.pcat");
  REQUIRE(p.control.body.size() == 3);
  for (const auto& st : p.control.body) CHECK(st->kind == Stmt::Kind::If);
}

TEST_CASE("syntax error reports the offending position") {
  try {
    parse("packet { x; }\naction a() { pkt.x = pkt.x + ; }\ncontrol { }\n");
    FAIL("expected a syntax error");
  } catch (const CompileError& e) {
    CHECK(e.code() == Errc::SyntaxError);
    CHECK(e.span().line == 2);
    CHECK(e.span().col > 20);
  }
}

TEST_CASE("name and width checking") {
  CHECK_THROWS_WITH_AS(
      parse("packet { x; }\naction a() { pkt.y = 1; }\ncontrol { }\n"),
      doctest::Contains("NameError"), CompileError);
  CHECK_THROWS_WITH_AS(
      parse("packet { a : 16; b : 32; o; }\n"
            "action f() { pkt.o = pkt.a + pkt.b; }\ncontrol { }\n"),
      doctest::Contains("TypeError"), CompileError);
  CHECK_THROWS_WITH_AS(parse("packet { x : 33; }\ncontrol { }\n"),
                       doctest::Contains("TypeError"), CompileError);
  // booleans adapt to any width
  CHECK_NOTHROW(
      parse("packet { a : 16; o : 32; }\n"
            "action f() { pkt.o = pkt.a < 3; }\ncontrol { }\n"));
}

TEST_CASE("duplicate declarations are rejected") {
  CHECK_THROWS_AS(parse("packet { x; x; }\ncontrol { }\n"), CompileError);
  CHECK_THROWS_AS(parse("state { s = 0; s = 1; }\ncontrol { }\n"), CompileError);
  CHECK_THROWS_AS(
      parse("packet { x; }\n"
            "action a() { pkt.x = 1; }\n"
            "table t { key = {pkt.x}; actions = {a}; }\n"
            "control { t.apply(); t.apply(); }\n"),
      CompileError);
}

TEST_CASE("round trip: pretty printed source reparses structurally equal") {
  const char* files[] = {
      "benchmarks/me2.pcat",          "benchmarks/me3.pcat",
      "benchmarks/blue_decrease.pcat", "benchmarks/sampling.pcat",
      "benchmarks/conga.pcat",        "benchmarks/motivating_v1.pcat",
  };
  for (const char* f : files) {
    CAPTURE(f);
    Program p1 = testutil::parse_file(f);
    std::string text1 = pretty_print(p1);
    Program p2 = parse(text1);
    CHECK(pretty_print(p2) == text1);
  }
}

TEST_CASE("expression precedence and parenthesization") {
  Program p = parse(
      "packet { a; b; c; o; }\n"
      "action f() { pkt.o = pkt.a + pkt.b * pkt.c; }\n"
      "action g() { pkt.o = (pkt.a + pkt.b) * pkt.c; }\n"
      "control { }\n");
  CHECK(print_expr(*p.actions[0].body[0]->rhs) == "pkt.a + pkt.b * pkt.c");
  CHECK(print_expr(*p.actions[1].body[0]->rhs) == "(pkt.a + pkt.b) * pkt.c");
}

TEST_CASE("ternary, unary and hex literals") {
  Program p = parse(
      "packet { a; o; }\n"
      "action f() { pkt.o = pkt.a == 0xff ? 1 : -pkt.a; }\n"
      "control { }\n");
  const Expr& e = *p.actions[0].body[0]->rhs;
  REQUIRE(e.kind == Expr::Kind::Ternary);
  CHECK(e.a->b->value == 255);
  // -x desugars to 0 - x
  CHECK(e.c->kind == Expr::Kind::Binary);
  CHECK(e.c->bin == BinOp::Sub);
}

TEST_CASE("keyless tables need exactly one action") {
  CHECK_THROWS_AS(
      parse("packet { x; }\n"
            "action a() { pkt.x = 1; }\naction b() { pkt.x = 2; }\n"
            "table t { key = {}; actions = {a, b}; }\n"
            "control { t.apply(); }\n"),
      CompileError);
}

TEST_CASE("state assignments are only legal inside actions") {
  CHECK_THROWS_AS(
      parse("state { s = 0; }\ncontrol { s = 1; }\n"), CompileError);
}
