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

#include "pipecat/compgraph.hpp"
#include "test_util.hpp"

using namespace pipecat;
namespace tu = pipecat::testutil;

namespace {

ComputationGraph graph_of(const Program& p, const std::string& action,
                          bool simplify = true) {
  return build_graph(preprocess_action(*p.find_action(action), p, simplify));
}

int count_stateful(const ComputationGraph& g) {
  int n = 0;
  for (const auto& node : g.nodes)
    if (node.stateful) n++;
  return n;
}

// exhaustive check that the graph and the straight-line form agree
void check_graph_equivalence(const Program& p, const std::string& action,
                             const ComputationGraph& g) {
  StraightLineAction sl = preprocess_action(*p.find_action(action), p, true);
  std::vector<std::string> dims(g.pis.begin(), g.pis.end());
  size_t n_state = p.state_vars.size();
  uint64_t total = 1;
  for (size_t i = 0; i < dims.size() + n_state; i++) total *= 16;
  REQUIRE(total <= (1ull << 20));
  for (uint64_t pt = 0; pt < total; pt++) {
    Valuation inputs;
    Valuation state;
    uint64_t at = pt;
    for (const auto& d : dims) {
      inputs[d] = truncate_to_width((uint32_t)(at % 16), p.width_of(d));
      at /= 16;
    }
    for (const auto& sv : p.state_vars) {
      state[sv.name] = truncate_to_width((uint32_t)(at % 16), sv.width);
      at /= 16;
    }
    Valuation fields = inputs;
    for (const auto& f : p.fields)
      if (!fields.count(f.name)) fields[f.name] = 0;
    SLResult want = run_straightline(sl, p, fields, state);
    GraphEval got = eval_graph(g, p, fields, state);
    CAPTURE(pt);
    REQUIRE(got.state == want.state);
    for (const auto& [id, field] : g.po_alias)
      REQUIRE(got.values.at(id) == want.fields.at(field));
  }
}

}  // namespace

TEST_CASE("single stateless statement: one node, PIs and POs") {
  Program p = parse(
      "packet { a; b; o; }\n"
      "action f() { pkt.o = pkt.a + pkt.b; }\ncontrol { }\n");
  ComputationGraph g = graph_of(p, "f");
  REQUIRE(g.nodes.size() == 1);
  CHECK_FALSE(g.nodes[0].stateful);
  CHECK(g.pis == std::set<std::string>{"pkt.a", "pkt.b"});
  REQUIRE(g.po_alias.size() == 1);
  CHECK(g.po_alias.begin()->second == "pkt.o");
}

TEST_CASE("blue decrease condenses into two stateful nodes") {
  Program p = tu::parse_file("benchmarks/blue_decrease.pcat");
  ComputationGraph g = graph_of(p, "mark_decrease");
  CHECK(count_stateful(g) == 2);
  CHECK(is_acyclic(g));
  // the timer node feeds the mark node through the branch temporary
  const CompNode* lu = nullptr;
  const CompNode* pm = nullptr;
  for (const auto& n : g.nodes) {
    if (!n.stateful) continue;
    if (n.state_vars == std::vector<std::string>{"last_update"}) lu = &n;
    if (n.state_vars == std::vector<std::string>{"p_mark"}) pm = &n;
  }
  REQUIRE(lu != nullptr);
  REQUIRE(pm != nullptr);
  bool feeds = false;
  for (const auto& e : g.edges)
    if (e.from == lu->id && e.to == pm->id) feeds = true;
  CHECK(feeds);
}

TEST_CASE("mutually dependent updates condense into one stateful node") {
  Program p = tu::parse_file("benchmarks/snap_heavy_hitter.pcat");
  ComputationGraph g = graph_of(p, "detect");
  REQUIRE(count_stateful(g) == 1);
  const CompNode* n = nullptr;
  for (const auto& node : g.nodes)
    if (node.stateful) n = &node;
  CHECK(n->state_vars == std::vector<std::string>{"count", "heavy"});
  CHECK(n->inputs.empty());
}

TEST_CASE("codegen example: shared cone members and stateful input") {
  Program p = parse(
      "packet { i1; i2; i3; i4; o1; o3; }\nmeta { t1; }\nstate { s = 0; }\n"
      "@atomic action f() {\n"
      "  meta.t1 = pkt.i1 + pkt.i2;\n"
      "  pkt.o1 = meta.t1 + pkt.i3;\n"
      "  pkt.o3 = meta.t1 - pkt.i4;\n"
      "  s = s + meta.t1;\n"
      "}\ncontrol { }\n");
  ComputationGraph g = graph_of(p, "f");
  CHECK(count_stateful(g) == 1);
  std::set<std::string> pos;
  for (const auto& [id, field] : g.po_alias) pos.insert(field);
  CHECK(pos.count("pkt.o1"));
  CHECK(pos.count("pkt.o3"));

  std::string o1_id, o3_id;
  for (const auto& [id, field] : g.po_alias) {
    if (field == "pkt.o1") o1_id = id;
    if (field == "pkt.o3") o3_id = id;
  }
  BciSpec b1 = bci(g, o1_id);
  BciSpec b3 = bci(g, o3_id);
  REQUIRE(b1.node_ids.size() == 2);  // the t1 node and the o1 node
  REQUIRE(b3.node_ids.size() == 2);
  CHECK(b1.node_ids[0] == b3.node_ids[0]);  // shared cone member
  CHECK(b1.frontier == std::vector<std::string>{"pkt.i1", "pkt.i2", "pkt.i3"});
  CHECK(b3.frontier == std::vector<std::string>{"pkt.i1", "pkt.i2", "pkt.i4"});

  // the stateful node's input is also a valid synthesis target
  const CompNode* sf = nullptr;
  for (const auto& n : g.nodes)
    if (n.stateful) sf = &n;
  REQUIRE(sf->inputs.size() == 1);
  BciSpec bs = bci(g, sf->inputs[0]);
  CHECK(bs.node_ids.size() == 1);
}

TEST_CASE("bci accepts declared field names and rejects unknown outputs") {
  Program p = parse(
      "packet { a; b; c; o; }\nmeta { x; y; }\n"
      "action f() { meta.x = pkt.a + pkt.b; meta.y = meta.x + pkt.c;\n"
      "             pkt.o = meta.y + 1; }\n"
      "control { }\n");
  ComputationGraph g = graph_of(p, "f");
  BciSpec chain = bci(g, "pkt.o");
  CHECK(chain.node_ids.size() == 3);  // a+b, +c, +1
  CHECK_THROWS_AS((void)bci(g, "pkt.a$9"), CompileError);
  try {
    (void)bci(g, "nope");
    FAIL("expected UnknownOutput");
  } catch (const CompileError& e) {
    CHECK(e.code() == Errc::UnknownOutput);
  }
}

TEST_CASE("normalize case 1: pre and post consumers split into copies") {
  Program p = parse(
      "packet { a; b; }\nstate { s = 0; }\n"
      "@atomic action f() { pkt.a = s; s = s + 1; pkt.b = s; }\ncontrol { }\n");
  ComputationGraph g = graph_of(p, "f");
  int pre_nodes = (int)g.nodes.size();
  CHECK(count_stateful(g) == 1);
  g = normalize(std::move(g), 1);
  CHECK((int)g.nodes.size() > pre_nodes);
  int pre_out = 0, post_out = 0;
  for (const auto& n : g.nodes) {
    if (!n.stateful) continue;
    CHECK(n.outputs.size() <= 1);
    if (n.out_kind == CompNode::OutKind::Pre) pre_out++;
    if (n.out_kind == CompNode::OutKind::Post) post_out++;
  }
  CHECK(pre_out == 1);
  CHECK(post_out == 1);
  check_graph_equivalence(p, "f", g);
}

TEST_CASE("normalize case 2: no scratch register forces successor extraction") {
  Program p = tu::parse_file("benchmarks/sampling.pcat");
  ComputationGraph g = graph_of(p, "take_sample");
  // one register available: the branch value is re-derived from the pre flank
  ComputationGraph g1 = normalize(g, 1);
  bool extracted = false;
  for (const auto& n : g1.nodes) {
    if (n.stateful) {
      CHECK(n.outputs.size() <= 1);
      if (!n.outputs.empty())
        CHECK(n.out_kind != CompNode::OutKind::Stateless);
    } else if (!n.stmts.empty() && n.stmts[0].role == SLStmt::Role::BrTemp) {
      extracted = true;
      CHECK(n.inputs == std::vector<std::string>{"count$v"});
    }
  }
  CHECK(extracted);
  check_graph_equivalence(p, "take_sample", g1);

  // two registers: a scratch register computes the branch value in place
  ComputationGraph g2 = normalize(g, 2);
  bool scratch = false;
  for (const auto& n : g2.nodes)
    if (n.stateful && n.out_kind == CompNode::OutKind::Stateless) scratch = true;
  CHECK(scratch);
  check_graph_equivalence(p, "take_sample", g2);
}

TEST_CASE("normalization is semantics-preserving on the benchmark corpus") {
  struct Case {
    const char* file;
    const char* action;
  };
  const Case cases[] = {
      {"benchmarks/blue_increase.pcat", "mark_increase"},
      {"benchmarks/blue_decrease.pcat", "mark_decrease"},
      {"benchmarks/conga.pcat", "route"},
      {"benchmarks/flowlet.pcat", "choose_hop"},
      {"benchmarks/snap_heavy_hitter.pcat", "detect"},
  };
  for (const auto& c : cases) {
    for (int k : {1, 2}) {
      CAPTURE(c.file);
      CAPTURE(k);
      Program p = tu::parse_file(c.file);
      ComputationGraph g = normalize(graph_of(p, c.action), k);
      CHECK(is_acyclic(g));
      for (const auto& n : g.nodes)
        if (n.stateful) CHECK(n.outputs.size() <= 1);
      check_graph_equivalence(p, c.action, g);
    }
  }
}

TEST_CASE("bci evaluation reproduces the full-graph output value") {
  Program p = tu::parse_file("benchmarks/dns_ttl_change.pcat");
  ComputationGraph g = normalize(graph_of(p, "track"), 1);
  tu::Rng rng(3);
  for (int iter = 0; iter < 200; iter++) {
    Valuation fields;
    Valuation state;
    for (const auto& f : p.fields) fields[f.name] = rng.below(16);
    for (const auto& sv : p.state_vars) state[sv.name] = rng.below(16);
    GraphEval full = eval_graph(g, p, fields, state);
    for (const auto& [id, field] : g.po_alias) {
      const CompNode* def = g.exporter_of(id);
      if (def != nullptr && def->stateful) continue;
      BciSpec spec = bci(g, id);
      Valuation env;
      for (const auto& fr : spec.frontier) env[fr] = full.values.at(fr);
      for (const auto& st : spec.stmts)
        env[st.target] =
            truncate_to_width(eval_expr(*st.rhs, env), width_of_id(st.target, p));
      CAPTURE(id);
      CHECK(env.at(id) == full.values.at(id));
    }
  }
}

TEST_CASE("node ids are deterministic and topological") {
  Program p = tu::parse_file("benchmarks/conga.pcat");
  ComputationGraph a = normalize(graph_of(p, "route"), 2);
  ComputationGraph b = normalize(graph_of(p, "route"), 2);
  REQUIRE(a.nodes.size() == b.nodes.size());
  for (size_t i = 0; i < a.nodes.size(); i++) {
    CHECK(a.nodes[i].id == b.nodes[i].id);
    CHECK(a.nodes[i].stmts.size() == b.nodes[i].stmts.size());
  }
  for (const auto& e : a.edges) CHECK(e.from < e.to);
}
