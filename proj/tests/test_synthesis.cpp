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

#include "pipecat/synthesis.hpp"
#include "test_util.hpp"

using namespace pipecat;
namespace tu = pipecat::testutil;

namespace {

ComputationGraph prepared(const Program& p, const std::string& action, int regs) {
  return normalize(
      build_graph(preprocess_action(*p.find_action(action), p, true)), regs);
}

const CompNode* stateful_node(const ComputationGraph& g) {
  for (const auto& n : g.nodes)
    if (n.stateful) return &n;
  return nullptr;
}

// Test-side evaluation of a stateful config, independent of the library's
// evaluator: walks the structure by hand.
uint32_t opnd(const Operand& o, const std::vector<uint32_t>& in,
              const std::vector<uint32_t>& regs) {
  if (o.kind == Operand::Kind::Imm) return o.imm;
  if (o.kind == Operand::Kind::Input) return in[o.index];
  return regs[o.index];
}

struct ManualStatefulEval {
  const StatefulConfig& c;

  bool cond(const CondSel& s, const std::vector<uint32_t>& in,
            const std::vector<uint32_t>& regs) const {
    uint32_t lhs = opnd(s.la, in, regs);
    if (s.lhs_is_arith) lhs = eval_binop(s.lhs_op, lhs, opnd(s.lb, in, regs));
    return eval_binop(s.rel, lhs, opnd(s.rb, in, regs)) != 0;
  }

  std::pair<std::vector<uint32_t>, uint32_t> run(
      const std::vector<uint32_t>& in, const std::vector<uint32_t>& regs) const {
    int leaf = 0;
    if (c.conds.size() == 1) {
      leaf = cond(c.conds[0], in, regs) ? 0 : 1;
    } else if (c.conds.size() == 3) {
      if (cond(c.conds[0], in, regs))
        leaf = cond(c.conds[1], in, regs) ? 0 : 1;
      else
        leaf = cond(c.conds[2], in, regs) ? 2 : 3;
    }
    std::vector<uint32_t> out(regs.size());
    for (size_t slot = 0; slot < regs.size(); slot++) {
      const ArmSel& a = c.arms[slot][leaf];
      uint32_t va = opnd(a.a, in, regs);
      out[slot] = a.is_op ? eval_binop(a.op, va, opnd(a.b, in, regs)) : va;
    }
    uint32_t o = 0;
    if (c.out_kind == StatefulConfig::Out::Pre) o = regs[c.out_reg];
    if (c.out_kind == StatefulConfig::Out::Post) o = out[c.out_reg];
    return {out, o};
  }
};

// Independently re-checks a returned stateful config against the node's
// statement semantics on the whole 4-bit domain.
void verify_config_independently(const AluConfig& cfg, const CompNode& node,
                                 const ComputationGraph& g, const Program& p) {
  REQUIRE(cfg.stateful);
  ManualStatefulEval eval{cfg.sf};
  size_t ni = node.inputs.size();
  size_t ns = node.state_vars.size();
  uint64_t total = 1;
  for (size_t i = 0; i < ni + ns; i++) total *= 16;
  for (uint64_t pt = 0; pt < total; pt++) {
    std::vector<uint32_t> in(ni);
    std::vector<uint32_t> regs(cfg.sf.reg_binding.size(), 0);
    uint64_t at = pt;
    for (size_t i = 0; i < ni; i++) {
      in[i] = (uint32_t)(at % 16);
      at /= 16;
    }
    for (size_t i = 0; i < ns; i++) {
      regs[i] =
          truncate_to_width((uint32_t)(at % 16), p.width_of(node.state_vars[i]));
      at /= 16;
    }
    // statement semantics
    Valuation env;
    for (size_t i = 0; i < ni; i++) env[node.inputs[i]] = in[i];
    for (size_t i = 0; i < ns; i++) env[node.state_vars[i]] = regs[i];
    for (const auto& st : node.stmts)
      env[st.target] =
          truncate_to_width(eval_expr(*st.rhs, env), width_of_id(st.target, p));

    auto [new_regs, out] = eval.run(in, regs);
    for (size_t i = 0; i < ns; i++) {
      uint32_t want = env.at(g.flanks.at(node.state_vars[i]).second);
      CAPTURE(pt);
      REQUIRE(truncate_to_width(new_regs[i], p.width_of(node.state_vars[i])) ==
              want);
    }
    if (node.out_kind == CompNode::OutKind::Stateless) {
      uint32_t want = env.at(node.out_var);
      REQUIRE(truncate_to_width(out, width_of_id(node.out_var, p)) == want);
    }
  }
}

// Test-side single-packet execution of a resource graph.
struct RgRun {
  Valuation fields;
  Valuation state;
};
RgRun run_resource_graph(const ResourceGraph& rg, const Program& p,
                         const Valuation& fields, const Valuation& state) {
  Valuation env = fields;
  std::map<int, std::set<int>> preds;
  for (const auto& n : rg.nodes) preds[n.id];
  for (const auto& e : rg.edges) preds[e.to].insert(e.from);
  std::set<int> done;
  std::map<std::string, uint32_t> reg_updates;
  while (done.size() < rg.nodes.size()) {
    bool progress = false;
    for (const auto& n : rg.nodes) {
      if (done.count(n.id)) continue;
      bool ready = true;
      for (int pr : preds[n.id])
        if (!done.count(pr)) ready = false;
      if (!ready) continue;
      std::vector<uint32_t> in;
      for (const auto& f : n.inputs) in.push_back(env.at(f));
      uint32_t out = 0;
      bool has_out = false;
      if (n.cfg.stateful) {
        std::vector<uint32_t> r(n.state_vars.size(), 0);
        for (size_t i = 0; i < n.state_vars.size(); i++)
          if (!n.state_vars[i].empty()) r[i] = state.at(n.state_vars[i]);
        StatefulResult res = eval_stateful(n.cfg.sf, in, r);
        for (size_t i = 0; i < n.state_vars.size(); i++) {
          if (n.state_vars[i].empty()) continue;
          uint32_t v = truncate_to_width(res.regs[i], p.width_of(n.state_vars[i]));
          auto it = reg_updates.find(n.state_vars[i]);
          if (it != reg_updates.end()) REQUIRE(it->second == v);
          reg_updates[n.state_vars[i]] = v;
        }
        out = res.out;
        has_out = res.has_out;
      } else {
        out = eval_stateless(n.cfg.sl, in);
        has_out = true;
      }
      if (has_out && !n.out_field.empty()) {
        uint32_t v = truncate_to_width(out, width_of_id(n.out_field, p));
        env[n.out_field] = v;
        for (const auto& alias : n.aliases)
          env[alias] = truncate_to_width(out, p.width_of(alias));
      }
      done.insert(n.id);
      progress = true;
    }
    REQUIRE(progress);
  }
  RgRun r;
  for (const auto& [k, v] : fields) r.fields[k] = env.at(k);
  r.state = state;
  for (const auto& [k, v] : reg_updates) r.state[k] = v;
  return r;
}

void check_whole_action(const char* file, const char* action,
                        const std::string& grammar, int expected_depth) {
  CAPTURE(file);
  CAPTURE(grammar);
  Program p = tu::parse_file(file);
  AluGrammarPair g = builtin_grammar(grammar);
  ResourceGraph rg = synthesize_action(*p.find_action(action), p, g, {}, {});
  CHECK(rg.depth() == expected_depth);

  // whole-action equivalence against the source transaction, exhaustively
  StraightLineAction sl = preprocess_action(*p.find_action(action), p, true);
  std::vector<std::string> dims(sl.inputs.begin(), sl.inputs.end());
  uint64_t total = 1;
  for (size_t i = 0; i < dims.size() + p.state_vars.size(); i++) total *= 16;
  REQUIRE(total <= (1ull << 20));
  for (uint64_t pt = 0; pt < total; pt++) {
    Valuation fields;
    for (const auto& f : p.fields) fields[f.name] = 0;
    Valuation state;
    uint64_t at = pt;
    for (const auto& d : dims) {
      fields[d] = truncate_to_width((uint32_t)(at % 16), p.width_of(d));
      at /= 16;
    }
    for (const auto& sv : p.state_vars) {
      state[sv.name] = truncate_to_width((uint32_t)(at % 16), sv.width);
      at /= 16;
    }
    SLResult want = run_straightline(sl, p, fields, state);
    RgRun got = run_resource_graph(rg, p, fields, state);
    CAPTURE(pt);
    REQUIRE(got.state == want.state);
    REQUIRE(got.fields == want.fields);
  }
}

}  // namespace

TEST_CASE("a plain accumulator fits the raw atom") {
  Program p = parse(
      "packet { x; }\nstate { s = 0; }\n"
      "@atomic action f() { s = s + pkt.x; }\ncontrol { }\n");
  ComputationGraph g = prepared(p, "f", 1);
  const CompNode* n = stateful_node(g);
  REQUIRE(n != nullptr);
  AluGrammarPair gram = builtin_grammar("banzai_raw");
  std::vector<uint32_t> imm = immediate_pool(p.actions[0], {});
  auto cfg = query_stateful(*n, g, p, gram.stateful, imm, {});
  REQUIRE(cfg.has_value());
  verify_config_independently(*cfg, *n, g, p);
}

TEST_CASE("a conditional bump does not fit the subtract-only atom") {
  Program p = parse(
      "packet { c; }\nstate { s = 0; }\n"
      "@atomic action f() { if (pkt.c == 1) { s = s + 1; } }\ncontrol { }\n");
  ComputationGraph g = prepared(p, "f", 1);
  const CompNode* n = stateful_node(g);
  REQUIRE(n != nullptr);
  std::vector<uint32_t> imm = immediate_pool(p.actions[0], {});
  auto sub =
      query_stateful(*n, g, p, builtin_grammar("banzai_sub").stateful, imm, {});
  CHECK_FALSE(sub.has_value());
  // the same node fits once addition is available
  auto ifelse =
      query_stateful(*n, g, p, builtin_grammar("banzai_if_else").stateful, imm, {});
  REQUIRE(ifelse.has_value());
  verify_config_independently(*ifelse, *n, g, p);
}

TEST_CASE("register and input prechecks reject oversized nodes") {
  Program p = parse(
      "packet { a; b; c; }\nstate { s = 0; t = 0; }\n"
      "@atomic action f() { s = s + pkt.a; t = t + s; }\n"
      "@atomic action g() { s = s + (pkt.a + pkt.b + pkt.c); }\ncontrol { }\n");
  ComputationGraph gf = prepared(p, "f", 1);
  std::vector<uint32_t> imm = immediate_pool(p.actions[0], {});
  for (const auto& n : gf.nodes) {
    if (!n.stateful || n.state_vars.size() < 2) continue;
    CHECK_FALSE(
        query_stateful(n, gf, p, builtin_grammar("banzai_raw").stateful, imm, {})
            .has_value());
  }
  // three inputs exceed max_inputs = 2 without simplification help
  ComputationGraph gg =
      normalize(build_graph(preprocess_action(*p.find_action("g"), p, false)), 1);
  const CompNode* n = stateful_node(gg);
  REQUIRE(n != nullptr);
  if (n->inputs.size() > 2) {
    CHECK_FALSE(
        query_stateful(*n, gg, p, builtin_grammar("banzai_raw").stateful, imm, {})
            .has_value());
  }
}

TEST_CASE("folding absorbs a dependent input and saves a stage") {
  Program p = tu::parse_file("benchmarks/dns_ttl_change.pcat");
  AluGrammarPair gram = builtin_grammar("banzai_nested_if");
  SynthesizeFlags with, without;
  without.fold = false;
  ResourceGraph folded =
      synthesize_action(*p.find_action("track"), p, gram, {}, with);
  ResourceGraph unfolded =
      synthesize_action(*p.find_action("track"), p, gram, {}, without);
  CHECK(folded.depth() == 2);
  CHECK(unfolded.depth() == 3);
}

TEST_CASE("fold preconditions: non-dependent inputs and input limits") {
  // u computes from fields that are not inputs of v: not foldable
  Program p = parse(
      "packet { a; b; c; }\nmeta { m; }\nstate { s = 0; }\n"
      "@atomic action f() { meta.m = pkt.a + pkt.b; s = s + meta.m + pkt.c; }\n"
      "control { }\n");
  ComputationGraph g = prepared(p, "f", 1);
  std::vector<uint32_t> imm = immediate_pool(p.actions[0], {});
  int stateless_id = -1, stateful_id = -1;
  for (const auto& n : g.nodes)
    (n.stateful ? stateful_id : stateless_id) = n.id;
  REQUIRE(stateful_id >= 0);
  REQUIRE(stateless_id >= 0);
  size_t nodes_before = g.nodes.size();
  CHECK_FALSE(try_fold(g, stateless_id, stateful_id, p,
                       builtin_grammar("banzai_raw").stateful, imm, {}));
  CHECK(g.nodes.size() == nodes_before);

  // a dependent input whose enlarged node would exceed max_inputs = 1
  Program q = parse(
      "packet { a; b; }\nmeta { d; }\nstate { s = 0; }\n"
      "@atomic action f() { meta.d = pkt.a - pkt.b;\n"
      "  if (meta.d == 1) { s = s + pkt.a; } else { s = s + pkt.b; } }\n"
      "control { }\n");
  ComputationGraph gq = prepared(q, "f", 1);
  StatefulGrammar narrow = builtin_grammar("banzai_nested_if").stateful;
  narrow.max_inputs = 1;
  std::vector<uint32_t> immq = immediate_pool(q.actions[0], {});
  int br_id = -1, sf_id = -1;
  for (const auto& n : gq.nodes) {
    if (n.stateful) sf_id = n.id;
    if (!n.stateful && !n.stmts.empty() && n.stmts[0].role == SLStmt::Role::BrTemp)
      br_id = n.id;
  }
  REQUIRE(br_id >= 0);
  size_t before = gq.nodes.size();
  CHECK_FALSE(try_fold(gq, br_id, sf_id, q, narrow, immq, {}));
  CHECK(gq.nodes.size() == before);  // graph unchanged
}

TEST_CASE("predecessor packing merges the blue nodes on a two-register ALU") {
  Program p = tu::parse_file("benchmarks/blue_decrease.pcat");
  ComputationGraph g = prepared(p, "mark_decrease", 2);
  AluGrammarPair gram = builtin_grammar("tofino");
  std::vector<uint32_t> imm = immediate_pool(*p.find_action("mark_decrease"), {});
  ComputationGraph opt = optimize_fixpoint(g, p, gram.stateful, imm, {}, true, true);
  bool fused = false;
  for (const auto& n : opt.nodes)
    if (n.stateful && n.state_vars.size() == 2) fused = true;
  CHECK(fused);

  // fixpoint is idempotent
  ComputationGraph again =
      optimize_fixpoint(opt, p, gram.stateful, imm, {}, true, true);
  CHECK(again.nodes.size() == opt.nodes.size());
}

TEST_CASE("packing preconditions: fanout and register limits") {
  Program p = tu::parse_file("benchmarks/blue_decrease.pcat");
  // on a one-register atom the two stateful nodes must not merge
  ComputationGraph g = prepared(p, "mark_decrease", 1);
  AluGrammarPair gram = builtin_grammar("banzai_sub");
  std::vector<uint32_t> imm = immediate_pool(*p.find_action("mark_decrease"), {});
  ComputationGraph opt = optimize_fixpoint(g, p, gram.stateful, imm, {}, true, true);
  int stateful = 0;
  for (const auto& n : opt.nodes)
    if (n.stateful) stateful++;
  CHECK(stateful >= 2);

  // a predecessor with two consumers is never packed
  Program q = parse(
      "packet { a; o; }\nmeta { m; }\nstate { s = 0; }\n"
      "@atomic action f() { meta.m = pkt.a + 1; pkt.o = meta.m; s = s + meta.m; }\n"
      "control { }\n");
  ComputationGraph gq = prepared(q, "f", 2);
  std::vector<uint32_t> immq = immediate_pool(q.actions[0], {});
  int m_id = -1, sf_id = -1;
  for (const auto& n : gq.nodes) {
    if (n.stateful) sf_id = n.id;
    for (const auto& out : n.outputs)
      if (out.rfind("meta.m", 0) == 0) m_id = n.id;
  }
  REQUIRE(m_id >= 0);
  CHECK_FALSE(
      try_merge(gq, m_id, sf_id, q, builtin_grammar("tofino").stateful, immq, {}));
}

TEST_CASE("min-depth synthesis: direct, chained, and impossible specs") {
  Program p = parse(
      "packet { a; b; c; o; }\nmeta { t1; t2; }\n"
      "action one() { pkt.o = pkt.a + pkt.b; }\n"
      "action three() { meta.t1 = pkt.a + pkt.b; meta.t2 = meta.t1 + pkt.c;\n"
      "                 pkt.o = meta.t2 + 1; }\n"
      "control { }\n");
  StatelessGrammar gram = builtin_grammar("banzai_if_else").stateless;
  SynthOptions opts;

  ComputationGraph g1 = build_graph(preprocess_action(p.actions[0], p, true));
  int ids = 0;
  auto tree1 = synth_stateless_min_depth(bci(g1, "pkt.o"), p, gram, 8,
                                         std::vector<uint32_t>{0, 1}, opts, &ids);
  CHECK(tree1.size() == 1);  // depth 1

  ComputationGraph g3 = build_graph(preprocess_action(p.actions[1], p, true));
  std::string o_id;
  for (const auto& [id, f] : g3.po_alias)
    if (f == "pkt.o") o_id = id;
  auto tree3 = synth_stateless_min_depth(bci(g3, o_id), p, gram, 8,
                                         std::vector<uint32_t>{0, 1}, opts, &ids);
  // three chained additions collapse into a depth-2 tree of two-input ALUs
  int depth = 0;
  std::map<std::string, int> d;
  for (const auto& n : tree3) {
    int best = 0;
    for (const auto& in : n.inputs)
      if (d.count(in)) best = std::max(best, d[in]);
    d[n.out_field] = best + 1;
    depth = std::max(depth, best + 1);
  }
  CHECK(depth == 2);

  // no ALU tree computes a multiplication under this grammar within 2 levels
  Program q = parse(
      "packet { a; b; o; }\n"
      "action f() { pkt.o = pkt.a * pkt.b; }\ncontrol { }\n");
  ComputationGraph gq = build_graph(preprocess_action(q.actions[0], q, true));
  try {
    int ids2 = 0;
    (void)synth_stateless_min_depth(bci(gq, "pkt.o"), q, gram, 2,
                                    std::vector<uint32_t>{0, 1}, opts, &ids2);
    FAIL("expected DepthExceeded");
  } catch (const CompileError& e) {
    CHECK(e.code() == Errc::DepthExceeded);
  }
}

TEST_CASE("depth-2 results have no depth-1 witness (brute force)") {
  // spec: o = (a + b) > 3  -- needs a chained relational root
  Program p = parse(
      "packet { a; b; o; }\nmeta { t; }\n"
      "action f() { meta.t = pkt.a + pkt.b; pkt.o = meta.t > 3; }\n"
      "control { }\n");
  StatelessGrammar gram = builtin_grammar("banzai_if_else").stateless;
  ComputationGraph g = build_graph(preprocess_action(p.actions[0], p, true));
  std::string o_id;
  for (const auto& [id, f] : g.po_alias)
    if (f == "pkt.o") o_id = id;
  BciSpec spec = bci(g, o_id);
  int ids = 0;
  std::vector<uint32_t> imm{0, 1, 3};
  auto tree = synth_stateless_min_depth(spec, p, gram, 8, imm, {}, &ids);
  CHECK(tree.size() == 2);

  // brute force all depth-1 configurations against the spec
  auto spec_fn = [&](uint32_t a, uint32_t b) -> uint32_t { return (a + b) > 3; };
  auto all_points_match = [&](auto&& f) {
    for (uint32_t a = 0; a < 16; a++)
      for (uint32_t b = 0; b < 16; b++)
        if (f(a, b) != spec_fn(a, b)) return false;
    return true;
  };
  bool depth1 = false;
  struct Op {
    int kind;  // 0 field a, 1 field b, 2 imm
    uint32_t imm;
  };
  std::vector<Op> ops{{0, 0}, {1, 0}, {2, 0}, {2, 1}, {2, 3}};
  auto val = [&](const Op& o, uint32_t a, uint32_t b) {
    return o.kind == 0 ? a : o.kind == 1 ? b : o.imm;
  };
  for (const auto& x : ops) {
    if (all_points_match([&](uint32_t a, uint32_t b) { return val(x, a, b); }))
      depth1 = true;
    for (const auto& y : ops) {
      for (BinOp op : gram.arith_ops)
        if (all_points_match([&](uint32_t a, uint32_t b) {
              return eval_binop(op, val(x, a, b), val(y, a, b));
            }))
          depth1 = true;
      for (BinOp op : gram.rel_ops)
        if (all_points_match([&](uint32_t a, uint32_t b) {
              return eval_binop(op, val(x, a, b), val(y, a, b));
            }))
          depth1 = true;
      for (const auto& c : ops)
        for (const auto& dd : ops)
          for (BinOp op : gram.rel_ops)
            if (all_points_match([&](uint32_t a, uint32_t b) {
                  return eval_binop(op, val(x, a, b), val(y, a, b)) != 0
                             ? val(c, a, b)
                             : val(dd, a, b);
                }))
              depth1 = true;
    }
  }
  CHECK_FALSE(depth1);
}

TEST_CASE("trivial copy action synthesizes to a single mov ALU") {
  Program p = parse(
      "packet { a; b; }\n"
      "action f() { pkt.a = pkt.b; }\ncontrol { }\n");
  ResourceGraph rg =
      synthesize_action(p.actions[0], p, builtin_grammar("tofino"), {}, {});
  REQUIRE(rg.nodes.size() == 1);
  CHECK_FALSE(rg.nodes[0].stateful);
  CHECK(rg.nodes[0].aliases == std::vector<std::string>{"pkt.a"});
  CHECK(rg.depth() == 1);
}

TEST_CASE("whole-action synthesis hits the expected stage depths") {
  check_whole_action("benchmarks/blue_increase.pcat", "mark_increase", "tofino", 1);
  check_whole_action("benchmarks/blue_decrease.pcat", "mark_decrease", "tofino", 1);
  check_whole_action("benchmarks/sampling.pcat", "take_sample", "tofino", 1);
  check_whole_action("benchmarks/snap_heavy_hitter.pcat", "detect", "tofino", 1);
  check_whole_action("benchmarks/conga.pcat", "route", "tofino", 1);
  check_whole_action("benchmarks/flowlet.pcat", "choose_hop", "tofino", 2);
  check_whole_action("benchmarks/blue_decrease.pcat", "mark_decrease",
                     "banzai_sub", 4);
  check_whole_action("benchmarks/sampling.pcat", "take_sample", "banzai_if_else",
                     2);
  check_whole_action("benchmarks/snap_heavy_hitter.pcat", "detect", "banzai_pair",
                     1);
  check_whole_action("benchmarks/conga.pcat", "route", "banzai_pair", 1);
}

TEST_CASE("disabling packing costs blue a stage") {
  Program p = tu::parse_file("benchmarks/blue_decrease.pcat");
  SynthesizeFlags no_pack;
  no_pack.pack = false;
  ResourceGraph rg = synthesize_action(*p.find_action("mark_decrease"), p,
                                       builtin_grammar("tofino"), {}, no_pack);
  CHECK(rg.depth() == 2);
}

TEST_CASE("stateful queries fail loudly with a user-facing diagnostic") {
  Program p = parse(
      "packet { c; }\nstate { s = 0; }\n"
      "@atomic action f() { if (pkt.c == 1) { s = s + 1; } }\ncontrol { }\n");
  try {
    (void)synthesize_action(p.actions[0], p, builtin_grammar("banzai_sub"), {}, {});
    FAIL("expected NoFit");
  } catch (const CompileError& e) {
    CHECK(e.code() == Errc::NoFit);
    CHECK(std::string(e.what()).find("banzai_sub") != std::string::npos);
  }
}
