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

#include "pipecat/synthesis.hpp"

#include <algorithm>
#include <cassert>
#include <functional>
#include <unordered_map>

namespace pipecat {

namespace {

// ---------------------------------------------------------------------------
// Verification domains. Variables are swept exhaustively over verify_bits;
// the search works on a strided sample re-checked exhaustively at the end.
// ---------------------------------------------------------------------------

struct Domain {
  int vars = 0;
  uint32_t per_var = 16;
  uint64_t total = 1;

  void values_at(uint64_t point, std::vector<uint32_t>& out) const {
    out.resize(vars);
    for (int i = 0; i < vars; i++) {
      out[i] = (uint32_t)(point % per_var);
      point /= per_var;
    }
  }
};

Domain make_domain(int vars, int bits) {
  Domain d;
  d.vars = vars;
  d.per_var = 1u << bits;
  d.total = 1;
  for (int i = 0; i < vars; i++) {
    if (d.total > (1ull << 40)) break;  // saturate; sampling kicks in anyway
    d.total *= d.per_var;
  }
  return d;
}

std::vector<uint64_t> sample_points(const Domain& d, int want) {
  std::vector<uint64_t> pts;
  if (d.total <= (uint64_t)want) {
    for (uint64_t i = 0; i < d.total; i++) pts.push_back(i);
    return pts;
  }
  // deterministic multiplicative stride
  uint64_t x = 0x9E3779B97F4A7C15ull % d.total;
  uint64_t at = 1;
  for (int i = 0; i < want; i++) {
    pts.push_back(at);
    at = (at + x) % d.total;
  }
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  return pts;
}

// ---------------------------------------------------------------------------
// Stateful query
// ---------------------------------------------------------------------------

struct StatefulSpec {
  std::vector<std::string> inputs;  // sorted external ids
  std::vector<std::string> vars;    // sorted real state vars
  // wanted results per point
  std::vector<std::vector<uint32_t>> in_vals;    // [pt][input slot]
  std::vector<std::vector<uint32_t>> reg_vals;   // [pt][var slot]
  std::vector<std::vector<uint32_t>> want_post;  // [pt][var slot]
  std::vector<uint32_t> want_out;                // [pt]
  bool has_stateless_out = false;
  int out_width = 32;
  CompNode::OutKind out_kind = CompNode::OutKind::None;
  int out_var_slot = 0;
};

// Runs the node's statements for one valuation.
void run_node(const CompNode& node, const ComputationGraph& g, const Program& p,
              std::span<const uint32_t> in, std::span<const uint32_t> regs,
              const std::vector<std::string>& inputs,
              const std::vector<std::string>& vars, Valuation& env) {
  env.clear();
  for (size_t i = 0; i < inputs.size(); i++) env[inputs[i]] = in[i];
  for (size_t i = 0; i < vars.size(); i++) env[vars[i]] = regs[i];
  for (const auto& st : node.stmts) {
    uint32_t v = eval_expr(*st.rhs, env);
    env[st.target] = truncate_to_width(v, width_of_id(st.target, p));
  }
  (void)g;
}

StatefulSpec build_stateful_spec(const CompNode& node, const ComputationGraph& g,
                                 const Program& p, const SynthOptions& opts,
                                 const std::vector<uint64_t>& pts,
                                 const Domain& dom) {
  StatefulSpec s;
  s.inputs = node.inputs;
  s.vars = node.state_vars;
  s.out_kind = node.out_kind;
  if (node.out_kind == CompNode::OutKind::Stateless) {
    s.has_stateless_out = true;
    s.out_width = width_of_id(node.out_var, p);
  } else if (node.out_kind != CompNode::OutKind::None) {
    auto it = std::find(s.vars.begin(), s.vars.end(), node.out_var);
    s.out_var_slot = (int)(it - s.vars.begin());
  }
  (void)opts;

  std::vector<uint32_t> all;
  Valuation env;
  for (uint64_t pt : pts) {
    dom.values_at(pt, all);
    std::vector<uint32_t> in(all.begin(), all.begin() + s.inputs.size());
    std::vector<uint32_t> regs0(all.begin() + s.inputs.size(), all.end());
    for (size_t i = 0; i < s.vars.size(); i++)
      regs0[i] = truncate_to_width(regs0[i], p.width_of(s.vars[i]));
    run_node(node, g, p, in, regs0, s.inputs, s.vars, env);
    std::vector<uint32_t> post(s.vars.size());
    for (size_t i = 0; i < s.vars.size(); i++)
      post[i] = env.at(g.flanks.at(s.vars[i]).second);
    if (s.has_stateless_out)
      s.want_out.push_back(env.at(node.out_var));
    s.in_vals.push_back(std::move(in));
    s.reg_vals.push_back(std::move(regs0));
    s.want_post.push_back(std::move(post));
  }
  return s;
}

struct OperandPool {
  std::vector<Operand> all;       // regs (real only), inputs, immediates
  std::vector<Operand> nonreg;    // inputs + immediates
};

OperandPool make_pool(int n_real_regs, int n_inputs,
                      std::span<const uint32_t> immediates) {
  OperandPool pool;
  for (int i = 0; i < n_real_regs; i++)
    pool.all.push_back({Operand::Kind::Reg, i, 0});
  for (int i = 0; i < n_inputs; i++) {
    pool.all.push_back({Operand::Kind::Input, i, 0});
    pool.nonreg.push_back({Operand::Kind::Input, i, 0});
  }
  for (uint32_t imm : immediates) {
    pool.all.push_back({Operand::Kind::Imm, 0, imm});
    pool.nonreg.push_back({Operand::Kind::Imm, 0, imm});
  }
  return pool;
}

uint32_t opnd_val(const Operand& o, const StatefulSpec& s, size_t pt) {
  switch (o.kind) {
    case Operand::Kind::Reg: return s.reg_vals[pt][o.index];
    case Operand::Kind::Input: return s.in_vals[pt][o.index];
    case Operand::Kind::Imm: return o.imm;
  }
  return 0;
}

// Condition candidates, deduplicated by their truth signature on the points.
struct CondCand {
  CondSel sel;
  std::vector<char> sig;  // truth per point
};

std::vector<CondCand> cond_candidates(const StatefulGrammar& g,
                                      const OperandPool& pool,
                                      const StatefulSpec& s, size_t n_pts) {
  std::vector<CondCand> out;
  std::set<std::vector<char>> seen;
  auto push = [&](const CondSel& c) {
    std::vector<char> sig(n_pts);
    bool all_same = true;
    for (size_t pt = 0; pt < n_pts; pt++) {
      uint32_t lhs = opnd_val(c.la, s, pt);
      if (c.lhs_is_arith) lhs = eval_binop(c.lhs_op, lhs, opnd_val(c.lb, s, pt));
      sig[pt] = eval_binop(c.rel, lhs, opnd_val(c.rb, s, pt)) != 0;
      if (sig[pt] != sig[0]) all_same = false;
    }
    (void)all_same;
    if (seen.insert(sig).second) out.push_back({c, std::move(sig)});
  };

  // A constant-true condition first: covers unconditional updates.
  push({BinOp::Eq, false, BinOp::Add, {Operand::Kind::Imm, 0, 0},
        {Operand::Kind::Imm, 0, 0}, {Operand::Kind::Imm, 0, 0}});
  for (BinOp rel : g.rel_ops) {
    for (const auto& la : pool.all) {
      for (const auto& rb : pool.all) {
        if (la.kind == Operand::Kind::Imm && rb.kind == Operand::Kind::Imm) continue;
        push({rel, false, BinOp::Add, la, {}, rb});
      }
    }
  }
  if (g.cond_arith != StatefulGrammar::CondArith::None) {
    for (BinOp rel : g.rel_ops) {
      for (BinOp op : g.cond_arith_ops) {
        for (const auto& la : pool.all) {
          for (const auto& lb : pool.all) {
            if (g.cond_arith == StatefulGrammar::CondArith::RegOnly &&
                la.kind != Operand::Kind::Reg && lb.kind != Operand::Kind::Reg)
              continue;
            if (la.kind == Operand::Kind::Imm && lb.kind == Operand::Kind::Imm)
              continue;
            for (const auto& rb : pool.all) {
              CondSel c;
              c.rel = rel;
              c.lhs_is_arith = true;
              c.lhs_op = op;
              c.la = la;
              c.lb = lb;
              c.rb = rb;
              push(c);
            }
          }
        }
      }
    }
  }
  return out;
}

// Arm candidates for one register slot.
std::vector<ArmSel> arm_candidates(const StatefulGrammar& g, const OperandPool& pool,
                                   int self_slot, bool identity_only) {
  std::vector<ArmSel> out;
  ArmSel identity;
  identity.is_op = false;
  identity.a = {Operand::Kind::Reg, self_slot, 0};
  out.push_back(identity);
  if (identity_only) return out;
  if (g.mov_arm) {
    for (const auto& o : pool.all) {
      if (o.kind == Operand::Kind::Reg && o.index == self_slot) continue;
      out.push_back({false, BinOp::Add, o, {}});
    }
  }
  if (g.op_arm) {
    for (BinOp op : g.arith_ops)
      for (const auto& a : pool.all)
        for (const auto& b : pool.all) {
          if (a.kind == Operand::Kind::Imm && b.kind == Operand::Kind::Imm) continue;
          out.push_back({true, op, a, b});
        }
  }
  return out;
}

uint32_t eval_arm_pt(const ArmSel& a, const StatefulSpec& s, size_t pt) {
  uint32_t va = opnd_val(a.a, s, pt);
  if (!a.is_op) return va;
  return eval_binop(a.op, va, opnd_val(a.b, s, pt));
}

// Finds the first arm matching `want` (truncated to `width`) on `pts`.
std::optional<ArmSel> solve_arm(const std::vector<ArmSel>& cands,
                                const StatefulSpec& s,
                                const std::vector<size_t>& pts, int width,
                                const std::function<uint32_t(size_t)>& want) {
  for (const auto& a : cands) {
    bool ok = true;
    for (size_t pt : pts) {
      if (truncate_to_width(eval_arm_pt(a, s, pt), width) != want(pt)) {
        ok = false;
        break;
      }
    }
    if (ok) return a;
  }
  return std::nullopt;
}

struct LeafPlan {
  std::vector<size_t> pts;
  bool identity_only = false;  // pred_raw fallthrough restriction
};

// Solves all register arms (plus the scratch output arm) for one leaf.
bool solve_leaf(const StatefulSpec& spec, const Program& p,
                const std::vector<ArmSel>& arm_pool,
                const std::vector<ArmSel>& identity_pool, const LeafPlan& leaf,
                std::vector<ArmSel>& out_arms /* per slot */) {
  size_t n_real = spec.vars.size();
  size_t slots = n_real + (spec.has_stateless_out ? 1 : 0);
  out_arms.resize(slots);
  for (size_t slot = 0; slot < n_real; slot++) {
    int width = p.width_of(spec.vars[slot]);
    const auto& pool = leaf.identity_only ? identity_pool : arm_pool;
    std::vector<ArmSel> cands;
    const std::vector<ArmSel>* use = &pool;
    if (leaf.identity_only) {
      // identity of *this* slot
      cands.push_back({false, BinOp::Add, {Operand::Kind::Reg, (int)slot, 0}, {}});
      use = &cands;
    }
    auto sol = solve_arm(*use, spec, leaf.pts, width,
                         [&](size_t pt) { return spec.want_post[pt][slot]; });
    if (!sol) return false;
    out_arms[slot] = *sol;
  }
  if (spec.has_stateless_out) {
    auto sol = solve_arm(arm_pool, spec, leaf.pts, spec.out_width,
                         [&](size_t pt) { return spec.want_out[pt]; });
    if (!sol) return false;
    out_arms[n_real] = *sol;
  }
  return true;
}

// Full exhaustive check of an assembled config against the node semantics.
bool verify_stateful(const AluConfig& cfg, const CompNode& node,
                     const ComputationGraph& g, const Program& p,
                     const SynthOptions& opts) {
  const auto& sf = cfg.sf;
  Domain dom = make_domain((int)(sf.input_binding.size() + node.state_vars.size()),
                           opts.verify_bits);
  std::vector<uint32_t> all;
  Valuation env;
  uint64_t limit = std::min<uint64_t>(dom.total, 1ull << 20);
  for (uint64_t pt = 0; pt < limit; pt++) {
    dom.values_at(pt, all);
    std::vector<uint32_t> in(all.begin(), all.begin() + sf.input_binding.size());
    std::vector<uint32_t> regs(node.state_vars.size());
    for (size_t i = 0; i < regs.size(); i++)
      regs[i] = truncate_to_width(all[sf.input_binding.size() + i],
                                  p.width_of(node.state_vars[i]));
    run_node(node, g, p, in, regs, sf.input_binding, node.state_vars, env);

    std::vector<uint32_t> cfg_regs = regs;
    cfg_regs.resize(sf.reg_binding.size(), 0);
    StatefulResult res = eval_stateful(sf, in, cfg_regs);
    for (size_t i = 0; i < node.state_vars.size(); i++) {
      uint32_t want = env.at(g.flanks.at(node.state_vars[i]).second);
      if (truncate_to_width(res.regs[i], p.width_of(node.state_vars[i])) != want)
        return false;
    }
    if (node.out_kind == CompNode::OutKind::Stateless) {
      uint32_t want = env.at(node.out_var);
      if (truncate_to_width(res.out, width_of_id(node.out_var, p)) != want)
        return false;
    }
    // pre/post outputs are the register values themselves and need no check
  }
  return true;
}

}  // namespace

std::optional<AluConfig> query_stateful(const CompNode& node,
                                        const ComputationGraph& g,
                                        const Program& p,
                                        const StatefulGrammar& gram,
                                        std::span<const uint32_t> immediates,
                                        const SynthOptions& opts) {
  if (!node.stateful)
    throw CompileError(Errc::Internal, node.span, "stateful query on stateless node");
  int n_real = (int)node.state_vars.size();
  bool needs_scratch = node.out_kind == CompNode::OutKind::Stateless;
  if (n_real + (needs_scratch ? 1 : 0) > gram.registers) return std::nullopt;
  if (needs_scratch && !gram.allow_scratch_output) return std::nullopt;
  if ((int)node.inputs.size() > gram.max_inputs) return std::nullopt;

  Domain dom = make_domain((int)node.inputs.size() + n_real, opts.verify_bits);

  auto attempt = [&](int n_points) -> std::optional<AluConfig> {
    auto pts = sample_points(dom, n_points);
    StatefulSpec spec = build_stateful_spec(node, g, p, opts, pts, dom);
    OperandPool pool = make_pool(n_real, (int)node.inputs.size(), immediates);
    auto conds = cond_candidates(gram, pool, spec, pts.size());
    std::vector<ArmSel> arms = arm_candidates(gram, pool, 0, false);
    // per-slot arm pools (identity operand differs per slot)
    std::vector<std::vector<ArmSel>> slot_arms;
    for (int slot = 0; slot < n_real + (needs_scratch ? 1 : 0); slot++)
      slot_arms.push_back(arm_candidates(gram, pool, slot, false));

    auto solve_leaf_arms = [&](const LeafPlan& leaf,
                               std::vector<ArmSel>& out) -> bool {
      size_t slots = n_real + (needs_scratch ? 1 : 0);
      out.resize(slots);
      for (size_t slot = 0; slot < slots; slot++) {
        bool is_scratch = (int)slot >= n_real;
        int width = is_scratch ? spec.out_width : p.width_of(spec.vars[slot]);
        if (leaf.identity_only && !is_scratch) {
          ArmSel id_arm{false, BinOp::Add, {Operand::Kind::Reg, (int)slot, 0}, {}};
          bool ok = true;
          for (size_t pt : leaf.pts)
            if (truncate_to_width(eval_arm_pt(id_arm, spec, pt), width) !=
                spec.want_post[pt][slot]) {
              ok = false;
              break;
            }
          if (!ok) return false;
          out[slot] = id_arm;
          continue;
        }
        auto want = [&](size_t pt) {
          return is_scratch ? spec.want_out[pt] : spec.want_post[pt][slot];
        };
        auto sol = solve_arm(slot_arms[slot], spec, leaf.pts, width, want);
        if (!sol) return false;
        out[slot] = *sol;
      }
      return true;
    };

    auto assemble = [&](const std::vector<CondSel>& conds_sel,
                        const std::vector<std::vector<ArmSel>>& leaf_arms)
        -> AluConfig {
      AluConfig cfg;
      cfg.stateful = true;
      cfg.sf.grammar = gram.name;
      cfg.sf.input_binding = node.inputs;
      cfg.sf.reg_binding = node.state_vars;
      if (needs_scratch) cfg.sf.reg_binding.push_back("");
      cfg.sf.conds = conds_sel;
      int slots = n_real + (needs_scratch ? 1 : 0);
      cfg.sf.arms.assign(slots, {});
      for (int slot = 0; slot < slots; slot++)
        for (const auto& arms_of_leaf : leaf_arms)
          cfg.sf.arms[slot].push_back(arms_of_leaf[slot]);
      if (node.out_kind == CompNode::OutKind::Pre) {
        cfg.sf.out_kind = StatefulConfig::Out::Pre;
        cfg.sf.out_reg = spec.out_var_slot;
      } else if (node.out_kind == CompNode::OutKind::Post) {
        cfg.sf.out_kind = StatefulConfig::Out::Post;
        cfg.sf.out_reg = spec.out_var_slot;
      } else if (node.out_kind == CompNode::OutKind::Stateless) {
        cfg.sf.out_kind = StatefulConfig::Out::Post;
        cfg.sf.out_reg = n_real;  // scratch slot
      }
      return cfg;
    };

    std::vector<size_t> all_pts(pts.size());
    for (size_t i = 0; i < pts.size(); i++) all_pts[i] = i;

    int levels = gram.cond_levels;
    if (levels == 0) {
      LeafPlan leaf{all_pts, false};
      std::vector<ArmSel> arms0;
      if (solve_leaf_arms(leaf, arms0)) {
        AluConfig cfg = assemble({}, {arms0});
        if (verify_stateful(cfg, node, g, p, opts)) return cfg;
      }
      return std::nullopt;
    }

    if (levels == 1) {
      for (const auto& c0 : conds) {
        LeafPlan t, f;
        for (size_t i = 0; i < pts.size(); i++)
          (c0.sig[i] ? t.pts : f.pts).push_back(i);
        f.identity_only = gram.fallthrough_identity_only;
        std::vector<ArmSel> arms_t, arms_f;
        if (!solve_leaf_arms(t, arms_t)) continue;
        if (!solve_leaf_arms(f, arms_f)) continue;
        AluConfig cfg = assemble({c0.sel}, {arms_t, arms_f});
        if (verify_stateful(cfg, node, g, p, opts)) return cfg;
      }
      return std::nullopt;
    }

    // two levels: leaves TT, TF, FT, FF; each side solved independently
    for (const auto& c0 : conds) {
      std::vector<size_t> p1, p0;
      for (size_t i = 0; i < pts.size(); i++)
        (c0.sig[i] ? p1 : p0).push_back(i);

      auto solve_side =
          [&](const std::vector<size_t>& side_pts, bool fallthrough_side,
              CondSel& side_cond, std::vector<ArmSel>& arms_a,
              std::vector<ArmSel>& arms_b) -> bool {
        for (const auto& c : conds) {
          LeafPlan la, lb;
          for (size_t i : side_pts) (c.sig[i] ? la.pts : lb.pts).push_back(i);
          lb.identity_only = fallthrough_side && gram.fallthrough_identity_only;
          if (!solve_leaf_arms(la, arms_a)) continue;
          if (!solve_leaf_arms(lb, arms_b)) continue;
          side_cond = c.sel;
          return true;
        }
        return false;
      };

      CondSel c1, c2;
      std::vector<ArmSel> tt, tf, ft, ff;
      if (!solve_side(p1, false, c1, tt, tf)) continue;
      if (!solve_side(p0, true, c2, ft, ff)) continue;
      AluConfig cfg = assemble({c0.sel, c1, c2}, {tt, tf, ft, ff});
      if (verify_stateful(cfg, node, g, p, opts)) return cfg;
    }
    return std::nullopt;
  };

  auto result = attempt(opts.search_points * 4);
  if (result) return result;
  if (dom.total > (uint64_t)(opts.search_points * 4)) {
    // the sampled search can miss (or falsely accept) only on larger
    // domains; redo with the exhaustive point set before giving up
    return attempt((int)std::min<uint64_t>(dom.total, 1 << 16));
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Folding and predecessor packing
// ---------------------------------------------------------------------------

namespace {

CompNode* find_node(ComputationGraph& g, int id) {
  for (auto& n : g.nodes)
    if (n.id == id) return &n;
  return nullptr;
}

CompNode merged_node(const CompNode& u, const CompNode& v) {
  CompNode m = v;  // keep v's output discipline
  m.stmts = u.stmts;
  m.stmts.insert(m.stmts.end(), v.stmts.begin(), v.stmts.end());
  std::set<std::string> vars(u.state_vars.begin(), u.state_vars.end());
  vars.insert(v.state_vars.begin(), v.state_vars.end());
  m.state_vars.assign(vars.begin(), vars.end());
  m.stateful = !m.state_vars.empty();
  if (!v.stateful && m.stateful) {
    // packing a stateful predecessor into a stateless consumer: the result
    // is a stateful node computing v's value into a scratch register
    m.out_kind = CompNode::OutKind::Stateless;
    m.out_var = v.stmts.front().target;
    m.outputs = {m.out_var};
  }
  m.normalized = true;
  m.span = u.span;
  return m;
}

bool fits_after_rewire(ComputationGraph& g, const Program& p,
                       const StatefulGrammar& gram,
                       std::span<const uint32_t> immediates,
                       const SynthOptions& opts, int candidate_id) {
  CompNode* n = find_node(g, candidate_id);
  if (n == nullptr || !n->stateful) return true;
  return query_stateful(*n, g, p, gram, immediates, opts).has_value();
}

void drop_dead_stateless(ComputationGraph& g) {
  std::set<std::string> po = g.po_ids();
  for (;;) {
    bool changed = false;
    for (auto it = g.nodes.begin(); it != g.nodes.end(); ++it) {
      if (it->stateful) continue;
      bool dead = it->outputs.empty();
      for (const auto& st : it->stmts)
        if (po.count(st.target)) dead = false;
      if (dead) {
        g.nodes.erase(it);
        rewire(g);
        changed = true;
        break;
      }
    }
    if (!changed) break;
  }
}

}  // namespace

bool try_fold(ComputationGraph& g, int u, int v, const Program& p,
              const StatefulGrammar& gram, std::span<const uint32_t> immediates,
              const SynthOptions& opts) {
  CompNode* nu = find_node(g, u);
  CompNode* nv = find_node(g, v);
  if (nu == nullptr || nv == nullptr || nu->stateful || !nv->stateful) return false;
  if (nu->outputs.size() != 1) return false;
  const std::string carried = nu->outputs[0];
  if (std::find(nv->inputs.begin(), nv->inputs.end(), carried) == nv->inputs.end())
    return false;
  if (g.po_ids().count(carried)) return false;  // observable value must survive
  // dependent input: u's inputs must already be inputs of v
  for (const auto& in : nu->inputs)
    if (std::find(nv->inputs.begin(), nv->inputs.end(), in) == nv->inputs.end())
      return false;

  CompNode enlarged = *nv;
  enlarged.stmts = nu->stmts;
  enlarged.stmts.insert(enlarged.stmts.end(), nv->stmts.begin(), nv->stmts.end());
  enlarged.inputs.erase(
      std::remove(enlarged.inputs.begin(), enlarged.inputs.end(), carried),
      enlarged.inputs.end());
  if (!query_stateful(enlarged, g, p, gram, immediates, opts)) return false;

  // u may still feed other consumers; if not it becomes dead and is dropped
  *nv = enlarged;
  rewire(g);
  drop_dead_stateless(g);
  renumber(g);
  return true;
}

bool try_merge(ComputationGraph& g, int u, int v, const Program& p,
               const StatefulGrammar& gram, std::span<const uint32_t> immediates,
               const SynthOptions& opts) {
  CompNode* nu = find_node(g, u);
  CompNode* nv = find_node(g, v);
  if (nu == nullptr || nv == nullptr) return false;
  if (!nu->stateful && !nv->stateful) return false;
  // u must have no other fanouts and no observable output
  std::set<std::string> po = g.po_ids();
  for (const auto& id : nu->outputs)
    if (po.count(id)) return false;
  for (const auto& e : g.edges)
    if (e.from == u && e.to != v) return false;
  bool u_feeds_v = false;
  for (const auto& e : g.edges)
    if (e.from == u && e.to == v) u_feeds_v = true;
  if (!u_feeds_v) return false;
  // v's outputs must stay expressible: at most one output overall
  if (!nv->stateful && nv->outputs.size() > 1) return false;

  CompNode merged = merged_node(*nu, *nv);
  // cheap structural prechecks before the synthesis query
  std::set<std::string> in_set;
  std::set<std::string> defined;
  for (const auto& st : merged.stmts) defined.insert(st.target);
  for (const auto& n : {nu, nv})
    for (const auto& id : n->inputs)
      if (!defined.count(id)) in_set.insert(id);
  merged.inputs.assign(in_set.begin(), in_set.end());
  int scratch = merged.out_kind == CompNode::OutKind::Stateless ? 1 : 0;
  if ((int)merged.state_vars.size() + scratch > gram.registers) return false;
  if ((int)merged.inputs.size() > gram.max_inputs) return false;

  if (!query_stateful(merged, g, p, gram, immediates, opts)) return false;

  merged.id = nu->id;
  // replace u by the merged node, drop v
  for (auto it = g.nodes.begin(); it != g.nodes.end(); ++it)
    if (it->id == v) {
      g.nodes.erase(it);
      break;
    }
  *find_node(g, u) = merged;
  rewire(g);
  drop_dead_stateless(g);
  renumber(g);
  return true;
}

ComputationGraph optimize_fixpoint(ComputationGraph g, const Program& p,
                                   const StatefulGrammar& gram,
                                   std::span<const uint32_t> immediates,
                                   const SynthOptions& opts, bool fold_enabled,
                                   bool pack_enabled) {
  for (;;) {
    bool changed = false;
    if (fold_enabled) {
      for (;;) {
        bool folded = false;
        for (const auto& e : g.edges) {
          const CompNode* from = g.node(e.from);
          const CompNode* to = g.node(e.to);
          if (from == nullptr || to == nullptr) continue;
          if (from->stateful || !to->stateful) continue;
          if (try_fold(g, e.from, e.to, p, gram, immediates, opts)) {
            folded = true;
            changed = true;
            break;  // edges invalidated
          }
        }
        if (!folded) break;
      }
    }
    if (pack_enabled) {
      for (;;) {
        bool packed = false;
        for (const auto& e : g.edges) {
          const CompNode* from = g.node(e.from);
          const CompNode* to = g.node(e.to);
          if (from == nullptr || to == nullptr) continue;
          if (!from->stateful && !to->stateful) continue;
          if (try_merge(g, e.from, e.to, p, gram, immediates, opts)) {
            packed = true;
            changed = true;
            break;
          }
        }
        if (!packed) break;
      }
    }
    if (!changed) break;
  }
  return g;
}

// ---------------------------------------------------------------------------
// Min-depth stateless synthesis
// ---------------------------------------------------------------------------

namespace {

struct SlSpecFn {
  const BciSpec& spec;
  const Program& p;

  uint32_t operator()(std::span<const uint32_t> frontier_vals) const {
    Valuation env;
    for (size_t i = 0; i < spec.frontier.size(); i++)
      env[spec.frontier[i]] = frontier_vals[i];
    for (const auto& st : spec.stmts) {
      uint32_t v = eval_expr(*st.rhs, env);
      env[st.target] = truncate_to_width(v, width_of_id(st.target, p));
    }
    return env.at(spec.target);
  }
};

// A term is a leaf (depth 0: frontier field or immediate) or an ALU applied
// to children; `vals` is its raw evaluation on the search points.
struct Term {
  StatelessConfig::Form form = StatelessConfig::Form::Mov;
  BinOp op = BinOp::Add;
  int a = -1, b = -1, c = -1, d = -1;  // child term indices (-1 = unused)
  int leaf = -1;                       // depth-0 terms: leaf pool index
  int depth = 0;
  std::vector<uint32_t> vals;
};

struct Bank {
  std::vector<Term> terms;
  std::unordered_map<uint64_t, std::vector<int>> by_hash;
  bool overflowed = false;

  static uint64_t hash_vals(const std::vector<uint32_t>& v) {
    uint64_t h = 1469598103934665603ull;
    for (uint32_t x : v) {
      h ^= x;
      h *= 1099511628211ull;
      h ^= x >> 16;
      h *= 1099511628211ull;
    }
    return h;
  }

  int find(const std::vector<uint32_t>& v) const {
    auto it = by_hash.find(hash_vals(v));
    if (it == by_hash.end()) return -1;
    for (int idx : it->second)
      if (terms[idx].vals == v) return idx;
    return -1;
  }

  bool insert(Term t, size_t budget) {
    if (find(t.vals) >= 0) return false;
    if (terms.size() >= budget) {
      overflowed = true;
      return false;
    }
    uint64_t h = hash_vals(t.vals);
    by_hash[h].push_back((int)terms.size());
    terms.push_back(std::move(t));
    return true;
  }
};

}  // namespace

std::vector<ResourceNode> synth_stateless_min_depth(
    const BciSpec& spec, const Program& p, const StatelessGrammar& gram,
    int max_depth, std::span<const uint32_t> immediates, const SynthOptions& opts,
    int* id_counter) {
  SlSpecFn fn{spec, p};
  Domain dom = make_domain((int)spec.frontier.size(), opts.verify_bits);
  auto pts = sample_points(dom, opts.search_points);
  const int out_width = width_of_id(spec.target, p);
  const size_t n_pts = pts.size();

  // Leaf pool: frontier fields (truncated to their widths) then immediates.
  struct Leaf {
    Operand op;
    std::vector<uint32_t> vals;
  };
  std::vector<Leaf> leaves;
  std::vector<int> leaf_widths;
  for (size_t i = 0; i < spec.frontier.size(); i++)
    leaf_widths.push_back(width_of_id(spec.frontier[i], p));
  {
    std::vector<uint32_t> fv;
    for (size_t i = 0; i < spec.frontier.size(); i++) {
      Leaf l;
      l.op = {Operand::Kind::Input, (int)i, 0};
      for (size_t pi = 0; pi < n_pts; pi++) {
        dom.values_at(pts[pi], fv);
        l.vals.push_back(truncate_to_width(fv[i], leaf_widths[i]));
      }
      leaves.push_back(std::move(l));
    }
    for (uint32_t imm : immediates) {
      Leaf l;
      l.op = {Operand::Kind::Imm, 0, imm};
      l.vals.assign(n_pts, imm);
      leaves.push_back(std::move(l));
    }
  }

  std::vector<uint32_t> want;
  {
    std::vector<uint32_t> fv;
    for (uint64_t pt : pts) {
      dom.values_at(pt, fv);
      for (size_t i = 0; i < fv.size(); i++)
        fv[i] = truncate_to_width(fv[i], leaf_widths[i]);
      want.push_back(fn(fv));
    }
  }

  Bank bank;
  for (size_t li = 0; li < leaves.size(); li++) {
    Term t;
    t.form = StatelessConfig::Form::Mov;
    t.leaf = (int)li;
    t.depth = 0;
    t.vals = leaves[li].vals;
    // leaves may collide in value (e.g. two zero fields); keep all so that
    // max_inputs accounting stays faithful
    uint64_t h = Bank::hash_vals(t.vals);
    bank.by_hash[h].push_back((int)bank.terms.size());
    bank.terms.push_back(std::move(t));
  }
  const size_t n_leaves = bank.terms.size();

  // Distinct ALU input ports used by a candidate (frontier fields and child
  // values count; immediates do not).
  auto port_count = [&](std::initializer_list<int> children) {
    std::set<int> fields;
    int ports = 0;
    for (int idx : children) {
      if (idx < 0) continue;
      const Term& t = bank.terms[idx];
      if (t.depth == 0) {
        if (leaves[t.leaf].op.kind == Operand::Kind::Input)
          fields.insert(leaves[t.leaf].op.index);
      } else {
        ports++;  // child ALU output occupies its own port
      }
    }
    return ports + (int)fields.size();
  };

  std::function<uint32_t(int, std::span<const uint32_t>)> term_eval =
      [&](int idx, std::span<const uint32_t> fv) -> uint32_t {
    const Term& t = bank.terms[idx];
    if (t.depth == 0) {
      const Operand& o = leaves[t.leaf].op;
      return o.kind == Operand::Kind::Imm ? o.imm : fv[o.index];
    }
    switch (t.form) {
      case StatelessConfig::Form::Mov:
        return term_eval(t.a, fv);
      case StatelessConfig::Form::Arith:
      case StatelessConfig::Form::Rel:
        return eval_binop(t.op, term_eval(t.a, fv), term_eval(t.b, fv));
      case StatelessConfig::Form::Ternary: {
        uint32_t c = eval_binop(t.op, term_eval(t.a, fv), term_eval(t.b, fv));
        return c != 0 ? term_eval(t.c, fv) : term_eval(t.d, fv);
      }
    }
    return 0;
  };

  auto confirmed = [&](int idx) {
    std::vector<uint32_t> fv;
    uint64_t limit = std::min<uint64_t>(dom.total, 1ull << 20);
    for (uint64_t pt = 0; pt < limit; pt++) {
      dom.values_at(pt, fv);
      for (size_t i = 0; i < fv.size(); i++)
        fv[i] = truncate_to_width(fv[i], leaf_widths[i]);
      if (truncate_to_width(term_eval(idx, fv), out_width) != fn(fv)) return false;
    }
    return true;
  };

  // Flattens the winning term into ALU nodes, root last.
  std::function<std::string(int, std::vector<ResourceNode>&)> emit =
      [&](int idx, std::vector<ResourceNode>& out) -> std::string {
    const Term& t = bank.terms[idx];
    ResourceNode n;
    n.id = (*id_counter)++;
    n.stateful = false;
    n.cfg.stateful = false;
    n.cfg.sl.grammar = gram.name;
    n.cfg.sl.form = t.form;
    n.cfg.sl.op = t.op;
    auto bind = [&](int child) -> Operand {
      const Term& ct = bank.terms[child];
      if (ct.depth == 0) {
        const Operand& o = leaves[ct.leaf].op;
        if (o.kind == Operand::Kind::Imm) return o;
        const std::string& field = spec.frontier[o.index];
        for (size_t i = 0; i < n.cfg.sl.input_binding.size(); i++)
          if (n.cfg.sl.input_binding[i] == field)
            return {Operand::Kind::Input, (int)i, 0};
        n.cfg.sl.input_binding.push_back(field);
        n.inputs.push_back(field);
        return {Operand::Kind::Input, (int)n.cfg.sl.input_binding.size() - 1, 0};
      }
      std::string field = emit(child, out);
      n.cfg.sl.input_binding.push_back(field);
      n.inputs.push_back(field);
      return {Operand::Kind::Input, (int)n.cfg.sl.input_binding.size() - 1, 0};
    };
    switch (t.form) {
      case StatelessConfig::Form::Mov:
        n.cfg.sl.a = bind(t.a);
        break;
      case StatelessConfig::Form::Arith:
      case StatelessConfig::Form::Rel:
        n.cfg.sl.a = bind(t.a);
        n.cfg.sl.b = bind(t.b);
        break;
      case StatelessConfig::Form::Ternary:
        n.cfg.sl.a = bind(t.a);
        n.cfg.sl.b = bind(t.b);
        n.cfg.sl.c = bind(t.c);
        n.cfg.sl.d = bind(t.d);
        break;
    }
    n.out_field = "$x" + std::to_string(n.id);
    out.push_back(std::move(n));
    return out.back().out_field;
  };

  auto finish = [&](int root_idx) -> std::vector<ResourceNode> {
    std::vector<ResourceNode> out;
    emit(root_idx, out);
    out.back().out_field = spec.target;
    return out;
  };

  auto matches_want = [&](const std::vector<uint32_t>& vals) {
    for (size_t i = 0; i < n_pts; i++)
      if (truncate_to_width(vals[i], out_width) != want[i]) return false;
    return true;
  };

  // Depth-1 bank: every single-ALU term over the leaves.
  auto build_level1 = [&]() {
    auto add = [&](Term t) {
      t.depth = 1;
      t.vals.resize(n_pts);
      for (size_t i = 0; i < n_pts; i++) {
        auto lv = [&](int child) { return bank.terms[child].vals[i]; };
        switch (t.form) {
          case StatelessConfig::Form::Mov: t.vals[i] = lv(t.a); break;
          case StatelessConfig::Form::Arith:
          case StatelessConfig::Form::Rel:
            t.vals[i] = eval_binop(t.op, lv(t.a), lv(t.b));
            break;
          case StatelessConfig::Form::Ternary: {
            uint32_t c = eval_binop(t.op, lv(t.a), lv(t.b));
            t.vals[i] = c != 0 ? lv(t.c) : lv(t.d);
            break;
          }
        }
      }
      bank.insert(std::move(t), opts.term_budget);
    };
    const int L = (int)n_leaves;
    if (gram.mov)
      for (int a = 0; a < L; a++) {
        // a mov duplicates its leaf's values; keep it anyway so plain copies
        // synthesize as movs rather than identity arithmetic
        Term t{StatelessConfig::Form::Mov, BinOp::Add, a};
        t.depth = 1;
        t.vals = leaves[bank.terms[a].leaf].vals;
        uint64_t h = Bank::hash_vals(t.vals);
        bank.by_hash[h].push_back((int)bank.terms.size());
        bank.terms.push_back(std::move(t));
      }
    for (BinOp op : gram.arith_ops)
      for (int a = 0; a < L; a++)
        for (int b = 0; b < L; b++) {
          if (port_count({a, b}) > gram.max_inputs) continue;
          add({StatelessConfig::Form::Arith, op, a, b});
        }
    for (BinOp op : gram.rel_ops)
      for (int a = 0; a < L; a++)
        for (int b = 0; b < L; b++) {
          if (port_count({a, b}) > gram.max_inputs) continue;
          add({StatelessConfig::Form::Rel, op, a, b});
        }
    if (gram.ternary)
      for (BinOp op : gram.rel_ops)
        for (int a = 0; a < L; a++)
          for (int b = 0; b < L; b++)
            for (int c = 0; c < L; c++)
              for (int d = 0; d < L; d++) {
                if (c == d) continue;  // degenerate: equals mov
                if (port_count({a, b, c, d}) > gram.max_inputs) continue;
                add({StatelessConfig::Form::Ternary, op, a, b, c, d});
              }
  };

  // Root solving at depth d: the root ALU combines terms of depth <= d-1,
  // using inverse lookups (on values truncated to the output width) for the
  // invertible operators.
  std::unordered_map<uint64_t, std::vector<int>> trunc_index;
  auto trunc_key = [&](const std::vector<uint32_t>& vals) {
    std::vector<uint32_t> t(n_pts);
    for (size_t i = 0; i < n_pts; i++) t[i] = truncate_to_width(vals[i], out_width);
    return Bank::hash_vals(t);
  };
  auto rebuild_trunc_index = [&]() {
    trunc_index.clear();
    for (size_t i = 0; i < bank.terms.size(); i++)
      trunc_index[trunc_key(bank.terms[i].vals)].push_back((int)i);
  };
  auto lookup_trunc = [&](const std::vector<uint32_t>& needed,
                          int max_child_depth) -> std::vector<int> {
    std::vector<int> out;
    auto it = trunc_index.find(Bank::hash_vals(needed));
    if (it == trunc_index.end()) return out;
    for (int idx : it->second) {
      if (bank.terms[idx].depth > max_child_depth) continue;
      bool eq = true;
      for (size_t i = 0; i < n_pts; i++)
        if (truncate_to_width(bank.terms[idx].vals[i], out_width) != needed[i]) {
          eq = false;
          break;
        }
      if (eq) out.push_back(idx);
    }
    return out;
  };

  auto try_root = [&](Term t, int depth) -> std::optional<std::vector<ResourceNode>> {
    t.depth = depth;
    t.vals.resize(n_pts);
    for (size_t i = 0; i < n_pts; i++) {
      auto cv = [&](int child) { return bank.terms[child].vals[i]; };
      if (t.form == StatelessConfig::Form::Rel ||
          t.form == StatelessConfig::Form::Arith)
        t.vals[i] = eval_binop(t.op, cv(t.a), cv(t.b));
      else
        t.vals[i] = cv(t.a);
    }
    if (!matches_want(t.vals)) return std::nullopt;
    int idx = (int)bank.terms.size();
    bank.terms.push_back(t);  // provisional, for term_eval/emit
    if (!confirmed(idx)) {
      bank.terms.pop_back();
      return std::nullopt;
    }
    return finish(idx);
  };

  auto root_solve = [&](int d) -> std::optional<std::vector<ResourceNode>> {
    rebuild_trunc_index();
    const int cd = d - 1;  // max child depth
    std::vector<uint32_t> needed(n_pts);
    // arithmetic roots via inverse lookup; try_root may grow the bank, so
    // candidates are copied out rather than referenced
    const size_t fixed_terms = bank.terms.size();
    for (size_t zi = 0; zi < fixed_terms; zi++) {
      const Term z = bank.terms[zi];
      if (z.depth > cd) continue;
      for (BinOp op : gram.arith_ops) {
        // z as the left operand: want = z op y
        bool invertible = true;
        for (size_t i = 0; i < n_pts; i++) {
          uint32_t w = want[i], a = z.vals[i];
          uint32_t y = 0;
          switch (op) {
            case BinOp::Add: y = w - a; break;
            case BinOp::Sub: y = a - w; break;
            case BinOp::BitXor: y = w ^ a; break;
            default: invertible = false; break;
          }
          if (!invertible) break;
          needed[i] = truncate_to_width(y, out_width);
        }
        if (invertible) {
          for (int yi : lookup_trunc(needed, cd)) {
            if (port_count({(int)zi, yi}) > gram.max_inputs) continue;
            if (auto r = try_root({StatelessConfig::Form::Arith, op, (int)zi, yi}, d))
              return r;
          }
          if (op == BinOp::Sub) {
            // z as the right operand: want = y - z  =>  y = want + z
            for (size_t i = 0; i < n_pts; i++)
              needed[i] = truncate_to_width(want[i] + z.vals[i], out_width);
            for (int yi : lookup_trunc(needed, cd)) {
              if (port_count({yi, (int)zi}) > gram.max_inputs) continue;
              if (auto r = try_root({StatelessConfig::Form::Arith, op, yi, (int)zi}, d))
                return r;
            }
          }
        }
      }
      // relational roots: chained lhs, leaf rhs
      for (BinOp op : gram.rel_ops) {
        if (z.depth == 0) continue;  // depth-1 territory, already covered
        for (size_t li = 0; li < n_leaves; li++) {
          if (port_count({(int)zi, (int)li}) > gram.max_inputs) continue;
          if (auto r = try_root({StatelessConfig::Form::Rel, op, (int)zi, (int)li}, d))
            return r;
        }
      }
    }
    // non-invertible arithmetic roots (&, |, etc.): bounded double loop
    std::vector<BinOp> other_ops;
    for (BinOp op : gram.arith_ops)
      if (op != BinOp::Add && op != BinOp::Sub && op != BinOp::BitXor)
        other_ops.push_back(op);
    if (!other_ops.empty() && fixed_terms <= 4000) {
      for (size_t ai = 0; ai < fixed_terms; ai++) {
        if (bank.terms[ai].depth > cd) continue;
        for (size_t bi = 0; bi < fixed_terms; bi++) {
          if (bank.terms[bi].depth > cd) continue;
          if (bank.terms[ai].depth == 0 && bank.terms[bi].depth == 0) continue;
          if (port_count({(int)ai, (int)bi}) > gram.max_inputs) continue;
          for (BinOp op : other_ops)
            if (auto r = try_root({StatelessConfig::Form::Arith, op, (int)ai, (int)bi}, d))
              return r;
        }
      }
    }
    return std::nullopt;
  };

  // Materializes depth-`d` terms so a later root_solve can chain them.
  auto build_level = [&](int d) {
    size_t existing = bank.terms.size();
    for (size_t ai = 0; ai < existing && !bank.overflowed; ai++) {
      if (bank.terms[ai].depth != d - 1) continue;
      for (size_t bi = 0; bi < existing && !bank.overflowed; bi++) {
        if (bank.terms[bi].depth > d - 1) continue;
        if (port_count({(int)ai, (int)bi}) > gram.max_inputs) continue;
        for (BinOp op : gram.arith_ops) {
          Term t{StatelessConfig::Form::Arith, op, (int)ai, (int)bi};
          t.depth = d;
          t.vals.resize(n_pts);
          for (size_t i = 0; i < n_pts; i++)
            t.vals[i] = eval_binop(op, bank.terms[ai].vals[i], bank.terms[bi].vals[i]);
          bank.insert(std::move(t), opts.term_budget);
          if (op == BinOp::Sub) {
            Term r{StatelessConfig::Form::Arith, op, (int)bi, (int)ai};
            r.depth = d;
            r.vals.resize(n_pts);
            for (size_t i = 0; i < n_pts; i++)
              r.vals[i] =
                  eval_binop(op, bank.terms[bi].vals[i], bank.terms[ai].vals[i]);
            bank.insert(std::move(r), opts.term_budget);
          }
        }
      }
      for (BinOp op : gram.rel_ops) {
        for (size_t li = 0; li < n_leaves && !bank.overflowed; li++) {
          if (port_count({(int)ai, (int)li}) > gram.max_inputs) continue;
          Term t{StatelessConfig::Form::Rel, op, (int)ai, (int)li};
          t.depth = d;
          t.vals.resize(n_pts);
          for (size_t i = 0; i < n_pts; i++)
            t.vals[i] = eval_binop(op, bank.terms[ai].vals[i], leaves[li].vals[i]);
          bank.insert(std::move(t), opts.term_budget);
        }
      }
    }
  };

  for (int depth = 1; depth <= max_depth; depth++) {
    if (depth == 1) {
      build_level1();
      for (size_t i = n_leaves; i < bank.terms.size(); i++) {
        if (bank.terms[i].depth != 1) continue;
        if (!matches_want(bank.terms[i].vals)) continue;
        if (!confirmed((int)i)) continue;
        return finish((int)i);
      }
    } else {
      if (depth >= 3) build_level(depth - 1);
      if (auto r = root_solve(depth)) return *r;
    }
    if (bank.overflowed)
      throw CompileError(Errc::SynthesisBudget, {},
                         "stateless enumeration bank overflow for '" +
                             spec.target + "'");
  }
  throw CompileError(Errc::DepthExceeded, {},
                     "no stateless tree of depth <= " + std::to_string(max_depth) +
                         " computes '" + spec.target + "'");
}

// ---------------------------------------------------------------------------
// Whole-action synthesis
// ---------------------------------------------------------------------------

std::vector<uint32_t> immediate_pool(const ActionBlock& a,
                                     std::span<const uint32_t> extra) {
  std::set<uint32_t> consts{0, 1};
  std::function<void(const Expr&)> scan = [&](const Expr& e) {
    if (e.kind == Expr::Kind::IntLit) consts.insert(e.value);
    if (e.a) scan(*e.a);
    if (e.b) scan(*e.b);
    if (e.c) scan(*e.c);
  };
  std::function<void(const std::vector<StmtPtr>&)> walk =
      [&](const std::vector<StmtPtr>& body) {
        for (const auto& st : body) {
          if (st->rhs) scan(*st->rhs);
          if (st->cond) scan(*st->cond);
          walk(st->then_body);
          walk(st->else_body);
        }
      };
  walk(a.body);
  for (uint32_t v : extra) consts.insert(v);
  return {consts.begin(), consts.end()};
}

int ResourceGraph::depth() const {
  std::map<int, int> d;
  int best = 0;
  for (const auto& n : nodes) d[n.id] = 1;
  // edges are kept topologically sorted by construction (producer ids are
  // assigned before consumer ids)
  for (bool changed = true; changed;) {
    changed = false;
    for (const auto& e : edges) {
      if (d[e.to] < d[e.from] + 1) {
        d[e.to] = d[e.from] + 1;
        changed = true;
      }
    }
  }
  for (auto& [id, depth] : d) best = std::max(best, depth);
  return best;
}

ResourceGraph synthesize_action(const ActionBlock& a, const Program& p,
                                const AluGrammarPair& grammars,
                                const SynthOptions& opts,
                                const SynthesizeFlags& flags) {
  auto fail = [&](Errc code, const std::string& msg) -> CompileError {
    return CompileError(code, a.span, "action '" + a.name + "': " + msg);
  };

  StraightLineAction sl = preprocess_action(a, p, flags.simplify);
  ComputationGraph g = build_graph(sl);
  g = normalize(std::move(g), grammars.stateful.registers);

  std::vector<uint32_t> imm_sf =
      immediate_pool(a, grammars.stateful.extra_immediates);
  std::vector<uint32_t> imm_sl =
      immediate_pool(a, grammars.stateless.extra_immediates);

  g = optimize_fixpoint(std::move(g), p, grammars.stateful, imm_sf, opts,
                        flags.fold, flags.pack);

  ResourceGraph r;
  int id_counter = 0;
  std::map<int, int> alu_of_node;          // stateful CompNode id -> ResourceNode id
  std::map<std::string, int> producer_of;  // value id -> ResourceNode id

  // Step 3: every stateful node must fit one stateful ALU.
  for (const auto& n : g.nodes) {
    if (!n.stateful) continue;
    auto cfg = query_stateful(n, g, p, grammars.stateful, imm_sf, opts);
    if (!cfg)
      throw fail(Errc::NoFit,
                 "stateful update of {" +
                     [&] {
                       std::string s;
                       for (const auto& v : n.state_vars) s += v + " ";
                       return s;
                     }() +
                     "} does not fit a '" + grammars.stateful.name + "' ALU");
    ResourceNode rn;
    rn.id = id_counter++;
    rn.stateful = true;
    rn.cfg = *cfg;
    rn.inputs = cfg->sf.input_binding;
    rn.state_vars = cfg->sf.reg_binding;
    rn.out_field = n.outputs.empty() ? "" : n.outputs[0];
    rn.span = n.span;
    alu_of_node[n.id] = rn.id;
    if (!rn.out_field.empty()) producer_of[rn.out_field] = rn.id;
    r.nodes.push_back(std::move(rn));
  }

  // Step 4: synthesis targets are the POs plus the inputs of stateful nodes.
  std::vector<std::string> targets;
  std::set<std::string> seen;
  for (const auto& n : g.nodes)
    if (n.stateful)
      for (const auto& in : n.inputs)
        if (seen.insert(in).second) targets.push_back(in);
  for (const auto& id : g.po_ids())
    if (seen.insert(id).second) targets.push_back(id);
  std::sort(targets.begin(), targets.end());

  for (const auto& o : targets) {
    if (g.pis.count(o)) continue;  // a free packet field needs no computation
    const CompNode* def = g.exporter_of(o);
    if (def != nullptr && def->stateful) {
      // direct stateful output; a PO just aliases the ALU result
      auto po = g.po_alias.find(o);
      if (po != g.po_alias.end()) {
        ResourceNode& rn = r.nodes[alu_of_node.at(def->id)];
        rn.aliases.push_back(po->second);
      }
      continue;
    }
    BciSpec spec = bci(g, o);
    try {
      auto tree = synth_stateless_min_depth(spec, p, grammars.stateless,
                                            /*max_depth=*/16, imm_sl, opts,
                                            &id_counter);
      auto po = g.po_alias.find(o);
      if (po != g.po_alias.end()) tree.back().aliases.push_back(po->second);
      for (auto& n : tree) {
        producer_of[n.out_field] = n.id;
        r.nodes.push_back(std::move(n));
      }
    } catch (CompileError& e) {
      if (e.code() == Errc::DepthExceeded || e.code() == Errc::SynthesisBudget)
        throw fail(e.code(), std::string(e.what()));
      throw;
    }
  }

  // Dead stateful copies: replicated updates whose outputs nobody reads are
  // dropped when another kept ALU still performs the same state update.
  std::set<std::string> consumed;
  for (const auto& n : r.nodes)
    for (const auto& in : n.inputs) consumed.insert(in);
  for (;;) {
    bool dropped = false;
    for (size_t i = 0; i < r.nodes.size(); i++) {
      const ResourceNode& n = r.nodes[i];
      if (!n.stateful) continue;
      bool needed = !n.aliases.empty() ||
                    (!n.out_field.empty() && consumed.count(n.out_field));
      if (needed) continue;
      bool covered = true;
      for (const auto& sv : n.state_vars) {
        if (sv.empty()) continue;
        bool other = false;
        for (size_t j = 0; j < r.nodes.size(); j++) {
          if (j == i || !r.nodes[j].stateful) continue;
          const auto& svs = r.nodes[j].state_vars;
          if (std::find(svs.begin(), svs.end(), sv) != svs.end()) other = true;
        }
        if (!other) covered = false;
      }
      if (covered) {
        r.nodes.erase(r.nodes.begin() + (long)i);
        dropped = true;
        break;
      }
    }
    if (!dropped) break;
  }

  // Edges and depths.
  std::map<std::string, int> producer;
  for (const auto& n : r.nodes)
    if (!n.out_field.empty()) producer[n.out_field] = n.id;
  for (const auto& n : r.nodes)
    for (const auto& in : n.inputs) {
      auto it = producer.find(in);
      if (it != producer.end() && it->second != n.id)
        r.edges.push_back({it->second, n.id, in});
    }
  std::sort(r.edges.begin(), r.edges.end(), [](const CompEdge& x, const CompEdge& y) {
    return std::tie(x.from, x.to, x.field) < std::tie(y.from, y.to, y.field);
  });
  std::map<int, int> depth;
  for (bool changed = true; changed;) {
    changed = false;
    for (const auto& e : r.edges) {
      int want = std::max(depth[e.from] + 1, depth[e.to]);
      if (want != depth[e.to]) {
        depth[e.to] = want;
        changed = true;
      }
    }
  }
  for (auto& n : r.nodes) n.depth = depth[n.id] + 1;
  return r;
}

}  // namespace pipecat
