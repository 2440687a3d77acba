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

#include "pipecat/alu_grammar.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"
#include "pipecat/eval.hpp"

namespace pipecat {

namespace {

uint32_t operand_value(const Operand& o, std::span<const uint32_t> in,
                       std::span<const uint32_t> regs) {
  switch (o.kind) {
    case Operand::Kind::Reg: return regs[o.index];
    case Operand::Kind::Input: return in[o.index];
    case Operand::Kind::Imm: return o.imm;
  }
  return 0;
}

uint32_t eval_arm(const ArmSel& a, std::span<const uint32_t> in,
                  std::span<const uint32_t> regs) {
  uint32_t va = operand_value(a.a, in, regs);
  if (!a.is_op) return va;
  return eval_binop(a.op, va, operand_value(a.b, in, regs));
}

bool eval_cond(const CondSel& c, std::span<const uint32_t> in,
               std::span<const uint32_t> regs) {
  uint32_t lhs = operand_value(c.la, in, regs);
  if (c.lhs_is_arith) lhs = eval_binop(c.lhs_op, lhs, operand_value(c.lb, in, regs));
  return eval_binop(c.rel, lhs, operand_value(c.rb, in, regs)) != 0;
}

BinOp binop_from_text(const std::string& s) {
  static const std::pair<const char*, BinOp> table[] = {
      {"+", BinOp::Add}, {"-", BinOp::Sub}, {"*", BinOp::Mul},
      {"&", BinOp::BitAnd}, {"|", BinOp::BitOr}, {"^", BinOp::BitXor},
      {"==", BinOp::Eq}, {"!=", BinOp::Ne}, {"<", BinOp::Lt},
      {"<=", BinOp::Le}, {">", BinOp::Gt}, {">=", BinOp::Ge},
  };
  for (const auto& [text, op] : table)
    if (s == text) return op;
  throw CompileError(Errc::ConfigError, {}, "unknown operator '" + s + "' in grammar");
}

std::vector<BinOp> ops_from_json(const nlohmann::json& j) {
  std::vector<BinOp> out;
  for (const auto& s : j) out.push_back(binop_from_text(s.get<std::string>()));
  return out;
}

StatefulGrammar stateful_from_json(const nlohmann::json& j) {
  StatefulGrammar g;
  g.name = j.at("name").get<std::string>();
  g.registers = j.value("registers", 1);
  g.max_inputs = j.value("max_inputs", 2);
  g.cond_levels = j.value("cond_levels", 1);
  std::string ca = j.value("cond_arith", "reg_only");
  if (ca == "none") g.cond_arith = StatefulGrammar::CondArith::None;
  else if (ca == "reg_only") g.cond_arith = StatefulGrammar::CondArith::RegOnly;
  else if (ca == "full") g.cond_arith = StatefulGrammar::CondArith::Full;
  else throw CompileError(Errc::ConfigError, {}, "bad cond_arith '" + ca + "'");
  if (j.contains("rel_ops")) g.rel_ops = ops_from_json(j.at("rel_ops"));
  if (j.contains("arith_ops")) g.arith_ops = ops_from_json(j.at("arith_ops"));
  if (j.contains("cond_arith_ops")) g.cond_arith_ops = ops_from_json(j.at("cond_arith_ops"));
  g.mov_arm = j.value("mov_arm", true);
  g.op_arm = j.value("op_arm", true);
  g.fallthrough_identity_only = j.value("fallthrough_identity_only", false);
  g.allow_scratch_output = j.value("allow_scratch_output", true);
  for (const auto& v : j.value("extra_immediates", nlohmann::json::array()))
    g.extra_immediates.push_back(v.get<uint32_t>());
  if (g.registers < 1 || g.cond_levels < 0 || g.cond_levels > 2)
    throw CompileError(Errc::ConfigError, {}, "bad stateful grammar '" + g.name + "'");
  return g;
}

StatelessGrammar stateless_from_json(const nlohmann::json& j) {
  StatelessGrammar g;
  g.name = j.at("name").get<std::string>();
  g.max_inputs = j.value("max_inputs", 2);
  if (j.contains("arith_ops")) g.arith_ops = ops_from_json(j.at("arith_ops"));
  if (j.contains("rel_ops")) g.rel_ops = ops_from_json(j.at("rel_ops"));
  g.ternary = j.value("ternary", false);
  g.mov = j.value("mov", true);
  for (const auto& v : j.value("extra_immediates", nlohmann::json::array()))
    g.extra_immediates.push_back(v.get<uint32_t>());
  return g;
}

}  // namespace

AluGrammarPair load_grammar_file(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw CompileError(Errc::ConfigError, {}, "cannot open grammar file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw CompileError(Errc::ConfigError, {},
                       "bad grammar file " + path + ": " + e.what());
  }
  AluGrammarPair pair;
  pair.stateful = stateful_from_json(j.at("stateful"));
  pair.stateless = stateless_from_json(j.at("stateless"));
  return pair;
}

namespace {

StatelessGrammar banzai_stateless() {
  StatelessGrammar g;
  g.name = "banzai_stateless";
  g.max_inputs = 2;
  g.arith_ops = {BinOp::Add, BinOp::Sub, BinOp::BitAnd, BinOp::BitOr, BinOp::BitXor};
  g.rel_ops = {BinOp::Eq, BinOp::Ne, BinOp::Lt, BinOp::Le, BinOp::Gt, BinOp::Ge};
  g.ternary = true;
  g.mov = true;
  return g;
}

StatefulGrammar banzai_atom(const std::string& name, int cond_levels,
                            std::vector<BinOp> arith, bool pred_only,
                            int registers = 1) {
  StatefulGrammar g;
  g.name = name;
  g.registers = registers;
  g.max_inputs = 2;
  g.cond_levels = cond_levels;
  g.cond_arith = StatefulGrammar::CondArith::RegOnly;
  g.arith_ops = std::move(arith);
  g.fallthrough_identity_only = pred_only;
  return g;
}

}  // namespace

AluGrammarPair builtin_grammar(const std::string& name) {
  AluGrammarPair p;
  if (name == "tofino") {
    StatefulGrammar sf;
    sf.name = "tofino_stateful";
    sf.registers = 2;
    sf.max_inputs = 2;
    sf.cond_levels = 2;
    sf.cond_arith = StatefulGrammar::CondArith::Full;
    p.stateful = sf;
    StatelessGrammar sl;
    sl.name = "tofino_stateless";
    sl.max_inputs = 2;
    sl.arith_ops = {BinOp::Add, BinOp::Sub, BinOp::BitAnd, BinOp::BitOr,
                    BinOp::BitXor};
    sl.rel_ops = {};  // no relational or conditional stateless computation
    sl.ternary = false;
    sl.mov = true;
    p.stateless = sl;
    return p;
  }
  p.stateless = banzai_stateless();
  if (name == "banzai_raw")
    p.stateful = banzai_atom("banzai_raw", 0, {BinOp::Add}, false);
  else if (name == "banzai_pred_raw")
    p.stateful = banzai_atom("banzai_pred_raw", 1, {BinOp::Add}, true);
  else if (name == "banzai_if_else")
    p.stateful = banzai_atom("banzai_if_else", 1, {BinOp::Add}, false);
  else if (name == "banzai_sub")
    p.stateful = banzai_atom("banzai_sub", 1, {BinOp::Sub}, false);
  else if (name == "banzai_nested_if")
    p.stateful = banzai_atom("banzai_nested_if", 2, {BinOp::Add, BinOp::Sub}, false);
  else if (name == "banzai_pair")
    p.stateful =
        banzai_atom("banzai_pair", 2, {BinOp::Add, BinOp::Sub}, false, /*registers=*/2);
  else
    throw CompileError(Errc::NameError, {}, "unknown grammar '" + name + "'");
  return p;
}

int stateful_leaf_count(int cond_levels) {
  switch (cond_levels) {
    case 0: return 1;
    case 1: return 2;
    default: return 4;
  }
}

int eval_cond_leaf(const StatefulConfig& c, std::span<const uint32_t> in,
                   std::span<const uint32_t> regs) {
  if (c.conds.empty()) return 0;
  bool c0 = eval_cond(c.conds[0], in, regs);
  if (c.conds.size() == 1) return c0 ? 0 : 1;
  // two levels: leaves ordered TT, TF, FT, FF
  if (c0) return eval_cond(c.conds[1], in, regs) ? 0 : 1;
  return eval_cond(c.conds[2], in, regs) ? 2 : 3;
}

StatefulResult eval_stateful(const StatefulConfig& c, std::span<const uint32_t> in,
                             std::span<const uint32_t> regs) {
  int leaf = eval_cond_leaf(c, in, regs);
  StatefulResult r;
  r.regs.resize(regs.size());
  for (size_t slot = 0; slot < regs.size(); slot++)
    r.regs[slot] = eval_arm(c.arms.at(slot).at(leaf), in, regs);
  if (c.out_kind == StatefulConfig::Out::Pre) {
    r.out = regs[c.out_reg];
    r.has_out = true;
  } else if (c.out_kind == StatefulConfig::Out::Post) {
    r.out = r.regs[c.out_reg];
    r.has_out = true;
  }
  return r;
}

uint32_t eval_stateless(const StatelessConfig& c, std::span<const uint32_t> in) {
  auto val = [&](const Operand& o) { return operand_value(o, in, {}); };
  switch (c.form) {
    case StatelessConfig::Form::Mov:
      return val(c.a);
    case StatelessConfig::Form::Arith:
    case StatelessConfig::Form::Rel:
      return eval_binop(c.op, val(c.a), val(c.b));
    case StatelessConfig::Form::Ternary:
      return eval_binop(c.op, val(c.a), val(c.b)) != 0 ? val(c.c) : val(c.d);
  }
  return 0;
}

namespace {

std::string operand_text(const Operand& o, const std::vector<std::string>& inputs,
                         const std::vector<std::string>& regs) {
  switch (o.kind) {
    case Operand::Kind::Imm: return std::to_string(o.imm);
    case Operand::Kind::Input:
      return o.index < (int)inputs.size() ? inputs[o.index] : "in" + std::to_string(o.index);
    case Operand::Kind::Reg: {
      if (o.index < (int)regs.size() && !regs[o.index].empty()) return regs[o.index];
      return "r" + std::to_string(o.index);
    }
  }
  return "?";
}

}  // namespace

std::string describe(const AluConfig& c) {
  std::ostringstream os;
  if (c.stateful) {
    const auto& s = c.sf;
    os << s.grammar << "{";
    for (size_t i = 0; i < s.conds.size(); i++) {
      const auto& cd = s.conds[i];
      os << (i ? "; " : "") << "c" << i << ": ";
      os << operand_text(cd.la, s.input_binding, s.reg_binding);
      if (cd.lhs_is_arith)
        os << binop_text(cd.lhs_op) << operand_text(cd.lb, s.input_binding, s.reg_binding);
      os << binop_text(cd.rel) << operand_text(cd.rb, s.input_binding, s.reg_binding);
    }
    for (size_t slot = 0; slot < s.arms.size(); slot++) {
      os << "; " << (s.reg_binding[slot].empty() ? "scratch" : s.reg_binding[slot]) << ":=[";
      for (size_t leaf = 0; leaf < s.arms[slot].size(); leaf++) {
        const auto& a = s.arms[slot][leaf];
        if (leaf) os << ",";
        os << operand_text(a.a, s.input_binding, s.reg_binding);
        if (a.is_op) os << binop_text(a.op) << operand_text(a.b, s.input_binding, s.reg_binding);
      }
      os << "]";
    }
    if (s.out_kind != StatefulConfig::Out::None)
      os << "; out=" << (s.out_kind == StatefulConfig::Out::Pre ? "pre(" : "post(")
         << (s.reg_binding[s.out_reg].empty() ? "scratch" : s.reg_binding[s.out_reg]) << ")";
    os << "}";
  } else {
    const auto& s = c.sl;
    os << s.grammar << "{";
    auto opnd = [&](const Operand& o) { return operand_text(o, s.input_binding, {}); };
    switch (s.form) {
      case StatelessConfig::Form::Mov: os << opnd(s.a); break;
      case StatelessConfig::Form::Arith:
      case StatelessConfig::Form::Rel:
        os << opnd(s.a) << " " << binop_text(s.op) << " " << opnd(s.b);
        break;
      case StatelessConfig::Form::Ternary:
        os << opnd(s.a) << " " << binop_text(s.op) << " " << opnd(s.b) << " ? "
           << opnd(s.c) << " : " << opnd(s.d);
        break;
    }
    os << "}";
  }
  return os.str();
}

}  // namespace pipecat
