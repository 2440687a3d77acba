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

#include "pipecat/sim.hpp"

#include <algorithm>

namespace pipecat {

PacketState initial_packet(const Program& p) {
  PacketState ps;
  for (const auto& f : p.fields) ps.fields[f.name] = 0;
  for (const auto& s : p.state_vars)
    ps.state[s.name] = truncate_to_width(s.init, s.width);
  return ps;
}

namespace {

struct SourceInterp {
  const Program& p;
  PacketState& ps;
  const MatchOutcomes& outcomes;

  Valuation env() const {
    Valuation v = ps.fields;
    for (const auto& [k, val] : ps.state) v[k] = val;
    return v;
  }

  void assign(const LValue& lhs, uint32_t value) {
    int w = p.width_of(lhs.name);
    if (lhs.is_state)
      ps.state[lhs.name] = truncate_to_width(value, w);
    else
      ps.fields[lhs.name] = truncate_to_width(value, w);
  }

  void run_body(const std::vector<StmtPtr>& body) {
    for (const auto& st : body) {
      switch (st->kind) {
        case Stmt::Kind::Assign:
          assign(st->lhs, eval_expr(*st->rhs, env()));
          break;
        case Stmt::Kind::If:
          if (eval_expr(*st->cond, env()) != 0)
            run_body(st->then_body);
          else
            run_body(st->else_body);
          break;
        case Stmt::Kind::Apply:
          apply_table(st->table, st->span);
          break;
      }
    }
  }

  void apply_table(const std::string& name, Span span) {
    const Table* t = p.find_table(name);
    if (t == nullptr)
      throw CompileError(Errc::UnmatchedTable, span, "unknown table '" + name + "'");
    int action = -1;
    if (t->is_guard_table()) {
      Valuation v = env();
      for (size_t i = 0; i < t->guards.size(); i++) {
        bool hit = true;
        for (const auto& lit : t->guards[i])
          if (!eval_literal(lit, v)) { hit = false; break; }
        if (hit) { action = (int)i; break; }
      }
      if (action < 0) return;  // miss: no-op
    } else {
      auto it = outcomes.find(name);
      if (it == outcomes.end())
        throw CompileError(Errc::UnmatchedTable, span,
                           "no match outcome for table '" + name + "'");
      action = it->second;
    }
    if (action < 0 || action >= (int)t->action_names.size())
      throw CompileError(Errc::UnmatchedTable, span,
                         "bad action index for table '" + name + "'");
    const ActionBlock* a = p.find_action(t->action_names[action]);
    if (a == nullptr)
      throw CompileError(Errc::Internal, span, "missing action body");
    run_body(a->body);
  }
};

}  // namespace

PacketState interpret_source(const Program& p, PacketState pkt,
                             const MatchOutcomes& outcomes) {
  SourceInterp interp{p, pkt, outcomes};
  interp.run_body(p.control.body);
  return pkt;
}

// ---------------------------------------------------------------------------
// Pipeline execution
// ---------------------------------------------------------------------------

namespace {

bool is_declared(const CompiledPipeline& cp, const std::string& name) {
  return cp.widths.count(name) != 0 && name.find('$') == std::string::npos;
}

}  // namespace

PacketState interpret_pipeline(const CompiledPipeline& cp, PacketState pkt,
                               const MatchOutcomes& outcomes) {
  // Current value of every id; temporaries appear once produced.
  Valuation vals = pkt.fields;
  Valuation regs = pkt.state;

  // Producer stage per temporary, for availability checks.
  std::map<std::string, int> produced_at;
  std::map<std::string, std::vector<int>> prop_stages;
  for (const auto& pr : cp.props) prop_stages[pr.field].push_back(pr.stage);

  // Per-table decision, fixed at the first stage the match is placed in.
  std::map<std::string, int> decision;  // -1 = gated off / miss

  auto available = [&](const std::string& id, int stage, Span span) {
    if (is_declared(cp, id)) return;  // header transport carries it
    auto it = produced_at.find(id);
    if (it == produced_at.end())
      throw CompileError(Errc::ConfigError, span,
                         "ALU reads '" + id + "' which is never produced");
    int p = it->second;
    if (p >= stage)
      throw CompileError(Errc::ConfigError, span,
                         "ALU reads '" + id + "' in stage " + std::to_string(stage) +
                             " but it is produced in stage " + std::to_string(p));
    if (!cp.propagation_alus) return;
    const auto& stages = prop_stages[id];
    for (int s = p + 1; s < stage; s++) {
      if (std::find(stages.begin(), stages.end(), s) == stages.end())
        throw CompileError(Errc::ConfigError, span,
                           "'" + id + "' not propagated through stage " +
                               std::to_string(s));
    }
  };

  for (const auto& alu : cp.alus)
    if (!alu.out_field.empty() && !is_declared(cp, alu.out_field)) {
      auto it = produced_at.find(alu.out_field);
      if (it == produced_at.end() || alu.stage < it->second)
        produced_at[alu.out_field] = alu.stage;
    }

  for (int stage = 1; stage <= cp.stages_used; stage++) {
    // Match decisions at stage entry, on stage-input values.
    for (const auto& t : cp.tables) {
      if (t.stages.empty() || t.stages.front() != stage) continue;
      if (decision.count(t.name)) continue;  // partitions share the decision
      bool applies = true;
      if (t.gate.opaque)
        throw CompileError(Errc::ConfigError, {}, "opaque gate on table " + t.name);
      for (const auto& lit : t.gate.literals)
        if (!eval_literal(lit, vals)) { applies = false; break; }
      if (!applies) {
        decision[t.name] = -1;
        continue;
      }
      if (!t.guards.empty()) {
        int hit = -1;
        for (size_t i = 0; i < t.guards.size(); i++) {
          bool ok = true;
          for (const auto& lit : t.guards[i])
            if (!eval_literal(lit, vals)) { ok = false; break; }
          if (ok) { hit = (int)i; break; }
        }
        decision[t.name] = hit;
      } else {
        auto it = outcomes.find(t.name);
        if (it == outcomes.end())
          throw CompileError(Errc::UnmatchedTable, {},
                             "no match outcome for table '" + t.name + "'");
        if (it->second < 0 || it->second >= (int)t.action_names.size())
          throw CompileError(Errc::UnmatchedTable, {},
                             "bad action index for table '" + t.name + "'");
        decision[t.name] = it->second;
      }
    }

    // All ALUs of the stage read stage-input values, then commit together.
    std::map<std::string, uint32_t> writes;
    std::map<std::string, uint32_t> reg_writes;
    auto write = [&](const std::string& id, uint32_t v, Span span) {
      auto wit = cp.widths.find(id);
      if (wit != cp.widths.end()) v = truncate_to_width(v, wit->second);
      auto it = writes.find(id);
      if (it != writes.end() && it->second != v)
        throw CompileError(Errc::Internal, span,
                           "conflicting writes to '" + id + "' in stage " +
                               std::to_string(stage));
      writes[id] = v;
    };

    for (const auto& alu : cp.alus) {
      if (alu.stage != stage) continue;
      if (alu.partition != 0) continue;  // a packet hits at most one partition
      auto dit = decision.find(alu.table);
      if (dit == decision.end())
        throw CompileError(Errc::ConfigError, {},
                           "ALU of table '" + alu.table + "' placed before its match");
      if (dit->second != alu.action_index) continue;

      std::vector<uint32_t> in;
      for (const auto& id : alu.inputs) {
        available(id, stage, {});
        auto it = vals.find(id);
        if (it == vals.end())
          throw CompileError(Errc::ConfigError, {}, "ALU reads unknown '" + id + "'");
        in.push_back(it->second);
      }
      if (alu.cfg.stateful) {
        std::vector<uint32_t> r(alu.state_vars.size(), 0);
        for (size_t slot = 0; slot < alu.state_vars.size(); slot++)
          if (!alu.state_vars[slot].empty()) r[slot] = regs.at(alu.state_vars[slot]);
        StatefulResult res = eval_stateful(alu.cfg.sf, in, r);
        for (size_t slot = 0; slot < alu.state_vars.size(); slot++) {
          const std::string& sv = alu.state_vars[slot];
          if (sv.empty()) continue;
          uint32_t v = truncate_to_width(res.regs[slot], cp.widths.at(sv));
          auto it = reg_writes.find(sv);
          if (it != reg_writes.end() && it->second != v)
            throw CompileError(Errc::Internal, {},
                               "replicated ALUs disagree on state '" + sv + "'");
          reg_writes[sv] = v;
        }
        if (res.has_out && !alu.out_field.empty()) {
          write(alu.out_field, res.out, {});
          for (const auto& alias : alu.aliases) write(alias, res.out, {});
        }
      } else {
        uint32_t v = eval_stateless(alu.cfg.sl, in);
        write(alu.out_field, v, {});
        for (const auto& alias : alu.aliases) write(alias, v, {});
      }
    }

    for (const auto& [k, v] : writes) vals[k] = v;
    for (const auto& [k, v] : reg_writes) regs[k] = v;
  }

  PacketState out;
  for (const auto& [k, v] : pkt.fields) out.fields[k] = vals.at(k);
  out.state = regs;
  return out;
}

}  // namespace pipecat
