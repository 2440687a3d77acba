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

#include "pipecat/compile.hpp"

#include <chrono>
#include <sstream>

#include "json.hpp"
#include "pipecat/preprocess.hpp"

namespace pipecat {

namespace {

double ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                   t0)
      .count();
}

std::string guard_text(const PathCondition& pc) {
  if (pc.opaque) return "<opaque>";
  std::ostringstream os;
  for (size_t i = 0; i < pc.literals.size(); i++) {
    if (i) os << " && ";
    os << pc.literals[i].field << " " << binop_text(pc.literals[i].rel) << " "
       << pc.literals[i].value;
  }
  if (pc.literals.empty()) os << "true";
  return os.str();
}

}  // namespace

TransformResult transform_phase(const Program& p, const TargetSpec& target,
                                bool rewrite_enabled) {
  TransformResult tr;
  tr.program = p;
  Cfg cfg = build_cfg(p.control, p);
  try {
    auto pc = path_conditions(cfg);
    auto deps = guarded_deps(cfg, pc);
    auto widths = field_widths(p);
    auto pruned = prune_false_deps(deps, widths);
    std::set<std::pair<const Stmt*, const Stmt*>> kept;
    for (const auto& d : pruned) kept.insert({d.from_stmt.get(), d.to_stmt.get()});
    for (const auto& d : deps) {
      DepRecord rec;
      rec.kind = dep_kind_name(d.kind);
      rec.var = d.var;
      rec.from_line = d.from_stmt ? d.from_stmt->span.line : 0;
      rec.to_line = d.to_stmt ? d.to_stmt->span.line : 0;
      rec.guard = guard_text(d.guard);
      rec.kept = guard_satisfiable(d.guard, widths);
      tr.deps.push_back(rec);
    }
    if (rewrite_enabled) {
      RewriteOptions ro;
      ro.max_entries = target.n_entries_per_table;
      tr.program = rewrite_to_tables(p, cfg, pruned, ro);
    }
  } catch (const CompileError& e) {
    if (e.code() != Errc::GuardUpdateDetected) throw;
    tr.rewriting_skipped = true;  // conservative fallback: no rewrites at all
  }
  tr.program = lower_tables(tr.program);
  return tr;
}

CompiledPipeline assemble_pipeline(
    const Program& phase1, const AllocationProblem& ap,
    const AllocationSolution& sol,
    const std::map<std::string, ResourceGraph>& action_graphs,
    const TargetSpec& target) {
  CompiledPipeline cp;
  cp.stages_used = sol.cost;
  cp.n_stages = target.n_stages;
  cp.n_alus_per_stage = target.n_alus_per_stage;
  cp.n_header_alus = target.n_header_alus;
  cp.propagation_alus = target.propagation_alus;
  cp.state_vars = phase1.state_vars;
  for (const auto& f : phase1.fields) cp.widths[f.name] = f.width;
  for (const auto& s : phase1.state_vars) cp.widths[s.name] = s.width;

  // Per-instance prefix keeps one action's temporaries distinct from another
  // instance of the same value names.
  auto rename = [&](const std::string& id, int table_idx, int action) {
    if (id.empty() || id.find('$') == std::string::npos) return id;
    return "i" + std::to_string(table_idx) + "a" + std::to_string(action) + ":" + id;
  };

  std::map<std::string, PathCondition> gates;
  for (const auto& at : applied_tables(phase1)) gates[at.name] = at.gate;

  std::map<int, const ResourceNode*> rnode_of;  // alu id -> resource node
  for (const auto& alu : ap.alus) {
    if (alu.action < 0) continue;  // match anchor
    const auto& pt = ap.tables[alu.table];
    const ResourceGraph& rg = action_graphs.at(pt.action_names[alu.action]);
    const ResourceNode* rn = nullptr;
    for (const auto& n : rg.nodes)
      if (n.id == alu.rnode) rn = &n;
    if (rn == nullptr)
      throw CompileError(Errc::Internal, {}, "missing resource node");
    rnode_of[alu.id] = rn;

    PlacedAlu pa;
    pa.id = alu.id;
    pa.table = pt.table;
    pa.partition = pt.partition;
    pa.action_index = alu.action;
    pa.stage = sol.stage.at(alu.id);
    pa.cfg = rn->cfg;
    pa.out_field = rename(rn->out_field, alu.table, alu.action);
    pa.aliases = rn->aliases;
    pa.state_vars = rn->state_vars;
    for (const auto& in : rn->inputs)
      pa.inputs.push_back(rename(in, alu.table, alu.action));
    if (pa.cfg.stateful) {
      for (auto& b : pa.cfg.sf.input_binding) b = rename(b, alu.table, alu.action);
    } else {
      for (auto& b : pa.cfg.sl.input_binding) b = rename(b, alu.table, alu.action);
    }
    if (!pa.out_field.empty() && !cp.widths.count(pa.out_field))
      cp.widths[pa.out_field] = width_of_id(rn->out_field, phase1);
    cp.alus.push_back(std::move(pa));
  }

  for (size_t ti = 0; ti < ap.tables.size(); ti++) {
    const auto& pt = ap.tables[ti];
    PlacedTable t;
    t.name = pt.table;
    t.partition = pt.partition;
    for (const auto& [tbl, s] : sol.match_placement)
      if (tbl == (int)ti) t.stages.push_back(s);
    std::sort(t.stages.begin(), t.stages.end());
    t.gate = gates.count(pt.table) ? gates[pt.table] : PathCondition{};
    const Table* decl = phase1.find_table(pt.table);
    if (decl != nullptr) {
      t.guards = decl->guards;
      t.action_names = decl->action_names;
    }
    cp.tables.push_back(std::move(t));
  }

  for (const auto& [producer, stage] : sol.props) {
    auto it = rnode_of.find(producer);
    if (it == rnode_of.end()) continue;
    const auto& alu = ap.alus[producer];
    cp.props.push_back(
        {producer, rename(it->second->out_field, alu.table, alu.action), stage});
  }
  return cp;
}

CompileResult compile_program(const Program& p, const TargetSpec& target,
                              const AluGrammarPair& grammars,
                              const CompileOptions& opts) {
  CompileResult res;
  res.report.target_name = target.name;
  auto t0 = std::chrono::steady_clock::now();

  // Phase 1: resource transformation
  TransformResult tr = transform_phase(p, target, opts.rewrite);
  res.phase1 = tr.program;
  res.report.deps = tr.deps;
  res.report.rewriting_skipped = tr.rewriting_skipped;
  res.report.timings.transform_ms = ms_since(t0);

  // Phase 2: resource synthesis per referenced action
  t0 = std::chrono::steady_clock::now();
  SynthOptions sopts;
  sopts.verify_bits = opts.verify_bits;
  SynthesizeFlags flags;
  flags.simplify = opts.simplify;
  flags.fold = opts.fold;
  flags.pack = opts.pack;
  for (const auto& at : applied_tables(res.phase1)) {
    const Table* t = res.phase1.find_table(at.name);
    for (const auto& an : t->action_names) {
      if (res.action_graphs.count(an)) continue;
      const ActionBlock* a = res.phase1.find_action(an);
      res.action_graphs[an] = synthesize_action(*a, res.phase1, grammars, sopts, flags);
    }
  }
  for (const auto& [name, rg] : res.action_graphs)
    res.report.action_depth[name] = rg.depth();
  res.report.timings.synthesis_ms = ms_since(t0);

  // Phase 3: resource allocation
  t0 = std::chrono::steady_clock::now();
  res.problem = partition_tables(res.phase1, res.action_graphs, target);
  res.constraints = build_constraints(res.problem, target);
  if (res.constraints.infeasible)
    throw CompileError(Errc::Infeasible, {}, res.constraints.infeasible_reason);
  auto sol = solve(res.constraints, opts.mode);
  if (!sol)
    throw CompileError(Errc::Infeasible, {},
                       "program does not fit target '" + target.name + "'");
  res.solution = duplicate_multistage_matches(*sol, res.problem);
  res.report.timings.allocation_ms = ms_since(t0);

  res.pipeline = assemble_pipeline(res.phase1, res.problem, res.solution,
                                   res.action_graphs, target);
  res.report.total_stages = res.solution.cost;

  // occupancy
  std::map<int, CompileReport::StageOccupancy> occ;
  for (const auto& [tbl, s] : res.solution.match_placement) occ[s].tables++;
  for (const auto& alu : res.problem.alus)
    if (alu.occupies_alu_slot) occ[res.solution.stage.at(alu.id)].alus++;
  for (const auto& [u, s] : res.solution.props) occ[s].props++;
  for (auto& [s, o] : occ) {
    o.stage = s;
    res.report.stages.push_back(o);
  }
  return res;
}

std::string CompileReport::text() const {
  std::ostringstream os;
  os << "target: " << target_name << "\n";
  os << "stages used: " << total_stages << "\n";
  if (rewriting_skipped)
    os << "note: rewriting skipped (a branch condition variable is updated)\n";
  os << "per-action resource depth:\n";
  for (const auto& [name, d] : action_depth)
    os << "  " << name << ": " << d << "\n";
  os << "per-stage occupancy (tables/alus/props):\n";
  for (const auto& s : stages)
    os << "  stage " << s.stage << ": " << s.tables << "/" << s.alus << "/"
       << s.props << "\n";
  int pruned = 0;
  for (const auto& d : deps)
    if (!d.kept) pruned++;
  os << "dependencies: " << deps.size() << " (" << pruned << " pruned)\n";
  os << "timings: transform " << timings.transform_ms << " ms, synthesis "
     << timings.synthesis_ms << " ms, allocation " << timings.allocation_ms
     << " ms\n";
  return os.str();
}

std::string CompileReport::json() const {
  nlohmann::json j;
  j["target"] = target_name;
  j["stages_used"] = total_stages;
  j["rewriting_skipped"] = rewriting_skipped;
  j["action_depth"] = action_depth;
  j["stage_occupancy"] = nlohmann::json::array();
  for (const auto& s : stages)
    j["stage_occupancy"].push_back(
        {{"stage", s.stage}, {"tables", s.tables}, {"alus", s.alus}, {"props", s.props}});
  j["dependencies"] = nlohmann::json::array();
  for (const auto& d : deps)
    j["dependencies"].push_back({{"kind", d.kind},
                                 {"var", d.var},
                                 {"from_line", d.from_line},
                                 {"to_line", d.to_line},
                                 {"guard", d.guard},
                                 {"kept", d.kept}});
  j["timings_ms"] = {{"transform", timings.transform_ms},
                     {"synthesis", timings.synthesis_ms},
                     {"allocation", timings.allocation_ms}};
  return j.dump(2);
}

}  // namespace pipecat
