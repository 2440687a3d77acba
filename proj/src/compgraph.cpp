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

#include "pipecat/compgraph.hpp"

#include <algorithm>
#include <functional>
#include <sstream>

namespace pipecat {

namespace {

void collect_reads(const Expr& e, std::set<std::string>& out) {
  if (e.kind == Expr::Kind::Field) {
    out.insert(e.name);
    return;
  }
  if (e.kind == Expr::Kind::State) return;  // flank reads are not data edges
  if (e.a) collect_reads(*e.a, out);
  if (e.b) collect_reads(*e.b, out);
  if (e.c) collect_reads(*e.c, out);
}

std::set<std::string> stmt_reads(const SLStmt& st) {
  std::set<std::string> r;
  collect_reads(*st.rhs, r);
  return r;
}

// Tarjan SCC over a small adjacency-list graph; returns component index per
// vertex, components numbered in reverse topological order.
struct Tarjan {
  const std::vector<std::vector<int>>& adj;
  std::vector<int> index, low, comp;
  std::vector<int> stack;
  std::vector<bool> on_stack;
  int counter = 0, comps = 0;

  explicit Tarjan(const std::vector<std::vector<int>>& a)
      : adj(a), index(a.size(), -1), low(a.size(), 0), comp(a.size(), -1),
        on_stack(a.size(), false) {
    for (size_t v = 0; v < a.size(); v++)
      if (index[v] < 0) dfs((int)v);
  }

  void dfs(int v) {
    index[v] = low[v] = counter++;
    stack.push_back(v);
    on_stack[v] = true;
    for (int w : adj[v]) {
      if (index[w] < 0) {
        dfs(w);
        low[v] = std::min(low[v], low[w]);
      } else if (on_stack[w]) {
        low[v] = std::min(low[v], index[w]);
      }
    }
    if (low[v] == index[v]) {
      for (;;) {
        int w = stack.back();
        stack.pop_back();
        on_stack[w] = false;
        comp[w] = comps;
        if (w == v) break;
      }
      comps++;
    }
  }
};

}  // namespace

const CompNode* ComputationGraph::node(int id) const {
  for (const auto& n : nodes)
    if (n.id == id) return &n;
  return nullptr;
}

const CompNode* ComputationGraph::exporter_of(const std::string& id) const {
  for (const auto& n : nodes)
    if (std::find(n.outputs.begin(), n.outputs.end(), id) != n.outputs.end())
      return &n;
  return nullptr;
}

std::set<std::string> ComputationGraph::po_ids() const {
  std::set<std::string> out;
  for (const auto& [id, field] : po_alias) out.insert(id);
  return out;
}

void rewire(ComputationGraph& g) {
  // defs per node
  std::map<std::string, int> def_node;  // id -> node (internal defs may repeat
                                        // across replicated stateful nodes)
  std::map<int, std::set<std::string>> defs;
  for (const auto& n : g.nodes)
    for (const auto& st : n.stmts) defs[n.id].insert(st.target);

  // reads per node that are not defined inside it
  std::map<int, std::set<std::string>> external_reads;
  for (const auto& n : g.nodes) {
    std::set<std::string> reads;
    for (const auto& st : n.stmts) {
      auto r = stmt_reads(st);
      reads.insert(r.begin(), r.end());
    }
    for (const auto& id : reads)
      if (!defs[n.id].count(id)) external_reads[n.id].insert(id);
  }

  // Exporters: a node exports an id it defines when some other node reads it
  // or it is an observable final. Nodes already normalized keep their
  // assigned single output (intersected with what is still demanded; a merge
  // can absorb the only consumer, leaving no output at all).
  std::set<std::string> po = g.po_ids();
  auto demanded = [&](int node_id, const std::string& id) {
    if (po.count(id)) return true;
    for (const auto& [other, reads] : external_reads)
      if (other != node_id && reads.count(id)) return true;
    return false;
  };
  for (auto& n : g.nodes) {
    std::set<std::string> exported;
    if (n.stateful && n.normalized) {
      for (const auto& id : n.outputs)
        if (demanded(n.id, id)) exported.insert(id);
      if (exported.empty()) {
        n.out_kind = CompNode::OutKind::None;
        n.out_var.clear();
      }
    } else {
      for (const auto& id : defs[n.id])
        if (demanded(n.id, id)) exported.insert(id);
    }
    n.outputs.assign(exported.begin(), exported.end());
  }

  for (const auto& n : g.nodes)
    for (const auto& id : n.outputs) {
      if (def_node.count(id))
        throw CompileError(Errc::Internal, n.span, "two exporters of '" + id + "'");
      def_node[id] = n.id;
    }

  g.edges.clear();
  for (auto& n : g.nodes) {
    std::set<std::string> ins;
    for (const auto& id : external_reads[n.id]) {
      ins.insert(id);
      auto it = def_node.find(id);
      if (it != def_node.end()) g.edges.push_back({it->second, n.id, id});
    }
    n.inputs.assign(ins.begin(), ins.end());
  }
  std::sort(g.edges.begin(), g.edges.end(), [](const CompEdge& a, const CompEdge& b) {
    return std::tie(a.from, a.to, a.field) < std::tie(b.from, b.to, b.field);
  });
}

bool is_acyclic(const ComputationGraph& g) {
  std::map<int, std::vector<int>> adj;
  std::map<int, int> indeg;
  for (const auto& n : g.nodes) indeg[n.id] = 0;
  for (const auto& e : g.edges) {
    adj[e.from].push_back(e.to);
    indeg[e.to]++;
  }
  std::vector<int> ready;
  for (const auto& [id, d] : indeg)
    if (d == 0) ready.push_back(id);
  size_t seen = 0;
  while (!ready.empty()) {
    int v = ready.back();
    ready.pop_back();
    seen++;
    for (int w : adj[v])
      if (--indeg[w] == 0) ready.push_back(w);
  }
  return seen == g.nodes.size();
}

void renumber(ComputationGraph& g) {
  std::map<int, std::vector<int>> adj;
  std::map<int, int> indeg;
  for (const auto& n : g.nodes) indeg[n.id] = 0;
  for (const auto& e : g.edges) {
    adj[e.from].push_back(e.to);
    indeg[e.to]++;
  }
  auto order_key = [&](int id) {
    const CompNode* n = g.node(id);
    int line = n->stmts.empty() ? 0 : n->stmts.front().span.line;
    int col = n->stmts.empty() ? 0 : n->stmts.front().span.col;
    return std::tuple<int, int, int>(line, col, id);
  };
  std::vector<int> ready;
  for (const auto& [id, d] : indeg)
    if (d == 0) ready.push_back(id);
  std::map<int, int> new_id;
  int next = 0;
  while (!ready.empty()) {
    std::sort(ready.begin(), ready.end(),
              [&](int a, int b) { return order_key(a) < order_key(b); });
    int v = ready.front();
    ready.erase(ready.begin());
    new_id[v] = next++;
    for (int w : adj[v])
      if (--indeg[w] == 0) ready.push_back(w);
  }
  if (new_id.size() != g.nodes.size())
    throw CompileError(Errc::Internal, {}, "computation graph has a cycle");
  for (auto& n : g.nodes) n.id = new_id[n.id];
  for (auto& e : g.edges) {
    e.from = new_id[e.from];
    e.to = new_id[e.to];
  }
  std::sort(g.nodes.begin(), g.nodes.end(),
            [](const CompNode& a, const CompNode& b) { return a.id < b.id; });
  std::sort(g.edges.begin(), g.edges.end(), [](const CompEdge& a, const CompEdge& b) {
    return std::tie(a.from, a.to, a.field) < std::tie(b.from, b.to, b.field);
  });
}

ComputationGraph build_graph(const StraightLineAction& s) {
  ComputationGraph g;
  g.pis = s.inputs;
  g.flanks = s.flanks;
  for (const auto& [base, id] : s.final_of) g.po_alias[id] = base;

  // statement-level RAW graph
  const size_t n = s.stmts.size();
  std::map<std::string, int> def_of;
  for (size_t i = 0; i < n; i++) def_of[s.stmts[i].target] = (int)i;
  std::vector<std::vector<int>> adj(n);
  for (size_t i = 0; i < n; i++) {
    for (const auto& r : stmt_reads(s.stmts[i])) {
      auto it = def_of.find(r);
      if (it != def_of.end() && it->second != (int)i)
        adj[it->second].push_back((int)i);
    }
  }
  // flank closure: pre and post definitions form a cycle
  for (const auto& [sv, fl] : s.flanks) {
    auto pre = def_of.find(fl.first);
    auto post = def_of.find(fl.second);
    if (pre == def_of.end() || post == def_of.end())
      throw CompileError(Errc::Internal, {}, "missing flank for " + sv);
    adj[pre->second].push_back(post->second);
    adj[post->second].push_back(pre->second);
  }

  Tarjan scc(adj);
  std::map<int, std::vector<int>> members;
  for (size_t i = 0; i < n; i++) members[scc.comp[(int)i]].push_back((int)i);

  for (auto& [comp, stmt_idx] : members) {
    std::sort(stmt_idx.begin(), stmt_idx.end());
    CompNode node;
    node.id = comp;
    std::set<std::string> vars;
    for (int idx : stmt_idx) {
      node.stmts.push_back(s.stmts[idx]);
      if (!s.stmts[idx].state_var.empty()) vars.insert(s.stmts[idx].state_var);
    }
    node.stateful = !vars.empty();
    node.state_vars.assign(vars.begin(), vars.end());
    node.span = node.stmts.front().span;
    g.nodes.push_back(std::move(node));
  }
  rewire(g);
  renumber(g);
  return g;
}

namespace {

// Backward slice of `target` within a statement list, stopping at ids not
// defined by the list (node inputs and pre flanks of the enclosing node).
std::vector<SLStmt> slice_stmts(const std::vector<SLStmt>& stmts,
                                const std::string& target,
                                const std::set<std::string>& stops) {
  std::map<std::string, int> def_of;
  for (size_t i = 0; i < stmts.size(); i++) def_of[stmts[i].target] = (int)i;
  std::set<int> keep;
  std::function<void(const std::string&)> visit = [&](const std::string& id) {
    if (stops.count(id)) return;
    auto it = def_of.find(id);
    if (it == def_of.end()) return;
    if (keep.count(it->second)) return;
    keep.insert(it->second);
    for (const auto& r : stmt_reads(stmts[it->second])) visit(r);
  };
  visit(target);
  std::vector<SLStmt> out;
  for (size_t i = 0; i < stmts.size(); i++)
    if (keep.count((int)i)) out.push_back(stmts[i]);
  return out;
}

bool is_flank_of(const ComputationGraph& g, const CompNode& n, const std::string& id,
                 bool& is_pre, std::string& var) {
  for (const auto& sv : n.state_vars) {
    auto it = g.flanks.find(sv);
    if (it == g.flanks.end()) continue;
    if (it->second.first == id) {
      is_pre = true;
      var = sv;
      return true;
    }
    if (it->second.second == id) {
      is_pre = false;
      var = sv;
      return true;
    }
  }
  return false;
}

}  // namespace

ComputationGraph normalize(ComputationGraph g, int regs_per_stateful_alu) {
  const int k = regs_per_stateful_alu;
  if (k < 1)
    throw CompileError(Errc::ConfigError, {}, "stateful ALU must have >= 1 register");

  int next_id = 0;
  for (const auto& n : g.nodes) next_id = std::max(next_id, n.id + 1);

  std::vector<CompNode> result;
  std::vector<CompNode> added;
  for (auto& n : g.nodes) {
    if (!n.stateful) {
      result.push_back(n);
      continue;
    }
    // classify outputs
    std::vector<std::string> flank_outs, stateless_outs;
    for (const auto& id : n.outputs) {
      bool is_pre = false;
      std::string var;
      if (is_flank_of(g, n, id, is_pre, var))
        flank_outs.push_back(id);
      else
        stateless_outs.push_back(id);
    }
    auto make_copy = [&](const std::string& out_id) {
      CompNode c = n;
      c.id = next_id++;
      c.outputs = {out_id};
      c.normalized = true;
      bool is_pre = false;
      std::string var;
      if (is_flank_of(g, n, out_id, is_pre, var)) {
        c.out_kind = is_pre ? CompNode::OutKind::Pre : CompNode::OutKind::Post;
        c.out_var = var;
      } else {
        c.out_kind = CompNode::OutKind::Stateless;
        c.out_var = out_id;
      }
      return c;
    };

    if (n.outputs.empty()) {
      n.out_kind = CompNode::OutKind::None;
      n.normalized = true;
      result.push_back(n);
      continue;
    }
    if (stateless_outs.empty()) {
      if (n.outputs.size() == 1) {
        result.push_back(make_copy(n.outputs[0]));
      } else {
        // extra flank outputs: one copy per output
        for (const auto& id : n.outputs) added.push_back(make_copy(id));
      }
      continue;
    }
    int vars = (int)n.state_vars.size();
    if (vars < k) {
      // scratch registers can compute stateless outputs inside the ALU
      if (n.outputs.size() == 1) {
        result.push_back(make_copy(n.outputs[0]));
      } else {
        for (const auto& id : n.outputs) added.push_back(make_copy(id));
      }
      continue;
    }
    // No scratch register left: export pre and post of every state var and
    // re-derive each stateless output from the flanks in successor nodes.
    // Slices of different outputs share their interior statements, one
    // stateless node per statement.
    std::set<std::string> stops(n.inputs.begin(), n.inputs.end());
    for (const auto& sv : n.state_vars) stops.insert(g.flanks.at(sv).first);
    for (const auto& sv : n.state_vars) {
      added.push_back(make_copy(g.flanks.at(sv).first));
      added.push_back(make_copy(g.flanks.at(sv).second));
    }
    std::set<std::string> extracted;
    for (const auto& x : stateless_outs) {
      for (const auto& st : slice_stmts(n.stmts, x, stops)) {
        if (!extracted.insert(st.target).second) continue;
        CompNode succ;
        succ.id = next_id++;
        succ.stateful = false;
        succ.stmts = {st};
        succ.span = st.span;
        added.push_back(std::move(succ));
      }
    }
  }
  for (auto& c : added) result.push_back(std::move(c));
  g.nodes = std::move(result);

  rewire(g);
  renumber(g);

  for (const auto& n : g.nodes)
    if (n.stateful && n.outputs.size() > 1)
      throw CompileError(Errc::Internal, n.span,
                         "stateful node still has several outputs");
  return g;
}

BciSpec bci(const ComputationGraph& g, const std::string& o) {
  // accept a declared field name for a PO
  std::string target = o;
  for (const auto& [id, field] : g.po_alias)
    if (field == o) target = id;

  std::set<std::string> valid = g.po_ids();
  for (const auto& n : g.nodes)
    if (n.stateful)
      for (const auto& id : n.inputs) valid.insert(id);
  if (!valid.count(target))
    throw CompileError(Errc::UnknownOutput, {},
                       "'" + o + "' is neither a primary output nor a stateful input");

  BciSpec spec;
  spec.target = target;
  std::set<std::string> frontier;
  std::set<int> included;
  std::function<void(const std::string&)> back = [&](const std::string& id) {
    const CompNode* def = g.exporter_of(id);
    if (def == nullptr || def->stateful) {
      frontier.insert(id);  // PI or stateful output
      return;
    }
    if (included.count(def->id)) return;
    included.insert(def->id);
    for (const auto& in : def->inputs) back(in);
  };
  back(target);
  spec.node_ids.assign(included.begin(), included.end());
  std::sort(spec.node_ids.begin(), spec.node_ids.end());
  spec.frontier.assign(frontier.begin(), frontier.end());
  for (int id : spec.node_ids) {
    const CompNode* n = g.node(id);
    for (const auto& st : n->stmts) spec.stmts.push_back(st);
  }
  return spec;
}

GraphEval eval_graph(const ComputationGraph& g, const Program& p,
                     const Valuation& inputs, const Valuation& state) {
  GraphEval r;
  r.values = inputs;
  r.state = state;
  Valuation env = inputs;
  for (const auto& [k, v] : state) env[k] = v;
  // nodes are topologically numbered; statement duplicates recompute the
  // same values, which keeps the environment consistent
  for (const auto& n : g.nodes) {
    for (const auto& st : n.stmts) {
      uint32_t v = eval_expr(*st.rhs, env);
      env[st.target] = truncate_to_width(v, width_of_id(st.target, p));
    }
  }
  for (const auto& [sv, fl] : g.flanks)
    if (env.count(fl.second)) r.state[sv] = env.at(fl.second);
  r.values = env;
  return r;
}

std::string to_dot(const ComputationGraph& g) {
  std::ostringstream os;
  os << "digraph G {\n  rankdir=TB;\n";
  for (const auto& n : g.nodes) {
    os << "  n" << n.id << " [label=\"" << n.id << ": ";
    for (size_t i = 0; i < n.stmts.size() && i < 3; i++) {
      if (i) os << "\\n";
      os << n.stmts[i].target << " = ...";
    }
    if (n.stmts.size() > 3) os << "\\n...";
    os << "\"";
    if (n.stateful) os << ", shape=box, style=filled, fillcolor=lightblue";
    else os << ", shape=ellipse, style=filled, fillcolor=lightyellow";
    os << "];\n";
  }
  for (const auto& e : g.edges)
    os << "  n" << e.from << " -> n" << e.to << " [label=\"" << e.field << "\"];\n";
  os << "}\n";
  return os.str();
}

}  // namespace pipecat
