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

#include "pipecat/guarded_deps.hpp"

#include <algorithm>

#include "pipecat/eval.hpp"

namespace pipecat {

const char* dep_kind_name(DepKind k) {
  switch (k) {
    case DepKind::RAW: return "RAW";
    case DepKind::WAR: return "WAR";
    case DepKind::WAW: return "WAW";
  }
  return "?";
}

std::vector<GuardedDependency> guarded_deps(const Cfg& g,
                                            const std::map<int, PathCondition>& pc) {
  std::vector<GuardedDependency> out;
  std::vector<const CfgNode*> stmts;
  for (const auto& n : g.nodes)
    if (n.kind == CfgNode::Kind::Stmt) stmts.push_back(&n);

  for (size_t i = 0; i < stmts.size(); i++) {
    for (size_t j = i + 1; j < stmts.size(); j++) {
      const CfgNode& a = *stmts[i];
      const CfgNode& b = *stmts[j];
      PathCondition guard = conjoin(pc.at(a.id), pc.at(b.id));
      auto emit = [&](const std::string& var, DepKind kind) {
        out.push_back({var, a.id, b.id, kind, guard, a.stmt, b.stmt});
      };
      for (const auto& v : a.writes) {
        if (b.writes.count(v)) emit(v, DepKind::WAW);
        if (b.reads.count(v)) emit(v, DepKind::RAW);
      }
      for (const auto& v : a.reads)
        if (b.writes.count(v)) emit(v, DepKind::WAR);
    }
  }
  return out;
}

namespace {

// Allowed-value set for one field: [lo, hi] minus an exclusion list.
struct FieldDomain {
  uint64_t lo = 0;
  uint64_t hi = 0;
  std::vector<uint64_t> excluded;

  bool empty() const {
    if (lo > hi) return true;
    uint64_t range = hi - lo + 1;
    uint64_t cut = 0;
    for (uint64_t e : excluded)
      if (e >= lo && e <= hi) cut++;
    // exclusions may repeat; if the range is larger than the list some value
    // survives, otherwise probe values upward from lo
    if (range > cut) return false;
    for (uint64_t v = lo; v <= hi; v++) {
      if (std::find(excluded.begin(), excluded.end(), v) == excluded.end())
        return false;
      if (v == hi) break;
    }
    return true;
  }
};

}  // namespace

bool literals_satisfiable(std::span<const CmpLiteral> lits,
                          const std::map<std::string, int>& widths) {
  std::map<std::string, FieldDomain> doms;
  for (const auto& l : lits) {
    auto it = doms.find(l.field);
    if (it == doms.end()) {
      int w = 32;
      auto wit = widths.find(l.field);
      if (wit != widths.end()) w = wit->second;
      FieldDomain d;
      d.lo = 0;
      d.hi = w >= 32 ? 0xFFFFFFFFull : ((1ull << w) - 1);
      it = doms.emplace(l.field, d).first;
    }
    FieldDomain& d = it->second;
    uint64_t c = l.value;
    switch (l.rel) {
      case BinOp::Eq:
        d.lo = std::max(d.lo, c);
        d.hi = std::min(d.hi, c);
        break;
      case BinOp::Ne:
        d.excluded.push_back(c);
        break;
      case BinOp::Lt:
        if (c == 0) return false;
        d.hi = std::min(d.hi, c - 1);
        break;
      case BinOp::Le:
        d.hi = std::min(d.hi, c);
        break;
      case BinOp::Gt:
        d.lo = std::max(d.lo, c + 1);
        break;
      case BinOp::Ge:
        d.lo = std::max(d.lo, c);
        break;
      default:
        // cross-field or non-literal relations never reach here
        break;
    }
  }
  for (const auto& [f, d] : doms)
    if (d.empty()) return false;
  return true;
}

bool guard_satisfiable(const PathCondition& guard,
                       const std::map<std::string, int>& widths) {
  if (guard.opaque) return true;  // conservatively satisfiable
  return literals_satisfiable(guard.literals, widths);
}

std::vector<GuardedDependency> prune_false_deps(
    const std::vector<GuardedDependency>& deps,
    const std::map<std::string, int>& widths) {
  std::vector<GuardedDependency> out;
  for (const auto& d : deps)
    if (guard_satisfiable(d.guard, widths)) out.push_back(d);
  return out;
}

std::map<std::string, int> field_widths(const Program& p) {
  std::map<std::string, int> out;
  for (const auto& f : p.fields) out[f.name] = f.width;
  for (const auto& s : p.state_vars) out[s.name] = s.width;
  return out;
}

}  // namespace pipecat
