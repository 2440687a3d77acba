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

#ifndef PIPECAT_TESTS_TEST_UTIL_HPP_
#define PIPECAT_TESTS_TEST_UTIL_HPP_

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "pipecat/parser.hpp"
#include "pipecat/sim.hpp"

namespace pipecat::testutil {

inline std::string data_path(const std::string& rel) {
#ifdef PIPECAT_DATA_DIR
  return std::string(PIPECAT_DATA_DIR) + "/" + rel;
#else
  return rel;
#endif
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline Program parse_file(const std::string& rel) {
  return parse(read_file(data_path(rel)));
}

// A deterministic linear congruential generator for property tests.
struct Rng {
  uint64_t state;
  explicit Rng(uint64_t seed) : state(seed) {}
  uint32_t next() {
    state = state * 6364136223846793005ull + 1442695040888963407ull;
    return (uint32_t)(state >> 33);
  }
  uint32_t below(uint32_t n) { return n == 0 ? 0 : next() % n; }
};

// Exhaustive sweep dimensions for equivalence tests: fields read anywhere
// plus all state variables, each over [0, 2^bits).
struct Sweep {
  std::vector<std::string> dims_fields;
  std::vector<std::string> dims_state;
  uint64_t total = 1;
  uint32_t per = 16;
};

inline void collect_expr_reads(const Expr& e, std::set<std::string>& fields) {
  if (e.kind == Expr::Kind::Field) fields.insert(e.name);
  if (e.a) collect_expr_reads(*e.a, fields);
  if (e.b) collect_expr_reads(*e.b, fields);
  if (e.c) collect_expr_reads(*e.c, fields);
}

inline void collect_body_reads(const std::vector<StmtPtr>& body,
                               std::set<std::string>& fields) {
  for (const auto& st : body) {
    if (st->rhs) collect_expr_reads(*st->rhs, fields);
    if (st->cond) collect_expr_reads(*st->cond, fields);
    collect_body_reads(st->then_body, fields);
    collect_body_reads(st->else_body, fields);
  }
}

inline Sweep make_sweep(const Program& p, int bits = 4) {
  Sweep s;
  s.per = 1u << bits;
  std::set<std::string> fields;
  collect_body_reads(p.control.body, fields);
  for (const auto& a : p.actions) collect_body_reads(a.body, fields);
  for (const auto& t : p.tables)
    for (const auto& k : t.keys) fields.insert(k);
  for (const auto& f : p.fields)
    if (fields.count(f.name)) s.dims_fields.push_back(f.name);
  for (const auto& sv : p.state_vars) s.dims_state.push_back(sv.name);
  for (size_t i = 0; i < s.dims_fields.size() + s.dims_state.size(); i++)
    s.total *= s.per;
  return s;
}

inline PacketState packet_at(const Program& p, const Sweep& s, uint64_t point) {
  PacketState ps = initial_packet(p);
  for (const auto& f : s.dims_fields) {
    ps.fields[f] = truncate_to_width((uint32_t)(point % s.per), p.width_of(f));
    point /= s.per;
  }
  for (const auto& sv : s.dims_state) {
    ps.state[sv] = truncate_to_width((uint32_t)(point % s.per), p.width_of(sv));
    point /= s.per;
  }
  return ps;
}

// All combinations of per-table action choices for symbolically matched
// tables applied by the program.
inline std::vector<MatchOutcomes> outcome_space(const Program& p) {
  std::vector<std::string> names;
  std::vector<int> sizes;
  for (const auto& t : p.tables) {
    if (t.is_guard_table()) continue;
    names.push_back(t.name);
    sizes.push_back((int)t.action_names.size());
  }
  std::vector<MatchOutcomes> out;
  uint64_t total = 1;
  for (int s : sizes) total *= (uint64_t)s;
  for (uint64_t i = 0; i < total; i++) {
    MatchOutcomes o;
    uint64_t at = i;
    for (size_t k = 0; k < names.size(); k++) {
      o[names[k]] = (int)(at % sizes[k]);
      at /= (uint64_t)sizes[k];
    }
    out.push_back(std::move(o));
  }
  return out;
}

}  // namespace pipecat::testutil

#endif  // PIPECAT_TESTS_TEST_UTIL_HPP_
