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

#include "pipecat/target.hpp"

#include <fstream>

#include "json.hpp"
#include "pipecat/diag.hpp"

namespace pipecat {

void TargetSpec::validate() const {
  auto bad = [&](const std::string& msg) {
    return CompileError(Errc::ConfigError, {}, "target '" + name + "': " + msg);
  };
  if (n_stages < 1) throw bad("n_stages must be positive");
  if (n_alus_per_stage < 1) throw bad("n_alus_per_stage must be positive");
  if (n_tables_per_stage < 1) throw bad("n_tables_per_stage must be positive");
  if (n_entries_per_table < 1) throw bad("n_entries_per_table must be positive");
  if (n_header_alus < 0 || n_header_alus >= n_alus_per_stage)
    throw bad("n_header_alus must be in [0, n_alus_per_stage)");
}

TargetSpec load_target_file(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw CompileError(Errc::ConfigError, {}, "cannot open target file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw CompileError(Errc::ConfigError, {},
                       "bad target file " + path + ": " + e.what());
  }
  TargetSpec t;
  t.name = j.value("name", path);
  t.n_stages = j.value("n_stages", t.n_stages);
  t.n_alus_per_stage = j.value("n_alus_per_stage", t.n_alus_per_stage);
  t.n_header_alus = j.value("n_header_alus", t.n_header_alus);
  t.n_tables_per_stage = j.value("n_tables_per_stage", t.n_tables_per_stage);
  t.n_entries_per_table = j.value("n_entries_per_table", t.n_entries_per_table);
  t.propagation_alus = j.value("propagation_alus", t.propagation_alus);
  t.stateful_grammar = j.value("stateful_grammar", std::string());
  t.stateless_grammar = j.value("stateless_grammar", std::string());
  t.validate();
  return t;
}

}  // namespace pipecat
