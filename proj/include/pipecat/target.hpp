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

#ifndef PIPECAT_TARGET_HPP_
#define PIPECAT_TARGET_HPP_

#include <cstdint>
#include <string>

namespace pipecat {

/// Pipeline resource constants. `propagation_alus` distinguishes targets
/// that spend ALUs to carry intermediates across stages from ones with
/// dedicated tag-along containers; without it N_H is 0 and no propagation
/// slots are accounted.
struct TargetSpec {
  std::string name;
  int n_stages = 12;            // N_S
  int n_alus_per_stage = 32;    // N_alu
  int n_header_alus = 0;        // N_H (must be < N_alu)
  int n_tables_per_stage = 8;   // N_table
  uint64_t n_entries_per_table = 1024;  // N_entries
  bool propagation_alus = false;
  std::string stateful_grammar;   // grammar file reference (optional)
  std::string stateless_grammar;

  void validate() const;  // throws ConfigError
};

TargetSpec load_target_file(const std::string& path);

}  // namespace pipecat

#endif  // PIPECAT_TARGET_HPP_
