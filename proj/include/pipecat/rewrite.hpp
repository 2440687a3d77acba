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

#ifndef PIPECAT_REWRITE_HPP_
#define PIPECAT_REWRITE_HPP_

#include <cstdint>
#include <vector>

#include "pipecat/guarded_deps.hpp"

namespace pipecat {

/// Wraps every bare assignment in the control block (including ones under
/// if statements) in a keyless single-action default table, so downstream
/// phases see only applies and ifs. Idempotent.
Program lower_tables(const Program& p);

struct RewriteOptions {
  // Cap on synthesized per-table entry counts (0 = uncapped); callers pass
  // the target's per-stage entry limit.
  uint64_t max_entries = 0;
  // Cap on the number of action leaves a merged region may produce; runs of
  // consecutive ifs stop growing at this bound.
  int max_leaves = 32;
};

/// Rewrites maximal runs of consecutive if-else statements into match-action
/// tables when (a) every branch condition is a conjunction of field==const
/// tests, (b) branch bodies contain only assignments, and (c) no surviving
/// dependency links two distinct branches of the run. Produces guard tables
/// whose actions are selected first-match by the recorded literal guards.
/// Regions that fail the preconditions are left intact. `deps` must be the
/// pruned dependency list computed over `cfg`, which in turn must have been
/// built from p.control.
Program rewrite_to_tables(const Program& p, const Cfg& cfg,
                          const std::vector<GuardedDependency>& deps,
                          const RewriteOptions& opts = {});

}  // namespace pipecat

#endif  // PIPECAT_REWRITE_HPP_
