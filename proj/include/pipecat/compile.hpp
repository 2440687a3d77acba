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

#ifndef PIPECAT_COMPILE_HPP_
#define PIPECAT_COMPILE_HPP_

#include "pipecat/allocation.hpp"
#include "pipecat/rewrite.hpp"
#include "pipecat/sim.hpp"

namespace pipecat {

struct CompileOptions {
  bool rewrite = true;   // phase-1 if-to-table rewriting
  bool fold = true;      // folding optimization
  bool pack = true;      // predecessor packing
  bool simplify = true;  // preprocessing analyses
  int verify_bits = 4;
  SolveMode mode = SolveMode::Optimal;
};

struct DepRecord {
  std::string kind;
  std::string var;
  int from_line = 0;
  int to_line = 0;
  std::string guard;
  bool kept = true;
};

struct CompileReport {
  std::string program_name;
  std::string target_name;
  int total_stages = 0;
  std::map<std::string, int> action_depth;  // resource-graph depth per action
  struct StageOccupancy {
    int stage = 0;
    int tables = 0;
    int alus = 0;
    int props = 0;
  };
  std::vector<StageOccupancy> stages;
  std::vector<DepRecord> deps;
  bool rewriting_skipped = false;  // guard-update fallback
  struct Timings {
    double transform_ms = 0;
    double synthesis_ms = 0;
    double allocation_ms = 0;
  } timings;

  std::string text() const;
  std::string json() const;
};

struct CompileResult {
  Program phase1;  // after rewriting and table lowering
  std::map<std::string, ResourceGraph> action_graphs;
  AllocationProblem problem;
  ConstraintSet constraints;
  AllocationSolution solution;
  CompiledPipeline pipeline;
  CompileReport report;
};

/// Runs transformation, synthesis and allocation. Throws CompileError with
/// NoFit / DepthExceeded / Infeasible codes when the program does not fit.
CompileResult compile_program(const Program& p, const TargetSpec& target,
                              const AluGrammarPair& grammars,
                              const CompileOptions& opts = {});

/// The transformation phase alone (rewrite + lowering), with the guarded
/// dependency report. Used by compile_program and by --emit inspection.
struct TransformResult {
  Program program;
  std::vector<DepRecord> deps;
  bool rewriting_skipped = false;
};
TransformResult transform_phase(const Program& p, const TargetSpec& target,
                                bool rewrite_enabled);

/// Binds an allocation solution and the per-action resource graphs into an
/// executable pipeline.
CompiledPipeline assemble_pipeline(
    const Program& phase1, const AllocationProblem& ap,
    const AllocationSolution& sol,
    const std::map<std::string, ResourceGraph>& action_graphs,
    const TargetSpec& target);

}  // namespace pipecat

#endif  // PIPECAT_COMPILE_HPP_
