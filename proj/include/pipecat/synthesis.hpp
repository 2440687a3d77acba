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

#ifndef PIPECAT_SYNTHESIS_HPP_
#define PIPECAT_SYNTHESIS_HPP_

#include <optional>

#include "pipecat/alu_grammar.hpp"
#include "pipecat/compgraph.hpp"

namespace pipecat {

struct SynthOptions {
  int verify_bits = 4;          // exhaustive verification over this width
  int search_points = 128;      // sampled signature length during search
  size_t term_budget = 150000;  // stateless bank cap across levels
};

/// Enumerative check that a normalized stateful node fits one stateful ALU:
/// every hole assignment of the grammar template is tried (factored by the
/// condition tree) and the winning configuration is verified exhaustively
/// over the bounded domain. nullopt = no fit (an expected outcome).
std::optional<AluConfig> query_stateful(const CompNode& node,
                                        const ComputationGraph& g,
                                        const Program& p,
                                        const StatefulGrammar& gram,
                                        std::span<const uint32_t> immediates,
                                        const SynthOptions& opts);

/// Folding: if stateless node u feeds stateful node v and u's inputs are all
/// already inputs of v, absorb u's computation into v when the enlarged node
/// still fits a stateful ALU. Removes one in-edge. Returns true iff the
/// graph changed.
bool try_fold(ComputationGraph& g, int u, int v, const Program& p,
              const StatefulGrammar& gram, std::span<const uint32_t> immediates,
              const SynthOptions& opts);

/// Predecessor packing: merge u into its single consumer v (at least one of
/// them stateful) when the combined logic passes a cheap input/output count
/// check and then a stateful fit query. Returns true iff the graph changed.
bool try_merge(ComputationGraph& g, int u, int v, const Program& p,
               const StatefulGrammar& gram, std::span<const uint32_t> immediates,
               const SynthOptions& opts);

/// Interleaves folding and packing until a full pass changes nothing.
ComputationGraph optimize_fixpoint(ComputationGraph g, const Program& p,
                                   const StatefulGrammar& gram,
                                   std::span<const uint32_t> immediates,
                                   const SynthOptions& opts, bool fold_enabled,
                                   bool pack_enabled);

// ---------------------------------------------------------------------------
// Resource graph: configured ALU instances realizing one action.
// ---------------------------------------------------------------------------

struct ResourceNode {
  int id = 0;
  bool stateful = false;
  AluConfig cfg;
  std::vector<std::string> inputs;      // value ids, by ALU input slot
  std::string out_field;                // value id ("" = pure state update)
  std::vector<std::string> aliases;     // declared fields receiving the output
  std::vector<std::string> state_vars;  // by register slot ("" = scratch)
  int depth = 1;                        // longest path from a source node
  Span span;
};

struct ResourceGraph {
  std::vector<ResourceNode> nodes;
  std::vector<CompEdge> edges;  // from/to are ResourceNode ids

  int depth() const;
};

/// A min-depth tree of stateless ALUs computing one BCI spec. Iteratively
/// deepens from 1; the returned nodes are in dependency order with the root
/// last. Throws DepthExceeded past max_depth and SynthesisBudget if the
/// enumeration bank overflows.
std::vector<ResourceNode> synth_stateless_min_depth(
    const BciSpec& spec, const Program& p, const StatelessGrammar& gram,
    int max_depth, std::span<const uint32_t> immediates, const SynthOptions& opts,
    int* id_counter);

struct SynthesizeFlags {
  bool simplify = true;
  bool fold = true;
  bool pack = true;
};

/// End-to-end per-action synthesis: preprocess, graph construction,
/// normalization, fold/pack fixpoint, stateful queries and min-depth
/// stateless synthesis for every primary output and stateful input.
ResourceGraph synthesize_action(const ActionBlock& a, const Program& p,
                                const AluGrammarPair& grammars,
                                const SynthOptions& opts,
                                const SynthesizeFlags& flags);

/// Harvested immediate pool for an action: constants in the text plus {0,1}
/// plus grammar extras.
std::vector<uint32_t> immediate_pool(const ActionBlock& a,
                                     std::span<const uint32_t> extra);

}  // namespace pipecat

#endif  // PIPECAT_SYNTHESIS_HPP_
