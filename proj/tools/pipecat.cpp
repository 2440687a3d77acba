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

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "pipecat/compile.hpp"
#include "pipecat/parser.hpp"
#include "pipecat/preprocess.hpp"
#include "pipecat/printer.hpp"

namespace {

using namespace pipecat;

constexpr int kExitUsage = 1;
constexpr int kExitReject = 2;
constexpr int kExitInternal = 3;

int exit_code_for(const CompileError& e) {
  switch (e.code()) {
    case Errc::NoFit:
    case Errc::DepthExceeded:
    case Errc::Infeasible:
    case Errc::KeyModifiedByAction:
    case Errc::SynthesisBudget:
      return kExitReject;
    case Errc::Internal:
    case Errc::ConfigError:
      return e.code() == Errc::Internal ? kExitInternal : kExitUsage;
    default:
      return kExitUsage;
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CompileError(Errc::ConfigError, {}, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct CommonArgs {
  std::string program_path;
  std::string target_path;
  std::string grammar_path;
  std::string grammar_name = "tofino";
  int verify_bits = 4;
  std::string mode = "optimal";
  bool no_rewrite = false, no_fold = false, no_pack = false, no_simplify = false;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool with_flags = true) {
  cmd->add_option("program", args.program_path, "input .pcat program")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--target", args.target_path,
                  "target file (default: $PIPECAT_TARGET)");
  cmd->add_option("--alu-grammar", args.grammar_path,
                  "grammar pair file overriding the target's grammars");
  cmd->add_option("--verify-bits", args.verify_bits,
                  "bounded verification width (default 4)");
  if (with_flags) {
    cmd->add_option("--mode", args.mode, "optimal|feasible")
        ->check(CLI::IsMember({"optimal", "feasible"}));
    cmd->add_flag("--no-rewrite", args.no_rewrite, "disable if-to-table rewriting");
    cmd->add_flag("--no-fold", args.no_fold, "disable folding");
    cmd->add_flag("--no-pack", args.no_pack, "disable predecessor packing");
    cmd->add_flag("--no-simplify", args.no_simplify,
                  "disable preprocessing analyses");
  }
}

TargetSpec resolve_target(const CommonArgs& args) {
  std::string path = args.target_path;
  if (path.empty()) {
    const char* env = std::getenv("PIPECAT_TARGET");
    if (env != nullptr) path = env;
  }
  if (path.empty()) {
    TargetSpec t;
    t.name = "generic";
    return t;
  }
  return load_target_file(path);
}

AluGrammarPair resolve_grammars(const CommonArgs& args, const TargetSpec& target,
                                const std::string& target_path) {
  if (!args.grammar_path.empty()) return load_grammar_file(args.grammar_path);
  if (!target.stateful_grammar.empty()) {
    // grammar references are relative to the target file's directory
    std::filesystem::path base =
        target_path.empty() ? std::filesystem::path(".")
                            : std::filesystem::path(target_path).parent_path();
    return load_grammar_file((base / target.stateful_grammar).string());
  }
  return builtin_grammar(args.grammar_name);
}

CompileOptions options_from(const CommonArgs& args) {
  CompileOptions o;
  o.rewrite = !args.no_rewrite;
  o.fold = !args.no_fold;
  o.pack = !args.no_pack;
  o.simplify = !args.no_simplify;
  o.verify_bits = args.verify_bits;
  o.mode = args.mode == "feasible" ? SolveMode::Feasible : SolveMode::Optimal;
  return o;
}

std::string alloc_report(const CompileResult& res) {
  std::ostringstream os;
  os << "stages used: " << res.solution.cost << "\n";
  for (int s = 1; s <= res.solution.cost; s++) {
    os << "stage " << s << ":\n";
    for (const auto& [tbl, stage] : res.solution.match_placement)
      if (stage == s)
        os << "  match " << res.problem.tables[tbl].table << "["
           << res.problem.tables[tbl].partition << "]\n";
    for (const auto& alu : res.problem.alus)
      if (res.solution.stage.at(alu.id) == s && alu.occupies_alu_slot)
        os << "  alu " << alu.label << "\n";
    for (const auto& [u, stage] : res.solution.props)
      if (stage == s)
        os << "  prop " << res.problem.alus[u].label << "\n";
  }
  return os.str();
}

std::string deps_json(const std::vector<DepRecord>& deps) {
  std::ostringstream os;
  os << "[\n";
  for (size_t i = 0; i < deps.size(); i++) {
    const auto& d = deps[i];
    os << "  {\"kind\": \"" << d.kind << "\", \"var\": \"" << d.var
       << "\", \"from_line\": " << d.from_line << ", \"to_line\": " << d.to_line
       << ", \"guard\": \"" << d.guard << "\", \"kept\": " << (d.kept ? "true" : "false")
       << "}" << (i + 1 < deps.size() ? "," : "") << "\n";
  }
  os << "]\n";
  return os.str();
}

int emit_artifact(const CommonArgs& args, const std::string& what) {
  Program p = parse(read_file(args.program_path));
  TargetSpec target = resolve_target(args);
  if (what == "rewritten" || what == "deps") {
    TransformResult tr = transform_phase(p, target, !args.no_rewrite);
    if (what == "rewritten")
      std::cout << pretty_print(tr.program);
    else
      std::cout << deps_json(tr.deps);
    return 0;
  }
  if (what == "preprocessed") {
    for (const auto& a : p.actions) {
      StraightLineAction sl = preprocess_action(a, p, !args.no_simplify);
      std::cout << "action " << a.name << ":\n";
      for (const auto& st : sl.stmts)
        std::cout << "  " << st.target << " = " << print_expr(*st.rhs) << ";\n";
    }
    return 0;
  }
  AluGrammarPair grammars = resolve_grammars(args, target, args.target_path);
  if (what == "compgraph") {
    for (const auto& a : p.actions) {
      StraightLineAction sl = preprocess_action(a, p, !args.no_simplify);
      ComputationGraph g = build_graph(sl);
      g = normalize(std::move(g), grammars.stateful.registers);
      std::cout << "// action " << a.name << "\n" << to_dot(g);
    }
    return 0;
  }
  CompileResult res = compile_program(p, target, grammars, options_from(args));
  if (what == "lp") {
    std::cout << emit_big_m(res.constraints,
                            args.mode == "feasible" ? SolveMode::Feasible
                                                    : SolveMode::Optimal);
    return 0;
  }
  if (what == "alloc") {
    std::cout << alloc_report(res);
    return 0;
  }
  std::cerr << "unknown artifact '" << what << "'\n";
  return kExitUsage;
}

MatchOutcomes parse_outcomes(const std::string& line, PacketState& pkt,
                             const Program& p) {
  MatchOutcomes outcomes;
  std::istringstream is(line);
  std::string tok;
  while (is >> tok) {
    auto eq = tok.find('=');
    if (eq == std::string::npos)
      throw CompileError(Errc::ConfigError, {}, "bad packet token '" + tok + "'");
    std::string key = tok.substr(0, eq);
    uint32_t value = (uint32_t)std::stoul(tok.substr(eq + 1), nullptr, 0);
    if (key.rfind('@', 0) == 0) {
      outcomes[key.substr(1)] = (int)value;
    } else if (pkt.fields.count(key)) {
      pkt.fields[key] = truncate_to_width(value, p.width_of(key));
    } else if (pkt.state.count(key)) {
      pkt.state[key] = truncate_to_width(value, p.width_of(key));
    } else {
      throw CompileError(Errc::NameError, {}, "unknown field '" + key + "'");
    }
  }
  // tables without an explicit outcome take their first action
  for (const auto& t : p.tables)
    if (!t.is_guard_table() && !outcomes.count(t.name)) outcomes[t.name] = 0;
  return outcomes;
}

void print_packet(const PacketState& ps) {
  std::map<std::string, uint32_t> sorted(ps.fields.begin(), ps.fields.end());
  bool first = true;
  for (const auto& [k, v] : sorted) {
    std::cout << (first ? "" : " ") << k << "=" << v;
    first = false;
  }
  std::map<std::string, uint32_t> st(ps.state.begin(), ps.state.end());
  for (const auto& [k, v] : st) std::cout << " " << k << "=" << v;
  std::cout << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pipecat: a compiler for transactional packet programs onto "
               "match-action pipelines"};
  app.require_subcommand(1);

  CommonArgs args;
  std::string emit_what, packets_path, out_path, engine = "pipeline";
  bool json_report = false;
  std::string allocator = "solver";
  int gen_n = 2, gen_w = 5;

  auto* compile_cmd = app.add_subcommand("compile", "compile a program");
  add_common(compile_cmd, args);
  compile_cmd->add_option("--emit", emit_what,
                          "also print an artifact: rewritten|deps|preprocessed|"
                          "compgraph|lp|alloc");
  compile_cmd->add_flag("--json", json_report, "machine-readable report");

  auto* analyze_cmd = app.add_subcommand("analyze", "run phase 1/2 analyses");
  add_common(analyze_cmd, args);
  analyze_cmd
      ->add_option("--emit", emit_what, "rewritten|deps|preprocessed|compgraph")
      ->required();

  auto* allocate_cmd =
      app.add_subcommand("allocate", "run allocation and print the placement");
  add_common(allocate_cmd, args);
  allocate_cmd->add_option("--allocator", allocator, "solver|greedy")
      ->check(CLI::IsMember({"solver", "greedy"}));

  auto* emit_cmd = app.add_subcommand("emit", "print one artifact");
  add_common(emit_cmd, args);
  emit_cmd->add_option("--emit", emit_what, "artifact name")->required();

  auto* simulate_cmd = app.add_subcommand("simulate", "run packets through the program");
  add_common(simulate_cmd, args);
  simulate_cmd->add_option("--packets", packets_path, "field=value lines")
      ->required()
      ->check(CLI::ExistingFile);
  simulate_cmd->add_option("--engine", engine, "pipeline|source|both")
      ->check(CLI::IsMember({"pipeline", "source", "both"}));

  auto* gen_cmd = app.add_subcommand("gen-bench", "generate benchmark programs");
  gen_cmd->add_option("--kind", emit_what, "theorem2")->required();
  gen_cmd->add_option("--n", gen_n, "chain length parameter");
  gen_cmd->add_option("--w", gen_w, "tables per stage parameter");
  gen_cmd->add_option("-o,--output", out_path, "output file (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen_cmd->parsed()) {
      if (emit_what != "theorem2") {
        std::cerr << "unknown generator '" << emit_what << "'\n";
        return kExitUsage;
      }
      Program p = gen_theorem2_instance(gen_n, gen_w);
      std::string text = pretty_print(p);
      if (out_path.empty()) {
        std::cout << text;
      } else {
        std::ofstream out(out_path);
        out << text;
      }
      return 0;
    }

    if (analyze_cmd->parsed() || emit_cmd->parsed())
      return emit_artifact(args, emit_what);

    Program p = parse(read_file(args.program_path));
    TargetSpec target = resolve_target(args);
    AluGrammarPair grammars = resolve_grammars(args, target, args.target_path);

    if (allocate_cmd->parsed() && allocator == "greedy") {
      // table-count first-fit baseline; ALU-level constraints are ignored
      TransformResult tr = transform_phase(p, target, !args.no_rewrite);
      std::map<std::string, ResourceGraph> empty;
      AllocationProblem ap = partition_tables(tr.program, empty, target);
      auto stages = greedy_table_allocate(ap, target);
      if (!stages) {
        std::cerr << "Infeasible: greedy first-fit rejects the program\n";
        return kExitReject;
      }
      std::cout << "greedy stages used: " << *stages << "\n";
      return 0;
    }

    CompileResult res = compile_program(p, target, grammars, options_from(args));

    if (simulate_cmd->parsed()) {
      std::ifstream in(packets_path);
      std::string line;
      while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        PacketState pkt = initial_packet(res.phase1);
        MatchOutcomes outcomes = parse_outcomes(line, pkt, res.phase1);
        if (engine == "source" || engine == "both") {
          PacketState out = interpret_source(res.phase1, pkt, outcomes);
          if (engine == "both") std::cout << "source:   ";
          print_packet(out);
        }
        if (engine == "pipeline" || engine == "both") {
          PacketState out = interpret_pipeline(res.pipeline, pkt, outcomes);
          if (engine == "both") std::cout << "pipeline: ";
          print_packet(out);
        }
      }
      return 0;
    }

    if (allocate_cmd->parsed()) {
      std::cout << alloc_report(res);
      return 0;
    }

    // compile
    if (!emit_what.empty()) {
      if (emit_what == "rewritten") std::cout << pretty_print(res.phase1);
      else if (emit_what == "deps") std::cout << deps_json(res.report.deps);
      else if (emit_what == "lp") std::cout << emit_big_m(res.constraints, options_from(args).mode);
      else if (emit_what == "alloc") std::cout << alloc_report(res);
      else return emit_artifact(args, emit_what);
    }
    std::cout << (json_report ? res.report.json() : res.report.text());
    return 0;
  } catch (const CompileError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
}
