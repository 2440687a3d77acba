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

#ifndef PIPECAT_DIAG_HPP_
#define PIPECAT_DIAG_HPP_

#include <stdexcept>
#include <string>

namespace pipecat {

struct Span {
  int line = 0;
  int col = 0;
};

enum class Errc {
  SyntaxError,
  TypeError,
  NameError,
  UnstructuredControl,
  GuardUpdateDetected,
  UnknownOutput,
  NoFit,
  DepthExceeded,
  Infeasible,
  KeyModifiedByAction,
  UnmatchedTable,
  ConfigError,
  SynthesisBudget,
  Internal,
};

const char* errc_name(Errc c);

/// All user-facing compiler failures carry an error code and, where known,
/// the source location of the offending construct.
class CompileError : public std::runtime_error {
 public:
  CompileError(Errc code, Span span, const std::string& msg)
      : std::runtime_error(format(code, span, msg)), code_(code), span_(span) {}

  Errc code() const { return code_; }
  Span span() const { return span_; }

 private:
  static std::string format(Errc code, Span span, const std::string& msg);

  Errc code_;
  Span span_;
};

}  // namespace pipecat

#endif  // PIPECAT_DIAG_HPP_
