#pragma once

#include <string>

#include "dfrt/abstract.hpp"

// JSON rendering of execution maps and analysis reports (the CLI's
// --dump-concrete / --format json surfaces).

namespace dfrt {

// nodes as {loc, env-path, stack}, tables as arrays of {stack, in, out}
std::string execmap_to_json(const ExecMap &m, const NodeArena &arena,
                            bool pretty = true);

struct RunReport {
  std::string program;  // file name or "<stdin>"
  AnalysisConfig config;
  Verdict verdict;
  int iterations = 0;
  bool converged = true;
  double seconds = 0;
};

std::string report_to_json(const RunReport &rep, const TypeMap &m,
                           Analyzer &an, bool pretty = true);
std::string report_to_text(const RunReport &rep, const TypeMap &m,
                           Analyzer &an);

std::string domain_name(DomainKind d);

}  // namespace dfrt
