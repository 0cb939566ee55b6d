#pragma once

#include "dfrt/abstract.hpp"

// Declarative typing rules, checked independently of the analysis: rules
// are syntax-directed once candidate types are read from a witness type
// map, so derivability is decidable. Used to cross-validate that safe
// analysis fixpoints and typing derivations coincide.

namespace dfrt {

// Re-derives env, stack |- e : t with candidates from `witness`. Subtype
// checks use the declarative subtyping rules. `why` receives the first
// failing premise when provided.
bool derive_typing(Analyzer &an, const ExprPtr &e, EnvId env,
                   const AbsStack &stack, const RefType &t,
                   const TypeMap &witness, std::string *why = nullptr);

struct EquivReport {
  bool analysis_safe = false;   // phases below only run when safe
  bool fixpoint = false;        // one more step leaves the map unchanged
  bool root_derivable = false;  // t-rules accept the root judgement
  int perturbations = 0;
  int perturbation_mismatches = 0;  // fixpoint- vs derivation-breaking
  std::string detail;

  bool holds() const {
    return !analysis_safe ||
           (fixpoint && root_derivable && perturbation_mismatches == 0);
  }
};

// Runs the analysis and validates the soundness/completeness
// correspondence at desk scale: safe fixpoints are derivable, and
// weakening map entries breaks the fixpoint property exactly where
// subtyping breaks.
EquivReport verify_fixpoint_typing_equiv(Analyzer &an);

}  // namespace dfrt
