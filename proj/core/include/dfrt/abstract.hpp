#pragma once

#include <functional>
#include <optional>

#include "dfrt/types.hpp"

// The data flow refinement type semantics: abstract transformer over type
// maps, widened least fixpoint, safety verdicts, and the concretization
// membership oracle tying abstract results back to concrete runs.

namespace dfrt {

enum class DomainKind { Pred, Oct, Poly };
enum class WideningMode { Plain, Thresholds };

struct AnalysisConfig {
  DomainKind domain = DomainKind::Poly;
  std::vector<QualTemplate> qualifiers;  // pred instance
  int k = 1;                             // context sensitivity
  WideningMode widening = WideningMode::Thresholds;
  std::vector<QualTemplate> threshold_templates;  // from file; empty = auto
  int depth_cap = 20;
  int max_iters = 500;
  // plain joins for the first iterates; widening cuts in afterwards to
  // force convergence (offset relations need a few join rounds to settle)
  int widen_delay = 12;
  // keep the call's dependency variable in scope of application results
  // instead of projecting it away
  bool keep_call_depvar = false;
};

struct TypeMap {
  std::map<NodeId, RefType> entries;  // non-bot only
  bool top = false;

  RefType at(NodeId n) const {
    if (top) return RefType::err();
    auto it = entries.find(n);
    return it == entries.end() ? RefType::bot() : it->second;
  }
};

bool typemap_safe(const TypeMap &m);

struct AnalysisResult {
  TypeMap map;
  int iterations = 0;
  bool converged = false;  // false would be a widening bug, not divergence
};

// Per-program analysis state: owns the abstract node arena, binder kinds,
// the domain instance and the type operation context.
class Analyzer {
 public:
  Analyzer(ExprPtr program, AnalysisConfig cfg);

  const AnalysisConfig &config() const { return cfg_; }
  const ExprPtr &program() const { return prog_; }
  NodeArena &arena() { return arena_; }
  const BaseDomain &domain() const { return *dom_; }
  TypeCtx &ctx() { return cx_; }
  VarKind kind_of(VarId v) const;
  std::optional<VarKind> static_kind(const Expr &e) const;
  std::string var_name(VarId v) const;
  Scope scope_of_env(EnvId env) const;
  TypeEnv env_types(EnvId env, const TypeMap &m) const;

  // one application of the abstract transformer from the program root
  std::pair<RefType, TypeMap> step(const TypeMap &m);
  // one application from an arbitrary evaluation point (typing checker)
  std::pair<RefType, TypeMap> step_at(const ExprPtr &e, EnvId env,
                                      const AbsStack &stack, const TypeMap &m);

  AnalysisResult analyze();

  // guard reasoning, shared with the typing checker: the refinement over
  // the scope implied by the guard having the given truth value
  BaseVal guard_fact(const ExprPtr &guard, bool polarity, EnvId env,
                     const TypeMap &m, const BaseVal *phi);
  BaseVal env_fact(EnvId env, const TypeMap &m, const BaseVal *phi) const;
  RefType binop_result(BinOpKind op, const RefType &lhs, const RefType &rhs,
                       const Scope &scope) const;

  const std::map<VarId, VarKind> &kinds() const { return kinds_; }

 private:
  friend struct TStepper;
  ExprPtr prog_;
  AnalysisConfig cfg_;
  std::unique_ptr<BaseDomain> dom_;
  mutable TypeCtx cx_;
  NodeArena arena_;
  std::map<VarId, VarKind> kinds_;
  std::map<LocId, const Expr *> exprs_;

  void infer_kinds();
  void build_thresholds();
};

struct Verdict {
  bool safe = true;
  bool diverged_diag = false;   // analyze failed to converge (bug)
  LocId witness_loc = 0;        // lowest location holding the error type
  std::string witness_render;
};

Verdict check_safety(const TypeMap &m, Analyzer &an);

struct GammaDiag {
  std::string message;  // first violation, empty when member
  int checked_nodes = 0;
};

// Membership of a concrete execution map in the concretization of an
// inferred type map: the executable soundness oracle.
bool gamma_member(const ExecMap &cm, NodeArena &concrete_arena,
                  const ExprPtr &program, const TypeMap &tm, Analyzer &an,
                  GammaDiag *diag = nullptr);

}  // namespace dfrt
