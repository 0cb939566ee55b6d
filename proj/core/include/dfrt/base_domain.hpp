#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dfrt/concrete.hpp"
#include "dfrt/linear.hpp"

// The pluggable lattice of basic refinements: relational facts about the
// value symbol nu and the int/bool-kinded variables in scope. Function-
// kinded variables are opaque (never constrained). Three instances ship:
// monomial predicate abstraction over a qualifier set, octagons, and
// lightweight convex polyhedra, all over exact rational arithmetic.

namespace dfrt {

enum class VarKind : uint8_t { Int, Bool, Fun };

struct ScopeVar {
  VarId id;
  VarKind kind;
  std::string name;  // display only

  friend bool operator<(const ScopeVar &a, const ScopeVar &b) {
    return a.id < b.id;
  }
  friend bool operator==(const ScopeVar &a, const ScopeVar &b) {
    return a.id == b.id && a.kind == b.kind;
  }
};

struct Scope {
  std::vector<ScopeVar> vars;  // sorted by id

  bool contains(VarId v) const;
  std::optional<VarKind> kind_of(VarId v) const;
  std::string name_of(VarId v) const;
  Scope with(const ScopeVar &v) const;
  Scope without(VarId v) const;
  Scope union_with(const Scope &o) const;
  bool subset_of(const Scope &o) const;
  friend bool operator==(const Scope &a, const Scope &b) {
    return a.vars == b.vars;
  }
  std::string str() const;
};

// Concrete binding used by the membership oracle: a constant, or an
// arbitrary table (opaque, matches fun-kinded slots).
struct ConcreteBinding {
  bool is_table = false;
  Constant c;

  static ConcreteBinding table() { return {true, {}}; }
  static ConcreteBinding of(Constant c) { return {false, c}; }
};
using Assignment = std::map<Sym, ConcreteBinding>;

class BaseDomain;

// Value handle. Scope travels with the element.
class BaseVal {
 public:
  BaseVal() = default;
  BaseVal(std::shared_ptr<const void> rep, Scope scope)
      : rep_(std::move(rep)), scope_(std::move(scope)) {}
  const void *rep() const { return rep_.get(); }
  const std::shared_ptr<const void> &rep_ptr() const { return rep_; }
  template <class T>
  const T &as() const {
    return *static_cast<const T *>(rep_.get());
  }
  const Scope &scope() const { return scope_; }
  bool valid() const { return rep_ != nullptr; }

 private:
  std::shared_ptr<const void> rep_;
  Scope scope_;
};

struct WidenHints {
  // threshold constraints over nu and scope variables; filtered per scope
  std::vector<LinCons> thresholds;
  // also offer nu<=v, v<=nu, v<=w orderings instantiated over the scope of
  // the widened element (covers dependency variables in output scopes)
  bool scope_orders = false;

  std::vector<LinCons> for_scope(const Scope &s) const;
};

class BaseDomain {
 public:
  virtual ~BaseDomain() = default;
  virtual std::string name() const = 0;

  // candidate rows offered to approximate joins (used by the polyhedra
  // weak join); widening thresholds double as join candidates
  void set_join_hints(WidenHints h) { join_hints_ = std::move(h); }
  const WidenHints &join_hints() const { return join_hints_; }

  virtual BaseVal top(const Scope &s) const = 0;
  virtual BaseVal bot(const Scope &s) const = 0;
  virtual bool is_bot(const BaseVal &a) const = 0;
  bool is_top(const BaseVal &a) const { return leq(top(a.scope()), a); }

  virtual bool leq(const BaseVal &a, const BaseVal &b) const = 0;
  virtual BaseVal join(const BaseVal &a, const BaseVal &b) const = 0;
  virtual BaseVal meet(const BaseVal &a, const BaseVal &b) const = 0;
  virtual BaseVal widen(const BaseVal &a, const BaseVal &b,
                        const WidenHints &hints) const = 0;

  bool equal(const BaseVal &a, const BaseVal &b) const {
    return leq(a, b) && leq(b, a);
  }

  // Constraint view of an element and best abstraction of a constraint
  // system; the generic transfer operations below are built from these.
  virtual LinSystem to_cons(const BaseVal &a) const = 0;
  virtual BaseVal from_cons(const Scope &s, const LinSystem &sys) const = 0;

  virtual BaseVal of_const(Constant c, const Scope &s) const;
  // strengthen with x = y; either side may be Sym::nu()
  virtual BaseVal strengthen_eq_var(const BaseVal &a, Sym x, Sym y) const;
  // strengthen with x = c; no-op when x is fun-kinded (opaque tables)
  virtual BaseVal strengthen_eq_const(const BaseVal &a, VarId x,
                                      Constant c) const;
  // b[x/nu]: move the nu constraints onto fresh scope variable x
  virtual BaseVal subst_nu(const BaseVal &a, const ScopeVar &x) const;
  // t[x <- tx] on base payloads: conjoin tx (with its nu read as x) onto a.
  // One combined abstraction step so intermediate facts outside the
  // domain's own representable set still contribute.
  virtual BaseVal strengthen_with(const BaseVal &a, const ScopeVar &x,
                                  const BaseVal &ax) const;
  // existentially project a variable out of the scope
  virtual BaseVal project(const BaseVal &a, VarId x) const;
  // forget everything about nu, keep scope facts
  virtual BaseVal project_nu(const BaseVal &a) const;
  // scope weakening/narrowing
  virtual BaseVal extend(const BaseVal &a, const Scope &sup) const;
  virtual BaseVal restrict_to(const BaseVal &a, const Scope &sub) const;
  // best-effort conjunction of a linear fact over scope U {nu}
  virtual BaseVal assume(const BaseVal &a, const LinCons &c) const;
  virtual BaseVal assume_all(const BaseVal &a,
                             const std::vector<LinCons> &cs) const;

  // membership in the concretization; int/bool projection must satisfy the
  // element, fun-kinded entries match any table
  virtual bool member(const BaseVal &a, const Assignment &asg) const;

  virtual std::string str(const BaseVal &a) const = 0;

 protected:
  // rows mentioning fun-kinded variables are dropped before abstraction
  static LinSystem scrub(const Scope &s, const LinSystem &sys);
  static std::optional<Rat> binding_value(const ConcreteBinding &b);
  WidenHints join_hints_;
};

std::unique_ptr<BaseDomain> make_poly_domain();
std::unique_ptr<BaseDomain> make_oct_domain();
// qualifier templates; wildcards are instantiated per scope
std::unique_ptr<BaseDomain> make_pred_domain(std::vector<QualTemplate> quals);

std::vector<QualTemplate> parse_qualifier_file(const std::string &text);

}  // namespace dfrt
