#pragma once

#include <gmpxx.h>

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dfrt/ast.hpp"

// Exact linear integer arithmetic over named symbols: expressions,
// non-strict constraints, and a small Fourier-Motzkin engine providing
// satisfiability, entailment, projection and bound queries. This is the
// shared reasoning core behind the predicate, octagon, and polyhedra
// refinement domains. All variables range over the integers (booleans are
// encoded as {0,1}), so constraints are integer-tightened after
// normalization.

namespace dfrt {

using Rat = mpq_class;

struct Sym {
  enum class Kind : uint8_t { Nu, Var, Temp };
  Kind kind = Kind::Nu;
  uint32_t id = 0;

  static Sym nu() { return {Kind::Nu, 0}; }
  static Sym var(VarId v) { return {Kind::Var, v}; }
  static Sym temp(uint32_t t) { return {Kind::Temp, t}; }

  bool is_nu() const { return kind == Kind::Nu; }
  bool is_var() const { return kind == Kind::Var; }
  bool is_temp() const { return kind == Kind::Temp; }

  friend bool operator==(const Sym &a, const Sym &b) {
    return a.kind == b.kind && a.id == b.id;
  }
  friend bool operator<(const Sym &a, const Sym &b) {
    return a.kind != b.kind ? a.kind < b.kind : a.id < b.id;
  }
};

struct LinExpr {
  std::map<Sym, Rat> coeffs;  // zero coefficients are never stored
  Rat k = 0;

  static LinExpr constant(Rat c);
  static LinExpr sym(Sym s, Rat coeff = 1);

  LinExpr &operator+=(const LinExpr &o);
  LinExpr &operator-=(const LinExpr &o);
  LinExpr &operator*=(const Rat &c);
  friend LinExpr operator+(LinExpr a, const LinExpr &b) { return a += b; }
  friend LinExpr operator-(LinExpr a, const LinExpr &b) { return a -= b; }
  friend LinExpr operator*(LinExpr a, const Rat &c) { return a *= c; }

  Rat coeff(Sym s) const;
  bool is_constant() const { return coeffs.empty(); }
  bool mentions(Sym s) const { return coeffs.count(s) != 0; }
  LinExpr subst(Sym s, const LinExpr &e) const;
  LinExpr rename(Sym from, Sym to) const;  // `to` must not occur
  Rat eval(const std::map<Sym, Rat> &a) const;  // absent symbols read as 0

  friend bool operator==(const LinExpr &a, const LinExpr &b) {
    return a.k == b.k && a.coeffs == b.coeffs;
  }
  friend bool operator<(const LinExpr &a, const LinExpr &b);
  std::string str(const std::function<std::string(Sym)> &name) const;
};

// e >= 0, or e == 0 when `eq` is set.
struct LinCons {
  LinExpr e;
  bool eq = false;

  static LinCons geq0(LinExpr e) { return {std::move(e), false}; }
  static LinCons eq0(LinExpr e) { return {std::move(e), true}; }
  // convenience: lhs (op) rhs
  static LinCons le(const LinExpr &l, const LinExpr &r) { return geq0(r - l); }
  static LinCons ge(const LinExpr &l, const LinExpr &r) { return geq0(l - r); }
  static LinCons equal(const LinExpr &l, const LinExpr &r) { return eq0(l - r); }

  // Scale to coprime integer coefficients; tighten the constant for integer
  // semantics. An equality with fractional constant reduces to 1 == 0,
  // represented as {e: -1, eq: false}.
  LinCons normalized() const;
  bool trivially_true() const;
  bool trivially_false() const;
  bool mentions(Sym s) const { return e.mentions(s); }
  LinCons rename(Sym from, Sym to) const { return {e.rename(from, to), eq}; }

  friend bool operator==(const LinCons &a, const LinCons &b) {
    return a.eq == b.eq && a.e == b.e;
  }
  friend bool operator<(const LinCons &a, const LinCons &b) {
    return a.eq != b.eq ? a.eq < b.eq : a.e < b.e;
  }
  std::string str(const std::function<std::string(Sym)> &name) const;
};

// A conjunction of constraints. Operations are exact over the integers up
// to the rational relaxation (tightened row by row), which is sound for
// our use: entailment may only under-approximate.
class LinSystem {
 public:
  LinSystem() = default;
  explicit LinSystem(std::vector<LinCons> rows);

  void add(LinCons c);
  const std::vector<LinCons> &rows() const { return rows_; }
  bool marked_unsat() const { return unsat_; }

  bool sat() const;
  bool entails(const LinCons &c) const;
  bool entails_all(const std::vector<LinCons> &cs) const;

  LinSystem eliminate(Sym s) const;
  // Keep only constraints over symbols satisfying `keep`.
  LinSystem project_onto(const std::function<bool(Sym)> &keep) const;

  LinSystem renamed(Sym from, Sym to) const;
  LinSystem substituted(Sym s, const LinExpr &e) const;

  // Tightest integer bounds entailed for `e`, when any.
  std::optional<Rat> upper_bound(const LinExpr &e) const;
  std::optional<Rat> lower_bound(const LinExpr &e) const;

  std::vector<Sym> symbols() const;
  void dedup();

 private:
  std::vector<LinCons> rows_;
  bool unsat_ = false;
};

// Parses qualifier/threshold syntax: a single comparison over `nu`,
// identifiers, integer literals and the wildcard `*`, e.g. "nu <= 2",
// "nu = *", "x < y + 1". Returns the two sides and the operator.
struct QualTemplate {
  LinExpr lhs, rhs;      // over Sym::nu and named placeholders
  BinOpKind op;          // comparison ops only
  bool has_wildcard = false;
  std::vector<std::string> names;  // identifiers appearing (sans nu/*)
};
QualTemplate parse_qualifier(const std::string &line,
                             uint32_t wildcard_temp_id = 0);

}  // namespace dfrt
