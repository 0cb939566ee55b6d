#include <algorithm>
#include <set>
#include <sstream>

#include "dfrt/base_domain.hpp"

// Monomial predicate abstraction: elements are conjunctions over a finite
// universe of atoms obtained by instantiating the user's qualifier templates
// (wildcards range over the int/bool-kinded variables in scope). Elements
// are kept closed under entailment, so the lattice order is set inclusion.

namespace dfrt {

namespace {

enum class Rel : uint8_t { Ge0, Eq0, Ne0 };  // diff >= 0 | == 0 | != 0

struct Atom {
  LinExpr diff;
  Rel rel;

  friend bool operator<(const Atom &a, const Atom &b) {
    if (a.rel != b.rel) return a.rel < b.rel;
    return a.diff < b.diff;
  }
  friend bool operator==(const Atom &a, const Atom &b) {
    return a.rel == b.rel && a.diff == b.diff;
  }
};

Atom normalize_atom(LinExpr diff, Rel rel) {
  if (rel == Rel::Ge0) {
    LinCons c = LinCons::geq0(diff).normalized();
    return {c.e, Rel::Ge0};
  }
  LinCons c = LinCons::eq0(diff).normalized();
  if (!c.eq) {
    // degenerated to a constant verdict (trivial or integer-infeasible)
    bool eq_holds = c.e.coeffs.empty() && c.e.k == 0;
    bool truth = rel == Rel::Eq0 ? eq_holds : !eq_holds;
    return truth ? Atom{LinExpr::constant(0), Rel::Ge0}
                 : Atom{LinExpr::constant(-1), Rel::Ge0};
  }
  return {c.e, rel};
}

struct PredRep {
  bool bot = false;
  std::vector<Atom> atoms;  // sorted, closed under entailment
};

BaseVal wrap(PredRep r, Scope s) {
  return BaseVal(std::make_shared<PredRep>(std::move(r)), std::move(s));
}

class PredDomain final : public BaseDomain {
 public:
  explicit PredDomain(std::vector<QualTemplate> quals)
      : quals_(std::move(quals)) {}

  std::string name() const override { return "pred"; }

  // universe of atoms for a scope: wildcard templates instantiated with
  // every int/bool-kinded variable
  std::vector<Atom> universe(const Scope &s) const {
    std::set<Atom> out;
    for (auto &q : quals_) {
      if (!q.has_wildcard) {
        out.insert(to_atom(q, std::nullopt));
      } else {
        for (auto &v : s.vars)
          if (v.kind != VarKind::Fun)
            out.insert(to_atom(q, Sym::var(v.id)));
      }
    }
    return {out.begin(), out.end()};
  }

  BaseVal top(const Scope &s) const override {
    PredRep r;
    r.atoms = closure(s, LinSystem{}, {});
    return wrap(std::move(r), s);
  }

  BaseVal bot(const Scope &s) const override {
    PredRep r;
    r.bot = true;
    return wrap(std::move(r), s);
  }

  bool is_bot(const BaseVal &a) const override { return a.as<PredRep>().bot; }

  LinSystem to_cons(const BaseVal &a) const override {
    const auto &r = a.as<PredRep>();
    LinSystem sys;
    if (r.bot) {
      sys.add(LinCons::geq0(LinExpr::constant(-1)));
      return sys;
    }
    for (auto &at : r.atoms)
      if (at.rel != Rel::Ne0) sys.add({at.diff, at.rel == Rel::Eq0});
    return sys;
  }

  BaseVal from_cons(const Scope &s, const LinSystem &sys) const override {
    LinSystem clean = scrub(s, sys);
    if (!clean.sat()) return bot(s);
    PredRep r;
    r.atoms = closure(s, clean, {});
    return wrap(std::move(r), s);
  }

  bool leq(const BaseVal &a, const BaseVal &b) const override {
    const auto &ra = a.as<PredRep>();
    const auto &rb = b.as<PredRep>();
    if (ra.bot) return true;
    if (rb.bot) return false;
    return std::includes(ra.atoms.begin(), ra.atoms.end(), rb.atoms.begin(),
                         rb.atoms.end());
  }

  BaseVal join(const BaseVal &a, const BaseVal &b) const override {
    const auto &ra = a.as<PredRep>();
    const auto &rb = b.as<PredRep>();
    if (ra.bot) return b;
    if (rb.bot) return a;
    PredRep r;
    std::set_intersection(ra.atoms.begin(), ra.atoms.end(), rb.atoms.begin(),
                          rb.atoms.end(), std::back_inserter(r.atoms));
    return wrap(std::move(r), a.scope());
  }

  BaseVal meet(const BaseVal &a, const BaseVal &b) const override {
    const auto &ra = a.as<PredRep>();
    const auto &rb = b.as<PredRep>();
    if (ra.bot || rb.bot) return bot(a.scope());
    std::set<Atom> u(ra.atoms.begin(), ra.atoms.end());
    u.insert(rb.atoms.begin(), rb.atoms.end());
    return from_atoms(a.scope(), {u.begin(), u.end()});
  }

  // the lattice is finite, so widening is the join
  BaseVal widen(const BaseVal &a, const BaseVal &b,
                const WidenHints &) const override {
    return join(a, b);
  }

  // overrides that keep strengthening reductive: the original atoms are
  // retained and only new entailments are added
  BaseVal strengthen_eq_var(const BaseVal &a, Sym x, Sym y) const override {
    auto opaque = [&](Sym s) {
      if (!s.is_var()) return false;
      auto k = a.scope().kind_of(s.id);
      return !k || *k == VarKind::Fun;
    };
    if (is_bot(a) || opaque(x) || opaque(y)) return a;
    LinSystem sys = to_cons(a);
    sys.add(LinCons::eq0(LinExpr::sym(x) - LinExpr::sym(y)));
    return strengthened(a, sys);
  }

  BaseVal strengthen_eq_const(const BaseVal &a, VarId x,
                              Constant c) const override {
    if (is_bot(a)) return a;
    auto k = a.scope().kind_of(x);
    if (!k || *k == VarKind::Fun) return a;
    LinSystem sys = to_cons(a);
    sys.add(LinCons::eq0(LinExpr::sym(Sym::var(x)) -
                         LinExpr::constant(Rat((long)c.num))));
    return strengthened(a, sys);
  }

  BaseVal strengthen_with(const BaseVal &a, const ScopeVar &x,
                          const BaseVal &ax) const override {
    if (is_bot(a)) return a;
    Scope s2 = a.scope().with(x);
    if (is_bot(ax)) return bot(s2);
    LinSystem sys;
    std::vector<Atom> ne;
    for (auto &at : a.as<PredRep>().atoms) {
      if (at.rel == Rel::Ne0)
        ne.push_back(at);
      else
        sys.add({at.diff, at.rel == Rel::Eq0});
    }
    if (x.kind != VarKind::Fun) {
      for (auto &at : ax.as<PredRep>().atoms) {
        Atom rn = {at.diff.rename(Sym::nu(), Sym::var(x.id)), at.rel};
        if (rn.rel == Rel::Ne0)
          ne.push_back(rn);
        else
          sys.add({rn.diff, rn.rel == Rel::Eq0});
      }
    }
    sys = scrub(s2, sys);
    if (!sat_ne(sys, ne)) return bot(s2);
    std::set<Atom> u(a.as<PredRep>().atoms.begin(),
                     a.as<PredRep>().atoms.end());
    for (auto &at : closure(s2, sys, ne)) u.insert(at);
    PredRep r;
    r.atoms = {u.begin(), u.end()};
    return wrap(std::move(r), s2);
  }

  BaseVal assume(const BaseVal &a, const LinCons &c) const override {
    if (is_bot(a)) return a;
    LinSystem sys = to_cons(a);
    sys.add(c);
    return strengthened(a, sys);
  }

  BaseVal assume_all(const BaseVal &a,
                     const std::vector<LinCons> &cs) const override {
    if (is_bot(a)) return a;
    LinSystem sys = to_cons(a);
    for (auto &c : cs) sys.add(c);
    return strengthened(a, sys);
  }

  // drop conjuncts mentioning the projected variable, then re-close
  BaseVal project(const BaseVal &a, VarId x) const override {
    Scope s2 = a.scope().without(x);
    if (is_bot(a)) return bot(s2);
    const auto &ra = a.as<PredRep>();
    std::vector<Atom> kept;
    for (auto &at : ra.atoms)
      if (!at.diff.mentions(Sym::var(x))) kept.push_back(at);
    return from_atoms(s2, kept);
  }

  BaseVal project_nu(const BaseVal &a) const override {
    if (is_bot(a)) return a;
    const auto &ra = a.as<PredRep>();
    std::vector<Atom> kept;
    for (auto &at : ra.atoms)
      if (!at.diff.mentions(Sym::nu())) kept.push_back(at);
    return from_atoms(a.scope(), kept);
  }

  BaseVal subst_nu(const BaseVal &a, const ScopeVar &x) const override {
    Scope s2 = a.scope().with(x);
    if (is_bot(a)) return bot(s2);
    if (x.kind == VarKind::Fun) return extend(project_nu(a), s2);
    // rename then keep whatever the richer system still entails over the
    // new universe
    LinSystem sys;
    std::vector<Atom> ne;
    for (auto &at : a.as<PredRep>().atoms) {
      Atom rn = {at.diff.rename(Sym::nu(), Sym::var(x.id)), at.rel};
      if (rn.rel == Rel::Ne0)
        ne.push_back(rn);
      else
        sys.add({rn.diff, rn.rel == Rel::Eq0});
    }
    PredRep r;
    r.atoms = closure(s2, sys, ne);
    return wrap(std::move(r), s2);
  }

  BaseVal extend(const BaseVal &a, const Scope &sup) const override {
    if (a.scope() == sup) return a;
    if (is_bot(a)) return bot(sup);
    return from_atoms(sup, a.as<PredRep>().atoms);
  }

  BaseVal restrict_to(const BaseVal &a, const Scope &sub) const override {
    if (a.scope() == sub) return a;
    if (is_bot(a)) return bot(sub);
    std::vector<Atom> kept;
    for (auto &at : a.as<PredRep>().atoms) {
      bool ok = true;
      for (auto &[sym, c] : at.diff.coeffs)
        if (sym.is_var() && !sub.contains(sym.id)) ok = false;
      if (ok) kept.push_back(at);
    }
    return from_atoms(sub, kept);
  }

  bool member(const BaseVal &a, const Assignment &asg) const override {
    const auto &r = a.as<PredRep>();
    if (r.bot) return false;
    std::map<Sym, Rat> vals;
    for (auto &[s, b] : asg) {
      auto v = binding_value(b);
      if (v) vals[s] = *v;
    }
    for (auto &at : r.atoms) {
      Rat v = at.diff.eval(vals);
      bool ok = at.rel == Rel::Ge0 ? v >= 0 : at.rel == Rel::Eq0 ? v == 0
                                                                 : v != 0;
      if (!ok) return false;
    }
    return true;
  }

  std::string str(const BaseVal &a) const override {
    const auto &r = a.as<PredRep>();
    if (r.bot) return "false";
    if (r.atoms.empty()) return "true";
    std::ostringstream os;
    auto name = [&](Sym s) {
      return s.is_nu() ? std::string("nu") : a.scope().name_of(s.id);
    };
    bool first = true;
    for (auto &at : r.atoms) {
      if (!first) os << " && ";
      first = false;
      os << at.diff.str(name)
         << (at.rel == Rel::Ge0 ? " >= 0" : at.rel == Rel::Eq0 ? " == 0"
                                                               : " != 0");
    }
    return os.str();
  }

 private:
  std::vector<QualTemplate> quals_;

  static Atom to_atom(const QualTemplate &q, std::optional<Sym> wild) {
    LinExpr lhs = q.lhs, rhs = q.rhs;
    if (wild) {
      lhs = lhs.rename(Sym::temp(0), *wild);
      rhs = rhs.rename(Sym::temp(0), *wild);
    }
    switch (q.op) {
      case BinOpKind::Le: return normalize_atom(rhs - lhs, Rel::Ge0);
      case BinOpKind::Lt:
        return normalize_atom(rhs - lhs - LinExpr::constant(1), Rel::Ge0);
      case BinOpKind::Ge: return normalize_atom(lhs - rhs, Rel::Ge0);
      case BinOpKind::Gt:
        return normalize_atom(lhs - rhs - LinExpr::constant(1), Rel::Ge0);
      case BinOpKind::Eq: return normalize_atom(lhs - rhs, Rel::Eq0);
      default: return normalize_atom(lhs - rhs, Rel::Ne0);
    }
  }

  // satisfiability of a system plus disequality side conditions, by case
  // splitting each diff != 0 into diff >= 1 | diff <= -1
  static bool sat_ne(const LinSystem &sys, const std::vector<Atom> &ne,
                     size_t i = 0) {
    if (!sys.sat()) return false;
    if (i >= ne.size()) return true;
    LinSystem lo = sys, hi = sys;
    hi.add(LinCons::geq0(ne[i].diff - LinExpr::constant(1)));
    lo.add(LinCons::geq0(ne[i].diff * Rat(-1) - LinExpr::constant(1)));
    return sat_ne(hi, ne, i + 1) || sat_ne(lo, ne, i + 1);
  }

  static bool entails_atom(const LinSystem &sys, const std::vector<Atom> &ne,
                           const Atom &at) {
    if (at.rel == Rel::Ne0) {
      LinSystem test = sys;
      test.add(LinCons::eq0(at.diff));
      return !sat_ne(test, ne);
    }
    if (ne.empty())
      return sys.entails({at.diff, at.rel == Rel::Eq0});
    // split on the disequality premises
    LinSystem test = sys;
    if (at.rel == Rel::Eq0) {
      return entails_atom(sys, ne, {at.diff, Rel::Ge0}) &&
             entails_atom(sys, ne, {at.diff * Rat(-1), Rel::Ge0});
    }
    test.add(LinCons::geq0(at.diff * Rat(-1) - LinExpr::constant(1)));
    return !sat_ne(test, ne);
  }

  std::vector<Atom> closure(const Scope &s, const LinSystem &sys,
                            const std::vector<Atom> &ne) const {
    std::vector<Atom> out;
    for (auto &at : universe(s))
      if (entails_atom(sys, ne, at)) out.push_back(at);
    std::sort(out.begin(), out.end());
    return out;
  }

  BaseVal from_atoms(const Scope &s, const std::vector<Atom> &atoms) const {
    LinSystem sys;
    std::vector<Atom> ne;
    for (auto &at : atoms) {
      if (at.rel == Rel::Ne0)
        ne.push_back(at);
      else
        sys.add({at.diff, at.rel == Rel::Eq0});
    }
    if (!sat_ne(sys, ne)) return bot(s);
    PredRep r;
    r.atoms = closure(s, sys, ne);
    return wrap(std::move(r), s);
  }

  // conjunction of a's atoms and the new facts; reductive by construction
  BaseVal strengthened(const BaseVal &a, const LinSystem &sys) const {
    std::vector<Atom> ne;
    for (auto &at : a.as<PredRep>().atoms)
      if (at.rel == Rel::Ne0) ne.push_back(at);
    if (!sat_ne(scrub(a.scope(), sys), ne)) return bot(a.scope());
    std::set<Atom> u(a.as<PredRep>().atoms.begin(),
                     a.as<PredRep>().atoms.end());
    for (auto &at : closure(a.scope(), scrub(a.scope(), sys), ne))
      u.insert(at);
    PredRep r;
    r.atoms = {u.begin(), u.end()};
    return wrap(std::move(r), a.scope());
  }
};

}  // namespace

std::unique_ptr<BaseDomain> make_pred_domain(std::vector<QualTemplate> quals) {
  return std::make_unique<PredDomain>(std::move(quals));
}

}  // namespace dfrt
