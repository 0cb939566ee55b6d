#include "dfrt/base_domain.hpp"

#include <algorithm>
#include <sstream>

namespace dfrt {

bool Scope::contains(VarId v) const {
  for (auto &x : vars)
    if (x.id == v) return true;
  return false;
}

std::optional<VarKind> Scope::kind_of(VarId v) const {
  for (auto &x : vars)
    if (x.id == v) return x.kind;
  return std::nullopt;
}

std::string Scope::name_of(VarId v) const {
  for (auto &x : vars)
    if (x.id == v) return x.name;
  return "v" + std::to_string(v);
}

Scope Scope::with(const ScopeVar &v) const {
  Scope s = *this;
  for (auto &x : s.vars)
    if (x.id == v.id) return s;
  s.vars.push_back(v);
  std::sort(s.vars.begin(), s.vars.end());
  return s;
}

Scope Scope::without(VarId v) const {
  Scope s;
  for (auto &x : vars)
    if (x.id != v) s.vars.push_back(x);
  return s;
}

Scope Scope::union_with(const Scope &o) const {
  Scope s = *this;
  for (auto &x : o.vars) s = s.with(x);
  return s;
}

bool Scope::subset_of(const Scope &o) const {
  for (auto &x : vars)
    if (!o.contains(x.id)) return false;
  return true;
}

std::string Scope::str() const {
  std::string s = "{";
  for (size_t i = 0; i < vars.size(); i++) {
    if (i) s += ", ";
    s += vars[i].name;
  }
  return s + "}";
}

std::vector<LinCons> WidenHints::for_scope(const Scope &s) const {
  std::vector<LinCons> out;
  auto in_scope = [&](const LinCons &c) {
    for (auto &[sym, q] : c.e.coeffs) {
      if (sym.is_temp()) return false;
      if (sym.is_var()) {
        auto k = s.kind_of(sym.id);
        if (!k || *k == VarKind::Fun) return false;
      }
    }
    return true;
  };
  for (auto &t : thresholds)
    if (in_scope(t)) out.push_back(t);
  if (scope_orders) {
    std::vector<Sym> ints;
    for (auto &v : s.vars)
      if (v.kind != VarKind::Fun) ints.push_back(Sym::var(v.id));
    LinExpr nu = LinExpr::sym(Sym::nu());
    for (auto v : ints) {
      out.push_back(LinCons::le(nu, LinExpr::sym(v)).normalized());
      out.push_back(LinCons::ge(nu, LinExpr::sym(v)).normalized());
      for (auto w : ints)
        if (v < w) {
          out.push_back(
              LinCons::le(LinExpr::sym(v), LinExpr::sym(w)).normalized());
          out.push_back(
              LinCons::ge(LinExpr::sym(v), LinExpr::sym(w)).normalized());
        }
    }
  }
  return out;
}

LinSystem BaseDomain::scrub(const Scope &s, const LinSystem &sys) {
  // rows touching fun-kinded variables impose nothing and are dropped;
  // out-of-scope int/bool variables and temporaries are existentially
  // eliminated so their consequences survive
  LinSystem cur;
  for (auto &r : sys.rows()) {
    bool drop = false;
    for (auto &[sym, c] : r.e.coeffs)
      if (sym.is_var() && s.kind_of(sym.id) == VarKind::Fun) drop = true;
    if (!drop) cur.add(r);
  }
  if (sys.marked_unsat()) cur.add(LinCons::geq0(LinExpr::constant(-1)));
  for (;;) {
    std::optional<Sym> victim;
    for (auto sym : cur.symbols()) {
      if (sym.is_temp() || (sym.is_var() && !s.contains(sym.id))) {
        victim = sym;
        break;
      }
    }
    if (!victim) return cur;
    cur = cur.eliminate(*victim);
  }
}

std::optional<Rat> BaseDomain::binding_value(const ConcreteBinding &b) {
  if (b.is_table) return std::nullopt;
  return Rat((long)b.c.num);
}

BaseVal BaseDomain::of_const(Constant c, const Scope &s) const {
  LinSystem sys;
  sys.add(LinCons::eq0(LinExpr::sym(Sym::nu()) -
                       LinExpr::constant(Rat((long)c.num))));
  return from_cons(s, sys);
}

BaseVal BaseDomain::strengthen_eq_var(const BaseVal &a, Sym x, Sym y) const {
  if (is_bot(a)) return a;
  // fun-kinded participants impose no relational constraint
  auto opaque = [&](Sym s) {
    if (!s.is_var()) return false;
    auto k = a.scope().kind_of(s.id);
    return !k || *k == VarKind::Fun;
  };
  if (opaque(x) || opaque(y)) return a;
  LinSystem sys = to_cons(a);
  sys.add(LinCons::eq0(LinExpr::sym(x) - LinExpr::sym(y)));
  return from_cons(a.scope(), sys);
}

BaseVal BaseDomain::strengthen_eq_const(const BaseVal &a, VarId x,
                                        Constant c) const {
  if (is_bot(a)) return a;
  auto k = a.scope().kind_of(x);
  if (!k || *k == VarKind::Fun) return a;  // opaque function symbol
  LinSystem sys = to_cons(a);
  sys.add(LinCons::eq0(LinExpr::sym(Sym::var(x)) -
                       LinExpr::constant(Rat((long)c.num))));
  return from_cons(a.scope(), sys);
}

BaseVal BaseDomain::subst_nu(const BaseVal &a, const ScopeVar &x) const {
  Scope s2 = a.scope().with(x);
  if (is_bot(a)) return bot(s2);
  if (x.kind == VarKind::Fun) return from_cons(s2, to_cons(a).eliminate(Sym::nu()));
  LinSystem sys = to_cons(a).renamed(Sym::nu(), Sym::var(x.id));
  return from_cons(s2, sys);
}

BaseVal BaseDomain::strengthen_with(const BaseVal &a, const ScopeVar &x,
                                    const BaseVal &ax) const {
  if (is_bot(a)) return a;
  Scope s2 = a.scope().with(x);
  if (is_bot(ax)) return bot(s2);
  LinSystem sys = to_cons(a);
  if (x.kind != VarKind::Fun) {
    LinSystem moved = to_cons(ax).renamed(Sym::nu(), Sym::var(x.id));
    for (auto &r : moved.rows()) sys.add(r);
  }
  return from_cons(s2, sys);
}

BaseVal BaseDomain::project(const BaseVal &a, VarId x) const {
  Scope s2 = a.scope().without(x);
  if (is_bot(a)) return bot(s2);
  LinSystem sys = to_cons(a).eliminate(Sym::var(x));
  return from_cons(s2, sys);
}

BaseVal BaseDomain::project_nu(const BaseVal &a) const {
  if (is_bot(a)) return a;
  return from_cons(a.scope(), to_cons(a).eliminate(Sym::nu()));
}

BaseVal BaseDomain::extend(const BaseVal &a, const Scope &sup) const {
  if (a.scope() == sup) return a;
  if (is_bot(a)) return bot(sup);
  return from_cons(sup, to_cons(a));
}

BaseVal BaseDomain::restrict_to(const BaseVal &a, const Scope &sub) const {
  if (a.scope() == sub) return a;
  if (is_bot(a)) return bot(sub);
  LinSystem sys = to_cons(a);
  for (auto &v : a.scope().vars)
    if (!sub.contains(v.id)) sys = sys.eliminate(Sym::var(v.id));
  return from_cons(sub, sys);
}

BaseVal BaseDomain::assume(const BaseVal &a, const LinCons &c) const {
  if (is_bot(a)) return a;
  LinSystem sys = to_cons(a);
  sys.add(c);
  return from_cons(a.scope(), sys);
}

BaseVal BaseDomain::assume_all(const BaseVal &a,
                               const std::vector<LinCons> &cs) const {
  if (is_bot(a)) return a;
  LinSystem sys = to_cons(a);
  for (auto &c : cs) sys.add(c);
  return from_cons(a.scope(), sys);
}

bool BaseDomain::member(const BaseVal &a, const Assignment &asg) const {
  if (is_bot(a)) return false;
  std::map<Sym, Rat> vals;
  for (auto &[s, b] : asg) {
    auto v = binding_value(b);
    if (v) vals[s] = *v;
  }
  LinSystem sys = to_cons(a);
  for (auto &r : sys.rows()) {
    // rows never mention fun-kinded variables (scrubbed on construction)
    Rat v = r.e.eval(vals);
    if (r.eq ? v != 0 : v < 0) return false;
  }
  return true;
}

std::vector<QualTemplate> parse_qualifier_file(const std::string &text) {
  std::vector<QualTemplate> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    // strip comments and whitespace
    auto h = line.find('#');
    if (h != std::string::npos) line = line.substr(0, h);
    size_t a = line.find_first_not_of(" \t\r");
    if (a == std::string::npos) continue;
    size_t b = line.find_last_not_of(" \t\r");
    out.push_back(parse_qualifier(line.substr(a, b - a + 1)));
  }
  return out;
}

}  // namespace dfrt
