#include "dfrt/abstract.hpp"

#include <algorithm>
#include <cassert>
#include <sstream>

namespace dfrt {

bool typemap_safe(const TypeMap &m) {
  if (m.top) return false;
  for (auto &[n, t] : m.entries)
    if (!type_safe(t)) return false;
  return true;
}

Analyzer::Analyzer(ExprPtr program, AnalysisConfig cfg)
    : prog_(std::move(program)),
      cfg_(std::move(cfg)),
      dom_(cfg_.domain == DomainKind::Pred ? make_pred_domain(cfg_.qualifiers)
           : cfg_.domain == DomainKind::Oct ? make_oct_domain()
                                            : make_poly_domain()),
      cx_(*dom_) {
  cx_.depth_cap = cfg_.depth_cap;
  visit(prog_, [&](const Expr &e) { exprs_[e.loc.id] = &e; });
  infer_kinds();
  if (cfg_.widening == WideningMode::Thresholds) build_thresholds();
  dom_->set_join_hints(cx_.hints);
}

// Binder kinds by syntactic use: applied -> fun, guard/logical -> bool,
// arithmetic/comparison -> int; fun wins conflicts so that shape errors
// surface as the error type during analysis rather than up front.
void Analyzer::infer_kinds() {
  std::map<VarId, int> rank;  // 0 none, 1 int, 2 bool, 3 fun
  auto bump = [&](const ExprPtr &e, int r) {
    if (e && e->kind == Expr::Kind::Var) {
      int &cur = rank[e->var];
      cur = std::max(cur, r);
    }
  };
  visit(prog_, [&](const Expr &e) {
    switch (e.kind) {
      case Expr::Kind::App:
        bump(e.a, 3);
        break;
      case Expr::Kind::BinOp:
        bump(e.a, is_logic(e.op) ? 2 : 1);
        bump(e.b, is_logic(e.op) ? 2 : 1);
        break;
      case Expr::Kind::Ite:
      case Expr::Kind::Assert:
        bump(e.a, 2);
        break;
      default:
        break;
    }
    if (e.kind == Expr::Kind::Rec) rank[e.self] = 3;  // recursive binder
  });
  visit(prog_, [&](const Expr &e) {
    auto set = [&](VarId v) {
      int r = rank.count(v) ? rank[v] : 0;
      kinds_[v] = r == 3 ? VarKind::Fun : r == 2 ? VarKind::Bool : VarKind::Int;
    };
    if (e.kind == Expr::Kind::Lambda || e.kind == Expr::Kind::Rec)
      set(e.param);
    if (e.kind == Expr::Kind::Rec) set(e.self);
  });
}

// static expression kind, where syntactically evident
std::optional<VarKind> Analyzer::static_kind(const Expr &e) const {
  switch (e.kind) {
    case Expr::Kind::Const:
      return e.value.is_bool ? VarKind::Bool : VarKind::Int;
    case Expr::Kind::Var: {
      auto it = kinds_.find(e.var);
      if (it != kinds_.end()) return it->second;
      return std::nullopt;
    }
    case Expr::Kind::BinOp:
      return is_arith(e.op) ? VarKind::Int : VarKind::Bool;
    case Expr::Kind::Lambda:
    case Expr::Kind::Rec:
      return VarKind::Fun;
    case Expr::Kind::Assert:
      return VarKind::Bool;
    default:
      return std::nullopt;  // App, Ite
  }
}

VarKind Analyzer::kind_of(VarId v) const {
  auto it = kinds_.find(v);
  if (it != kinds_.end()) return it->second;
  return VarKind::Int;  // dependency variables and the like
}

std::string Analyzer::var_name(VarId v) const {
  for (auto &[l, e] : exprs_) {
    if ((e->kind == Expr::Kind::Lambda || e->kind == Expr::Kind::Rec) &&
        e->param == v)
      return e->name;
    if (e->kind == Expr::Kind::Rec && e->self == v) return e->self_name;
  }
  return "v" + std::to_string(v);
}

Scope Analyzer::scope_of_env(EnvId env) const {
  Scope s;
  for (auto &[x, n] : arena_.env_map(env))
    s.vars.push_back({x, kind_of(x), var_name(x)});
  std::sort(s.vars.begin(), s.vars.end());
  return s;
}

TypeEnv Analyzer::env_types(EnvId env, const TypeMap &m) const {
  TypeEnv te;
  te.scope = scope_of_env(env);
  for (auto &[x, n] : arena_.env_map(env)) te.types[x] = m.at(n);
  return te;
}

namespace {

// linear view of a guard operand; nullopt for non-linear shapes
std::optional<LinExpr> linear_of_expr(const Expr &e) {
  switch (e.kind) {
    case Expr::Kind::Const:
      if (e.value.is_bool) return std::nullopt;
      return LinExpr::constant(Rat((long)e.value.num));
    case Expr::Kind::Var:
      return LinExpr::sym(Sym::var(e.var));
    case Expr::Kind::BinOp: {
      if (!is_arith(e.op)) return std::nullopt;
      auto l = linear_of_expr(*e.a);
      auto r = linear_of_expr(*e.b);
      if (!l || !r) return std::nullopt;
      if (e.op == BinOpKind::Add) return *l + *r;
      if (e.op == BinOpKind::Sub) return *l - *r;
      // multiplication: one side must be constant
      if (l->is_constant()) return *r * l->k;
      if (r->is_constant()) return *l * r->k;
      return std::nullopt;
    }
    default:
      return std::nullopt;
  }
}

}  // namespace

// thresholds: comparisons from conditional guards (raw, negated, and with
// single variables replaced by nu), plus pairwise x <= y and nu <= x forms
// over the int-kinded binders
void Analyzer::build_thresholds() {
  std::vector<LinCons> out;
  auto add = [&](const LinCons &c) { out.push_back(c.normalized()); };
  auto add_cmp = [&](BinOpKind op, const LinExpr &l, const LinExpr &r) {
    switch (op) {
      case BinOpKind::Le: add(LinCons::le(l, r)); break;
      case BinOpKind::Lt:
        add(LinCons::le(l, r - LinExpr::constant(1)));
        break;
      case BinOpKind::Ge: add(LinCons::ge(l, r)); break;
      case BinOpKind::Gt:
        add(LinCons::ge(l, r + LinExpr::constant(1)));
        break;
      case BinOpKind::Eq:
        add(LinCons::le(l, r));
        add(LinCons::ge(l, r));
        break;
      default:
        break;
    }
  };
  if (!cfg_.threshold_templates.empty()) {
    for (auto &q : cfg_.threshold_templates) {
      if (q.has_wildcard) {
        for (auto &[v, k] : kinds_)
          if (k != VarKind::Fun)
            add_cmp(q.op, q.lhs.rename(Sym::temp(0), Sym::var(v)),
                    q.rhs.rename(Sym::temp(0), Sym::var(v)));
      } else {
        add_cmp(q.op, q.lhs, q.rhs);
      }
    }
  } else {
    // auto mode: harvest conditional guards
    visit(prog_, [&](const Expr &e) {
      if (e.kind != Expr::Kind::Ite && e.kind != Expr::Kind::Assert) return;
      const Expr *g = e.a.get();
      std::function<void(const Expr &)> comps = [&](const Expr &c) {
        if (c.kind != Expr::Kind::BinOp) return;
        if (is_logic(c.op)) {
          comps(*c.a);
          comps(*c.b);
          return;
        }
        if (!is_cmp(c.op)) return;
        auto l = linear_of_expr(*c.a);
        auto r = linear_of_expr(*c.b);
        if (!l || !r) return;
        add_cmp(c.op, *l, *r);
        // integer negation
        LinExpr d = *l - *r;
        switch (c.op) {
          case BinOpKind::Le: add(LinCons::geq0(d - LinExpr::constant(1))); break;
          case BinOpKind::Lt: add(LinCons::geq0(d)); break;
          case BinOpKind::Ge:
            add(LinCons::geq0(d * Rat(-1) - LinExpr::constant(1)));
            break;
          case BinOpKind::Gt: add(LinCons::geq0(d * Rat(-1))); break;
          default: break;
        }
        // value-dimension variants: each variable replaced by nu
        std::set<Sym> syms;
        for (auto &[s, q] : d.coeffs) syms.insert(s);
        for (auto s : syms) {
          LinExpr dn = d.rename(s, Sym::nu());
          if (dn.mentions(Sym::nu())) {
            add(LinCons::geq0(dn));
            add(LinCons::geq0(dn * Rat(-1)));
            add(LinCons::geq0(dn - LinExpr::constant(1)));
            add(LinCons::geq0(dn * Rat(-1) - LinExpr::constant(1)));
          }
        }
      };
      comps(*g);
    });
    // pairwise variable orderings are instantiated per scope at widening
    // points so output scopes (dependency variables) are covered too
    cx_.hints.scope_orders = true;
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  cx_.hints.thresholds = std::move(out);
}

BaseVal Analyzer::env_fact(EnvId env, const TypeMap &m,
                           const BaseVal *phi) const {
  Scope sc = scope_of_env(env);
  BaseVal fact = dom_->top(sc);
  for (auto &[x, n] : arena_.env_map(env)) {
    RefType tx = m.at(n);
    if (!tx.is_base()) continue;
    auto k = kind_of(x);
    if (k == VarKind::Fun) continue;
    BaseVal moved = dom_->subst_nu(tx.base_val(), {x, k, var_name(x)});
    fact = dom_->meet(fact, dom_->extend(moved, sc));
    if (dom_->is_bot(fact)) return fact;
  }
  if (phi) fact = dom_->meet(fact, dom_->extend(*phi, sc));
  return fact;
}

BaseVal Analyzer::guard_fact(const ExprPtr &guard, bool polarity, EnvId env,
                             const TypeMap &m, const BaseVal *phi) {
  Scope sc = scope_of_env(env);
  const Expr &g = *guard;
  auto type_of = [&](const Expr &e) {
    return m.at(arena_.expr_node(e.loc.id, env));
  };
  if (g.kind == Expr::Kind::BinOp && is_logic(g.op)) {
    BaseVal l = guard_fact(g.a, polarity, env, m, phi);
    BaseVal r = guard_fact(g.b, polarity, env, m, phi);
    bool conj = (g.op == BinOpKind::And) == polarity;
    return conj ? dom_->meet(l, r) : dom_->join(l, r);
  }
  if (g.kind == Expr::Kind::BinOp && is_cmp(g.op)) {
    RefType t1 = type_of(*g.a), t2 = type_of(*g.b);
    if (t1.is_base() && t2.is_base()) {
      Sym z1 = Sym::temp(101), z2 = Sym::temp(102);
      LinSystem sys;
      LinSystem r1 = dom_->to_cons(t1.base_val()).renamed(Sym::nu(), z1);
      LinSystem r2 = dom_->to_cons(t2.base_val()).renamed(Sym::nu(), z2);
      for (auto &r : r1.rows()) sys.add(r);
      for (auto &r : r2.rows()) sys.add(r);
      LinExpr d = LinExpr::sym(z1) - LinExpr::sym(z2);
      BinOpKind op = g.op;
      if (!polarity) {  // integer negation of the comparison
        switch (op) {
          case BinOpKind::Le: op = BinOpKind::Gt; break;
          case BinOpKind::Lt: op = BinOpKind::Ge; break;
          case BinOpKind::Ge: op = BinOpKind::Lt; break;
          case BinOpKind::Gt: op = BinOpKind::Le; break;
          case BinOpKind::Eq: op = BinOpKind::Ne; break;
          default: op = BinOpKind::Eq; break;
        }
      }
      auto finish = [&](LinSystem s) {
        s = s.eliminate(z1).eliminate(z2).eliminate(Sym::nu());
        return dom_->from_cons(sc, s);
      };
      switch (op) {
        case BinOpKind::Le: sys.add(LinCons::geq0(d * Rat(-1))); return finish(sys);
        case BinOpKind::Lt:
          sys.add(LinCons::geq0(d * Rat(-1) - LinExpr::constant(1)));
          return finish(sys);
        case BinOpKind::Ge: sys.add(LinCons::geq0(d)); return finish(sys);
        case BinOpKind::Gt:
          sys.add(LinCons::geq0(d - LinExpr::constant(1)));
          return finish(sys);
        case BinOpKind::Eq: sys.add(LinCons::eq0(d)); return finish(sys);
        default: {  // disequality: join of the two strict sides
          LinSystem lo = sys, hi = sys;
          hi.add(LinCons::geq0(d - LinExpr::constant(1)));
          lo.add(LinCons::geq0(d * Rat(-1) - LinExpr::constant(1)));
          return dom_->join(finish(hi), finish(lo));
        }
      }
    }
  }
  // general boolean expression: constrain its type to the truth value and
  // forget nu
  RefType t = type_of(g);
  if (t.is_bot()) return dom_->bot(sc);
  if (!t.is_base()) return dom_->top(sc);
  LinSystem sys = dom_->to_cons(t.base_val());
  sys.add(LinCons::eq0(LinExpr::sym(Sym::nu()) -
                       LinExpr::constant(polarity ? 1 : 0)));
  if (!sys.sat()) return dom_->bot(sc);
  return dom_->from_cons(sc, sys.eliminate(Sym::nu()));
}

RefType Analyzer::binop_result(BinOpKind op, const RefType &lhs,
                               const RefType &rhs, const Scope &scope) const {
  const BaseVal &b1 = lhs.base_val();
  const BaseVal &b2 = rhs.base_val();
  Sym z1 = Sym::temp(201), z2 = Sym::temp(202);
  LinSystem sys;
  LinSystem r1 = dom_->to_cons(b1).renamed(Sym::nu(), z1);
  LinSystem r2 = dom_->to_cons(b2).renamed(Sym::nu(), z2);
  for (auto &r : r1.rows()) sys.add(r);
  for (auto &r : r2.rows()) sys.add(r);
  LinExpr nu = LinExpr::sym(Sym::nu());
  LinExpr e1 = LinExpr::sym(z1), e2 = LinExpr::sym(z2);
  auto entails_const = [&](Sym z) -> std::optional<Rat> {
    auto u = sys.upper_bound(LinExpr::sym(z));
    auto l = sys.lower_bound(LinExpr::sym(z));
    if (u && l && *u == *l) return *u;
    return std::nullopt;
  };
  switch (op) {
    case BinOpKind::Add: sys.add(LinCons::equal(nu, e1 + e2)); break;
    case BinOpKind::Sub: sys.add(LinCons::equal(nu, e1 - e2)); break;
    case BinOpKind::Mul: {
      auto c1 = entails_const(z1);
      auto c2 = entails_const(z2);
      if (c1)
        sys.add(LinCons::equal(nu, e2 * *c1));
      else if (c2)
        sys.add(LinCons::equal(nu, e1 * *c2));
      // otherwise nonlinear: nu stays unconstrained
      break;
    }
    case BinOpKind::And:
    case BinOpKind::Or: {
      // exact linear encoding over {0,1}
      sys.add(LinCons::ge(nu, LinExpr::constant(0)));
      sys.add(LinCons::le(nu, LinExpr::constant(1)));
      if (op == BinOpKind::And) {
        sys.add(LinCons::le(nu, e1));
        sys.add(LinCons::le(nu, e2));
        sys.add(LinCons::ge(nu, e1 + e2 - LinExpr::constant(1)));
      } else {
        sys.add(LinCons::ge(nu, e1));
        sys.add(LinCons::ge(nu, e2));
        sys.add(LinCons::le(nu, e1 + e2));
      }
      break;
    }
    default: {  // comparisons: sharpen when decidable, else 0..1
      LinExpr d = e1 - e2;
      LinCons holds = LinCons::geq0(d), fails = LinCons::geq0(d * Rat(-1));
      switch (op) {
        case BinOpKind::Le: holds = LinCons::geq0(d * Rat(-1)); fails = LinCons::geq0(d - LinExpr::constant(1)); break;
        case BinOpKind::Lt: holds = LinCons::geq0(d * Rat(-1) - LinExpr::constant(1)); fails = LinCons::geq0(d); break;
        case BinOpKind::Ge: holds = LinCons::geq0(d); fails = LinCons::geq0(d * Rat(-1) - LinExpr::constant(1)); break;
        case BinOpKind::Gt: holds = LinCons::geq0(d - LinExpr::constant(1)); fails = LinCons::geq0(d * Rat(-1)); break;
        case BinOpKind::Eq:
        case BinOpKind::Ne: holds = LinCons::eq0(d); fails = holds; break;
        default: break;
      }
      bool definitely_true, definitely_false;
      if (op == BinOpKind::Eq) {
        definitely_true = sys.entails(holds);
        LinSystem test = sys;
        test.add(holds);
        definitely_false = !test.sat();
      } else if (op == BinOpKind::Ne) {
        LinSystem test = sys;
        test.add(holds);
        definitely_true = !test.sat();
        definitely_false = sys.entails(holds);
      } else {
        definitely_true = sys.entails(holds);
        definitely_false = sys.entails(fails);
      }
      if (definitely_true)
        sys.add(LinCons::equal(nu, LinExpr::constant(1)));
      else if (definitely_false)
        sys.add(LinCons::equal(nu, LinExpr::constant(0)));
      else {
        sys.add(LinCons::ge(nu, LinExpr::constant(0)));
        sys.add(LinCons::le(nu, LinExpr::constant(1)));
      }
      break;
    }
  }
  sys = sys.eliminate(z1).eliminate(z2);
  return RefType::base(dom_->from_cons(scope, sys));
}

namespace {

// projects a type's base payloads onto the scope of the node it is stored
// at; dependency variables bound along the way stay in scope
RefType project_onto(TypeCtx &cx, const RefType &t, const Scope &allowed) {
  switch (t.kind()) {
    case RefType::Kind::Bot:
    case RefType::Kind::Err:
      return t;
    case RefType::Kind::Base: {
      const BaseVal &b = t.base_val();
      bool ok = true;
      for (auto &v : b.scope().vars)
        if (!allowed.contains(v.id)) ok = false;
      if (ok) return t;
      return RefType::base(cx.dom.restrict_to(b, allowed));
    }
    case RefType::Kind::Fun: {
      const FunData &f = t.fn();
      Scope inner = allowed.with({f.depvar, VarKind::Int, f.name});
      std::map<AbsStack, TypeEntry> tb;
      for (auto &[s, e] : f.table)
        tb[s] = {project_onto(cx, e.first, allowed),
                 project_onto(cx, e.second, inner)};
      return RefType::fun(f.depvar, f.name, f.tags, std::move(tb));
    }
  }
  return t;
}

}  // namespace

struct TStepper {
  Analyzer &an;
  TypeCtx &cx;
  const BaseDomain &dom;
  NodeArena &arena;
  TypeMap m;
  bool poisoned = false;
  int k;

  TStepper(Analyzer &a, TypeMap m0)
      : an(a), cx(a.ctx()), dom(a.domain()), arena(a.arena()),
        m(std::move(m0)), k(a.config().k) {}

  void poison(const char *why = "unsafe join", LocId loc = 0) {
    if (!poisoned && getenv("DFRT_POISON"))
      fprintf(stderr, "poisoned: %s (loc %u)\n", why, loc);
    poisoned = true;
    m.entries.clear();
    m.top = true;
  }

  RefType restrict_scope(const RefType &t, const Scope &allowed) {
    return project_onto(cx, t, allowed);
  }

  RefType upd(NodeId n, const RefType &v, const Scope &scope) {
    if (poisoned) return RefType::err();
    RefType vs = restrict_scope(v, scope);
    RefType j = type_join(cx, m.at(n), vs);
    if (!type_safe(j) && getenv("DFRT_POISON"))
      fprintf(stderr, "unsafe join at node loc %u\n  old=%s\n  new=%s\n",
              arena.node(n).loc, type_str(dom, m.at(n)).c_str(),
              type_str(dom, vs).c_str());
    if (getenv("DFRT_UPD") && arena.node(n).loc == (LocId)atoi(getenv("DFRT_UPD")) &&
        !arena.node(n).is_var) {
      fprintf(stderr, "UPD loc%u:\n  old=%s\n  new=%s\n  join=%s\n",
              arena.node(n).loc, type_str(dom, m.at(n)).c_str(),
              type_str(dom, vs).c_str(), type_str(dom, j).c_str());
    }
    if (!type_safe(j)) {
      poison();
      return RefType::err();
    }
    if (j.is_bot())
      m.entries.erase(n);
    else
      m.entries[n] = j;
    return j;
  }

  Scope node_scope(EnvId env) { return an.scope_of_env(env); }

  RefType apply_phi(const RefType &t, const BaseVal *phi) {
    if (!phi) return t;
    return type_constrain(cx, t, *phi);
  }

  RefType step(const ExprPtr &e, EnvId env, const AbsStack &stk,
               const BaseVal *phi) {
    if (poisoned) return RefType::err();
    NodeId n = arena.expr_node(e->loc.id, env);
    Scope sc = node_scope(env);
    switch (e->kind) {
      case Expr::Kind::Const: {
        TypeEnv te = an.env_types(env, m);
        RefType t = apply_phi(const_type(cx, e->value, te), phi);
        return upd(n, t, sc);
      }

      case Expr::Kind::Var: {
        RefType t = m.at(n);
        NodeId nx = arena.env_lookup(env, e->var);
        assert(nx >= 0);
        TypeEnv te = an.env_types(env, m);
        // the binding's type lives at the defining environment's scope; it
        // is implicitly rescoped to the use site before strengthening
        RefType bound = type_extend_scope(cx, m.at(nx), sc);
        RefType lhs = apply_phi(
            type_env_strengthen(cx, type_eq_var(cx, bound, e->var), te), phi);
        RefType rhs = apply_phi(
            type_env_strengthen(cx, type_eq_var(cx, t, e->var), te), phi);
        auto [lhs2, rhs2] = type_prop(cx, lhs, rhs);
        upd(nx, lhs2, an.scope_of_env(arena.node(nx).env));
        if (poisoned) return RefType::err();
        return upd(n, rhs2, sc);
      }

      case Expr::Kind::App: {
        NodeId ni = arena.expr_node(e->a->loc.id, env);
        NodeId nj = arena.expr_node(e->b->loc.id, env);
        RefType t = m.at(n);
        RefType ti = step(e->a, env, stk, phi);
        if (poisoned) return RefType::err();
        if (ti.is_bot()) return RefType::bot();
        if (!ti.is_fun()) {  // applying a non-function type
          poison("apply non-function", e->loc.id);
          return RefType::err();
        }
        RefType tj = step(e->b, env, stk, phi);
        if (poisoned) return RefType::err();
        AbsStack s2 = abs_concat(e->a->loc.id, stk, k);
        VarId z = cx.fresh_depvar();
        TagSet tags{{e->a->loc.id, stk}};
        RefType singleton =
            RefType::fun(z, "z" + std::to_string(z - 2'000'000), tags,
                         {{s2, {tj, t}}});
        auto [ti2, t2] = type_prop(cx, ti, singleton);
        auto [tj2, tv] = t2.fn().entry(s2);
        if (getenv("DFRT_APP") && e->loc.id == (LocId)atoi(getenv("DFRT_APP"))) {
          fprintf(stderr, "APP loc%u:\n  ti=%s\n  tj=%s\n  tv=%s\n",
                  e->loc.id, type_str(dom, ti).c_str(),
                  type_str(dom, tj).c_str(), type_str(dom, tv).c_str());
        }
        upd(ni, ti2, sc);
        if (poisoned) return RefType::err();
        upd(nj, tj2, sc);
        if (poisoned) return RefType::err();
        if (!an.config().keep_call_depvar)
          tv = type_project(cx, tv, t2.fn().depvar);
        Scope out_scope = an.config().keep_call_depvar
                              ? sc.with({t2.fn().depvar, VarKind::Int,
                                         t2.fn().name})
                              : sc;
        return upd(n, tv, out_scope);
      }

      case Expr::Kind::Lambda:
        return lambda_like(*e, 0, env, stk, phi, n, sc);

      case Expr::Kind::Rec:
        return lambda_like(*e, e->self, env, stk, phi, n, sc);

      case Expr::Kind::Ite: {
        RefType tc = step(e->a, env, stk, phi);
        if (poisoned) return RefType::err();
        if (tc.is_bot()) return RefType::bot();
        if (tc.is_fun() || an.static_kind(*e->a) == VarKind::Int) {
          poison("ite guard kind", e->loc.id);
          return RefType::err();
        }
        BaseVal ef = an.env_fact(env, m, phi);
        BaseVal gt = an.guard_fact(e->a, true, env, m, phi);
        BaseVal gf = an.guard_fact(e->a, false, env, m, phi);
        bool env_ok = !dom.is_bot(ef);
        bool then_ok = env_ok && !dom.is_bot(dom.meet(ef, gt));
        bool else_ok = env_ok && !dom.is_bot(dom.meet(ef, gf));
        if (env_ok && !then_ok && !else_ok) {
          poison("ite guard not boolean-valued", e->loc.id);
          return RefType::err();
        }
        RefType tt, te2;
        if (then_ok) {
          BaseVal phi2 = phi ? dom.meet(dom.extend(*phi, gt.scope()), gt) : gt;
          tt = step(e->b, env, stk, &phi2);
          if (poisoned) return RefType::err();
        }
        if (else_ok) {
          BaseVal phi2 = phi ? dom.meet(dom.extend(*phi, gf.scope()), gf) : gf;
          te2 = step(e->c, env, stk, &phi2);
          if (poisoned) return RefType::err();
        }
        RefType joined = type_join(cx, tt, te2);
        if (joined.is_bot()) return RefType::bot();
        return upd(n, joined, sc);
      }

      case Expr::Kind::BinOp: {
        RefType t1 = step(e->a, env, stk, phi);
        if (poisoned) return RefType::err();
        RefType t2 = step(e->b, env, stk, phi);
        if (poisoned) return RefType::err();
        if (t1.is_bot() || t2.is_bot()) return RefType::bot();
        if (!t1.is_base() || !t2.is_base()) {
          poison("binop on non-base", e->loc.id);
          return RefType::err();
        }
        RefType r = an.binop_result(e->op, t1, t2, sc);
        return upd(n, apply_phi(r, phi), sc);
      }

      case Expr::Kind::Assert: {
        RefType ta = step(e->a, env, stk, phi);
        if (poisoned) return RefType::err();
        if (ta.is_bot()) return RefType::bot();
        if (ta.is_fun() || an.static_kind(*e->a) == VarKind::Int) {
          poison("assert guard kind", e->loc.id);
          return RefType::err();
        }
        BaseVal ef = an.env_fact(env, m, phi);
        if (!dom.is_bot(ef)) {
          BaseVal gt = an.guard_fact(e->a, true, env, m, phi);
          BaseVal gf = an.guard_fact(e->a, false, env, m, phi);
          if (dom.is_bot(dom.meet(ef, gt)) && dom.is_bot(dom.meet(ef, gf))) {
            poison("assert guard not boolean-valued", e->loc.id);
            return RefType::err();
          }
          if (!dom.is_bot(dom.meet(ef, gf))) {
            poison("assert not entailed", e->loc.id);
            return RefType::err();
          }
        }
        TypeEnv te = an.env_types(env, m);
        RefType t = apply_phi(const_type(cx, Constant::of_bool(true), te), phi);
        return upd(n, t, sc);
      }
    }
    return RefType::bot();
  }

  // shared lambda/rec case; self == 0 means plain lambda
  RefType lambda_like(const Expr &e, VarId self, EnvId env, const AbsStack &stk,
                      const BaseVal *phi, NodeId n, const Scope &sc) {
    TagSet tags{{e.loc.id, stk}};
    RefType init = RefType::fun(e.param, e.name, tags, {});
    RefType t = upd(n, init, sc);
    if (poisoned) return RefType::err();
    if (!t.is_fun()) {  // node already holds an incompatible kind
      poison();
      return RefType::err();
    }
    std::vector<AbsStack> stacks;
    for (auto &[s, entry] : t.fn().table)
      if (!entry.first.is_bot()) stacks.push_back(s);
    RefType joined = RefType::bot();
    for (auto &s2 : stacks) {
      RefType part = body_at(e, self, env, phi, t, s2);
      if (poisoned) return RefType::err();
      joined = type_join(cx, joined, part);
      if (!type_safe(joined)) {
        poison();
        return RefType::err();
      }
    }
    return upd(n, joined, sc);
  }

  RefType body_at(const Expr &e, VarId self, EnvId env, const BaseVal *phi,
                  const RefType &t, const AbsStack &s2) {
    RefType tbl = t;
    EnvId env_i = env;
    if (self) {
      NodeId nf = arena.var_node(self, env, s2);
      env_i = arena.env_extend(env_i, self, nf);
      RefType tf = m.at(nf);
      auto [t1, tf2] = type_prop(cx, tbl, tf);
      upd(nf, tf2, an.scope_of_env(env));
      if (poisoned) return RefType::err();
      tbl = t1;
    }
    NodeId nx = arena.var_node(e.param, env, s2);
    env_i = arena.env_extend(env_i, e.param, nx);
    NodeId ni = arena.expr_node(e.a->loc.id, env_i);
    RefType tx = m.at(nx);
    RefType ti = step(e.a, env_i, s2, phi);
    if (poisoned) return RefType::err();
    const FunData &f = tbl.fn();
    // the body result relates to the parameter by its program name; the
    // node's accumulated table may carry an alpha-renamed binder, and
    // propagation renames both to a common fresh one
    RefType left = RefType::fun(e.param, e.name, f.tags, {{s2, {tx, ti}}});
    RefType restr = RefType::fun(f.depvar, f.name, f.tags,
                                 {{s2, f.entry(s2)}});
    auto [l2, t2] = type_prop(cx, left, restr);
    TypeEntry le = l2.fn().entry(s2);
    ScopeVar param_sv{e.param, an.kind_of(e.param), e.name};
    RefType out_for_node =
        type_rename_var(cx, le.second, l2.fn().depvar, param_sv);
    upd(nx, le.first, an.scope_of_env(env));
    if (poisoned) return RefType::err();
    upd(ni, out_for_node, an.scope_of_env(env_i));
    if (poisoned) return RefType::err();
    if (self) return type_join(cx, tbl, t2);
    return t2;
  }
};

std::pair<RefType, TypeMap> Analyzer::step(const TypeMap &m) {
  return step_at(prog_, arena_.empty_env(), {}, m);
}

std::pair<RefType, TypeMap> Analyzer::step_at(const ExprPtr &e, EnvId env,
                                              const AbsStack &stack,
                                              const TypeMap &m) {
  TStepper st(*this, m);
  RefType t = st.step(e, env, stack, nullptr);
  return {t, std::move(st.m)};
}

namespace {

bool typemap_equal(TypeCtx &cx, const TypeMap &a, const TypeMap &b) {
  if (a.top != b.top) return false;
  if (a.top) return true;
  if (a.entries.size() != b.entries.size()) return false;
  auto ia = a.entries.begin();
  auto ib = b.entries.begin();
  for (; ia != a.entries.end(); ++ia, ++ib) {
    if (ia->first != ib->first) return false;
    if (!type_equal(cx, ia->second, ib->second)) return false;
  }
  return true;
}

}  // namespace

AnalysisResult Analyzer::analyze() {
  AnalysisResult r;
  TypeMap m;
  std::map<NodeId, int> ages;
  for (int i = 0; i < cfg_.max_iters; i++) {
    auto [v, m2] = step(m);
    (void)v;
    r.iterations = i + 1;
    // widened iterate: M' = M widen step(M), pointwise; each node is
    // joined for its first few rounds after becoming reachable so
    // relational facts can establish themselves, then widened
    TypeMap m3;
    m3.top = m2.top;
    if (!m3.top) {
      for (auto &[n, t] : m2.entries) {
        int age = ages[n]++;
        RefType w = age >= cfg_.widen_delay ? type_widen(cx_, m.at(n), t)
                                            : type_join(cx_, m.at(n), t);
        if (!type_safe(w)) {
          if (getenv("DFRT_POISON"))
            fprintf(stderr,
                    "map-level unsafe combine at %s %u (iter %d)\n  old=%s\n"
                    "  step=%s\n",
                    arena_.node(n).is_var ? "var" : "loc", arena_.node(n).loc,
                    i + 1, type_str(*dom_, m.at(n)).c_str(),
                    type_str(*dom_, t).c_str());
          m3.entries.clear();
          m3.top = true;
          break;
        }
        if (!w.is_bot()) m3.entries[n] = w;
      }
      // entries of m missing from m2 cannot occur (step is increasing)
    }
    if (typemap_equal(cx_, m3, m)) {
      r.map = std::move(m3);
      r.converged = true;
      return r;
    }
    m = std::move(m3);
  }
  r.map = std::move(m);
  r.converged = false;
  return r;
}

Verdict check_safety(const TypeMap &m, Analyzer &an) {
  Verdict v;
  if (m.top) {
    v.safe = false;
    v.witness_loc = 0;
    v.witness_render = "error map (every node maps to the error type)";
    return v;
  }
  LocId best = 0;
  NodeId best_node = -1;
  for (auto &[n, t] : m.entries) {
    if (type_safe(t)) continue;
    LocId l = an.arena().node(n).loc;
    if (best_node < 0 || l < best) {
      best = l;
      best_node = n;
    }
  }
  if (best_node < 0) return v;
  v.safe = false;
  v.witness_loc = best;
  std::ostringstream os;
  os << "node at location " << best << ": "
     << type_str(an.domain(), m.at(best_node));
  v.witness_render = os.str();
  return v;
}

namespace {

struct GammaChecker {
  NodeArena &carena;
  Analyzer &an;
  const TypeMap &tm;
  const ExecMap &cm;
  int k;
  GammaDiag *diag;
  std::map<NodeId, NodeId> node_cache;  // concrete -> abstract
  std::map<EnvId, EnvId> env_cache;

  EnvId abs_env(EnvId cenv) {
    auto it = env_cache.find(cenv);
    if (it != env_cache.end()) return it->second;
    EnvId out = an.arena().empty_env();
    for (auto &[x, n] : carena.env_map(cenv))
      out = an.arena().env_extend(out, x, abs_node(n));
    env_cache[cenv] = out;
    return out;
  }

  NodeId abs_node(NodeId cn) {
    auto it = node_cache.find(cn);
    if (it != node_cache.end()) return it->second;
    const auto &nd = carena.node(cn);
    NodeId out;
    if (nd.is_var)
      out = an.arena().var_node(nd.loc, abs_env(nd.env),
                                stack_abstract(nd.stack, k));
    else
      out = an.arena().expr_node(nd.loc, abs_env(nd.env));
    node_cache[cn] = out;
    return out;
  }

  void fail(const std::string &msg) {
    if (diag && diag->message.empty()) diag->message = msg;
  }

  ConcreteBinding binding_of(const CValue &v) {
    if (v.is_table()) return ConcreteBinding::table();
    if (v.is_con()) return ConcreteBinding::of(v.constant());
    return ConcreteBinding::table();  // bot/err: placeholder, callers guard
  }

  // assignment for the environment of a concrete node
  Assignment env_assignment(EnvId cenv) {
    Assignment a;
    for (auto &[x, n] : carena.env_map(cenv)) {
      CValue v = cm.at(n);
      if (v.is_con() || v.is_table()) a[Sym::var(x)] = binding_of(v);
      // bot bindings are left unconstrained
    }
    return a;
  }

  bool value_in(const CValue &v, const RefType &t, Assignment asg,
                const std::string &where) {
    if (v.is_bot()) return true;
    if (t.is_err()) return true;
    if (t.is_bot()) {
      fail(where + ": concrete value " + v.str() +
           " against bottom type (missing abstract node)");
      return false;
    }
    if (v.is_err()) {
      fail(where + ": error value not covered by " +
           type_str(an.domain(), t));
      return false;
    }
    if (v.is_con()) {
      if (!t.is_base()) {
        fail(where + ": constant " + v.constant().str() +
             " against function type");
        return false;
      }
      asg[Sym::nu()] = ConcreteBinding::of(v.constant());
      if (!an.domain().member(t.base_val(), asg)) {
        fail(where + ": " + v.constant().str() + " not in {nu | " +
             an.domain().str(t.base_val()) + "}");
        return false;
      }
      return true;
    }
    // table
    if (!t.is_fun()) {
      fail(where + ": table against base type");
      return false;
    }
    for (auto &[s, e] : v.tab().entries) {
      AbsStack as = stack_abstract(s, k);
      TypeEntry te = t.fn().entry(as);
      if (!value_in(e.first, te.first, asg, where + "/in")) return false;
      Assignment asg2 = asg;
      if (e.first.is_con() || e.first.is_table())
        asg2[Sym::var(t.fn().depvar)] = binding_of(e.first);
      if (!value_in(e.second, te.second, asg2, where + "/out")) return false;
    }
    return true;
  }

  bool run() {
    for (auto &[cn, v] : cm.entries) {
      if (diag) diag->checked_nodes++;
      NodeId anode = abs_node(cn);
      RefType t = tm.at(anode);
      const auto &nd = carena.node(cn);
      std::string where =
          (nd.is_var ? "var " : "loc ") + std::to_string(nd.loc);
      if (!value_in(v, t, env_assignment(nd.env), where)) return false;
    }
    return true;
  }
};

}  // namespace

bool gamma_member(const ExecMap &cm, NodeArena &concrete_arena,
                  const ExprPtr &, const TypeMap &tm, Analyzer &an,
                  GammaDiag *diag) {
  if (tm.top) return true;  // the error map concretizes to everything
  if (cm.top) {
    if (diag) diag->message = "concrete error map vs non-error type map";
    return false;
  }
  GammaChecker gc{concrete_arena, an, tm, cm, an.config().k, diag, {}, {}};
  return gc.run();
}

}  // namespace dfrt
