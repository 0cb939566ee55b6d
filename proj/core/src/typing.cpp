#include "dfrt/typing.hpp"

#include <sstream>

namespace dfrt {

namespace {

struct Checker {
  Analyzer &an;
  TypeCtx &cx;
  const BaseDomain &dom;
  const TypeMap &w;
  std::string *why;

  bool fail(const Expr &e, const std::string &msg) {
    if (why && why->empty()) {
      std::ostringstream os;
      os << "at loc " << e.loc.id << ": " << msg;
      *why = os.str();
    }
    return false;
  }

  RefType witness_at(LocId loc, EnvId env) {
    return w.at(an.arena().expr_node(loc, env));
  }

  RefType apply_phi(const RefType &t, const BaseVal *phi) {
    return phi ? type_constrain(cx, t, *phi) : t;
  }

  // env, stack |- e : t
  bool derive(const ExprPtr &e, EnvId env, const AbsStack &stk,
              const RefType &t, const BaseVal *phi) {
    Scope sc = an.scope_of_env(env);
    TypeEnv te = an.env_types(env, w);
    switch (e->kind) {
      case Expr::Kind::Const: {
        RefType c = apply_phi(const_type(cx, e->value, te), phi);
        if (!subtype(cx, c, t)) return fail(*e, "t-const subtype premise");
        return true;
      }

      case Expr::Kind::Var: {
        NodeId nx = an.arena().env_lookup(env, e->var);
        RefType bound = type_extend_scope(cx, w.at(nx), sc);
        RefType lhs = apply_phi(
            type_env_strengthen(cx, type_eq_var(cx, bound, e->var), te), phi);
        RefType rhs = apply_phi(
            type_env_strengthen(cx, type_eq_var(cx, t, e->var), te), phi);
        if (!subtype(cx, lhs, rhs)) return fail(*e, "t-var subtype premise");
        return true;
      }

      case Expr::Kind::App: {
        RefType ti = witness_at(e->a->loc.id, env);
        RefType tj = witness_at(e->b->loc.id, env);
        if (ti.is_bot() && t.is_bot()) return true;  // unreached call
        if (!derive(e->a, env, stk, ti, phi)) return false;
        if (!derive(e->b, env, stk, tj, phi)) return false;
        AbsStack s2 = abs_concat(e->a->loc.id, stk, an.config().k);
        VarId z = cx.fresh_depvar();
        RefType target = RefType::fun(z, "z", {{{e->a->loc.id, stk}}},
                                      {{s2, {tj, t}}});
        if (!subtype(cx, ti, target))
          return fail(*e, "t-app subtype premise");
        return true;
      }

      case Expr::Kind::Lambda:
      case Expr::Kind::Rec: {
        if (t.is_bot()) return true;  // never reached
        if (!t.is_fun()) return fail(*e, "t-abs: target is not a function");
        VarId self = e->kind == Expr::Kind::Rec ? e->self : 0;
        for (auto &[s2, entry] : t.fn().table) {
          if (entry.first.is_bot()) continue;  // not called at this stack
          NodeId nx = an.arena().var_node(e->param, env, s2);
          EnvId env_i = env;
          if (self) {
            NodeId nf = an.arena().var_node(self, env, s2);
            env_i = an.arena().env_extend(env_i, self, nf);
            // the self binding must subsume the function type itself
            RefType tf = w.at(nf);
            if (!subtype(cx, t, tf))
              return fail(*e, "t-rec: self binding premise");
          }
          env_i = an.arena().env_extend(env_i, e->param, nx);
          RefType tx = w.at(nx);
          RefType ti = witness_at(e->a->loc.id, env_i);
          if (!derive(e->a, env_i, s2, ti, phi)) return false;
          RefType one =
              RefType::fun(t.fn().depvar, t.fn().name, t.fn().tags,
                           {{s2, {tx, type_rename_var(
                                       cx, ti, e->param,
                                       {t.fn().depvar, VarKind::Int,
                                        t.fn().name})}}});
          RefType restr = RefType::fun(t.fn().depvar, t.fn().name,
                                       t.fn().tags, {{s2, t.fn().entry(s2)}});
          if (!subtype(cx, one, restr))
            return fail(*e, "t-abs table entry premise");
        }
        return true;
      }

      case Expr::Kind::Ite: {
        RefType t0 = witness_at(e->a->loc.id, env);
        if (t0.is_bot() && t.is_bot()) return true;
        if (t0.is_fun()) return fail(*e, "t-ite: guard is a function");
        if (!derive(e->a, env, stk, t0, phi)) return false;
        BaseVal ef = an.env_fact(env, w, phi);
        BaseVal gt = an.guard_fact(e->a, true, env, w, phi);
        BaseVal gf = an.guard_fact(e->a, false, env, w, phi);
        bool env_ok = !dom.is_bot(ef);
        bool then_ok = env_ok && !dom.is_bot(dom.meet(ef, gt));
        bool else_ok = env_ok && !dom.is_bot(dom.meet(ef, gf));
        if (env_ok && !then_ok && !else_ok)
          return fail(*e, "t-ite: guard has no boolean value");
        if (then_ok) {
          BaseVal phi2 = phi ? dom.meet(dom.extend(*phi, gt.scope()), gt) : gt;
          RefType t1 = witness_at(e->b->loc.id, env);
          if (!derive(e->b, env, stk, t1, &phi2)) return false;
          if (!subtype(cx, t1, t)) return fail(*e, "t-ite then premise");
        }
        if (else_ok) {
          BaseVal phi2 = phi ? dom.meet(dom.extend(*phi, gf.scope()), gf) : gf;
          RefType t2 = witness_at(e->c->loc.id, env);
          if (!derive(e->c, env, stk, t2, &phi2)) return false;
          if (!subtype(cx, t2, t)) return fail(*e, "t-ite else premise");
        }
        return true;
      }

      case Expr::Kind::BinOp: {
        RefType t1 = witness_at(e->a->loc.id, env);
        RefType t2 = witness_at(e->b->loc.id, env);
        if ((t1.is_bot() || t2.is_bot()) && t.is_bot()) return true;
        if (t1.is_fun() || t2.is_fun())
          return fail(*e, "t-binop: function operand");
        if (!derive(e->a, env, stk, t1, phi)) return false;
        if (!derive(e->b, env, stk, t2, phi)) return false;
        RefType r = apply_phi(an.binop_result(e->op, t1, t2, sc), phi);
        if (!subtype(cx, r, t)) return fail(*e, "t-binop subtype premise");
        return true;
      }

      case Expr::Kind::Assert: {
        RefType ta = witness_at(e->a->loc.id, env);
        if (ta.is_bot() && t.is_bot()) return true;
        if (ta.is_fun()) return fail(*e, "t-assert: guard is a function");
        if (!derive(e->a, env, stk, ta, phi)) return false;
        BaseVal ef = an.env_fact(env, w, phi);
        if (!dom.is_bot(ef)) {
          BaseVal gf = an.guard_fact(e->a, false, env, w, phi);
          if (!dom.is_bot(dom.meet(ef, gf)))
            return fail(*e, "t-assert: guard not entailed");
        }
        RefType c = apply_phi(const_type(cx, Constant::of_bool(true), te), phi);
        if (!subtype(cx, c, t)) return fail(*e, "t-assert subtype premise");
        return true;
      }
    }
    return fail(*e, "no rule applies");
  }
};

}  // namespace

bool derive_typing(Analyzer &an, const ExprPtr &e, EnvId env,
                   const AbsStack &stack, const RefType &t,
                   const TypeMap &witness, std::string *why) {
  Checker c{an, an.ctx(), an.domain(), witness, why};
  return c.derive(e, env, stack, t, nullptr);
}

EquivReport verify_fixpoint_typing_equiv(Analyzer &an) {
  EquivReport rep;
  AnalysisResult r = an.analyze();
  rep.analysis_safe = typemap_safe(r.map) && r.converged;
  if (!rep.analysis_safe) {
    rep.detail = "analysis result unsafe; theorems only cover safe maps";
    return rep;
  }

  // completeness premise: the result is a genuine fixpoint of the
  // transformer (the widened sequence stabilized, and step is increasing)
  auto [v, m2] = an.step(r.map);
  (void)v;
  rep.fixpoint = true;
  if (m2.top != r.map.top || m2.entries.size() != r.map.entries.size()) {
    rep.fixpoint = false;
  } else {
    auto it = m2.entries.begin();
    for (auto &[n, t] : r.map.entries) {
      if (it->first != n || !type_equal(an.ctx(), it->second, t)) {
        rep.fixpoint = false;
        break;
      }
      ++it;
    }
  }

  NodeId root = an.arena().expr_node(an.program()->loc.id, 0);
  std::string why;
  rep.root_derivable = derive_typing(an, an.program(), 0, {}, r.map.at(root),
                                     r.map, &why);
  if (!rep.root_derivable) rep.detail = why;

  // perturbation: weakening a base entry must break the fixpoint property
  // exactly when it breaks derivability
  for (auto &[n, t] : r.map.entries) {
    if (!t.is_base()) continue;
    if (rep.perturbations >= 8) break;
    if (an.domain().is_top(t.base_val())) continue;
    rep.perturbations++;
    TypeMap pert = r.map;
    pert.entries[n] = RefType::base(an.domain().top(t.base_val().scope()));
    auto [pv, pm] = an.step(pert);
    (void)pv;
    bool fp = pm.top == pert.top && pm.entries.size() == pert.entries.size();
    if (fp) {
      auto it = pm.entries.begin();
      for (auto &[n2, t2] : pert.entries) {
        if (it->first != n2 || !type_equal(an.ctx(), it->second, t2)) {
          fp = false;
          break;
        }
        ++it;
      }
    }
    std::string w2;
    bool der = derive_typing(an, an.program(), 0, {}, pert.at(root), pert, &w2);
    // a perturbed map that is still a safe fixpoint must stay derivable;
    // a broken fixpoint must be rejected somewhere
    if (fp != der) rep.perturbation_mismatches++;
  }
  return rep;
}

}  // namespace dfrt
