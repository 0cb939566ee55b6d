#include "dfrt/types.hpp"

#include <algorithm>
#include <cassert>
#include <sstream>

namespace dfrt {

AbsStack abs_concat(LocId l, const AbsStack &s, int k) {
  AbsStack out;
  if (k <= 0) return out;
  out.push_back(l);
  for (auto x : s) {
    if ((int)out.size() >= k) break;
    out.push_back(x);
  }
  return out;
}

AbsStack stack_abstract(const Stack &s, int k) {
  AbsStack out;
  for (auto x : s) {
    if ((int)out.size() >= k) break;
    out.push_back(x);
  }
  return out;
}

RefType RefType::err() {
  RefType t;
  t.kind_ = Kind::Err;
  return t;
}

RefType RefType::base(BaseVal b) {
  RefType t;
  t.kind_ = Kind::Base;
  t.base_ = std::move(b);
  return t;
}

RefType RefType::fun(VarId depvar, std::string name, TagSet tags,
                     std::map<AbsStack, TypeEntry> table) {
  RefType t;
  t.kind_ = Kind::Fun;
  auto f = std::make_shared<FunData>();
  f->depvar = depvar;
  f->name = std::move(name);
  f->tags = std::move(tags);
  for (auto &[s, e] : table)
    if (!(e.first.is_bot() && e.second.is_bot())) f->table[s] = e;
  t.fun_ = std::move(f);
  return t;
}

bool TypeEnv::valid() const {
  for (auto &[x, t] : types)
    if (t.is_bot() || t.is_err()) return false;
  return true;
}

bool type_safe(const RefType &t) {
  switch (t.kind()) {
    case RefType::Kind::Err:
      return false;
    case RefType::Kind::Bot:
    case RefType::Kind::Base:
      return true;
    case RefType::Kind::Fun:
      for (auto &[s, e] : t.fn().table)
        if (!type_safe(e.first) || !type_safe(e.second)) return false;
      return true;
  }
  return true;
}

int type_depth(const RefType &t) {
  if (!t.is_fun()) return 0;
  int d = 0;
  for (auto &[s, e] : t.fn().table)
    d = std::max({d, type_depth(e.first), type_depth(e.second)});
  return d + 1;
}

namespace {

// Renames a dependency variable inside base payloads (output scopes).
RefType rename_var(TypeCtx &cx, const RefType &t, VarId from,
                   const ScopeVar &to);

}  // namespace

RefType type_rename_var(TypeCtx &cx, const RefType &t, VarId from,
                        const ScopeVar &to) {
  return rename_var(cx, t, from, to);
}

RefType type_extend_scope(TypeCtx &cx, const RefType &t, const Scope &sup) {
  if (!t.is_base()) return t;
  if (t.base_val().scope().subset_of(sup))
    return RefType::base(cx.dom.extend(t.base_val(), sup));
  return RefType::base(
      cx.dom.extend(t.base_val(), t.base_val().scope().union_with(sup)));
}

namespace {

RefType rename_var(TypeCtx &cx, const RefType &t, VarId from,
                   const ScopeVar &to) {
  switch (t.kind()) {
    case RefType::Kind::Bot:
    case RefType::Kind::Err:
      return t;
    case RefType::Kind::Base: {
      const BaseVal &b = t.base_val();
      if (!b.scope().contains(from)) return t;
      LinSystem sys =
          cx.dom.to_cons(b).renamed(Sym::var(from), Sym::var(to.id));
      Scope s2 = b.scope().without(from).with(to);
      return RefType::base(cx.dom.from_cons(s2, sys));
    }
    case RefType::Kind::Fun: {
      const FunData &f = t.fn();
      if (f.depvar == from) return t;  // shadowed
      std::map<AbsStack, TypeEntry> tb;
      for (auto &[s, e] : f.table)
        tb[s] = {rename_var(cx, e.first, from, to),
                 rename_var(cx, e.second, from, to)};
      return RefType::fun(f.depvar, f.name, f.tags, std::move(tb));
    }
  }
  return t;
}

// Gives two function types a common fresh dependency variable with merged
// tags, per the occurs-check bookkeeping.
struct Aligned {
  RefType a, b;
  VarId depvar;
  std::string name;
  TagSet tags;
};

Aligned align_funs(TypeCtx &cx, const RefType &a, const RefType &b) {
  const FunData &fa = a.fn();
  const FunData &fb = b.fn();
  if (fa.depvar == fb.depvar) {
    TagSet tags = fa.tags;
    tags.insert(fb.tags.begin(), fb.tags.end());
    return {a, b, fa.depvar, fa.name, std::move(tags)};
  }
  VarId z = cx.fresh_depvar();
  ScopeVar zv{z, VarKind::Int, fa.name};
  TagSet tags = fa.tags;
  tags.insert(fb.tags.begin(), fb.tags.end());
  RefType a2 = a, b2 = b;
  {
    std::map<AbsStack, TypeEntry> tb;
    for (auto &[s, e] : fa.table)
      tb[s] = {e.first, rename_var(cx, e.second, fa.depvar, zv)};
    a2 = RefType::fun(z, fa.name, tags, std::move(tb));
  }
  {
    std::map<AbsStack, TypeEntry> tb;
    for (auto &[s, e] : fb.table)
      tb[s] = {e.first, rename_var(cx, e.second, fb.depvar, zv)};
    b2 = RefType::fun(z, fa.name.empty() ? fb.name : fa.name, tags,
                      std::move(tb));
  }
  return {a2, b2, z, fa.name.empty() ? fb.name : fa.name, tags};
}

// base payloads of both sides over their common scope
std::pair<BaseVal, BaseVal> align_bases(TypeCtx &cx, const BaseVal &a,
                                        const BaseVal &b) {
  if (a.scope() == b.scope()) return {a, b};
  Scope u = a.scope().union_with(b.scope());
  return {cx.dom.extend(a, u), cx.dom.extend(b, u)};
}

std::set<AbsStack> stack_union(const FunData &a, const FunData &b) {
  std::set<AbsStack> out;
  for (auto &[s, e] : a.table) out.insert(s);
  for (auto &[s, e] : b.table) out.insert(s);
  return out;
}

}  // namespace

bool type_leq(TypeCtx &cx, const RefType &a, const RefType &b) {
  if (a.is_bot()) return true;
  if (b.is_err()) return true;
  if (a.is_base() && b.is_base()) {
    auto [x, y] = align_bases(cx, a.base_val(), b.base_val());
    return cx.dom.leq(x, y);
  }
  if (a.is_fun() && b.is_fun()) {
    Aligned al = align_funs(cx, a, b);
    for (auto &s : stack_union(al.a.fn(), al.b.fn())) {
      TypeEntry ea = al.a.fn().entry(s);
      TypeEntry eb = al.b.fn().entry(s);
      if (!type_leq(cx, ea.first, eb.first) ||
          !type_leq(cx, ea.second, eb.second))
        return false;
    }
    return true;
  }
  return false;
}

bool type_equal(TypeCtx &cx, const RefType &a, const RefType &b) {
  if (a.kind() != b.kind()) return false;
  switch (a.kind()) {
    case RefType::Kind::Bot:
    case RefType::Kind::Err:
      return true;
    case RefType::Kind::Base: {
      auto [x, y] = align_bases(cx, a.base_val(), b.base_val());
      return cx.dom.equal(x, y);
    }
    case RefType::Kind::Fun: {
      if (a.fn().tags != b.fn().tags) return false;
      Aligned al = align_funs(cx, a, b);
      auto su = stack_union(al.a.fn(), al.b.fn());
      for (auto &s : su) {
        TypeEntry ea = al.a.fn().entry(s);
        TypeEntry eb = al.b.fn().entry(s);
        if (!type_equal(cx, ea.first, eb.first) ||
            !type_equal(cx, ea.second, eb.second))
          return false;
      }
      return true;
    }
  }
  return false;
}

RefType type_join(TypeCtx &cx, const RefType &a, const RefType &b) {
  if (a.is_bot()) return b;
  if (b.is_bot()) return a;
  if (a.is_err() || b.is_err()) return RefType::err();
  if (a.is_base() && b.is_base()) {
    auto [x, y] = align_bases(cx, a.base_val(), b.base_val());
    return RefType::base(cx.dom.join(x, y));
  }
  if (a.is_fun() && b.is_fun()) {
    Aligned al = align_funs(cx, a, b);
    std::map<AbsStack, TypeEntry> tb;
    for (auto &s : stack_union(al.a.fn(), al.b.fn())) {
      TypeEntry ea = al.a.fn().entry(s);
      TypeEntry eb = al.b.fn().entry(s);
      tb[s] = {type_join(cx, ea.first, eb.first),
               type_join(cx, ea.second, eb.second)};
    }
    return RefType::fun(al.depvar, al.name, al.tags, std::move(tb));
  }
  if (getenv("DFRT_POISON"))
    fprintf(stderr, "type_join kind mismatch: %s JOIN %s\n",
            type_str(cx.dom, a).c_str(), type_str(cx.dom, b).c_str());
  return RefType::err();  // base vs fun
}

RefType type_meet(TypeCtx &cx, const RefType &a, const RefType &b) {
  if (a.is_bot() || b.is_bot()) return RefType::bot();
  if (a.is_err()) return b;
  if (b.is_err()) return a;
  if (a.is_base() && b.is_base()) {
    auto [x, y] = align_bases(cx, a.base_val(), b.base_val());
    BaseVal m = cx.dom.meet(x, y);
    return cx.dom.is_bot(m) ? RefType::bot() : RefType::base(m);
  }
  if (a.is_fun() && b.is_fun()) {
    Aligned al = align_funs(cx, a, b);
    std::map<AbsStack, TypeEntry> tb;
    for (auto &s : stack_union(al.a.fn(), al.b.fn())) {
      TypeEntry ea = al.a.fn().entry(s);
      TypeEntry eb = al.b.fn().entry(s);
      tb[s] = {type_meet(cx, ea.first, eb.first),
               type_meet(cx, ea.second, eb.second)};
    }
    return RefType::fun(al.depvar, al.name, al.tags, std::move(tb));
  }
  return RefType::bot();  // base vs fun
}

RefType type_strengthen(TypeCtx &cx, const RefType &t, const ScopeVar &x,
                        const RefType &tx) {
  if (tx.is_bot()) return RefType::bot();
  if (tx.is_err()) return t;
  if (tx.is_fun()) return t;  // x = F: opaque in all shipped instances
  switch (t.kind()) {
    case RefType::Kind::Bot:
    case RefType::Kind::Err:
      return t;
    case RefType::Kind::Base: {
      // t /\ tx[x/nu], abstracted in one step
      BaseVal m = cx.dom.strengthen_with(t.base_val(), x, tx.base_val());
      return cx.dom.is_bot(m) ? RefType::bot() : RefType::base(m);
    }
    case RefType::Kind::Fun: {
      const FunData &f = t.fn();
      std::map<AbsStack, TypeEntry> tb;
      for (auto &[s, e] : f.table)
        tb[s] = {type_strengthen(cx, e.first, x, tx),
                 type_strengthen(cx, e.second, x, tx)};
      return RefType::fun(f.depvar, f.name, f.tags, std::move(tb));
    }
  }
  return t;
}

RefType type_env_strengthen(TypeCtx &cx, const RefType &t,
                            const TypeEnv &env) {
  RefType out = t;
  for (auto &[x, tx] : env.types) {
    auto kind = env.scope.kind_of(x);
    ScopeVar sv{x, kind.value_or(VarKind::Int), env.scope.name_of(x)};
    out = type_strengthen(cx, out, sv, tx);
  }
  return out;
}

RefType type_eq_var(TypeCtx &cx, const RefType &t, VarId x) {
  if (!t.is_base()) return t;
  return RefType::base(
      cx.dom.strengthen_eq_var(t.base_val(), Sym::nu(), Sym::var(x)));
}

RefType type_project(TypeCtx &cx, const RefType &t, VarId x) {
  switch (t.kind()) {
    case RefType::Kind::Bot:
    case RefType::Kind::Err:
      return t;
    case RefType::Kind::Base: {
      if (!t.base_val().scope().contains(x)) return t;
      return RefType::base(cx.dom.project(t.base_val(), x));
    }
    case RefType::Kind::Fun: {
      const FunData &f = t.fn();
      std::map<AbsStack, TypeEntry> tb;
      for (auto &[s, e] : f.table)
        tb[s] = {type_project(cx, e.first, x), type_project(cx, e.second, x)};
      return RefType::fun(f.depvar, f.name, f.tags, std::move(tb));
    }
  }
  return t;
}

RefType type_constrain(TypeCtx &cx, const RefType &t, const BaseVal &fact) {
  switch (t.kind()) {
    case RefType::Kind::Bot:
    case RefType::Kind::Err:
      return t;
    case RefType::Kind::Base: {
      auto [p, q] = align_bases(cx, t.base_val(), fact);
      BaseVal m = cx.dom.meet(p, q);
      return cx.dom.is_bot(m) ? RefType::bot() : RefType::base(m);
    }
    case RefType::Kind::Fun: {
      const FunData &f = t.fn();
      std::map<AbsStack, TypeEntry> tb;
      for (auto &[s, e] : f.table)
        tb[s] = {type_constrain(cx, e.first, fact),
                 type_constrain(cx, e.second, fact)};
      return RefType::fun(f.depvar, f.name, f.tags, std::move(tb));
    }
  }
  return t;
}

RefType const_type(TypeCtx &cx, Constant c, const TypeEnv &env) {
  RefType t = RefType::base(cx.dom.of_const(c, env.scope));
  return type_env_strengthen(cx, t, env);
}

bool subtype(TypeCtx &cx, const RefType &a, const RefType &b) {
  if (a.is_bot()) return !b.is_err();
  if (a.is_base() && b.is_base()) {
    auto [x, y] = align_bases(cx, a.base_val(), b.base_val());
    return cx.dom.leq(x, y);
  }
  if (a.is_fun() && b.is_fun()) {
    Aligned al = align_funs(cx, a, b);
    ScopeVar zv{al.depvar, VarKind::Int, al.name};
    for (auto &s : stack_union(al.a.fn(), al.b.fn())) {
      auto [i1, o1] = al.a.fn().entry(s);
      auto [i2, o2] = al.b.fn().entry(s);
      if (!subtype(cx, i2, i1)) return false;
      if (!subtype(cx, type_strengthen(cx, o1, zv, i2),
                   type_strengthen(cx, o2, zv, i2)))
        return false;
    }
    return true;
  }
  return false;
}

std::pair<RefType, RefType> type_prop(TypeCtx &cx, const RefType &a,
                                      const RefType &b) {
  if (a.is_fun() && b.is_bot())
    return {a, RefType::fun(a.fn().depvar, a.fn().name, a.fn().tags, {})};
  if (a.is_fun() && b.is_err()) return {RefType::err(), RefType::err()};
  if (a.is_fun() && b.is_fun()) {
    Aligned al = align_funs(cx, a, b);
    ScopeVar zv{al.depvar, VarKind::Int, al.name};
    std::map<AbsStack, TypeEntry> ta, tb;
    for (auto &s : stack_union(al.a.fn(), al.b.fn())) {
      auto [t1i, t1o] = al.a.fn().entry(s);
      auto [t2i, t2o] = al.b.fn().entry(s);
      auto [t2i2, t1i2] = type_prop(cx, t2i, t1i);
      auto [o1, o2] = type_prop(cx, type_strengthen(cx, t1o, zv, t2i),
                                type_strengthen(cx, t2o, zv, t2i));
      ta[s] = {t1i2, type_join(cx, t1o, o1)};
      tb[s] = {t2i2, type_join(cx, t2o, o2)};
    }
    return {RefType::fun(al.depvar, al.name, al.tags, std::move(ta)),
            RefType::fun(al.depvar, al.name, al.tags, std::move(tb))};
  }
  return {a, type_join(cx, a, b)};
}

RefType shape(const RefType &t) {
  switch (t.kind()) {
    case RefType::Kind::Bot:
    case RefType::Kind::Err:
      return t;
    case RefType::Kind::Base:
      return RefType::bot();
    case RefType::Kind::Fun: {
      const FunData &f = t.fn();
      std::map<AbsStack, TypeEntry> tb;
      for (auto &[s, e] : f.table) {
        TypeEntry se = {shape(e.first), shape(e.second)};
        if (!se.first.is_bot() || !se.second.is_bot()) tb[s] = se;
      }
      return RefType::fun(f.depvar, f.name, f.tags, std::move(tb));
    }
  }
  return t;
}

namespace {

// occurs check: a binding nested below an ancestor with the same non-empty
// tag set signals unbounded self-nesting (sibling repeats are benign
// sharing of one function's table)
bool tags_recur(const RefType &t, std::vector<const TagSet *> &ancestors) {
  if (!t.is_fun()) return false;
  const FunData &f = t.fn();
  if (!f.tags.empty())
    for (auto *anc : ancestors)
      if (*anc == f.tags) return true;
  ancestors.push_back(&f.tags);
  for (auto &[s, e] : f.table) {
    if (tags_recur(e.first, ancestors) || tags_recur(e.second, ancestors)) {
      ancestors.pop_back();
      return true;
    }
  }
  ancestors.pop_back();
  return false;
}

}  // namespace

RefType shape_widen(TypeCtx &cx, const RefType &a, const RefType &b) {
  RefType t = type_join(cx, a, b);
  if (t.is_err()) return t;
  std::vector<const TagSet *> ancestors;
  if (tags_recur(t, ancestors)) return RefType::err();
  if (type_depth(t) > cx.depth_cap) return RefType::err();
  return t;
}

namespace {

RefType rel_widen(TypeCtx &cx, const RefType &a, const RefType &b) {
  if (a.is_base() && b.is_base()) {
    auto [x, y] = align_bases(cx, a.base_val(), b.base_val());
    return RefType::base(cx.dom.widen(x, y, cx.hints));
  }
  if (a.is_fun() && b.is_fun()) {
    Aligned al = align_funs(cx, a, b);
    std::map<AbsStack, TypeEntry> tb;
    for (auto &s : stack_union(al.a.fn(), al.b.fn())) {
      TypeEntry ea = al.a.fn().entry(s);
      TypeEntry eb = al.b.fn().entry(s);
      tb[s] = {rel_widen(cx, ea.first, eb.first),
               rel_widen(cx, ea.second, eb.second)};
    }
    // keep b's binder: it already carries the merged tags
    return RefType::fun(al.depvar, al.name, al.tags, std::move(tb));
  }
  return type_join(cx, a, b);
}

}  // namespace

RefType type_widen(TypeCtx &cx, const RefType &a, const RefType &b) {
  if (type_leq(cx, b, a)) return a;  // stable entry
  return rel_widen(cx, a, shape_widen(cx, a, b));
}

std::string type_str(const BaseDomain &dom, const RefType &t) {
  switch (t.kind()) {
    case RefType::Kind::Bot:
      return "_|_";
    case RefType::Kind::Err:
      return "top_err";
    case RefType::Kind::Base:
      return "{nu | " + dom.str(t.base_val()) + "}";
    case RefType::Kind::Fun: {
      const FunData &f = t.fn();
      std::ostringstream os;
      os << f.name << ":[";
      bool first = true;
      for (auto &[s, e] : f.table) {
        if (!first) os << ", ";
        first = false;
        if (s.empty())
          os << "e";
        else
          for (size_t i = 0; i < s.size(); i++) os << (i ? "." : "") << s[i];
        os << " < " << type_str(dom, e.first) << " -> "
           << type_str(dom, e.second);
      }
      os << "]";
      return os.str();
    }
  }
  return "?";
}

}  // namespace dfrt
