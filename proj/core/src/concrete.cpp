#include "dfrt/concrete.hpp"

#include <cassert>
#include <sstream>

namespace dfrt {

NodeArena::NodeArena() {
  envs_.push_back({});
  env_ids_[{}] = 0;
}

EnvId NodeArena::env_extend(EnvId env, VarId v, NodeId n) {
  auto m = envs_[env];
  m[v] = n;
  auto it = env_ids_.find(m);
  if (it != env_ids_.end()) return it->second;
  EnvId id = (EnvId)envs_.size();
  envs_.push_back(m);
  env_ids_[envs_.back()] = id;
  return id;
}

NodeId NodeArena::env_lookup(EnvId env, VarId v) const {
  const auto &m = envs_[env];
  auto it = m.find(v);
  return it == m.end() ? -1 : it->second;
}

const std::map<VarId, NodeId> &NodeArena::env_map(EnvId env) const {
  return envs_[env];
}

NodeId NodeArena::expr_node(LocId loc, EnvId env) {
  auto key = std::make_tuple(false, loc, env, Stack{});
  auto it = node_ids_.find(key);
  if (it != node_ids_.end()) return it->second;
  NodeId id = (NodeId)nodes_.size();
  nodes_.push_back({false, loc, env, {}});
  node_ids_[key] = id;
  return id;
}

NodeId NodeArena::var_node(VarId var, EnvId env, const Stack &stack) {
  auto key = std::make_tuple(true, var, env, stack);
  auto it = node_ids_.find(key);
  if (it != node_ids_.end()) return it->second;
  NodeId id = (NodeId)nodes_.size();
  nodes_.push_back({true, var, env, stack});
  node_ids_[key] = id;
  return id;
}

CValue CValue::err() {
  CValue v;
  v.kind_ = Kind::Err;
  return v;
}

CValue CValue::con(Constant c) {
  CValue v;
  v.kind_ = Kind::Con;
  v.c_ = c;
  return v;
}

CValue CValue::table() { return table(std::make_shared<CTable>()); }

CValue CValue::table(std::shared_ptr<const CTable> t) {
  CValue v;
  v.kind_ = Kind::Tab;
  v.tab_ = std::move(t);
  return v;
}

bool operator==(const CTable &a, const CTable &b) {
  return a.entries == b.entries;
}

bool operator==(const CValue &a, const CValue &b) {
  if (a.kind_ != b.kind_) return false;
  switch (a.kind_) {
    case CValue::Kind::Bot:
    case CValue::Kind::Err:
      return true;
    case CValue::Kind::Con:
      return a.c_ == b.c_;
    case CValue::Kind::Tab:
      return *a.tab_ == *b.tab_;
  }
  return false;
}

CValue make_table(std::map<Stack, CEntry> entries) {
  auto t = std::make_shared<CTable>();
  for (auto &[s, e] : entries)
    if (!(e.first.is_bot() && e.second.is_bot())) t->entries[s] = e;
  return CValue::table(t);
}

CEntry table_entry(const CValue &v, const Stack &s) {
  const auto &es = v.tab().entries;
  auto it = es.find(s);
  if (it == es.end()) return {CValue::bot(), CValue::bot()};
  return it->second;
}

bool value_safe(const CValue &v) {
  switch (v.kind()) {
    case CValue::Kind::Err:
      return false;
    case CValue::Kind::Bot:
    case CValue::Kind::Con:
      return true;
    case CValue::Kind::Tab:
      for (auto &[s, e] : v.tab().entries)
        if (!value_safe(e.first) || !value_safe(e.second)) return false;
      return true;
  }
  return true;
}

bool value_leq(const CValue &a, const CValue &b) {
  if (a.is_bot()) return true;
  if (b.is_err()) return true;
  if (a.is_con() && b.is_con()) return a.constant() == b.constant();
  if (a.is_table() && b.is_table()) {
    // pointwise on every stack; absent entries are (bot,bot)
    for (auto &[s, e] : a.tab().entries) {
      CEntry f = table_entry(b, s);
      if (!value_leq(e.first, f.first) || !value_leq(e.second, f.second))
        return false;
    }
    return true;
  }
  return false;
}

CValue value_join(const CValue &a, const CValue &b) {
  if (a.is_bot()) return b;
  if (b.is_bot()) return a;
  if (a.is_err() || b.is_err()) return CValue::err();
  if (a.is_con() && b.is_con())
    return a.constant() == b.constant() ? a : CValue::err();
  if (a.is_table() && b.is_table()) {
    std::map<Stack, CEntry> out = a.tab().entries;
    for (auto &[s, e] : b.tab().entries) {
      auto it = out.find(s);
      if (it == out.end()) {
        out[s] = e;
      } else {
        it->second = {value_join(it->second.first, e.first),
                      value_join(it->second.second, e.second)};
      }
    }
    return make_table(std::move(out));
  }
  return CValue::err();  // constant vs table
}

CValue value_join(const std::vector<CValue> &vs) {
  CValue acc;
  for (auto &v : vs) acc = value_join(acc, v);
  return acc;
}

std::pair<CValue, CValue> value_prop(const CValue &a, const CValue &b) {
  if (a.is_table() && b.is_bot()) return {a, CValue::table()};
  if (a.is_table() && b.is_err()) return {CValue::err(), CValue::err()};
  if (a.is_table() && b.is_table()) {
    std::map<Stack, CEntry> ea = a.tab().entries;
    std::map<Stack, CEntry> eb = b.tab().entries;
    // propagate per call stack present in b; inputs flow right-to-left,
    // outputs left-to-right
    for (auto &[s, fb] : eb) {
      CEntry fa = {CValue::bot(), CValue::bot()};
      auto it = ea.find(s);
      if (it != ea.end()) fa = it->second;
      auto [in_b, in_a] = value_prop(fb.first, fa.first);
      auto [out_a, out_b] = value_prop(fa.second, fb.second);
      ea[s] = {in_a, out_a};
      fb = {in_b, out_b};
    }
    return {make_table(std::move(ea)), make_table(std::move(eb))};
  }
  return {a, value_join(a, b)};
}

CValue ExecMap::at(NodeId n) const {
  if (top) return CValue::err();
  auto it = entries.find(n);
  return it == entries.end() ? CValue::bot() : it->second;
}

bool operator==(const ExecMap &a, const ExecMap &b) {
  if (a.top != b.top) return false;
  if (a.top) return true;
  return a.entries == b.entries;
}

bool map_leq(const ExecMap &a, const ExecMap &b) {
  if (b.top) return true;
  if (a.top) return false;
  for (auto &[n, v] : a.entries)
    if (!value_leq(v, b.at(n))) return false;
  return true;
}

bool map_safe(const ExecMap &m) {
  if (m.top) return false;
  for (auto &[n, v] : m.entries)
    if (!value_safe(v)) return false;
  return true;
}

namespace {

// In-place interpreter for one transformer application. The monadic
// error short-circuit is a poisoned flag: once any update would store an
// unsafe value (or an assertion fails) the map becomes the all-error map.
struct Stepper {
  NodeArena &arena;
  ExecMap m;
  bool poisoned = false;

  CValue upd(NodeId n, const CValue &v) {
    if (poisoned) return CValue::err();
    CValue j = value_join(m.at(n), v);
    if (!value_safe(j)) {
      poison();
      return CValue::err();
    }
    if (j.is_bot())
      m.entries.erase(n);
    else
      m.entries[n] = j;
    return j;
  }

  void poison() {
    poisoned = true;
    m.entries.clear();
    m.top = true;
  }

  CValue step(const ExprPtr &e, EnvId env, const Stack &stack) {
    if (poisoned) return CValue::err();
    NodeId n = arena.expr_node(e->loc.id, env);
    switch (e->kind) {
      case Expr::Kind::Const:
        return upd(n, CValue::con(e->value));

      case Expr::Kind::Var: {
        CValue v = m.at(n);
        NodeId nx = arena.env_lookup(env, e->var);
        assert(nx >= 0 && "well-formedness");
        auto [vx2, v2] = value_prop(m.at(nx), v);
        upd(nx, vx2);
        if (poisoned) return CValue::err();
        return upd(n, v2);
      }

      case Expr::Kind::App: {
        NodeId ni = arena.expr_node(e->a->loc.id, env);
        NodeId nj = arena.expr_node(e->b->loc.id, env);
        CValue v = m.at(n);
        CValue vi = step(e->a, env, stack);
        if (poisoned) return CValue::err();
        if (vi.is_bot()) return CValue::bot();
        if (!vi.is_table()) {  // applying a non-function
          poison();
          return CValue::err();
        }
        CValue vj = step(e->b, env, stack);
        if (poisoned) return CValue::err();
        Stack s2 = stack;
        s2.insert(s2.begin(), e->a->loc.id);
        CValue singleton = make_table({{s2, {vj, v}}});
        auto [vi2, t2] = value_prop(vi, singleton);
        auto [vj2, v2] = table_entry(t2, s2);
        upd(ni, vi2);
        if (poisoned) return CValue::err();
        upd(nj, vj2);
        if (poisoned) return CValue::err();
        return upd(n, v2);
      }

      case Expr::Kind::Lambda: {
        CValue t = upd(n, CValue::table());
        if (poisoned) return CValue::err();
        CValue joined = CValue::bot();
        std::vector<Stack> stacks;
        for (auto &[s, entry] : t.tab().entries)
          if (!entry.first.is_bot()) stacks.push_back(s);  // called at s
        for (auto &s2 : stacks) {
          CValue part = lambda_body(*e, env, t, s2);
          if (poisoned) return CValue::err();
          joined = value_join(joined, part);
          if (!value_safe(joined)) {
            poison();
            return CValue::err();
          }
        }
        return upd(n, joined);
      }

      case Expr::Kind::Rec: {
        CValue t = upd(n, CValue::table());
        if (poisoned) return CValue::err();
        CValue joined = CValue::bot();
        std::vector<Stack> stacks;
        for (auto &[s, entry] : t.tab().entries)
          if (!entry.first.is_bot()) stacks.push_back(s);
        for (auto &s2 : stacks) {
          CValue part = rec_body(*e, env, t, s2);
          if (poisoned) return CValue::err();
          joined = value_join(joined, part);
          if (!value_safe(joined)) {
            poison();
            return CValue::err();
          }
        }
        return upd(n, joined);
      }

      case Expr::Kind::Ite: {
        CValue vc = step(e->a, env, stack);
        if (poisoned) return CValue::err();
        if (vc.is_bot()) return CValue::bot();
        if (!vc.is_con() || !vc.constant().is_bool) {
          poison();  // non-boolean guard
          return CValue::err();
        }
        const ExprPtr &branch = vc.constant().as_bool() ? e->b : e->c;
        CValue vb = step(branch, env, stack);
        if (poisoned) return CValue::err();
        if (vb.is_bot()) return CValue::bot();
        return upd(n, vb);
      }

      case Expr::Kind::BinOp: {
        CValue v1 = step(e->a, env, stack);
        if (poisoned) return CValue::err();
        CValue v2 = step(e->b, env, stack);
        if (poisoned) return CValue::err();
        if (v1.is_bot() || v2.is_bot()) return CValue::bot();
        if (!v1.is_con() || !v2.is_con()) {
          poison();
          return CValue::err();
        }
        Constant c1 = v1.constant(), c2 = v2.constant();
        bool ok = is_logic(e->op) ? (c1.is_bool && c2.is_bool)
                                  : (!c1.is_bool && !c2.is_bool);
        if (!ok) {
          poison();
          return CValue::err();
        }
        return upd(n, CValue::con(delta(e->op, c1, c2)));
      }

      case Expr::Kind::Assert: {
        CValue v = step(e->a, env, stack);
        if (poisoned) return CValue::err();
        if (v.is_bot()) return CValue::bot();
        if (!v.is_con() || !v.constant().is_bool || !v.constant().as_bool()) {
          poison();  // failed or ill-typed assertion
          return CValue::err();
        }
        return upd(n, CValue::con(Constant::of_bool(true)));
      }
    }
    return CValue::bot();
  }

  static Constant delta(BinOpKind op, Constant a, Constant b) {
    switch (op) {
      case BinOpKind::Add: return Constant::of_int(a.num + b.num);
      case BinOpKind::Sub: return Constant::of_int(a.num - b.num);
      case BinOpKind::Mul: return Constant::of_int(a.num * b.num);
      case BinOpKind::Eq: return Constant::of_bool(a.num == b.num);
      case BinOpKind::Ne: return Constant::of_bool(a.num != b.num);
      case BinOpKind::Lt: return Constant::of_bool(a.num < b.num);
      case BinOpKind::Le: return Constant::of_bool(a.num <= b.num);
      case BinOpKind::Gt: return Constant::of_bool(a.num > b.num);
      case BinOpKind::Ge: return Constant::of_bool(a.num >= b.num);
      case BinOpKind::And: return Constant::of_bool(a.as_bool() && b.as_bool());
      case BinOpKind::Or: return Constant::of_bool(a.as_bool() || b.as_bool());
    }
    return Constant::of_int(0);
  }

  // One body evaluation of a lambda for call stack s2. Exchanges input with
  // the variable node and output with the table entry, returning the updated
  // restriction of the table.
  CValue lambda_body(const Expr &lam, EnvId env, const CValue &t,
                     const Stack &s2) {
    NodeId nx = arena.var_node(lam.param, env, s2);
    EnvId env_i = arena.env_extend(env, lam.param, nx);
    NodeId ni = arena.expr_node(lam.a->loc.id, env_i);
    CValue vx = m.at(nx);
    CValue vi = step(lam.a, env_i, s2);
    if (poisoned) return CValue::err();
    CValue left = make_table({{s2, {vx, vi}}});
    CValue restr = make_table({{s2, table_entry(t, s2)}});
    auto [l2, t2] = value_prop(left, restr);
    auto [vx2, vi2] = table_entry(l2, s2);
    upd(nx, vx2);
    if (poisoned) return CValue::err();
    upd(ni, vi2);
    if (poisoned) return CValue::err();
    return t2;
  }

  // Rec adds a self binding per call stack, exchanged with the function's
  // own table before the body runs.
  CValue rec_body(const Expr &rec, EnvId env, const CValue &t,
                  const Stack &s2) {
    NodeId nf = arena.var_node(rec.self, env, s2);
    NodeId nx = arena.var_node(rec.param, env, s2);
    EnvId env_f = arena.env_extend(env, rec.self, nf);
    EnvId env_i = arena.env_extend(env_f, rec.param, nx);
    NodeId ni = arena.expr_node(rec.a->loc.id, env_i);

    CValue vf = m.at(nf);
    auto [t1, vf2] = value_prop(t, vf);
    upd(nf, vf2);
    if (poisoned) return CValue::err();

    CValue vx = m.at(nx);
    CValue vi = step(rec.a, env_i, s2);
    if (poisoned) return CValue::err();
    CValue left = make_table({{s2, {vx, vi}}});
    CValue restr = make_table({{s2, table_entry(t1, s2)}});
    auto [l2, t2] = value_prop(left, restr);
    auto [vx2, vi2] = table_entry(l2, s2);
    upd(nx, vx2);
    if (poisoned) return CValue::err();
    upd(ni, vi2);
    if (poisoned) return CValue::err();
    return value_join(t1, t2);
  }
};

}  // namespace

std::pair<CValue, ExecMap> concrete_step(const ExprPtr &e, NodeArena &arena,
                                         EnvId env, const Stack &stack,
                                         const ExecMap &m) {
  Stepper st{arena, m};
  CValue v = st.step(e, env, stack);
  return {v, std::move(st.m)};
}

ConcreteResult run_concrete(const ExprPtr &e, NodeArena &arena, int fuel,
                            bool keep_trace) {
  ConcreteResult r;
  ExecMap m;
  for (int i = 0; i < fuel; i++) {
    auto [v, m2] = concrete_step(e, arena, arena.empty_env(), {}, m);
    r.iterations = i + 1;
    if (keep_trace) r.trace.push_back(m2);
    if (m2 == m) {
      r.map = std::move(m2);
      return r;
    }
    m = std::move(m2);
  }
  r.map = std::move(m);
  r.diverged = true;
  return r;
}

std::string CValue::str() const {
  switch (kind_) {
    case Kind::Bot: return "_|_";
    case Kind::Err: return "err";
    case Kind::Con: return c_.str();
    case Kind::Tab: {
      std::ostringstream os;
      os << "[";
      bool first = true;
      for (auto &[s, e] : tab_->entries) {
        if (!first) os << ", ";
        first = false;
        for (size_t i = 0; i < s.size(); i++) os << (i ? "." : "") << s[i];
        os << " < " << e.first.str() << " -> " << e.second.str();
      }
      os << "]";
      return os.str();
    }
  }
  return "?";
}

}  // namespace dfrt
