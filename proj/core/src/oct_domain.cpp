#include <algorithm>
#include <set>
#include <sstream>

#include "dfrt/base_domain.hpp"

// Octagons as difference bound matrices over {nu} and the int/bool-kinded
// scope variables. Variable v gets two DBM indices, +v and -v; cell (i,j)
// bounds x_j - x_i. Canonical form is the integer-tightened strong closure.
// Lattice operations are DBM-pointwise; transfer operations go through the
// constraint view and are re-octagonalized with bound queries, which is
// exact for whatever the DBM can express.

namespace dfrt {

namespace {

struct Bound {
  bool inf = true;
  Rat v;

  static Bound infinite() { return {}; }
  static Bound of(Rat r) { return {false, std::move(r)}; }
  friend bool operator==(const Bound &a, const Bound &b) {
    return a.inf == b.inf && (a.inf || a.v == b.v);
  }
  bool leq(const Bound &o) const {
    if (o.inf) return true;
    if (inf) return false;
    return v <= o.v;
  }
  static Bound min(const Bound &a, const Bound &b) { return a.leq(b) ? a : b; }
  static Bound max(const Bound &a, const Bound &b) { return a.leq(b) ? b : a; }
  Bound operator+(const Bound &o) const {
    if (inf || o.inf) return infinite();
    return of(v + o.v);
  }
};

struct OctRep {
  bool bot = false;
  // syms[i] owns indices 2i (+), 2i+1 (-); syms sorted, nu first
  std::vector<Sym> syms;
  std::vector<std::vector<Bound>> m;  // (2n)^2
  bool closed = false;
};

size_t bar(size_t i) { return i ^ 1; }

std::vector<Sym> scope_syms(const Scope &s) {
  std::vector<Sym> out{Sym::nu()};
  for (auto &v : s.vars)
    if (v.kind != VarKind::Fun) out.push_back(Sym::var(v.id));
  return out;
}

OctRep fresh(const Scope &s) {
  OctRep r;
  r.syms = scope_syms(s);
  size_t n = 2 * r.syms.size();
  r.m.assign(n, std::vector<Bound>(n, Bound::infinite()));
  for (size_t i = 0; i < n; i++) r.m[i][i] = Bound::of(0);
  r.closed = true;
  return r;
}

// integer-tightened strong closure; returns false when empty
bool close(OctRep &r) {
  if (r.bot) return false;
  size_t n = r.m.size();
  for (size_t k = 0; k < n; k++)
    for (size_t i = 0; i < n; i++)
      for (size_t j = 0; j < n; j++)
        r.m[i][j] = Bound::min(r.m[i][j], r.m[i][k] + r.m[k][j]);
  // tighten unary bounds to even integers (2v <= c  =>  2v <= 2*floor(c/2))
  for (size_t i = 0; i < n; i++) {
    Bound &b = r.m[i][bar(i)];
    if (!b.inf) {
      mpz_class fl;
      mpz_class num = b.v.get_num(), den = b.v.get_den() * 2;
      mpz_fdiv_q(fl.get_mpz_t(), num.get_mpz_t(), den.get_mpz_t());
      b = Bound::of(Rat(fl * 2));
    }
  }
  // strengthening step
  for (size_t i = 0; i < n; i++)
    for (size_t j = 0; j < n; j++) {
      Bound half = r.m[i][bar(i)] + r.m[bar(j)][j];
      if (!half.inf) r.m[i][j] = Bound::min(r.m[i][j], Bound::of(half.v / 2));
    }
  for (size_t i = 0; i < n; i++)
    if (!r.m[i][i].inf && r.m[i][i].v < 0) {
      r.bot = true;
      return false;
    }
  r.closed = true;
  return true;
}

BaseVal wrap(OctRep r, Scope s) {
  return BaseVal(std::make_shared<OctRep>(std::move(r)), std::move(s));
}

class OctDomain final : public BaseDomain {
 public:
  std::string name() const override { return "oct"; }

  BaseVal top(const Scope &s) const override { return wrap(fresh(s), s); }

  BaseVal bot(const Scope &s) const override {
    OctRep r = fresh(s);
    r.bot = true;
    return wrap(std::move(r), s);
  }

  bool is_bot(const BaseVal &a) const override {
    OctRep r = a.as<OctRep>();
    if (r.bot) return true;
    if (!r.closed) return !close(r);
    return false;
  }

  bool leq(const BaseVal &a, const BaseVal &b) const override {
    OctRep ra = closed_rep(a);
    OctRep rb = closed_rep(b);
    if (ra.bot) return true;
    if (rb.bot) return false;
    size_t n = ra.m.size();
    for (size_t i = 0; i < n; i++)
      for (size_t j = 0; j < n; j++)
        if (!ra.m[i][j].leq(rb.m[i][j])) return false;
    return true;
  }

  BaseVal join(const BaseVal &a, const BaseVal &b) const override {
    OctRep ra = closed_rep(a);
    OctRep rb = closed_rep(b);
    if (ra.bot) return wrap(std::move(rb), b.scope());
    if (rb.bot) return wrap(std::move(ra), a.scope());
    size_t n = ra.m.size();
    for (size_t i = 0; i < n; i++)
      for (size_t j = 0; j < n; j++)
        ra.m[i][j] = Bound::max(ra.m[i][j], rb.m[i][j]);
    ra.closed = true;  // max of closed DBMs is closed
    return wrap(std::move(ra), a.scope());
  }

  BaseVal meet(const BaseVal &a, const BaseVal &b) const override {
    OctRep ra = closed_rep(a);
    OctRep rb = closed_rep(b);
    if (ra.bot || rb.bot) return bot(a.scope());
    size_t n = ra.m.size();
    for (size_t i = 0; i < n; i++)
      for (size_t j = 0; j < n; j++)
        ra.m[i][j] = Bound::min(ra.m[i][j], rb.m[i][j]);
    ra.closed = false;
    close(ra);
    return wrap(std::move(ra), a.scope());
  }

  // cellwise widening on the unclosed left operand so bounds only ever get
  // dropped or promoted to a threshold, never re-tightened by closure
  BaseVal widen(const BaseVal &a, const BaseVal &b,
                const WidenHints &hints) const override {
    OctRep ra = a.as<OctRep>();
    OctRep rb = closed_rep(b);
    if (ra.bot || (ra.closed == false && is_bot(a))) return b;
    if (rb.bot) return a;
    if (leq(b, a)) return a;  // no growth, nothing to widen
    WidenHints expanded;
    expanded.thresholds = hints.for_scope(a.scope());
    auto cells = threshold_cells(a.scope(), ra.syms, expanded);
    size_t n = ra.m.size();
    for (size_t i = 0; i < n; i++)
      for (size_t j = 0; j < n; j++) {
        if (rb.m[i][j].leq(ra.m[i][j])) continue;
        Bound next = Bound::infinite();
        for (auto &[ci, cj, bound] : cells)
          if (ci == i && cj == j && rb.m[i][j].leq(bound))
            next = Bound::min(next, bound);
        ra.m[i][j] = next;
      }
    ra.closed = false;  // deliberately left unclosed
    return wrap(std::move(ra), a.scope());
  }

  LinSystem to_cons(const BaseVal &a) const override {
    OctRep r = closed_rep(a);
    LinSystem sys;
    if (r.bot) {
      sys.add(LinCons::geq0(LinExpr::constant(-1)));
      return sys;
    }
    size_t n = r.m.size();
    for (size_t i = 0; i < n; i++)
      for (size_t j = 0; j < n; j++) {
        if (i == j || r.m[i][j].inf) continue;
        // x_j - x_i <= c   with x_{2k} = +v_k, x_{2k+1} = -v_k
        LinExpr e = LinExpr::constant(r.m[i][j].v);
        e -= signed_sym(r.syms, j);
        e += signed_sym(r.syms, i);
        sys.add(LinCons::geq0(e));
      }
    sys.dedup();
    return sys;
  }

  BaseVal from_cons(const Scope &s, const LinSystem &sys) const override {
    LinSystem clean = scrub(s, sys);
    if (!clean.sat()) return bot(s);
    OctRep r = fresh(s);
    size_t n = r.m.size();
    auto index_of = [&](Sym sym) -> std::optional<size_t> {
      for (size_t i = 0; i < r.syms.size(); i++)
        if (r.syms[i] == sym) return 2 * i;
      return std::nullopt;
    };
    // octagonal rows load directly; only symbols touched by non-octagonal
    // rows need Fourier-Motzkin bound queries
    std::set<Sym> hard;
    auto set_cell = [&](size_t i, size_t j, const Rat &c) {
      Bound b = Bound::of(c);
      if (b.leq(r.m[i][j])) r.m[i][j] = b;
    };
    for (auto &row : clean.rows()) {
      bool oct_row = row.e.coeffs.size() <= 2;
      for (auto &[sym, c] : row.e.coeffs)
        if (c != 1 && c != -1) oct_row = false;
      if (!oct_row) {
        for (auto &[sym, c] : row.e.coeffs) hard.insert(sym);
        continue;
      }
      // e + k >= 0 (or == 0): -e <= k
      auto load = [&](const LinExpr &e, const Rat &k) {
        // -(e) <= k with e = c1*s1 [+ c2*s2]
        auto it = e.coeffs.begin();
        Sym s1 = it->first;
        Rat c1 = it->second;
        auto i1 = index_of(s1);
        if (!i1) return;
        if (e.coeffs.size() == 1) {
          // -c1*s1 <= k: 2 cells via the doubled unary encoding
          size_t pos = *i1, neg = bar(*i1);
          if (c1 == 1)  // -s1 <= k
            set_cell(pos, neg, k * 2);
          else  // s1 <= k
            set_cell(neg, pos, k * 2);
        } else {
          auto jt = std::next(it);
          Sym s2 = jt->first;
          Rat c2 = jt->second;
          auto i2 = index_of(s2);
          if (!i2) return;
          // (-c1*s1) + (-c2*s2) <= k, as x_j - x_i <= k
          size_t j = c1 == -1 ? *i1 : bar(*i1);
          size_t i = c2 == -1 ? bar(*i2) : *i2;
          set_cell(i, j, k);
          set_cell(bar(j), bar(i), k);
        }
      };
      load(row.e, row.e.k);
      if (row.eq) {
        LinExpr neg = row.e * Rat(-1);
        load(neg, neg.k);
      }
    }
    for (size_t i = 0; i < n && !hard.empty(); i++)
      for (size_t j = 0; j < n; j++) {
        if (i == j) continue;
        if (!hard.count(r.syms[i / 2]) && !hard.count(r.syms[j / 2]))
          continue;
        LinExpr e = signed_sym(r.syms, j);
        e -= signed_sym(r.syms, i);
        auto ub = clean.upper_bound(e);
        if (ub && Bound::of(*ub).leq(r.m[i][j])) r.m[i][j] = Bound::of(*ub);
      }
    r.closed = false;
    close(r);
    return wrap(std::move(r), s);
  }

  std::string str(const BaseVal &a) const override {
    OctRep r = closed_rep(a);
    if (r.bot) return "false";
    auto name = [&](Sym s) {
      return s.is_nu() ? std::string("nu") : a.scope().name_of(s.id);
    };
    LinSystem sys = to_cons(a);
    if (sys.rows().empty()) return "true";
    std::ostringstream os;
    bool first = true;
    for (auto &row : sys.rows()) {
      if (!first) os << " && ";
      first = false;
      os << row.str(name);
    }
    return os.str();
  }

 private:
  static OctRep closed_rep(const BaseVal &a) {
    OctRep r = a.as<OctRep>();
    if (!r.closed) close(r);
    return r;
  }

  static LinExpr signed_sym(const std::vector<Sym> &syms, size_t idx) {
    return LinExpr::sym(syms[idx / 2], idx % 2 == 0 ? 1 : -1);
  }

  // octagonal thresholds as candidate cell bounds
  static std::vector<std::tuple<size_t, size_t, Bound>> threshold_cells(
      const Scope &scope, const std::vector<Sym> &syms,
      const WidenHints &hints) {
    std::vector<std::tuple<size_t, size_t, Bound>> out;
    auto index_of = [&](Sym s) -> std::optional<size_t> {
      for (size_t i = 0; i < syms.size(); i++)
        if (syms[i] == s) return 2 * i;
      return std::nullopt;
    };
    for (auto &t : hints.thresholds) {
      // accept rows of shape (+-x) (+-y)? + k >= 0
      if (t.eq) continue;
      const auto &cs = t.e.coeffs;
      if (cs.empty() || cs.size() > 2) continue;
      bool ok = true;
      for (auto &[sym, c] : cs) {
        if (c != 1 && c != -1) ok = false;
        if (sym.is_temp()) ok = false;
        if (sym.is_var()) {
          auto k = scope.kind_of(sym.id);
          if (!k || *k == VarKind::Fun) ok = false;
        }
      }
      if (!ok) continue;
      // e >= 0 means -(e - k) <= k: map onto x_j - x_i <= k form
      auto it = cs.begin();
      Sym s1 = it->first;
      Rat c1 = it->second;
      auto i1 = index_of(s1);
      if (!i1) continue;
      if (cs.size() == 1) {
        // c1*s1 + k >= 0: s1 >= -k (c1=1) or s1 <= k (c1=-1)
        size_t pos = *i1, neg = bar(*i1);
        if (c1 == 1)  // -s1 <= k: x_neg - x_pos <= 2k ... use unary cell
          out.push_back({pos, neg, Bound::of(t.e.k * 2)});
        else
          out.push_back({neg, pos, Bound::of(t.e.k * 2)});
      } else {
        ++it;
        Sym s2 = it->first;
        Rat c2 = it->second;
        auto i2 = index_of(s2);
        if (!i2) continue;
        // c1*s1 + c2*s2 + k >= 0  <=>  (-c1*s1) + (-c2*s2) <= k,
        // encoded as x_j - x_i <= k with x_j = -c1*s1 and x_i = c2*s2
        size_t j = c1 == -1 ? *i1 : bar(*i1);
        size_t i = c2 == -1 ? bar(*i2) : *i2;
        out.push_back({i, j, Bound::of(t.e.k)});
      }
    }
    return out;
  }
};

}  // namespace

std::unique_ptr<BaseDomain> make_oct_domain() {
  return std::make_unique<OctDomain>();
}

}  // namespace dfrt
