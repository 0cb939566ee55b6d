#include <algorithm>
#include <set>
#include <sstream>

#include "dfrt/base_domain.hpp"

// Convex polyhedra in constraint form over exact rationals (loose variant:
// non-strict inequalities plus equalities, integer-tightened). The join is
// the weak join: constraints drawn from the union of both generating sets
// that are entailed by both operands.

namespace dfrt {

namespace {

struct PolyRep {
  bool bot = false;
  LinSystem sys;  // scrubbed, deduplicated, minimized
};

BaseVal wrap(PolyRep r, Scope s) {
  return BaseVal(std::make_shared<PolyRep>(std::move(r)), std::move(s));
}

class PolyDomain final : public BaseDomain {
 public:
  std::string name() const override { return "poly"; }

  // owning keys: cached reps must stay alive or addresses could recycle
  mutable std::map<
      std::pair<std::shared_ptr<const void>, std::shared_ptr<const void>>,
      bool>
      leq_cache_;

  BaseVal top(const Scope &s) const override { return wrap({}, s); }

  BaseVal bot(const Scope &s) const override {
    PolyRep r;
    r.bot = true;
    return wrap(std::move(r), s);
  }

  bool is_bot(const BaseVal &a) const override {
    return a.as<PolyRep>().bot;
  }

  LinSystem to_cons(const BaseVal &a) const override {
    const auto &r = a.as<PolyRep>();
    if (r.bot) {
      LinSystem s;
      s.add(LinCons::geq0(LinExpr::constant(-1)));
      return s;
    }
    return r.sys;
  }

  BaseVal from_cons(const Scope &s, const LinSystem &sys) const override {
    LinSystem clean = scrub(s, sys);
    if (!clean.sat()) return bot(s);
    clean.dedup();
    // Fourier-Motzkin combinations (projections, hulls) produce rows with
    // non-unit coefficients whose rational relaxation is weaker than their
    // integer meaning; materialize integer-entailed ordering rows so the
    // facts survive later rational reasoning
    bool messy = false;
    for (auto &r : clean.rows())
      for (auto &[sym, c] : r.e.coeffs)
        if (c != 1 && c != -1) messy = true;
    if (messy) {
      for (auto &t : join_hints().for_scope(s))
        if (clean.entails(t)) clean.add(t);
      clean.dedup();
    }
    if (clean.rows().size() > 5) minimize(clean);
    PolyRep r;
    r.sys = std::move(clean);
    return wrap(std::move(r), s);
  }

  bool leq(const BaseVal &a, const BaseVal &b) const override {
    const auto &ra = a.as<PolyRep>();
    const auto &rb = b.as<PolyRep>();
    if (ra.bot) return true;
    if (rb.bot) return false;
    if (a.rep() == b.rep()) return true;
    auto key = std::make_pair(a.rep_ptr(), b.rep_ptr());
    auto it = leq_cache_.find(key);
    if (it != leq_cache_.end()) return it->second;
    bool r = ra.sys.entails_all(rb.sys.rows());
    if (leq_cache_.size() > 200000) leq_cache_.clear();
    leq_cache_[key] = r;
    return r;
  }

  BaseVal join(const BaseVal &a, const BaseVal &b) const override {
    const auto &ra = a.as<PolyRep>();
    const auto &rb = b.as<PolyRep>();
    if (ra.bot) return b;
    if (rb.bot) return a;
    // comparable operands join exactly
    if (leq(a, b)) return b;
    if (leq(b, a)) return a;
    // weak join: constraints from the generating set (both row sets with
    // equalities split, plus the ordering candidates) entailed by both
    LinSystem out;
    std::vector<LinCons> cands = candidates(ra.sys, rb.sys);
    for (auto &t : join_hints().for_scope(a.scope())) cands.push_back(t);
    for (auto &c : cands)
      if (ra.sys.entails(c) && rb.sys.entails(c)) out.add(c);
    return from_cons(a.scope(), out);
  }

  BaseVal meet(const BaseVal &a, const BaseVal &b) const override {
    const auto &ra = a.as<PolyRep>();
    const auto &rb = b.as<PolyRep>();
    if (ra.bot || rb.bot) return bot(a.scope());
    LinSystem out = ra.sys;
    for (auto &r : rb.sys.rows()) out.add(r);
    return from_cons(a.scope(), out);
  }

  BaseVal widen(const BaseVal &a, const BaseVal &b,
                const WidenHints &hints) const override {
    const auto &ra = a.as<PolyRep>();
    const auto &rb = b.as<PolyRep>();
    if (ra.bot) return b;
    if (rb.bot) return a;
    if (leq(b, a)) return a;  // no growth, nothing to widen
    BaseVal j = join(a, b);
    const LinSystem &js = j.as<PolyRep>().sys;
    LinSystem out;
    // keep a's constraints that survive the join, then any thresholds the
    // join still entails
    for (auto &c : candidates(ra.sys, LinSystem{}))
      if (js.entails(c)) out.add(c);
    for (auto &t : hints.for_scope(a.scope()))
      if (js.entails(t)) out.add(t);
    return from_cons(a.scope(), out);
  }

  std::string str(const BaseVal &a) const override {
    const auto &r = a.as<PolyRep>();
    if (r.bot) return "false";
    if (r.sys.rows().empty()) return "true";
    std::ostringstream os;
    auto name = [&](Sym s) {
      return s.is_nu() ? std::string("nu") : a.scope().name_of(s.id);
    };
    bool first = true;
    for (auto &row : r.sys.rows()) {
      if (!first) os << " && ";
      first = false;
      os << row.str(name);
    }
    return os.str();
  }

 private:
  // generating set: all rows of both systems; single-variable equalities
  // (x = c) also contribute their two bound halves. Relational equalities
  // stay atomic, which is what keeps the context-insensitive analysis from
  // smuggling sign splits through collapsed tables.
  static std::vector<LinCons> candidates(const LinSystem &a,
                                         const LinSystem &b) {
    std::vector<LinCons> out;
    auto push = [&](const LinSystem &s) {
      for (auto &r : s.rows()) {
        out.push_back(r);
        if (r.eq && r.e.coeffs.size() == 1) {
          out.push_back(LinCons::geq0(r.e));
          out.push_back(LinCons::geq0(r.e * Rat(-1)));
        }
      }
      // facts reachable by substituting an equality through the other rows
      // are candidates too; otherwise combinations straddling a variable
      // (say nu >= z with z = x - 1) are invisible until a projection that
      // happens after the join
      std::set<Sym> eq_vars;
      for (auto &r : s.rows())
        if (r.eq)
          for (auto &[sym, c] : r.e.coeffs) eq_vars.insert(sym);
      for (auto v : eq_vars) {
        LinSystem red = s.eliminate(v);
        for (auto &r : red.rows()) out.push_back(r);
      }
    };
    push(a);
    push(b);
    return out;
  }

  static void minimize(LinSystem &sys) {
    std::vector<LinCons> rows = sys.rows();
    std::vector<bool> dropped(rows.size(), false);
    for (size_t i = 0; i < rows.size(); i++) {
      LinSystem rest;
      for (size_t j = 0; j < rows.size(); j++)
        if (j != i && !dropped[j]) rest.add(rows[j]);
      if (rest.entails(rows[i])) dropped[i] = true;
    }
    std::vector<LinCons> kept;
    for (size_t i = 0; i < rows.size(); i++)
      if (!dropped[i]) kept.push_back(rows[i]);
    sys = LinSystem(std::move(kept));
  }
};

}  // namespace

std::unique_ptr<BaseDomain> make_poly_domain() {
  return std::make_unique<PolyDomain>();
}

}  // namespace dfrt
