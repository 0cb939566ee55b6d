#include "dfrt/linear.hpp"

#include <algorithm>
#include <cassert>
#include <cctype>
#include <cstring>
#include <set>
#include <sstream>

namespace dfrt {

LinExpr LinExpr::constant(Rat c) {
  LinExpr e;
  e.k = std::move(c);
  return e;
}

LinExpr LinExpr::sym(Sym s, Rat coeff) {
  LinExpr e;
  if (coeff != 0) e.coeffs[s] = std::move(coeff);
  return e;
}

LinExpr &LinExpr::operator+=(const LinExpr &o) {
  k += o.k;
  for (auto &[s, c] : o.coeffs) {
    Rat &r = coeffs[s];
    r += c;
    if (r == 0) coeffs.erase(s);
  }
  return *this;
}

LinExpr &LinExpr::operator-=(const LinExpr &o) {
  k -= o.k;
  for (auto &[s, c] : o.coeffs) {
    Rat &r = coeffs[s];
    r -= c;
    if (r == 0) coeffs.erase(s);
  }
  return *this;
}

LinExpr &LinExpr::operator*=(const Rat &c) {
  if (c == 0) {
    coeffs.clear();
    k = 0;
    return *this;
  }
  k *= c;
  for (auto &[s, r] : coeffs) r *= c;
  return *this;
}

Rat LinExpr::coeff(Sym s) const {
  auto it = coeffs.find(s);
  return it == coeffs.end() ? Rat(0) : it->second;
}

LinExpr LinExpr::subst(Sym s, const LinExpr &e) const {
  auto it = coeffs.find(s);
  if (it == coeffs.end()) return *this;
  LinExpr out = *this;
  Rat c = it->second;
  out.coeffs.erase(s);
  out += e * c;
  return out;
}

LinExpr LinExpr::rename(Sym from, Sym to) const {
  auto it = coeffs.find(from);
  if (it == coeffs.end()) return *this;
  LinExpr out = *this;
  Rat c = it->second;
  out.coeffs.erase(from);
  Rat &r = out.coeffs[to];
  r += c;
  if (r == 0) out.coeffs.erase(to);
  return out;
}

Rat LinExpr::eval(const std::map<Sym, Rat> &a) const {
  Rat r = k;
  for (auto &[s, c] : coeffs) {
    auto it = a.find(s);
    if (it != a.end()) r += c * it->second;
  }
  return r;
}

bool operator<(const LinExpr &a, const LinExpr &b) {
  if (a.k != b.k) return a.k < b.k;
  return std::lexicographical_compare(
      a.coeffs.begin(), a.coeffs.end(), b.coeffs.begin(), b.coeffs.end(),
      [](const auto &x, const auto &y) {
        if (x.first < y.first) return true;
        if (y.first < x.first) return false;
        return x.second < y.second;
      });
}

std::string LinExpr::str(const std::function<std::string(Sym)> &name) const {
  std::ostringstream os;
  bool first = true;
  for (auto &[s, c] : coeffs) {
    if (c > 0 && !first) os << " + ";
    if (c < 0) os << (first ? "-" : " - ");
    Rat abs = c < 0 ? Rat(-c) : c;
    if (abs != 1) os << abs.get_str() << "*";
    os << name(s);
    first = false;
  }
  if (first) {
    os << k.get_str();
  } else if (k != 0) {
    os << (k > 0 ? " + " : " - ") << (k > 0 ? k : Rat(-k)).get_str();
  }
  return os.str();
}

LinCons LinCons::normalized() const {
  LinCons out = *this;
  if (out.e.coeffs.empty()) {
    // constant row; canonical forms: 0 >= 0 (true) and -1 >= 0 (false)
    bool ok = out.eq ? out.e.k == 0 : out.e.k >= 0;
    out.eq = false;
    out.e = LinExpr::constant(ok ? 0 : -1);
    return out;
  }
  // scale to integer coefficients
  mpz_class l = out.e.k.get_den();
  for (auto &[s, c] : out.e.coeffs) {
    mpz_class den = c.get_den();
    mpz_lcm(l.get_mpz_t(), l.get_mpz_t(), den.get_mpz_t());
  }
  if (l != 1) out.e *= Rat(l);
  // divide by gcd of variable coefficients
  mpz_class g = 0;
  for (auto &[s, c] : out.e.coeffs) {
    mpz_class num = c.get_num();
    mpz_gcd(g.get_mpz_t(), g.get_mpz_t(), num.get_mpz_t());
  }
  if (g > 1) {
    Rat q = out.e.k / Rat(g);
    for (auto &[s, c] : out.e.coeffs) c /= Rat(g);
    if (out.eq) {
      if (q.get_den() != 1) {  // e.g. 2x + 1 == 0: no integer solution
        out.eq = false;
        out.e = LinExpr::constant(-1);
        return out;
      }
      out.e.k = q;
    } else {
      // sum >= -k/g with an integral left side: floor the constant
      mpz_class fl;
      mpz_fdiv_q(fl.get_mpz_t(), q.get_num().get_mpz_t(),
                 q.get_den().get_mpz_t());
      out.e.k = Rat(fl);
    }
  }
  if (out.eq) {
    // canonical sign: first coefficient positive
    if (out.e.coeffs.begin()->second < 0) out.e *= Rat(-1);
  }
  return out;
}

bool LinCons::trivially_true() const {
  return e.coeffs.empty() && (eq ? e.k == 0 : e.k >= 0);
}

bool LinCons::trivially_false() const {
  return e.coeffs.empty() && (eq ? e.k != 0 : e.k < 0);
}

std::string LinCons::str(const std::function<std::string(Sym)> &name) const {
  return e.str(name) + (eq ? " == 0" : " >= 0");
}

LinSystem::LinSystem(std::vector<LinCons> rows) {
  for (auto &r : rows) add(std::move(r));
}

void LinSystem::add(LinCons c) {
  c = c.normalized();
  if (c.trivially_true()) return;
  if (c.trivially_false()) {
    unsat_ = true;
    return;
  }
  rows_.push_back(std::move(c));
}

void LinSystem::dedup() {
  std::set<LinCons> seen;
  std::vector<LinCons> out;
  for (auto &r : rows_) {
    if (seen.insert(r).second) out.push_back(r);
  }
  rows_ = std::move(out);
}

std::vector<Sym> LinSystem::symbols() const {
  std::set<Sym> s;
  for (auto &r : rows_)
    for (auto &[sym, c] : r.e.coeffs) s.insert(sym);
  return {s.begin(), s.end()};
}

LinSystem LinSystem::eliminate(Sym s) const {
  LinSystem out;
  if (unsat_) {
    out.unsat_ = true;
    return out;
  }
  // Gaussian substitution when an equality mentions s
  for (auto &r : rows_) {
    if (r.eq && r.e.mentions(s)) {
      Rat c = r.e.coeff(s);
      LinExpr rest = r.e;
      rest.coeffs.erase(s);
      LinExpr sol = rest * Rat(-1) * Rat(1 / c);  // s = sol
      for (auto &q : rows_) {
        if (&q == &r) continue;
        out.add({q.e.subst(s, sol), q.eq});
        if (out.unsat_) return out;
      }
      return out;
    }
  }
  std::vector<const LinCons *> pos, neg;
  for (auto &r : rows_) {
    Rat c = r.e.coeff(s);
    if (c == 0) {
      out.add(r);
    } else if (c > 0) {
      pos.push_back(&r);
    } else {
      neg.push_back(&r);
    }
    if (out.unsat_) return out;
  }
  for (auto *p : pos) {
    for (auto *n : neg) {
      // p: a*s + e1 >= 0 (a>0), n: -b*s + e2 >= 0 (b>0)
      Rat a = p->e.coeff(s), b = -n->e.coeff(s);
      LinExpr comb = p->e * b + n->e * a;
      comb.coeffs.erase(s);
      out.add(LinCons::geq0(comb));
      if (out.unsat_) return out;
    }
  }
  out.dedup();
  return out;
}

bool LinSystem::sat() const {
  if (unsat_) return false;
  LinSystem cur = *this;
  cur.dedup();
  for (;;) {
    if (cur.unsat_) return false;
    auto syms = cur.symbols();
    if (syms.empty()) break;
    // eliminate the symbol with the fewest pos*neg combinations
    Sym best = syms[0];
    size_t best_cost = SIZE_MAX;
    for (auto s : syms) {
      size_t p = 0, n = 0;
      bool in_eq = false;
      for (auto &r : cur.rows_) {
        Rat c = r.e.coeff(s);
        if (c == 0) continue;
        if (r.eq) in_eq = true;
        if (c > 0) p++;
        else n++;
      }
      size_t cost = in_eq ? 0 : p * n;
      if (cost < best_cost) {
        best_cost = cost;
        best = s;
      }
    }
    cur = cur.eliminate(best);
  }
  for (auto &r : cur.rows_)
    if (r.trivially_false()) return false;
  return !cur.unsat_;
}

bool LinSystem::entails(const LinCons &c) const {
  if (unsat_) return true;
  LinCons n = c.normalized();
  if (n.trivially_true()) return true;
  if (n.trivially_false()) return false;
  for (auto &r : rows_) {
    if (r == n) return true;
    if (r.eq && !n.eq && (r.e == n.e || r.e * Rat(-1) == n.e)) return true;
  }
  if (n.eq) {
    return entails(LinCons::geq0(n.e)) && entails(LinCons::geq0(n.e * Rat(-1)));
  }
  // integer negation of e >= 0 is -e - 1 >= 0
  LinSystem test = *this;
  test.add(LinCons::geq0(n.e * Rat(-1) - LinExpr::constant(1)));
  return !test.sat();
}

bool LinSystem::entails_all(const std::vector<LinCons> &cs) const {
  for (auto &c : cs)
    if (!entails(c)) return false;
  return true;
}

LinSystem LinSystem::project_onto(
    const std::function<bool(Sym)> &keep) const {
  LinSystem cur = *this;
  for (;;) {
    std::optional<Sym> victim;
    for (auto s : cur.symbols())
      if (!keep(s)) {
        victim = s;
        break;
      }
    if (!victim) return cur;
    cur = cur.eliminate(*victim);
  }
}

LinSystem LinSystem::renamed(Sym from, Sym to) const {
  LinSystem out;
  out.unsat_ = unsat_;
  for (auto &r : rows_) out.add(r.rename(from, to));
  return out;
}

LinSystem LinSystem::substituted(Sym s, const LinExpr &e) const {
  LinSystem out;
  out.unsat_ = unsat_;
  for (auto &r : rows_) out.add({r.e.subst(s, e), r.eq});
  return out;
}

std::optional<Rat> LinSystem::upper_bound(const LinExpr &e) const {
  if (unsat_) return Rat(0);
  // t = e, eliminate everything else, read the tightest t <= c row
  Sym t = Sym::temp(0xffffffu);
  LinSystem sys = *this;
  sys.add(LinCons::eq0(LinExpr::sym(t) - e));
  sys = sys.project_onto([&](Sym s) { return s == t; });
  if (sys.marked_unsat()) return Rat(0);
  std::optional<Rat> best;
  for (auto &r : sys.rows()) {
    Rat c = r.e.coeff(t);
    if (r.eq && c != 0) {
      Rat v = -r.e.k / c;
      if (!best || v < *best) best = v;
      continue;
    }
    if (c < 0) {  // c*t + k >= 0, c < 0  =>  t <= k / -c
      Rat v = r.e.k / -c;
      if (!best || v < *best) best = v;
    }
  }
  return best;
}

std::optional<Rat> LinSystem::lower_bound(const LinExpr &e) const {
  auto u = upper_bound(e * Rat(-1));
  if (!u) return std::nullopt;
  return Rat(-*u);
}

QualTemplate parse_qualifier(const std::string &line,
                             uint32_t wildcard_temp_id) {
  QualTemplate q;
  size_t pos = 0;
  auto skip = [&] {
    while (pos < line.size() && isspace((unsigned char)line[pos])) pos++;
  };
  auto fail = [&](const std::string &m) {
    throw std::runtime_error("qualifier '" + line + "': " + m);
  };
  auto term = [&]() -> LinExpr {
    skip();
    bool negate = false;
    if (pos < line.size() && line[pos] == '-') {
      negate = true;
      pos++;
      skip();
    }
    LinExpr e;
    if (pos < line.size() && isdigit((unsigned char)line[pos])) {
      long long n = 0;
      while (pos < line.size() && isdigit((unsigned char)line[pos]))
        n = n * 10 + (line[pos++] - '0');
      e = LinExpr::constant(Rat((long)n));
    } else if (pos < line.size() && line[pos] == '*') {
      pos++;
      q.has_wildcard = true;
      e = LinExpr::sym(Sym::temp(wildcard_temp_id));
    } else if (line.compare(pos, 2, "nu") == 0) {
      pos += 2;
      e = LinExpr::sym(Sym::nu());
    } else if (line.compare(pos, 4, "true") == 0) {
      pos += 4;
      e = LinExpr::constant(1);
    } else if (line.compare(pos, 5, "false") == 0) {
      pos += 5;
      e = LinExpr::constant(0);
    } else {
      fail("expected nu, *, or integer literal");
    }
    return negate ? e * Rat(-1) : e;
  };
  // sum: term (("+"|"-") term)*
  auto sum = [&]() -> LinExpr {
    LinExpr e = term();
    for (;;) {
      skip();
      if (pos < line.size() && (line[pos] == '+' || line[pos] == '-')) {
        char c = line[pos++];
        LinExpr t = term();
        if (c == '+')
          e += t;
        else
          e -= t;
      } else {
        return e;
      }
    }
  };
  q.lhs = sum();
  skip();
  static const std::pair<const char *, BinOpKind> ops[] = {
      {"<=", BinOpKind::Le}, {">=", BinOpKind::Ge}, {"<>", BinOpKind::Ne},
      {"!=", BinOpKind::Ne}, {"==", BinOpKind::Eq}, {"=", BinOpKind::Eq},
      {"<", BinOpKind::Lt},  {">", BinOpKind::Gt}};
  bool found = false;
  for (auto &[txt, op] : ops) {
    size_t n = strlen(txt);
    if (line.compare(pos, n, txt) == 0) {
      q.op = op;
      pos += n;
      found = true;
      break;
    }
  }
  if (!found) fail("expected comparison operator");
  q.rhs = sum();
  skip();
  if (pos != line.size()) fail("trailing input");
  return q;
}

}  // namespace dfrt
