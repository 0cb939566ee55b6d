#include "dfrt/ast.hpp"

#include <map>
#include <set>
#include <sstream>

namespace dfrt {

bool is_arith(BinOpKind op) {
  return op == BinOpKind::Add || op == BinOpKind::Sub || op == BinOpKind::Mul;
}

bool is_cmp(BinOpKind op) {
  switch (op) {
    case BinOpKind::Eq:
    case BinOpKind::Ne:
    case BinOpKind::Lt:
    case BinOpKind::Le:
    case BinOpKind::Gt:
    case BinOpKind::Ge:
      return true;
    default:
      return false;
  }
}

bool is_logic(BinOpKind op) {
  return op == BinOpKind::And || op == BinOpKind::Or;
}

const char *binop_name(BinOpKind op) {
  switch (op) {
    case BinOpKind::Add: return "+";
    case BinOpKind::Sub: return "-";
    case BinOpKind::Mul: return "*";
    case BinOpKind::Eq: return "=";
    case BinOpKind::Ne: return "<>";
    case BinOpKind::Lt: return "<";
    case BinOpKind::Le: return "<=";
    case BinOpKind::Gt: return ">";
    case BinOpKind::Ge: return ">=";
    case BinOpKind::And: return "&&";
    case BinOpKind::Or: return "||";
  }
  return "?";
}

std::string Constant::str() const {
  if (is_bool) return num ? "true" : "false";
  return std::to_string(num);
}

static std::shared_ptr<Expr> mk(Expr::Kind k, Loc l) {
  auto e = std::make_shared<Expr>();
  e->kind = k;
  e->loc = l;
  return e;
}

ExprPtr Expr::mk_const(Loc l, Constant v) {
  auto e = mk(Kind::Const, l);
  e->value = v;
  return e;
}

ExprPtr Expr::mk_var(Loc l, VarId binder, std::string name) {
  auto e = mk(Kind::Var, l);
  e->var = binder;
  e->name = std::move(name);
  return e;
}

ExprPtr Expr::mk_app(Loc l, ExprPtr fn, ExprPtr arg) {
  auto e = mk(Kind::App, l);
  e->a = std::move(fn);
  e->b = std::move(arg);
  return e;
}

ExprPtr Expr::mk_lambda(Loc l, Loc binder, std::string name, ExprPtr body) {
  auto e = mk(Kind::Lambda, l);
  e->param = binder.id;
  e->param_loc = binder;
  e->name = std::move(name);
  e->a = std::move(body);
  return e;
}

ExprPtr Expr::mk_rec(Loc l, Loc self, std::string fname, Loc binder,
                     std::string xname, ExprPtr body) {
  auto e = mk(Kind::Rec, l);
  e->self = self.id;
  e->self_loc = self;
  e->self_name = std::move(fname);
  e->param = binder.id;
  e->param_loc = binder;
  e->name = std::move(xname);
  e->a = std::move(body);
  return e;
}

ExprPtr Expr::mk_ite(Loc l, ExprPtr c, ExprPtr t, ExprPtr e2) {
  auto e = mk(Kind::Ite, l);
  e->a = std::move(c);
  e->b = std::move(t);
  e->c = std::move(e2);
  return e;
}

ExprPtr Expr::mk_binop(Loc l, BinOpKind op, ExprPtr lhs, ExprPtr rhs) {
  auto e = mk(Kind::BinOp, l);
  e->op = op;
  e->a = std::move(lhs);
  e->b = std::move(rhs);
  return e;
}

ExprPtr Expr::mk_assert(Loc l, ExprPtr arg) {
  auto e = mk(Kind::Assert, l);
  e->a = std::move(arg);
  return e;
}

void visit(const ExprPtr &e, const std::function<void(const Expr &)> &f) {
  if (!e) return;
  f(*e);
  visit(e->a, f);
  visit(e->b, f);
  visit(e->c, f);
}

LocId max_loc_id(const ExprPtr &e) {
  LocId m = 0;
  visit(e, [&](const Expr &x) {
    m = std::max(m, x.loc.id);
    if (x.kind == Expr::Kind::Lambda || x.kind == Expr::Kind::Rec)
      m = std::max(m, x.param_loc.id);
    if (x.kind == Expr::Kind::Rec) m = std::max(m, x.self_loc.id);
  });
  return m;
}

std::string check_well_formed(const ExprPtr &e) {
  std::set<LocId> seen;
  std::string err;
  std::function<void(const ExprPtr &, std::set<VarId>)> go =
      [&](const ExprPtr &x, std::set<VarId> scope) {
        if (!x || !err.empty()) return;
        auto claim = [&](LocId id) {
          if (!err.empty()) return;
          if (!seen.insert(id).second)
            err = "duplicate location id " + std::to_string(id);
        };
        claim(x->loc.id);
        switch (x->kind) {
          case Expr::Kind::Const:
            break;
          case Expr::Kind::Var:
            if (!scope.count(x->var))
              err = "unbound variable " + x->name;
            break;
          case Expr::Kind::App:
          case Expr::Kind::BinOp:
            go(x->a, scope);
            go(x->b, scope);
            break;
          case Expr::Kind::Lambda:
            claim(x->param_loc.id);
            scope.insert(x->param);
            go(x->a, scope);
            break;
          case Expr::Kind::Rec:
            claim(x->self_loc.id);
            claim(x->param_loc.id);
            scope.insert(x->self);
            scope.insert(x->param);
            go(x->a, scope);
            break;
          case Expr::Kind::Ite:
            go(x->a, scope);
            go(x->b, scope);
            go(x->c, scope);
            break;
          case Expr::Kind::Assert:
            go(x->a, scope);
            break;
        }
      };
  go(e, {});
  return err;
}

namespace {

int binop_prec(BinOpKind op) {
  if (is_logic(op)) return op == BinOpKind::Or ? 1 : 2;
  if (is_cmp(op)) return 3;
  if (op == BinOpKind::Add || op == BinOpKind::Sub) return 4;
  return 5;
}

// prec: minimal precedence the context requires without parentheses.
// 0 = statement position (let/fun/if allowed), 6 = atom, 7 = app head/arg.
void pp(const ExprPtr &e, int prec, std::ostream &out) {
  auto paren = [&](int need, auto body) {
    if (prec > need) out << "(";
    body();
    if (prec > need) out << ")";
  };
  switch (e->kind) {
    case Expr::Kind::Const:
      out << e->value.str();
      break;
    case Expr::Kind::Var:
      out << e->name;
      break;
    case Expr::Kind::App: {
      // App(Lambda(x, body), rhs) prints as a let binding
      if (e->a->kind == Expr::Kind::Lambda) {
        paren(0, [&] {
          const Expr &lam = *e->a;
          if (e->b->kind == Expr::Kind::Rec) {
            const Expr &rec = *e->b;
            out << "let rec " << rec.self_name << " " << rec.name << " = ";
            pp(rec.a, 0, out);
          } else {
            out << "let " << lam.name << " = ";
            pp(e->b, 0, out);
          }
          out << " in ";
          pp(lam.a, 0, out);
        });
      } else {
        paren(6, [&] {
          pp(e->a, 6, out);
          out << " ";
          pp(e->b, 7, out);
        });
      }
      break;
    }
    case Expr::Kind::Lambda:
      paren(0, [&] {
        out << "fun " << e->name << " -> ";
        pp(e->a, 0, out);
      });
      break;
    case Expr::Kind::Rec:
      paren(0, [&] {
        out << "let rec " << e->self_name << " " << e->name << " = ";
        pp(e->a, 0, out);
        out << " in " << e->self_name;
      });
      break;
    case Expr::Kind::Ite:
      paren(0, [&] {
        out << "if ";
        pp(e->a, 0, out);
        out << " then ";
        pp(e->b, 0, out);
        out << " else ";
        pp(e->c, 0, out);
      });
      break;
    case Expr::Kind::BinOp: {
      int p = binop_prec(e->op);
      paren(p, [&] {
        pp(e->a, p, out);
        out << " " << binop_name(e->op) << " ";
        pp(e->b, p + 1, out);
      });
      break;
    }
    case Expr::Kind::Assert:
      paren(6, [&] {
        out << "assert (";
        pp(e->a, 0, out);
        out << ")";
      });
      break;
  }
}

}  // namespace

std::string pretty(const ExprPtr &e) {
  std::ostringstream out;
  pp(e, 0, out);
  return out.str();
}

}  // namespace dfrt
