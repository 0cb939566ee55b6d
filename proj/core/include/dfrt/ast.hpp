#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

// Located AST for the analyzed mini-ML language. Every subexpression of a
// parsed program carries a distinct location; binders are themselves
// locations, so a variable use points at its binder's location.

namespace dfrt {

using LocId = uint32_t;

struct Loc {
  LocId id = 0;
  uint32_t line = 0;
  uint32_t col = 0;

  friend bool operator==(const Loc &a, const Loc &b) { return a.id == b.id; }
  friend bool operator<(const Loc &a, const Loc &b) { return a.id < b.id; }
};

// Variables are identified by the location of their binding occurrence.
using VarId = LocId;

enum class BinOpKind { Add, Sub, Mul, Eq, Ne, Lt, Le, Gt, Ge, And, Or };

bool is_arith(BinOpKind op);    // int x int -> int
bool is_cmp(BinOpKind op);      // int x int -> bool
bool is_logic(BinOpKind op);    // bool x bool -> bool
const char *binop_name(BinOpKind op);

struct Constant {
  bool is_bool = false;
  long long num = 0;  // for booleans: 0 or 1

  static Constant of_int(long long n) { return {false, n}; }
  static Constant of_bool(bool b) { return {true, b ? 1 : 0}; }
  bool as_bool() const { return num != 0; }

  friend bool operator==(const Constant &a, const Constant &b) {
    return a.is_bool == b.is_bool && a.num == b.num;
  }
  friend bool operator<(const Constant &a, const Constant &b) {
    return a.is_bool != b.is_bool ? a.is_bool < b.is_bool : a.num < b.num;
  }
  std::string str() const;
};

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Expr {
  enum class Kind { Const, Var, App, Lambda, Rec, Ite, BinOp, Assert };

  Kind kind;
  Loc loc;

  Constant value;          // Const
  VarId var = 0;           // Var: the binder's location
  std::string name;        // Var/Lambda/Rec: display name
  VarId param = 0;         // Lambda/Rec: bound variable
  Loc param_loc;           // Lambda/Rec: location of the binder itself
  VarId self = 0;          // Rec: the recursive binder f
  Loc self_loc;
  std::string self_name;
  BinOpKind op = BinOpKind::Add;
  ExprPtr a, b, c;         // children: App(fn,arg) Lambda(body) Rec(body)
                           // Ite(cond,then,else) BinOp(lhs,rhs) Assert(arg)

  static ExprPtr mk_const(Loc l, Constant v);
  static ExprPtr mk_var(Loc l, VarId binder, std::string name);
  static ExprPtr mk_app(Loc l, ExprPtr fn, ExprPtr arg);
  static ExprPtr mk_lambda(Loc l, Loc binder, std::string name, ExprPtr body);
  static ExprPtr mk_rec(Loc l, Loc self, std::string fname, Loc binder,
                        std::string xname, ExprPtr body);
  static ExprPtr mk_ite(Loc l, ExprPtr c, ExprPtr t, ExprPtr e);
  static ExprPtr mk_binop(Loc l, BinOpKind op, ExprPtr lhs, ExprPtr rhs);
  static ExprPtr mk_assert(Loc l, ExprPtr arg);
};

struct ParseError : std::runtime_error {
  uint32_t line, col;
  ParseError(std::string msg, uint32_t line, uint32_t col)
      : std::runtime_error(std::move(msg)), line(line), col(col) {}
};

// Parses the mini-ML concrete syntax and desugars let/let rec/fun into the
// core forms. The result is alpha-unique: every binder introduces a fresh
// VarId even if source names collide. Raises ParseError with position info
// on bad syntax and on unbound variables.
ExprPtr parse_program(const std::string &source);

// Well-formedness of a (possibly hand-built) tree: closed at top level and
// all locations pairwise distinct. Returns an explanatory message for the
// first violation, or an empty string when fine.
std::string check_well_formed(const ExprPtr &e);

// Pretty-printer; re-sugars App-of-Lambda back into let bindings. Used for
// the parse/print round-trip property and diagnostics.
std::string pretty(const ExprPtr &e);

// All subexpressions in evaluation-independent (pre)order.
void visit(const ExprPtr &e, const std::function<void(const Expr &)> &f);

// Maximum location id occurring in e (ids are dense, parser-assigned).
LocId max_loc_id(const ExprPtr &e);

}  // namespace dfrt
