#include <cctype>
#include <cstring>
#include <map>
#include <optional>
#include <vector>

#include "dfrt/ast.hpp"

// Recursive-descent frontend. let / let rec / fun are desugared while
// parsing:
//   let x = e1 in e2        ~> (\x. e2) e1
//   let f a b = e1 in e2    ~> (\f. e2) (\a. \b. e1)
//   let rec f a b = e1 in e2 ~> (\f. e2) (rec f a. \b. e1)
// Every node (including the synthesized applications and lambdas) gets a
// fresh location; binders are alpha-renamed on collision so VarIds are
// globally unique.

namespace dfrt {

namespace {

struct Token {
  enum class Kind { Int, Ident, Keyword, Op, LParen, RParen, Eof };
  Kind kind;
  std::string text;
  long long num = 0;
  uint32_t line, col;
};

bool is_keyword(const std::string &s) {
  static const char *kws[] = {"let",  "rec",  "in",   "fun",    "if",
                              "then", "else", "assert", "true", "false"};
  for (auto k : kws)
    if (s == k) return true;
  return false;
}

struct Lexer {
  const std::string &src;
  size_t pos = 0;
  uint32_t line = 1, col = 1;

  explicit Lexer(const std::string &s) : src(s) {}

  void advance(char c) {
    if (c == '\n') {
      line++;
      col = 1;
    } else {
      col++;
    }
    pos++;
  }

  void skip_ws() {
    while (pos < src.size()) {
      if (isspace((unsigned char)src[pos])) {
        advance(src[pos]);
      } else if (src[pos] == '(' && pos + 1 < src.size() &&
                 src[pos + 1] == '*') {
        uint32_t l = line, c = col;
        advance('(');
        advance('*');
        int depth = 1;
        while (pos < src.size() && depth > 0) {
          if (src[pos] == '(' && pos + 1 < src.size() && src[pos + 1] == '*') {
            advance('(');
            advance('*');
            depth++;
          } else if (src[pos] == '*' && pos + 1 < src.size() &&
                     src[pos + 1] == ')') {
            advance('*');
            advance(')');
            depth--;
          } else {
            advance(src[pos]);
          }
        }
        if (depth > 0) throw ParseError("unterminated comment", l, c);
      } else {
        break;
      }
    }
  }

  Token next() {
    skip_ws();
    uint32_t l = line, c = col;
    if (pos >= src.size()) return {Token::Kind::Eof, "", 0, l, c};
    char ch = src[pos];
    if (ch == '(') {
      advance(ch);
      return {Token::Kind::LParen, "(", 0, l, c};
    }
    if (ch == ')') {
      advance(ch);
      return {Token::Kind::RParen, ")", 0, l, c};
    }
    if (isdigit((unsigned char)ch)) {
      std::string n;
      while (pos < src.size() && isdigit((unsigned char)src[pos])) {
        n += src[pos];
        advance(src[pos]);
      }
      return {Token::Kind::Int, n, std::stoll(n), l, c};
    }
    if (isalpha((unsigned char)ch) || ch == '_') {
      std::string id;
      while (pos < src.size() &&
             (isalnum((unsigned char)src[pos]) || src[pos] == '_' ||
              src[pos] == '\'')) {
        id += src[pos];
        advance(src[pos]);
      }
      return {is_keyword(id) ? Token::Kind::Keyword : Token::Kind::Ident, id,
              0, l, c};
    }
    // operators, longest match first
    static const char *ops[] = {"<>", "<=", ">=", "&&", "||", "->", "+",
                                "-",  "*",  "=",  "<",  ">"};
    for (auto op : ops) {
      size_t n = strlen(op);
      if (src.compare(pos, n, op) == 0) {
        for (size_t i = 0; i < n; i++) advance(src[pos]);
        return {Token::Kind::Op, op, 0, l, c};
      }
    }
    throw ParseError(std::string("unexpected character '") + ch + "'", l, c);
  }
};

struct Parser {
  std::vector<Token> toks;
  size_t i = 0;
  LocId next_loc = 1;
  LocId next_var = 1000000;  // binder ids live in their own range
  std::map<std::string, int> name_counts;
  // lexical scope: name -> (VarId, display name)
  std::vector<std::pair<std::string, std::pair<VarId, std::string>>> scope;

  const Token &cur() const { return toks[i]; }
  const Token &peek(size_t k = 1) const {
    return toks[std::min(i + k, toks.size() - 1)];
  }
  Token eat() { return toks[i++]; }

  [[noreturn]] void fail(const std::string &msg) const {
    throw ParseError(msg, cur().line, cur().col);
  }

  void expect_kw(const std::string &kw) {
    if (cur().kind != Token::Kind::Keyword || cur().text != kw)
      fail("expected '" + kw + "'");
    eat();
  }

  void expect_op(const std::string &op) {
    if (cur().kind != Token::Kind::Op || cur().text != op)
      fail("expected '" + op + "'");
    eat();
  }

  Loc fresh(uint32_t line, uint32_t col) { return Loc{next_loc++, line, col}; }
  Loc fresh_here() { return fresh(cur().line, cur().col); }

  // Binders get fresh ids; colliding source names are displayed with a
  // numeric suffix so printed output stays unambiguous.
  std::pair<Loc, std::string> bind(const std::string &name, uint32_t line,
                                   uint32_t col) {
    Loc l{next_var++, line, col};
    int n = name_counts[name]++;
    std::string display = n == 0 ? name : name + "_" + std::to_string(n);
    scope.push_back({name, {l.id, display}});
    return {l, display};
  }

  void pop_scope(size_t n) { scope.resize(n); }

  std::optional<std::pair<VarId, std::string>> lookup(const std::string &n) {
    for (auto it = scope.rbegin(); it != scope.rend(); ++it)
      if (it->first == n) return it->second;
    return std::nullopt;
  }

  std::string ident() {
    if (cur().kind != Token::Kind::Ident) fail("expected identifier");
    return eat().text;
  }

  ExprPtr program() {
    auto e = expr();
    if (cur().kind != Token::Kind::Eof) fail("trailing input");
    return e;
  }

  ExprPtr expr() {
    if (cur().kind == Token::Kind::Keyword) {
      const std::string &kw = cur().text;
      if (kw == "let") return let_expr();
      if (kw == "fun") return fun_expr();
      if (kw == "if") return ite_expr();
      if (kw == "assert") return assert_expr();
    }
    return or_expr();
  }

  ExprPtr let_expr() {
    Token let_tok = eat();  // let
    bool is_rec = false;
    if (cur().kind == Token::Kind::Keyword && cur().text == "rec") {
      is_rec = true;
      eat();
    }
    Token name_tok = cur();
    std::string fname = ident();
    std::vector<Token> params;
    while (cur().kind == Token::Kind::Ident) params.push_back(eat());
    if (is_rec && params.empty())
      fail("let rec requires at least one parameter");

    size_t outer = scope.size();
    ExprPtr rhs;
    Loc fbind;
    std::string fdisplay;
    if (is_rec) {
      auto [fl, fd] = bind(fname, name_tok.line, name_tok.col);
      fbind = fl;
      fdisplay = fd;
      // rec f x. rest-params curried inside
      auto [xl, xd] = bind(params[0].text, params[0].line, params[0].col);
      std::vector<std::pair<Loc, std::string>> rest;
      for (size_t k = 1; k < params.size(); k++)
        rest.push_back(bind_param(params[k]));
      expect_op("=");
      ExprPtr body = expr();
      for (auto it = rest.rbegin(); it != rest.rend(); ++it)
        body = Expr::mk_lambda(fresh(it->first.line, it->first.col), it->first,
                               it->second, body);
      rhs = Expr::mk_rec(fresh(let_tok.line, let_tok.col), fl, fd, xl, xd,
                         body);
      pop_scope(outer);
      // the let itself introduces a second binder for f, distinct from the
      // Rec's self binder but sharing its display name
      fbind = Loc{next_var++, name_tok.line, name_tok.col};
      fdisplay = fd;
      scope.push_back({fname, {fbind.id, fdisplay}});
    } else {
      std::vector<std::pair<Loc, std::string>> ps;
      for (auto &p : params) ps.push_back(bind_param(p));
      expect_op("=");
      ExprPtr body = expr();
      for (auto it = ps.rbegin(); it != ps.rend(); ++it)
        body = Expr::mk_lambda(fresh(it->first.line, it->first.col), it->first,
                               it->second, body);
      rhs = body;
      pop_scope(outer);
      auto [fl, fd] = bind(fname, name_tok.line, name_tok.col);
      fbind = fl;
      fdisplay = fd;
    }
    expect_kw("in");
    ExprPtr cont = expr();
    pop_scope(outer);
    ExprPtr lam = Expr::mk_lambda(fresh(name_tok.line, name_tok.col), fbind,
                                  fdisplay, cont);
    return Expr::mk_app(fresh(let_tok.line, let_tok.col), lam, rhs);
  }

  std::pair<Loc, std::string> bind_param(const Token &t) {
    return bind(t.text, t.line, t.col);
  }

  ExprPtr fun_expr() {
    Token fun_tok = eat();
    Token p = cur();
    std::string pname = ident();
    size_t outer = scope.size();
    auto [pl, pd] = bind(pname, p.line, p.col);
    expect_op("->");
    ExprPtr body = expr();
    pop_scope(outer);
    return Expr::mk_lambda(fresh(fun_tok.line, fun_tok.col), pl, pd, body);
  }

  ExprPtr ite_expr() {
    Token t = eat();
    ExprPtr c = expr();
    expect_kw("then");
    ExprPtr th = expr();
    expect_kw("else");
    ExprPtr el = expr();
    return Expr::mk_ite(fresh(t.line, t.col), c, th, el);
  }

  ExprPtr assert_expr() {
    Token t = eat();
    if (cur().kind != Token::Kind::LParen) fail("expected '(' after assert");
    eat();
    ExprPtr e = expr();
    if (cur().kind != Token::Kind::RParen) fail("expected ')'");
    eat();
    return Expr::mk_assert(fresh(t.line, t.col), e);
  }

  ExprPtr binop_level(int level) {
    // 1: || 2: && 3: comparisons 4: + - 5: *
    static const std::vector<std::vector<std::pair<const char *, BinOpKind>>>
        table = {
            {{"||", BinOpKind::Or}},
            {{"&&", BinOpKind::And}},
            {{"=", BinOpKind::Eq},
             {"<>", BinOpKind::Ne},
             {"<=", BinOpKind::Le},
             {"<", BinOpKind::Lt},
             {">=", BinOpKind::Ge},
             {">", BinOpKind::Gt}},
            {{"+", BinOpKind::Add}, {"-", BinOpKind::Sub}},
            {{"*", BinOpKind::Mul}},
        };
    if (level >= (int)table.size()) return app_expr();
    ExprPtr lhs = binop_level(level + 1);
    for (;;) {
      if (cur().kind != Token::Kind::Op) return lhs;
      std::optional<BinOpKind> match;
      for (auto &[txt, op] : table[level])
        if (cur().text == txt) match = op;
      if (!match) return lhs;
      // comparisons don't chain
      Token t = eat();
      ExprPtr rhs = binop_level(level + 1);
      lhs = Expr::mk_binop(fresh(t.line, t.col), *match, lhs, rhs);
      if (is_cmp(*match)) return lhs;  // comparisons don't chain
    }
  }

  ExprPtr or_expr() { return binop_level(0); }

  ExprPtr app_expr() {
    ExprPtr head = atom();
    for (;;) {
      if (starts_atom()) {
        Token t = cur();
        ExprPtr arg = atom();
        head = Expr::mk_app(fresh(t.line, t.col), head, arg);
      } else {
        return head;
      }
    }
  }

  bool starts_atom() {
    switch (cur().kind) {
      case Token::Kind::Int:
      case Token::Kind::Ident:
      case Token::Kind::LParen:
        return true;
      case Token::Kind::Keyword:
        return cur().text == "true" || cur().text == "false";
      default:
        return false;
    }
  }

  ExprPtr atom() {
    Token t = cur();
    switch (t.kind) {
      case Token::Kind::Int:
        eat();
        return Expr::mk_const(fresh(t.line, t.col), Constant::of_int(t.num));
      case Token::Kind::Keyword:
        if (t.text == "true" || t.text == "false") {
          eat();
          return Expr::mk_const(fresh(t.line, t.col),
                                Constant::of_bool(t.text == "true"));
        }
        fail("unexpected keyword '" + t.text + "'");
      case Token::Kind::Ident: {
        eat();
        auto bound = lookup(t.text);
        if (!bound) throw ParseError("unbound variable " + t.text, t.line, t.col);
        return Expr::mk_var(fresh(t.line, t.col), bound->first, bound->second);
      }
      case Token::Kind::Op:
        if (t.text == "-") {  // unary minus
          eat();
          if (cur().kind == Token::Kind::Int) {
            Token n = eat();
            return Expr::mk_const(fresh(t.line, t.col),
                                  Constant::of_int(-n.num));
          }
          ExprPtr sub = atom();
          return Expr::mk_binop(
              fresh(t.line, t.col), BinOpKind::Sub,
              Expr::mk_const(fresh(t.line, t.col), Constant::of_int(0)), sub);
        }
        fail("unexpected operator '" + t.text + "'");
      case Token::Kind::LParen: {
        eat();
        ExprPtr e = expr();
        if (cur().kind != Token::Kind::RParen) fail("expected ')'");
        eat();
        return e;
      }
      default:
        fail("unexpected end of input");
    }
  }
};

}  // namespace

ExprPtr parse_program(const std::string &source) {
  Lexer lx(source);
  Parser p;
  for (;;) {
    Token t = lx.next();
    p.toks.push_back(t);
    if (t.kind == Token::Kind::Eof) break;
  }
  ExprPtr e = p.program();
  std::string wf = check_well_formed(e);
  if (!wf.empty()) throw ParseError(wf, 0, 0);
  return e;
}

}  // namespace dfrt
