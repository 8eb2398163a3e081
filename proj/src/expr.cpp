#include "splitform/expr.hpp"

#include <cctype>
#include <charconv>
#include <cstdlib>

namespace splitform {

namespace {

Expr make_node(ExprNode n) { return Expr(std::make_shared<const ExprNode>(std::move(n))); }

Expr unary(ExprOp op, Expr a) {
  ExprNode n;
  n.op = op;
  n.a = std::move(a);
  return make_node(std::move(n));
}

Expr binary(ExprOp op, Expr a, Expr b) {
  ExprNode n;
  n.op = op;
  n.a = std::move(a);
  n.b = std::move(b);
  return make_node(std::move(n));
}

} // namespace

Expr Expr::constant(double c) { return constant(std::complex<double>(c, 0.0)); }

Expr Expr::constant(std::complex<double> c) {
  ExprNode n;
  n.op = ExprOp::kConst;
  n.cval = c;
  return make_node(std::move(n));
}

Expr Expr::variable(int index) {
  ExprNode n;
  n.op = ExprOp::kVar;
  n.var = index;
  return make_node(std::move(n));
}

Expr operator+(const Expr& a, const Expr& b) { return binary(ExprOp::kAdd, a, b); }
Expr operator-(const Expr& a, const Expr& b) { return binary(ExprOp::kSub, a, b); }
Expr operator*(const Expr& a, const Expr& b) { return binary(ExprOp::kMul, a, b); }
Expr operator/(const Expr& a, const Expr& b) { return binary(ExprOp::kDiv, a, b); }
Expr operator-(const Expr& a) { return unary(ExprOp::kNeg, a); }

Expr pow(const Expr& a, int k) {
  ExprNode n;
  n.op = ExprOp::kPow;
  n.ipow = k;
  n.a = a;
  return make_node(std::move(n));
}

Expr exp(const Expr& a) { return unary(ExprOp::kExp, a); }
Expr log(const Expr& a) { return unary(ExprOp::kLog, a); }
Expr sin(const Expr& a) { return unary(ExprOp::kSin, a); }
Expr cos(const Expr& a) { return unary(ExprOp::kCos, a); }
Expr sqrt(const Expr& a) { return unary(ExprOp::kSqrt, a); }

namespace {

enum class Tok { kEnd, kNumber, kIdent, kPlus, kMinus, kStar, kSlash, kCaret, kLParen, kRParen, kComma };

struct Token {
  Tok kind = Tok::kEnd;
  double number = 0.0;
  bool is_integer = false;
  long long int_value = 0;
  std::string ident;
  int line = 1;
  int col = 1;
};

class Lexer {
 public:
  explicit Lexer(std::string_view text) : text_(text) { advance(); }

  const Token& peek() const { return tok_; }

  Token take() {
    Token t = tok_;
    advance();
    return t;
  }

 private:
  void advance() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) {
      if (text_[pos_] == '\n') {
        ++line_;
        col_ = 1;
      } else {
        ++col_;
      }
      ++pos_;
    }
    tok_ = Token{};
    tok_.line = line_;
    tok_.col = col_;
    if (pos_ >= text_.size()) {
      tok_.kind = Tok::kEnd;
      return;
    }
    const char c = text_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c))) {
      lex_number();
      return;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      size_t start = pos_;
      while (pos_ < text_.size() &&
             (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
        ++pos_;
        ++col_;
      }
      tok_.kind = Tok::kIdent;
      tok_.ident = std::string(text_.substr(start, pos_ - start));
      return;
    }
    switch (c) {
      case '+': tok_.kind = Tok::kPlus; break;
      case '-': tok_.kind = Tok::kMinus; break;
      case '*': tok_.kind = Tok::kStar; break;
      case '/': tok_.kind = Tok::kSlash; break;
      case '^': tok_.kind = Tok::kCaret; break;
      case '(': tok_.kind = Tok::kLParen; break;
      case ')': tok_.kind = Tok::kRParen; break;
      case ',': tok_.kind = Tok::kComma; break;
      default:
        throw ParseError(std::string("unexpected character '") + c + "'", line_, col_);
    }
    ++pos_;
    ++col_;
  }

  void lex_number() {
    const size_t start = pos_;
    bool has_dot = false;
    bool has_exp = false;
    while (pos_ < text_.size()) {
      const char c = text_[pos_];
      if (std::isdigit(static_cast<unsigned char>(c))) {
        ++pos_;
      } else if (c == '.' && !has_dot && !has_exp) {
        has_dot = true;
        ++pos_;
      } else if ((c == 'e' || c == 'E') && !has_exp && pos_ + 1 < text_.size() &&
                 (std::isdigit(static_cast<unsigned char>(text_[pos_ + 1])) ||
                  ((text_[pos_ + 1] == '+' || text_[pos_ + 1] == '-') && pos_ + 2 < text_.size() &&
                   std::isdigit(static_cast<unsigned char>(text_[pos_ + 2]))))) {
        has_exp = true;
        pos_ += (text_[pos_ + 1] == '+' || text_[pos_ + 1] == '-') ? 2 : 1;
      } else {
        break;
      }
    }
    const std::string lit(text_.substr(start, pos_ - start));
    col_ += static_cast<int>(pos_ - start);
    tok_.kind = Tok::kNumber;
    tok_.number = std::strtod(lit.c_str(), nullptr);
    tok_.is_integer = !has_dot && !has_exp;
    if (tok_.is_integer) tok_.int_value = std::strtoll(lit.c_str(), nullptr, 10);
  }

  std::string_view text_;
  size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
  Token tok_;
};

class Parser {
 public:
  Parser(std::string_view text, int n_vars) : lex_(text), n_vars_(n_vars) {}

  Expr run() {
    Expr e = parse_sum();
    const Token& t = lex_.peek();
    if (t.kind != Tok::kEnd) throw ParseError("unexpected trailing input", t.line, t.col);
    return e;
  }

 private:
  [[noreturn]] static void fail(const Token& t, const std::string& msg) {
    throw ParseError(msg, t.line, t.col);
  }

  Expr parse_sum() {
    Expr e = parse_term();
    for (;;) {
      const Tok k = lex_.peek().kind;
      if (k == Tok::kPlus) {
        lex_.take();
        e = e + parse_term();
      } else if (k == Tok::kMinus) {
        lex_.take();
        e = e - parse_term();
      } else {
        return e;
      }
    }
  }

  Expr parse_term() {
    Expr e = parse_unary();
    for (;;) {
      const Tok k = lex_.peek().kind;
      if (k == Tok::kStar) {
        lex_.take();
        e = e * parse_unary();
      } else if (k == Tok::kSlash) {
        lex_.take();
        e = e / parse_unary();
      } else {
        return e;
      }
    }
  }

  Expr parse_unary() {
    const Token& t = lex_.peek();
    if (t.kind == Tok::kMinus) {
      lex_.take();
      return -parse_unary();
    }
    if (t.kind == Tok::kPlus) {
      lex_.take();
      return parse_unary();
    }
    return parse_power();
  }

  Expr parse_power() {
    Expr base = parse_atom();
    if (lex_.peek().kind == Tok::kCaret) {
      lex_.take();
      const int k = parse_int_literal("exponent");
      Expr e = pow(base, k);
      if (lex_.peek().kind == Tok::kCaret)
        fail(lex_.peek(), "chained '^' needs parentheses");
      return e;
    }
    return base;
  }

  int parse_int_literal(const char* what) {
    bool neg = false;
    if (lex_.peek().kind == Tok::kMinus) {
      lex_.take();
      neg = true;
    } else if (lex_.peek().kind == Tok::kPlus) {
      lex_.take();
    }
    const Token t = lex_.take();
    if (t.kind != Tok::kNumber || !t.is_integer)
      fail(t, std::string(what) + " must be an integer literal");
    long long v = t.int_value;
    if (v > 64) fail(t, std::string(what) + " is too large");
    return static_cast<int>(neg ? -v : v);
  }

  Expr parse_atom() {
    const Token t = lex_.take();
    switch (t.kind) {
      case Tok::kNumber:
        return Expr::constant(t.number);
      case Tok::kLParen: {
        Expr e = parse_sum();
        expect(Tok::kRParen, ")");
        return e;
      }
      case Tok::kIdent:
        return parse_ident(t);
      default:
        fail(t, "expected a number, variable, function or '('");
    }
  }

  Expr parse_ident(const Token& t) {
    const std::string& s = t.ident;
    if (s == "i") return Expr::constant(std::complex<double>(0.0, 1.0));
    if (s == "exp" || s == "log" || s == "sin" || s == "cos" || s == "sqrt") {
      expect(Tok::kLParen, "(");
      Expr arg = parse_sum();
      expect(Tok::kRParen, ")");
      if (s == "exp") return exp(arg);
      if (s == "log") return log(arg);
      if (s == "sin") return sin(arg);
      if (s == "cos") return cos(arg);
      return sqrt(arg);
    }
    if (s == "pow") {
      expect(Tok::kLParen, "(");
      Expr arg = parse_sum();
      expect(Tok::kComma, ",");
      const int k = parse_int_literal("exponent");
      expect(Tok::kRParen, ")");
      return pow(arg, k);
    }
    if (s.size() >= 2 && s[0] == 'x') {
      bool digits = true;
      for (size_t j = 1; j < s.size(); ++j)
        if (!std::isdigit(static_cast<unsigned char>(s[j]))) digits = false;
      if (digits) {
        const int idx = std::atoi(s.c_str() + 1);
        if (idx < 1 || idx > n_vars_)
          fail(t, "unknown variable " + s + " (chart has " + std::to_string(n_vars_) + ")");
        return Expr::variable(idx - 1);
      }
    }
    fail(t, "unknown identifier '" + s + "'");
  }

  void expect(Tok kind, const char* what) {
    const Token t = lex_.take();
    if (t.kind != kind) fail(t, std::string("expected '") + what + "'");
  }

  Lexer lex_;
  int n_vars_;
};

} // namespace

Expr parse_expr(std::string_view text, int n_vars) {
  Parser p(text, n_vars);
  return p.run();
}

Expr derivative(const Expr& e, int var) {
  if (!e.valid()) throw Error("derivative of an empty expression");
  const ExprNode& n = e.node();
  switch (n.op) {
    case ExprOp::kConst:
      return Expr::constant(0.0);
    case ExprOp::kVar:
      return Expr::constant(n.var == var ? 1.0 : 0.0);
    case ExprOp::kAdd:
      return derivative(n.a, var) + derivative(n.b, var);
    case ExprOp::kSub:
      return derivative(n.a, var) - derivative(n.b, var);
    case ExprOp::kMul:
      return derivative(n.a, var) * n.b + n.a * derivative(n.b, var);
    case ExprOp::kDiv:
      return (derivative(n.a, var) * n.b - n.a * derivative(n.b, var)) / (n.b * n.b);
    case ExprOp::kNeg:
      return -derivative(n.a, var);
    case ExprOp::kPow:
      if (n.ipow == 0) return Expr::constant(0.0);
      return Expr::constant(static_cast<double>(n.ipow)) * pow(n.a, n.ipow - 1) * derivative(n.a, var);
    case ExprOp::kExp:
      return exp(n.a) * derivative(n.a, var);
    case ExprOp::kLog:
      return derivative(n.a, var) / n.a;
    case ExprOp::kSin:
      return cos(n.a) * derivative(n.a, var);
    case ExprOp::kCos:
      return -(sin(n.a) * derivative(n.a, var));
    case ExprOp::kSqrt:
      return derivative(n.a, var) / (Expr::constant(2.0) * sqrt(n.a));
  }
  throw Error("corrupt expression node");
}

Expr substitute(const Expr& e, const std::vector<Expr>& repl) {
  if (!e.valid()) throw Error("substitute into an empty expression");
  const ExprNode& n = e.node();
  switch (n.op) {
    case ExprOp::kConst:
      return e;
    case ExprOp::kVar:
      if (n.var < 0 || n.var >= static_cast<int>(repl.size()))
        throw Error("substitute: no replacement for variable x" + std::to_string(n.var + 1));
      return repl[n.var];
    case ExprOp::kAdd:
      return substitute(n.a, repl) + substitute(n.b, repl);
    case ExprOp::kSub:
      return substitute(n.a, repl) - substitute(n.b, repl);
    case ExprOp::kMul:
      return substitute(n.a, repl) * substitute(n.b, repl);
    case ExprOp::kDiv:
      return substitute(n.a, repl) / substitute(n.b, repl);
    case ExprOp::kNeg:
      return -substitute(n.a, repl);
    case ExprOp::kPow:
      return pow(substitute(n.a, repl), n.ipow);
    case ExprOp::kExp:
      return exp(substitute(n.a, repl));
    case ExprOp::kLog:
      return log(substitute(n.a, repl));
    case ExprOp::kSin:
      return sin(substitute(n.a, repl));
    case ExprOp::kCos:
      return cos(substitute(n.a, repl));
    case ExprOp::kSqrt:
      return sqrt(substitute(n.a, repl));
  }
  throw Error("corrupt expression node");
}

namespace {

using Cplx = std::complex<double>;

bool is_const(const Expr& e, Cplx* out = nullptr) {
  if (!e.valid() || e.node().op != ExprOp::kConst) return false;
  if (out) *out = e.node().cval;
  return true;
}

bool const_equals(const Expr& e, double v) {
  Cplx c;
  return is_const(e, &c) && c == Cplx(v, 0.0);
}

Expr simplify_node(const Expr& e) {
  const ExprNode& n = e.node();
  if (n.op == ExprOp::kConst || n.op == ExprOp::kVar) return e;

  const Expr a = n.a.valid() ? simplify(n.a) : Expr();
  const Expr b = n.b.valid() ? simplify(n.b) : Expr();
  Cplx ca, cb;
  const bool fa = is_const(a, &ca);
  const bool fb = is_const(b, &cb);

  switch (n.op) {
    case ExprOp::kAdd:
      if (fa && fb) return Expr::constant(ca + cb);
      if (fa && ca == 0.0) return b;
      if (fb && cb == 0.0) return a;
      return a + b;
    case ExprOp::kSub:
      if (fa && fb) return Expr::constant(ca - cb);
      if (fb && cb == 0.0) return a;
      if (fa && ca == 0.0) return -b;
      return a - b;
    case ExprOp::kMul:
      if (fa && fb) return Expr::constant(ca * cb);
      if ((fa && ca == 0.0) || (fb && cb == 0.0)) return Expr::constant(0.0);
      if (fa && ca == 1.0) return b;
      if (fb && cb == 1.0) return a;
      return a * b;
    case ExprOp::kDiv:
      if (fb && cb != 0.0) {
        if (fa) return Expr::constant(ca / cb);
        if (cb == 1.0) return a;
      }
      if (fa && ca == 0.0) return Expr::constant(0.0);
      return a / b;
    case ExprOp::kNeg:
      if (fa) return Expr::constant(-ca);
      if (a.node().op == ExprOp::kNeg) return a.node().a;
      return -a;
    case ExprOp::kPow:
      if (n.ipow == 0) return Expr::constant(1.0);
      if (n.ipow == 1) return a;
      if (fa && !(n.ipow < 0 && ca == 0.0)) return Expr::constant(std::pow(ca, n.ipow));
      return pow(a, n.ipow);
    case ExprOp::kExp:
      if (fa) return Expr::constant(std::exp(ca));
      return exp(a);
    case ExprOp::kLog:
      if (fa && ca != 0.0) return Expr::constant(std::log(ca));
      return log(a);
    case ExprOp::kSin:
      if (fa) return Expr::constant(std::sin(ca));
      return sin(a);
    case ExprOp::kCos:
      if (fa) return Expr::constant(std::cos(ca));
      return cos(a);
    case ExprOp::kSqrt:
      if (fa) return Expr::constant(std::sqrt(ca));
      return sqrt(a);
    default:
      break;
  }
  throw Error("corrupt expression node");
}

}  // namespace

Expr simplify(const Expr& e) {
  if (!e.valid()) throw Error("simplify on an empty expression");
  return simplify_node(e);
}

} // namespace splitform
