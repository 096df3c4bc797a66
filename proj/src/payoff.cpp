#include "knightian/payoff.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <string>

#include "knightian/errors.hpp"

namespace knightian {

namespace {

using Kind = PayoffExpr::Kind;
using NodePtr = std::shared_ptr<const PayoffExpr::Node>;

struct FunctionName {
  std::string_view name;
  Kind kind;
  int arity;
};

constexpr FunctionName kFunctions[] = {
    {"exp", Kind::Exp, 1},   {"log", Kind::Log, 1}, {"abs", Kind::Abs, 1},
    {"sqrt", Kind::Sqrt, 1}, {"tanh", Kind::Tanh, 1}, {"min", Kind::Min, 2},
    {"max", Kind::Max, 2},
};

std::string_view function_name(Kind kind) {
  for (const auto& f : kFunctions) {
    if (f.kind == kind) return f.name;
  }
  return {};
}

double checked(double v, const char* what) {
  if (!std::isfinite(v)) {
    throw DomainError(std::string("non-finite result in ") + what);
  }
  return v;
}

double eval_node(const PayoffExpr::Node& n, double x) {
  switch (n.kind) {
    case Kind::Var:
      return x;
    case Kind::Lit:
      return n.value;
    case Kind::Neg:
      return -eval_node(*n.lhs, x);
    case Kind::Add:
      return checked(eval_node(*n.lhs, x) + eval_node(*n.rhs, x), "+");
    case Kind::Sub:
      return checked(eval_node(*n.lhs, x) - eval_node(*n.rhs, x), "-");
    case Kind::Mul:
      return checked(eval_node(*n.lhs, x) * eval_node(*n.rhs, x), "*");
    case Kind::Div: {
      const double num = eval_node(*n.lhs, x);
      const double den = eval_node(*n.rhs, x);
      if (den == 0.0) throw DomainError("division by zero");
      return checked(num / den, "/");
    }
    case Kind::Pow: {
      const double base = eval_node(*n.lhs, x);
      if (base == 0.0 && n.exponent < 0) throw DomainError("division by zero in ^");
      return checked(std::pow(base, n.exponent), "^");
    }
    case Kind::Exp:
      return checked(std::exp(eval_node(*n.lhs, x)), "exp");
    case Kind::Log: {
      const double a = eval_node(*n.lhs, x);
      if (!(a > 0.0)) throw DomainError("log of non-positive argument");
      return std::log(a);
    }
    case Kind::Abs:
      return std::abs(eval_node(*n.lhs, x));
    case Kind::Sqrt: {
      const double a = eval_node(*n.lhs, x);
      if (a < 0.0) throw DomainError("sqrt of negative argument");
      return std::sqrt(a);
    }
    case Kind::Tanh:
      return std::tanh(eval_node(*n.lhs, x));
    case Kind::Min:
      return std::fmin(eval_node(*n.lhs, x), eval_node(*n.rhs, x));
    case Kind::Max:
      return std::fmax(eval_node(*n.lhs, x), eval_node(*n.rhs, x));
  }
  return 0.0;
}

char binary_symbol(Kind kind) {
  switch (kind) {
    case Kind::Add: return '+';
    case Kind::Sub: return '-';
    case Kind::Mul: return '*';
    case Kind::Div: return '/';
    default: return '?';
  }
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void print_node(const PayoffExpr::Node& n, std::string& out) {
  switch (n.kind) {
    case Kind::Var:
      out += 'x';
      return;
    case Kind::Lit:
      if (std::signbit(n.value)) {
        out += "(-" + format_double(-n.value) + ")";
      } else {
        out += format_double(n.value);
      }
      return;
    case Kind::Neg:
      out += "(-";
      print_node(*n.lhs, out);
      out += ')';
      return;
    case Kind::Add:
    case Kind::Sub:
    case Kind::Mul:
    case Kind::Div:
      out += '(';
      print_node(*n.lhs, out);
      out += ' ';
      out += binary_symbol(n.kind);
      out += ' ';
      print_node(*n.rhs, out);
      out += ')';
      return;
    case Kind::Pow:
      out += '(';
      print_node(*n.lhs, out);
      out += '^';
      out += std::to_string(n.exponent);
      out += ')';
      return;
    default:
      out += function_name(n.kind);
      out += '(';
      print_node(*n.lhs, out);
      if (n.rhs) {
        out += ", ";
        print_node(*n.rhs, out);
      }
      out += ')';
      return;
  }
}

bool same_node(const PayoffExpr::Node& a, const PayoffExpr::Node& b) {
  if (&a == &b) return true;
  if (a.kind != b.kind) return false;
  if (a.kind == Kind::Lit) return a.value == b.value;
  if (a.kind == Kind::Pow && a.exponent != b.exponent) return false;
  if (static_cast<bool>(a.lhs) != static_cast<bool>(b.lhs)) return false;
  if (static_cast<bool>(a.rhs) != static_cast<bool>(b.rhs)) return false;
  if (a.lhs && !same_node(*a.lhs, *b.lhs)) return false;
  if (a.rhs && !same_node(*a.rhs, *b.rhs)) return false;
  return true;
}

bool has_var(const PayoffExpr::Node& n) {
  if (n.kind == Kind::Var) return true;
  return (n.lhs && has_var(*n.lhs)) || (n.rhs && has_var(*n.rhs));
}

NodePtr make(Kind kind, NodePtr lhs = nullptr, NodePtr rhs = nullptr) {
  auto n = std::make_shared<PayoffExpr::Node>();
  n->kind = kind;
  n->lhs = std::move(lhs);
  n->rhs = std::move(rhs);
  return n;
}

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  NodePtr run() {
    NodePtr root = expr();
    skip_ws();
    if (pos_ != text_.size()) fail("unexpected character '" + std::string(1, text_[pos_]) + "'");
    return root;
  }

 private:
  [[noreturn]] void fail(const std::string& message) const { throw ParseError(message, pos_); }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!accept(c)) fail(std::string("expected '") + c + "'");
  }

  NodePtr expr() {
    NodePtr lhs = term();
    for (;;) {
      if (accept('+')) {
        lhs = make(Kind::Add, lhs, term());
      } else if (accept('-')) {
        lhs = make(Kind::Sub, lhs, term());
      } else {
        return lhs;
      }
    }
  }

  NodePtr term() {
    NodePtr lhs = unary();
    for (;;) {
      if (accept('*')) {
        lhs = make(Kind::Mul, lhs, unary());
      } else if (accept('/')) {
        lhs = make(Kind::Div, lhs, unary());
      } else {
        return lhs;
      }
    }
  }

  NodePtr unary() {
    if (accept('-')) return make(Kind::Neg, unary());
    return power();
  }

  NodePtr power() {
    NodePtr base = atom();
    if (!accept('^')) return base;
    skip_ws();
    const std::size_t start = pos_;
    if (pos_ < text_.size() && (text_[pos_] == '-' || text_[pos_] == '+')) ++pos_;
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    int exponent = 0;
    const char* first = text_.data() + start;
    if (start < pos_ && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, text_.data() + pos_, exponent);
    if (ec != std::errc() || ptr != text_.data() + pos_) {
      pos_ = start;
      fail("expected integer exponent after '^'");
    }
    auto n = std::make_shared<PayoffExpr::Node>();
    n->kind = Kind::Pow;
    n->exponent = exponent;
    n->lhs = std::move(base);
    return n;
  }

  NodePtr atom() {
    skip_ws();
    if (pos_ >= text_.size()) fail("unexpected end of input");
    const char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      NodePtr inner = expr();
      expect(')');
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c))) return identifier();
    fail("unexpected character '" + std::string(1, c) + "'");
  }

  NodePtr number() {
    const std::size_t start = pos_;
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(text_.data() + pos_, text_.data() + text_.size(), value,
                                     std::chars_format::general);
    if (ec != std::errc()) fail("malformed number");
    pos_ = static_cast<std::size_t>(ptr - text_.data());
    if (pos_ < text_.size() && std::isalpha(static_cast<unsigned char>(text_[pos_]))) {
      pos_ = start;
      fail("malformed number");
    }
    auto n = std::make_shared<PayoffExpr::Node>();
    n->kind = Kind::Lit;
    n->value = value;
    return n;
  }

  NodePtr identifier() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() && std::isalnum(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    const std::string_view name = text_.substr(start, pos_ - start);
    if (name == "x") return make(Kind::Var);
    for (const auto& f : kFunctions) {
      if (f.name != name) continue;
      expect('(');
      NodePtr first = expr();
      NodePtr second;
      if (accept(',')) {
        if (f.arity != 2) fail("function '" + std::string(name) + "' takes 1 argument");
        second = expr();
      } else if (f.arity == 2) {
        fail("function '" + std::string(name) + "' takes 2 arguments");
      }
      expect(')');
      return make(f.kind, std::move(first), std::move(second));
    }
    pos_ = start;
    fail("unknown identifier '" + std::string(name) + "'");
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace

PayoffExpr::PayoffExpr() : root_(make(Kind::Var)) {}

PayoffExpr PayoffExpr::variable() { return PayoffExpr(); }

PayoffExpr PayoffExpr::literal(double value) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::Lit;
  n->value = value;
  return PayoffExpr(std::move(n));
}

PayoffExpr PayoffExpr::unary(Kind kind, const PayoffExpr& arg) {
  return PayoffExpr(make(kind, arg.root_));
}

PayoffExpr PayoffExpr::binary(Kind kind, const PayoffExpr& lhs, const PayoffExpr& rhs) {
  return PayoffExpr(make(kind, lhs.root_, rhs.root_));
}

PayoffExpr PayoffExpr::power(const PayoffExpr& base, int exponent) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::Pow;
  n->exponent = exponent;
  n->lhs = base.root_;
  return PayoffExpr(std::move(n));
}

double PayoffExpr::evaluate(double x) const { return eval_node(*root_, x); }

std::string PayoffExpr::to_string() const {
  std::string out;
  print_node(*root_, out);
  return out;
}

bool PayoffExpr::is_constant() const { return !has_var(*root_); }

bool operator==(const PayoffExpr& a, const PayoffExpr& b) { return same_node(*a.root_, *b.root_); }

PayoffExpr parse(std::string_view text) { return PayoffExpr(Parser(text).run()); }

PayoffExpr operator+(const PayoffExpr& a, const PayoffExpr& b) { return PayoffExpr::binary(Kind::Add, a, b); }
PayoffExpr operator-(const PayoffExpr& a, const PayoffExpr& b) { return PayoffExpr::binary(Kind::Sub, a, b); }
PayoffExpr operator*(const PayoffExpr& a, const PayoffExpr& b) { return PayoffExpr::binary(Kind::Mul, a, b); }
PayoffExpr operator/(const PayoffExpr& a, const PayoffExpr& b) { return PayoffExpr::binary(Kind::Div, a, b); }
PayoffExpr operator-(const PayoffExpr& a) { return PayoffExpr::unary(Kind::Neg, a); }
PayoffExpr min(const PayoffExpr& a, const PayoffExpr& b) { return PayoffExpr::binary(Kind::Min, a, b); }
PayoffExpr max(const PayoffExpr& a, const PayoffExpr& b) { return PayoffExpr::binary(Kind::Max, a, b); }

PayoffExpr ramp(const PayoffExpr& phi, double lo, double width) {
  using E = PayoffExpr;
  return min(max((phi - E::literal(lo)) / E::literal(width), E::literal(0.0)), E::literal(1.0));
}

}  // namespace knightian
