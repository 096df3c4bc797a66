#pragma once

#include <memory>
#include <string>
#include <string_view>

namespace knightian {

/**
 * Terminal payoff phi(x) as an immutable expression tree.
 *
 * x stands for the terminal state of the ambiguous Brownian motion. Nodes are
 * shared and never mutated after construction, so a PayoffExpr can be copied
 * cheaply and read from several threads.
 *
 * Grammar (whitespace-insensitive):
 *
 *   expr   := term (('+'|'-') term)*
 *   term   := unary (('*'|'/') unary)*
 *   unary  := '-' unary | power
 *   power  := atom ('^' integer)?
 *   atom   := number | 'x' | func '(' expr (',' expr)? ')' | '(' expr ')'
 *
 * so '^' binds tighter than unary minus, which binds tighter than '*'.
 * Functions: exp, log, abs, sqrt, tanh (unary) and min, max (binary).
 */
class PayoffExpr {
 public:
  enum class Kind {
    Var, Lit, Neg,
    Add, Sub, Mul, Div, Pow,
    Exp, Log, Abs, Sqrt, Tanh,
    Min, Max,
  };

  struct Node {
    Kind kind;
    double value = 0.0;  // Lit
    int exponent = 0;    // Pow
    std::shared_ptr<const Node> lhs;
    std::shared_ptr<const Node> rhs;
  };

  // Identity payoff phi(x) = x.
  PayoffExpr();

  static PayoffExpr variable();
  static PayoffExpr literal(double value);
  static PayoffExpr unary(Kind kind, const PayoffExpr& arg);
  static PayoffExpr binary(Kind kind, const PayoffExpr& lhs, const PayoffExpr& rhs);
  static PayoffExpr power(const PayoffExpr& base, int exponent);

  // Throws DomainError when phi is undefined or non-finite at x.
  double evaluate(double x) const;
  double operator()(double x) const { return evaluate(x); }

  // Canonical fully parenthesized form; parse(to_string()) reproduces the tree.
  std::string to_string() const;

  Kind kind() const { return root_->kind; }
  const Node& root() const { return *root_; }

  // True when the tree contains no Var node.
  bool is_constant() const;

  friend bool operator==(const PayoffExpr& a, const PayoffExpr& b);
  friend PayoffExpr parse(std::string_view text);

 private:
  explicit PayoffExpr(std::shared_ptr<const Node> root) : root_(std::move(root)) {}
  std::shared_ptr<const Node> root_;
};

// Throws ParseError on malformed input, unknown identifiers or wrong arity.
PayoffExpr parse(std::string_view text);

inline double evaluate(const PayoffExpr& expr, double x) { return expr.evaluate(x); }

PayoffExpr operator+(const PayoffExpr& a, const PayoffExpr& b);
PayoffExpr operator-(const PayoffExpr& a, const PayoffExpr& b);
PayoffExpr operator*(const PayoffExpr& a, const PayoffExpr& b);
PayoffExpr operator/(const PayoffExpr& a, const PayoffExpr& b);
PayoffExpr operator-(const PayoffExpr& a);
PayoffExpr min(const PayoffExpr& a, const PayoffExpr& b);
PayoffExpr max(const PayoffExpr& a, const PayoffExpr& b);

// min(max((phi - lo) / width, 0), 1): a ramp from 0 to 1 over [lo, lo + width].
PayoffExpr ramp(const PayoffExpr& phi, double lo, double width);

}  // namespace knightian
