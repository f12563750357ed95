#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace abfkit {

/// Pointwise-evaluable expression in the concrete state x and the abstract
/// state xh.
///
/// Grammar: numbers, `+ - * / ^`, parentheses, variables `x<i>`, `xh<i>` and
/// the shorthand `d<i>` for `(x<i> - xh<i>)`, and the unary functions
/// `abs sqrt exp log sin cos tanh`. `^` is right-associative and binds
/// tighter than unary minus, so `-d0^2` is `-(d0^2)`.
class Expression {
 public:
  /// Throws kInvalidArgument on a syntax error or a variable index >= dimension.
  static Expression parse(const std::string& text, std::size_t dimension);

  double evaluate(std::span<const double> x, std::span<const double> xh) const;
  const std::string& text() const { return text_; }

 private:
  enum class Op { kConst, kX, kXh, kDiff, kNeg, kAdd, kSub, kMul, kDiv, kPow,
                  kAbs, kSqrt, kExp, kLog, kSin, kCos, kTanh };
  struct Node {
    Op op;
    std::size_t a = 0, b = 0;
    double value = 0.0;
  };
  friend class ExpressionParser;

  std::string text_;
  // Topologically ordered; the last node is the root.
  std::vector<Node> nodes_;
};

}  // namespace abfkit
