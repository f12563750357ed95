#include "abfkit/expression.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <map>

#include "abfkit/error.hpp"

namespace abfkit {

class ExpressionParser {
 public:
  ExpressionParser(const std::string& text, std::size_t dimension, Expression& out)
      : text_(text), dimension_(dimension), out_(out) {}

  void run() {
    parse_sum();
    skip_ws();
    if (pos_ != text_.size()) error("unexpected '" + std::string(1, text_[pos_]) + "'");
  }

 private:
  using Op = Expression::Op;

  std::size_t emit(Op op, std::size_t a = 0, std::size_t b = 0, double value = 0.0) {
    out_.nodes_.push_back({op, a, b, value});
    return out_.nodes_.size() - 1;
  }

  [[noreturn]] void error(const std::string& what) const {
    fail(ErrorCode::kInvalidArgument, "expression '" + text_ + "' at column " +
                                          std::to_string(pos_ + 1) + ": " + what);
  }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_])))
      ++pos_;
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  std::size_t parse_sum() {
    std::size_t lhs = parse_product();
    while (true) {
      if (accept('+')) lhs = emit(Op::kAdd, lhs, parse_product());
      else if (accept('-')) lhs = emit(Op::kSub, lhs, parse_product());
      else return lhs;
    }
  }

  std::size_t parse_product() {
    std::size_t lhs = parse_unary();
    while (true) {
      if (accept('*')) lhs = emit(Op::kMul, lhs, parse_unary());
      else if (accept('/')) lhs = emit(Op::kDiv, lhs, parse_unary());
      else return lhs;
    }
  }

  std::size_t parse_unary() {
    if (accept('-')) return emit(Op::kNeg, parse_unary());
    if (accept('+')) return parse_unary();
    return parse_power();
  }

  std::size_t parse_power() {
    std::size_t base = parse_primary();
    if (accept('^')) return emit(Op::kPow, base, parse_unary());
    return base;
  }

  std::size_t parse_primary() {
    skip_ws();
    if (pos_ >= text_.size()) error("unexpected end of input");
    if (accept('(')) {
      std::size_t inner = parse_sum();
      if (!accept(')')) error("expected ')'");
      return inner;
    }
    char c = text_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      const char* begin = text_.c_str() + pos_;
      char* end = nullptr;
      double v = std::strtod(begin, &end);
      if (end == begin) error("bad number");
      pos_ += static_cast<std::size_t>(end - begin);
      return emit(Op::kConst, 0, 0, v);
    }
    if (!std::isalpha(static_cast<unsigned char>(c))) error("unexpected character");
    std::size_t start = pos_;
    while (pos_ < text_.size() && std::isalpha(static_cast<unsigned char>(text_[pos_])))
      ++pos_;
    std::string word = text_.substr(start, pos_ - start);

    static const std::map<std::string, Op> functions = {
        {"abs", Op::kAbs}, {"sqrt", Op::kSqrt}, {"exp", Op::kExp}, {"log", Op::kLog},
        {"sin", Op::kSin}, {"cos", Op::kCos},   {"tanh", Op::kTanh}};
    if (auto it = functions.find(word); it != functions.end()) {
      if (!accept('(')) error("expected '(' after " + word);
      std::size_t arg = parse_sum();
      if (!accept(')')) error("expected ')'");
      return emit(it->second, arg);
    }

    Op op;
    if (word == "x") op = Op::kX;
    else if (word == "xh") op = Op::kXh;
    else if (word == "d") op = Op::kDiff;
    else error("unknown identifier '" + word + "'");
    std::size_t digits = pos_;
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_])))
      ++pos_;
    if (digits == pos_) error("variable '" + word + "' needs an index");
    std::size_t index = std::stoul(text_.substr(digits, pos_ - digits));
    if (index >= dimension_) error("variable index " + std::to_string(index) + " >= dimension");
    return emit(op, index);
  }

  const std::string& text_;
  std::size_t dimension_;
  Expression& out_;
  std::size_t pos_ = 0;
};

Expression Expression::parse(const std::string& text, std::size_t dimension) {
  Expression e;
  e.text_ = text;
  ExpressionParser(e.text_, dimension, e).run();
  return e;
}

double Expression::evaluate(std::span<const double> x, std::span<const double> xh) const {
  // Small fixed buffer covers typical basis functions without allocating.
  double small[32];
  std::vector<double> large;
  double* v = small;
  if (nodes_.size() > 32) {
    large.resize(nodes_.size());
    v = large.data();
  }
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const Node& n = nodes_[i];
    switch (n.op) {
      case Op::kConst: v[i] = n.value; break;
      case Op::kX: v[i] = x[n.a]; break;
      case Op::kXh: v[i] = xh[n.a]; break;
      case Op::kDiff: v[i] = x[n.a] - xh[n.a]; break;
      case Op::kNeg: v[i] = -v[n.a]; break;
      case Op::kAdd: v[i] = v[n.a] + v[n.b]; break;
      case Op::kSub: v[i] = v[n.a] - v[n.b]; break;
      case Op::kMul: v[i] = v[n.a] * v[n.b]; break;
      case Op::kDiv: v[i] = v[n.a] / v[n.b]; break;
      case Op::kPow: v[i] = std::pow(v[n.a], v[n.b]); break;
      case Op::kAbs: v[i] = std::abs(v[n.a]); break;
      case Op::kSqrt: v[i] = std::sqrt(v[n.a]); break;
      case Op::kExp: v[i] = std::exp(v[n.a]); break;
      case Op::kLog: v[i] = std::log(v[n.a]); break;
      case Op::kSin: v[i] = std::sin(v[n.a]); break;
      case Op::kCos: v[i] = std::cos(v[n.a]); break;
      case Op::kTanh: v[i] = std::tanh(v[n.a]); break;
    }
  }
  return v[nodes_.size() - 1];
}

}  // namespace abfkit
