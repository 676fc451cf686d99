// SPDX-License-Identifier: Apache-2.0
#include "krf/expression.hpp"

#include <cctype>
#include <cmath>
#include <numbers>
#include <string_view>

#include "krf/error.hpp"

namespace krf {

namespace detail {

enum class Op { kNumber, kCoord, kTime, kNeg, kAdd, kSub, kMul, kDiv, kPow, kCos, kSin, kTan, kExp, kLog, kSqrt };

struct ExprNode {
  Op op;
  double value = 0.0;  // kNumber
  int axis = 0;        // kCoord, 0-based
  std::shared_ptr<const ExprNode> lhs;
  std::shared_ptr<const ExprNode> rhs;
};

}  // namespace detail

namespace {

using detail::ExprNode;
using detail::Op;
using NodePtr = std::shared_ptr<const ExprNode>;

NodePtr make_number(double v) { return std::make_shared<ExprNode>(ExprNode{Op::kNumber, v, 0, nullptr, nullptr}); }
NodePtr make_unary(Op op, NodePtr a) { return std::make_shared<ExprNode>(ExprNode{op, 0.0, 0, std::move(a), nullptr}); }

bool is_number(const NodePtr& n, double v) { return n->op == Op::kNumber && n->value == v; }

NodePtr make_binary(Op op, NodePtr a, NodePtr b) {
  // Light constant folding keeps derivative trees small.
  if (a->op == Op::kNumber && b->op == Op::kNumber && op != Op::kPow) {
    switch (op) {
      case Op::kAdd: return make_number(a->value + b->value);
      case Op::kSub: return make_number(a->value - b->value);
      case Op::kMul: return make_number(a->value * b->value);
      case Op::kDiv: return make_number(a->value / b->value);
      default: break;
    }
  }
  switch (op) {
    case Op::kAdd:
      if (is_number(a, 0.0)) return b;
      if (is_number(b, 0.0)) return a;
      break;
    case Op::kSub:
      if (is_number(b, 0.0)) return a;
      if (is_number(a, 0.0)) return make_unary(Op::kNeg, b);
      break;
    case Op::kMul:
      if (is_number(a, 0.0) || is_number(b, 0.0)) return make_number(0.0);
      if (is_number(a, 1.0)) return b;
      if (is_number(b, 1.0)) return a;
      break;
    case Op::kDiv:
      if (is_number(a, 0.0)) return make_number(0.0);
      if (is_number(b, 1.0)) return a;
      break;
    default:
      break;
  }
  return std::make_shared<ExprNode>(ExprNode{op, 0.0, 0, std::move(a), std::move(b)});
}

class Parser {
 public:
  Parser(std::string_view text, int line, int column_origin)
      : text_(text), line_(line), origin_(column_origin) {}

  NodePtr parse() {
    NodePtr n = expr();
    skip_ws();
    if (pos_ < text_.size()) fail("unexpected character '" + std::string(1, text_[pos_]) + "'");
    return n;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError("expression: " + msg, line_, origin_ + static_cast<int>(pos_));
  }

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

  NodePtr expr() {
    NodePtr n = term();
    for (;;) {
      if (accept('+')) n = make_binary(Op::kAdd, n, term());
      else if (accept('-')) n = make_binary(Op::kSub, n, term());
      else return n;
    }
  }

  NodePtr term() {
    NodePtr n = unary();
    for (;;) {
      if (accept('*')) n = make_binary(Op::kMul, n, unary());
      else if (accept('/')) n = make_binary(Op::kDiv, n, unary());
      else return n;
    }
  }

  NodePtr unary() {
    if (accept('-')) {
      NodePtr a = unary();
      if (a->op == Op::kNumber) return make_number(-a->value);
      return make_unary(Op::kNeg, a);
    }
    if (accept('+')) return unary();
    return power();
  }

  NodePtr power() {
    NodePtr base = atom();
    if (accept('^')) return make_binary(Op::kPow, base, unary());
    return base;
  }

  NodePtr atom() {
    skip_ws();
    if (pos_ >= text_.size()) fail("unexpected end of expression");
    const char c = text_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (c == '(') {
      ++pos_;
      NodePtr n = expr();
      if (!accept(')')) fail("expected ')'");
      return n;
    }
    if (std::isalpha(static_cast<unsigned char>(c))) {
      const std::size_t start = pos_;
      while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) ++pos_;
      const std::string_view word = text_.substr(start, pos_ - start);
      if (word == "pi") return make_number(std::numbers::pi);
      if (word == "e") return make_number(std::numbers::e);
      if (word == "t") return std::make_shared<ExprNode>(ExprNode{Op::kTime, 0.0, 0, nullptr, nullptr});
      if (word.size() >= 2 && word[0] == 'y') {
        int axis = 0;
        for (std::size_t i = 1; i < word.size(); ++i) {
          if (!std::isdigit(static_cast<unsigned char>(word[i]))) {
            pos_ = start;
            fail("unknown symbol '" + std::string(word) + "'");
          }
          axis = axis * 10 + (word[i] - '0');
        }
        if (axis < 1) {
          pos_ = start;
          fail("coordinate symbols start at y1");
        }
        return std::make_shared<ExprNode>(ExprNode{Op::kCoord, 0.0, axis - 1, nullptr, nullptr});
      }
      Op op;
      if (word == "cos") op = Op::kCos;
      else if (word == "sin") op = Op::kSin;
      else if (word == "tan") op = Op::kTan;
      else if (word == "exp") op = Op::kExp;
      else if (word == "log") op = Op::kLog;
      else if (word == "sqrt") op = Op::kSqrt;
      else {
        pos_ = start;
        fail("unknown symbol '" + std::string(word) + "'");
      }
      if (!accept('(')) fail("expected '(' after function name");
      NodePtr arg = expr();
      if (!accept(')')) fail("expected ')'");
      return make_unary(op, arg);
    }
    fail("unexpected character '" + std::string(1, c) + "'");
  }

  NodePtr number() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() && (std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.')) ++pos_;
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      std::size_t look = pos_ + 1;
      if (look < text_.size() && (text_[look] == '+' || text_[look] == '-')) ++look;
      if (look < text_.size() && std::isdigit(static_cast<unsigned char>(text_[look]))) {
        pos_ = look;
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      }
    }
    const std::string token(text_.substr(start, pos_ - start));
    try {
      std::size_t used = 0;
      const double v = std::stod(token, &used);
      if (used != token.size()) throw std::invalid_argument(token);
      return make_number(v);
    } catch (const std::exception&) {
      pos_ = start;
      fail("malformed number '" + token + "'");
    }
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  int line_;
  int origin_;
};

double eval(const ExprNode& n, std::span<const double> y, double t) {
  switch (n.op) {
    case Op::kNumber: return n.value;
    case Op::kCoord:
      if (static_cast<std::size_t>(n.axis) >= y.size()) {
        throw ArgumentError("expression references y" + std::to_string(n.axis + 1) +
                            " but only " + std::to_string(y.size()) + " coordinates exist");
      }
      return y[static_cast<std::size_t>(n.axis)];
    case Op::kTime: return t;
    case Op::kNeg: return -eval(*n.lhs, y, t);
    case Op::kAdd: return eval(*n.lhs, y, t) + eval(*n.rhs, y, t);
    case Op::kSub: return eval(*n.lhs, y, t) - eval(*n.rhs, y, t);
    case Op::kMul: return eval(*n.lhs, y, t) * eval(*n.rhs, y, t);
    case Op::kDiv: return eval(*n.lhs, y, t) / eval(*n.rhs, y, t);
    case Op::kPow: return std::pow(eval(*n.lhs, y, t), eval(*n.rhs, y, t));
    case Op::kCos: return std::cos(eval(*n.lhs, y, t));
    case Op::kSin: return std::sin(eval(*n.lhs, y, t));
    case Op::kTan: return std::tan(eval(*n.lhs, y, t));
    case Op::kExp: return std::exp(eval(*n.lhs, y, t));
    case Op::kLog: return std::log(eval(*n.lhs, y, t));
    case Op::kSqrt: return std::sqrt(eval(*n.lhs, y, t));
  }
  return 0.0;
}

bool depends(const ExprNode& n, int axis) {
  if (n.op == Op::kCoord) return n.axis == axis;
  if (n.op == Op::kTime && axis < 0) return true;
  bool out = false;
  if (n.lhs) out = out || depends(*n.lhs, axis);
  if (n.rhs) out = out || depends(*n.rhs, axis);
  return out;
}

int max_axis(const ExprNode& n) {
  int m = n.op == Op::kCoord ? n.axis + 1 : 0;
  if (n.lhs) m = std::max(m, max_axis(*n.lhs));
  if (n.rhs) m = std::max(m, max_axis(*n.rhs));
  return m;
}

NodePtr diff(const NodePtr& n, int axis) {
  const auto d = [axis](const NodePtr& x) { return diff(x, axis); };
  switch (n->op) {
    case Op::kNumber:
    case Op::kTime: return make_number(0.0);
    case Op::kCoord: return make_number(n->axis == axis ? 1.0 : 0.0);
    case Op::kNeg: {
      NodePtr a = d(n->lhs);
      return a->op == Op::kNumber ? make_number(-a->value) : make_unary(Op::kNeg, a);
    }
    case Op::kAdd: return make_binary(Op::kAdd, d(n->lhs), d(n->rhs));
    case Op::kSub: return make_binary(Op::kSub, d(n->lhs), d(n->rhs));
    case Op::kMul:
      return make_binary(Op::kAdd, make_binary(Op::kMul, d(n->lhs), n->rhs),
                         make_binary(Op::kMul, n->lhs, d(n->rhs)));
    case Op::kDiv:
      return make_binary(
          Op::kDiv,
          make_binary(Op::kSub, make_binary(Op::kMul, d(n->lhs), n->rhs), make_binary(Op::kMul, n->lhs, d(n->rhs))),
          make_binary(Op::kMul, n->rhs, n->rhs));
    case Op::kPow: {
      if (depends(*n->rhs, axis)) {
        throw ArgumentError("derivative: exponent depending on the differentiation variable");
      }
      // d(u^p) = p * u^(p-1) * u'
      NodePtr pm1 = make_binary(Op::kSub, n->rhs, make_number(1.0));
      return make_binary(Op::kMul, make_binary(Op::kMul, n->rhs, make_binary(Op::kPow, n->lhs, pm1)), d(n->lhs));
    }
    case Op::kCos:
      return make_binary(Op::kMul, make_unary(Op::kNeg, make_unary(Op::kSin, n->lhs)), d(n->lhs));
    case Op::kSin: return make_binary(Op::kMul, make_unary(Op::kCos, n->lhs), d(n->lhs));
    case Op::kTan: {
      NodePtr c = make_unary(Op::kCos, n->lhs);
      return make_binary(Op::kDiv, d(n->lhs), make_binary(Op::kMul, c, c));
    }
    case Op::kExp: return make_binary(Op::kMul, n, d(n->lhs));
    case Op::kLog: return make_binary(Op::kDiv, d(n->lhs), n->lhs);
    case Op::kSqrt:
      return make_binary(Op::kDiv, d(n->lhs), make_binary(Op::kMul, make_number(2.0), n));
  }
  return make_number(0.0);
}

}  // namespace

Expression::Expression() : root_(make_number(0.0)), source_("0") {}

Expression::Expression(std::shared_ptr<const detail::ExprNode> root, std::string source)
    : root_(std::move(root)), source_(std::move(source)) {}

Expression Expression::parse(const std::string& text, int line, int column_origin) {
  Parser p(text, line, column_origin);
  return Expression(p.parse(), text);
}

Expression Expression::constant(double value) {
  return Expression(make_number(value), std::to_string(value));
}

double Expression::operator()(std::span<const double> y, double t) const { return eval(*root_, y, t); }

Expression Expression::derivative(int axis) const {
  return Expression(diff(root_, axis), "d/dy" + std::to_string(axis + 1) + "(" + source_ + ")");
}

int Expression::max_coordinate() const { return max_axis(*root_); }
bool Expression::depends_on_coordinate(int axis) const { return depends(*root_, axis); }
bool Expression::depends_on_time() const { return depends(*root_, -1); }

}  // namespace krf
