// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <span>
#include <string>

namespace krf {

namespace detail {
struct ExprNode;
}

/// Parsed scalar expression over coordinates y1..yn and time t.
///
/// Grammar (whitespace insignificant):
///   expr   := term (('+' | '-') term)*
///   term   := unary (('*' | '/') unary)*
///   unary  := '-' unary | power
///   power  := atom ('^' unary)?
///   atom   := number | 'pi' | 'e' | 't' | 'y' digit+ | func '(' expr ')' | '(' expr ')'
///   func   := cos | sin | tan | exp | log | sqrt
///
/// Parse errors are reported as ParseError with the 1-based column of the
/// offending token, offset by the caller-supplied line/column origin.
class Expression {
 public:
  Expression();  // the constant 0

  static Expression parse(const std::string& text, int line = 1, int column_origin = 1);
  static Expression constant(double value);

  /// Evaluates at coordinates y (y[0] is y1) and time t. Referencing y_k with
  /// k > y.size() throws ArgumentError.
  double operator()(std::span<const double> y, double t = 0.0) const;

  /// Symbolic partial derivative in y_{axis+1}.
  Expression derivative(int axis) const;

  /// Largest coordinate index referenced (1-based; 0 if none).
  int max_coordinate() const;
  bool depends_on_coordinate(int axis) const;
  bool depends_on_time() const;

  const std::string& source() const noexcept { return source_; }

 private:
  explicit Expression(std::shared_ptr<const detail::ExprNode> root, std::string source);
  std::shared_ptr<const detail::ExprNode> root_;
  std::string source_;
};

}  // namespace krf
