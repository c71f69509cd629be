#pragma once

#include <memory>
#include <string>
#include <vector>

#include "pareg/grid.hpp"

namespace pareg {

/// Scalar expression in the coordinates of a point, compiled once and
/// evaluated many times. Grammar:
///   expr   := term (('+' | '-') term)*
///   term   := unary (('*' | '/') unary)*
///   unary  := ('+' | '-') unary | power
///   power  := atom ('^' unary)?          right associative
///   atom   := number | name | name '(' expr (',' expr)* ')' | '(' expr ')'
/// Variables: x1 x2 x3 (aliases x y z) and r = |x|. Constants: pi, e.
/// Functions: sin cos tan exp log sqrt abs tanh sinh cosh atan atan2 pow
/// min max.
class Expression {
 public:
  /// Throws InputError with the offending position on a syntax error or an
  /// unknown name.
  explicit Expression(const std::string& text);
  double operator()(const Point& x) const;
  const std::string& text() const { return text_; }

  struct Node;

 private:
  std::string text_;
  std::shared_ptr<const Node> root_;
};

}  // namespace pareg
