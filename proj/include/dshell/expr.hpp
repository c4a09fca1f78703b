#pragma once

/// \file expr.hpp
/// Closed-form scalar expressions in t1, t2 and zeta.
///
/// Grammar (whitespace-insensitive):
///   expr    := term (('+' | '-') term)*
///   term    := unary (('*' | '/') unary)*
///   unary   := '-' unary | power
///   power   := primary ('^' unary)?
///   primary := number | variable | function '(' expr ')' | '(' expr ')'
/// so '^' is right-associative and binds tighter than unary minus.

#include <cstddef>
#include <memory>
#include <string>
#include <string_view>

#include "dshell/field.hpp"

namespace dshell
{

class ParseError : public Error
{
public:
  ParseError(const std::string& message, std::size_t position);
  std::size_t position() const { return position_; }

private:
  std::size_t position_;
};

/// Evaluation left the real domain (log of non-positive, division by zero, ...).
class DomainError : public NumericalError
{
public:
  using NumericalError::NumericalError;
};

class Expr
{
public:
  struct Node;

  /// The constant expression 0.
  Expr();

  static Expr parse(std::string_view src);
  static Expr constant(double value);

  double eval(double t1, double t2, double zeta = 0.0) const;

  /// Fully parenthesized source that parses back to an equivalent tree.
  std::string print() const;

  bool depends_on(std::string_view variable) const;
  bool is_constant() const;

  /// Samples the expression at zeta on every node, rejecting non-finite values.
  ScalarField sample(const ParamGrid& grid, double zeta = 0.0) const;

private:
  explicit Expr(std::shared_ptr<const Node> root);
  std::shared_ptr<const Node> root_;
};

} // namespace dshell
