#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "skewlab/errors.hpp"

namespace skewlab {

/// 1-based location in the expression source.
struct SourcePos {
  std::size_t offset = 0;
  std::size_t line = 1;
  std::size_t column = 1;
};

class SyntaxError : public Error {
 public:
  SyntaxError(const std::string& message, SourcePos pos, std::vector<std::string> expected);

  const SourcePos& pos() const noexcept { return pos_; }
  std::size_t line() const noexcept { return pos_.line; }
  std::size_t column() const noexcept { return pos_.column; }
  /// Tokens that would have been accepted at pos().
  const std::vector<std::string>& expected() const noexcept { return expected_; }

 private:
  SourcePos pos_;
  std::vector<std::string> expected_;
};

/// Domain error during evaluation (division by zero, 0^negative,
/// negative^fractional), positioned at the offending operator.
class EvalError : public Error {
 public:
  EvalError(const std::string& message, SourcePos pos);
  const SourcePos& pos() const noexcept { return pos_; }

 private:
  SourcePos pos_;
};

using ParamTable = std::map<std::string, double>;

/// Parsed coefficient expression in x and eps.
///
///   expr   := term (('+' | '-') term)*
///   term   := unary (('*' | '/') unary)*
///   unary  := '-' unary | power
///   power  := atom ('^' unary)?
///   atom   := number | ident | ident '(' expr (',' expr)* ')' | '(' expr ')'
///
/// so ^ binds tighter than unary minus (-2^2 = -4) and is right
/// associative. Identifiers are x, eps, the functions exp, abs, tanh, sgn,
/// min, max, indicator, and the names of the parameter table.
class CoefficientExpr {
 public:
  struct Node;
  struct Instr;

  CoefficientExpr();

  static CoefficientExpr parse(std::string_view source, const ParamTable& params = {});

  const std::string& source() const noexcept { return source_; }
  /// Canonical text with minimal parentheses; parses back to the same tree.
  std::string print() const;

  double operator()(double x, double eps = 0.0) const;

  bool uses_x() const noexcept { return uses_x_; }
  bool uses_eps() const noexcept { return uses_eps_; }

  /// Structural equality of the syntax trees (positions ignored).
  bool same_tree(const CoefficientExpr& other) const;

  const Node& root() const { return *root_; }

 private:
  void compile();

  std::string source_;
  std::shared_ptr<const Node> root_;
  std::shared_ptr<const std::vector<Instr>> code_;
  std::size_t max_stack_ = 1;
  bool uses_x_ = false;
  bool uses_eps_ = false;
};

enum class ExprOp {
  Number,
  VarX,
  VarEps,
  Param,
  Neg,
  Add,
  Sub,
  Mul,
  Div,
  Pow,
  Exp,
  Abs,
  Tanh,
  Sgn,
  Min,
  Max,
  Indicator,
};

struct CoefficientExpr::Node {
  ExprOp op = ExprOp::Number;
  double value = 0.0;
  std::string name;
  SourcePos pos;
  std::vector<std::shared_ptr<const Node>> args;
};

CoefficientExpr parse_expr(std::string_view source, const ParamTable& params = {});

}  // namespace skewlab
