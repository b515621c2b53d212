/*
 * expression.hpp
 *
 *  Small arithmetic expression language for custom coupling terms.
 *
 *  Grammar (precedence high to low):  ^  >  unary -  >  * /  >  + -
 *
 *    x_i[k]     k-th coordinate (1-based) of the agent's own state
 *    x_jm[k]    k-th coordinate of the m-th neighbor (1-based, document order)
 *    norm(v)    Euclidean norm; v is a signed sum of vector symbols x_i, x_jm
 *    sin cos exp sqrt abs, the constant pi, and parameters bound at parse time
 */
#pragma once

#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace habs {

struct ExprNode;

/// Symbol environment the parser validates against.
struct ExprContext {
  int dim = 1;            ///< n, shared state dimension
  int num_neighbors = 0;  ///< N_i
  std::map<std::string, double> params;
};

/// Immutable parsed expression. Copies share the tree.
class Expression {
public:
  Expression() = default;

  /// Evaluate at own state `xi` (size n) and neighbor block `xj` (size N_i*n).
  /// Throws Error(Domain) on division by zero, sqrt of a negative number or a
  /// non-finite result.
  double eval(std::span<const double> xi, std::span<const double> xj) const;

  /// Fully parenthesized text that parses back to an equivalent tree.
  std::string to_string() const;

  bool empty() const { return !root_; }

private:
  friend Expression parse_expression(std::string_view, const ExprContext&);
  explicit Expression(std::shared_ptr<const ExprNode> root) : root_(std::move(root)) {}
  std::shared_ptr<const ExprNode> root_;
};

/// Throws Error(Parse) with the character offset on lexer errors, unbalanced
/// parentheses, unknown identifiers, bad symbol indices and arity mismatches.
Expression parse_expression(std::string_view text, const ExprContext& ctx);

}  // namespace habs
