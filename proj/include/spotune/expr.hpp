#pragma once

#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace spotune {

// Arithmetic expression over named parameters, used for relative
// hyperparameters such as "round(max(minsplit * minbucket, 1))".
//
// Grammar: + - * / unary minus, parentheses, numeric literals, identifiers,
// and the functions max(a, b), min(a, b), round(a). round() rounds half to
// even.
class Expression {
 public:
  struct Node;
  using Lookup = std::function<double(const std::string&)>;

  // Throws ConfigError on syntax errors.
  static Expression parse(std::string_view text);

  double evaluate(const Lookup& lookup) const;

  // Identifiers referenced anywhere in the expression, in order of first use.
  const std::vector<std::string>& identifiers() const { return identifiers_; }

  const std::string& text() const { return text_; }

 private:
  std::shared_ptr<const Node> root_;
  std::vector<std::string> identifiers_;
  std::string text_;
};

}  // namespace spotune
