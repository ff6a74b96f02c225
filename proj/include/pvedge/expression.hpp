#pragma once

#include <memory>
#include <string>

namespace pvedge {

/// Scalar expression in one variable `x`, parsed from text and
/// differentiable symbolically.
///
/// Grammar: numbers, `x`, `pi`, `e`, binary `+ - * / ^`, unary minus,
/// parentheses and the functions sin, cos, tanh, exp, log, sqrt.
/// `^` is right-associative and binds tighter than unary minus.
class Expression {
public:
    struct Node;

    /// Throws ConfigError on malformed input.
    static Expression parse(const std::string& text);
    static Expression constant(double value);

    double operator()(double x) const;
    Expression derivative() const;
    std::string to_string() const;
    bool is_constant() const;

private:
    explicit Expression(std::shared_ptr<const Node> root) : root_(std::move(root)) {}
    std::shared_ptr<const Node> root_;
};

}  // namespace pvedge
