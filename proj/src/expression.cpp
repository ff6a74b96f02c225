#include "pvedge/expression.hpp"

#include "pvedge/errors.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <numbers>
#include <sstream>

namespace pvedge {

enum class Op { Const, Var, Add, Sub, Mul, Div, Pow, Neg, Sin, Cos, Tanh, Exp, Log, Sqrt };

struct Expression::Node {
    Op op;
    double value = 0.0;
    std::shared_ptr<const Node> a, b;
};

namespace {

using NodePtr = std::shared_ptr<const Expression::Node>;

NodePtr make(Op op, NodePtr a = nullptr, NodePtr b = nullptr, double value = 0.0) {
    auto n = std::make_shared<Expression::Node>();
    n->op = op;
    n->a = std::move(a);
    n->b = std::move(b);
    n->value = value;
    return n;
}

NodePtr num(double v) { return make(Op::Const, nullptr, nullptr, v); }

bool is_const(const NodePtr& n) { return n->op == Op::Const; }
bool is_value(const NodePtr& n, double v) { return is_const(n) && n->value == v; }

double eval(const Expression::Node& n, double x) {
    switch (n.op) {
        case Op::Const: return n.value;
        case Op::Var: return x;
        case Op::Add: return eval(*n.a, x) + eval(*n.b, x);
        case Op::Sub: return eval(*n.a, x) - eval(*n.b, x);
        case Op::Mul: return eval(*n.a, x) * eval(*n.b, x);
        case Op::Div: return eval(*n.a, x) / eval(*n.b, x);
        case Op::Pow: return std::pow(eval(*n.a, x), eval(*n.b, x));
        case Op::Neg: return -eval(*n.a, x);
        case Op::Sin: return std::sin(eval(*n.a, x));
        case Op::Cos: return std::cos(eval(*n.a, x));
        case Op::Tanh: return std::tanh(eval(*n.a, x));
        case Op::Exp: return std::exp(eval(*n.a, x));
        case Op::Log: return std::log(eval(*n.a, x));
        case Op::Sqrt: return std::sqrt(eval(*n.a, x));
    }
    return 0.0;
}

// Builders with constant folding and identity elimination, which keep
// repeated derivatives from growing without bound.
NodePtr add(NodePtr a, NodePtr b) {
    if (is_const(a) && is_const(b)) return num(a->value + b->value);
    if (is_value(a, 0.0)) return b;
    if (is_value(b, 0.0)) return a;
    return make(Op::Add, std::move(a), std::move(b));
}
NodePtr neg(NodePtr a) {
    if (is_const(a)) return num(-a->value);
    if (a->op == Op::Neg) return a->a;
    return make(Op::Neg, std::move(a));
}
NodePtr sub(NodePtr a, NodePtr b) {
    if (is_const(a) && is_const(b)) return num(a->value - b->value);
    if (is_value(b, 0.0)) return a;
    if (is_value(a, 0.0)) return neg(std::move(b));
    return make(Op::Sub, std::move(a), std::move(b));
}
NodePtr mul(NodePtr a, NodePtr b) {
    if (is_const(a) && is_const(b)) return num(a->value * b->value);
    if (is_value(a, 0.0) || is_value(b, 0.0)) return num(0.0);
    if (is_value(a, 1.0)) return b;
    if (is_value(b, 1.0)) return a;
    if (is_value(a, -1.0)) return neg(std::move(b));
    if (is_value(b, -1.0)) return neg(std::move(a));
    return make(Op::Mul, std::move(a), std::move(b));
}
NodePtr div(NodePtr a, NodePtr b) {
    if (is_const(a) && is_const(b)) return num(a->value / b->value);
    if (is_value(a, 0.0)) return num(0.0);
    if (is_value(b, 1.0)) return a;
    return make(Op::Div, std::move(a), std::move(b));
}
NodePtr pow(NodePtr a, NodePtr b) {
    if (is_const(a) && is_const(b)) return num(std::pow(a->value, b->value));
    if (is_value(b, 0.0)) return num(1.0);
    if (is_value(b, 1.0)) return a;
    return make(Op::Pow, std::move(a), std::move(b));
}
NodePtr unary(Op op, NodePtr a) {
    if (is_const(a)) return num(eval(*make(op, a), 0.0));
    return make(op, std::move(a));
}

NodePtr diff(const NodePtr& n) {
    const NodePtr& a = n->a;
    const NodePtr& b = n->b;
    switch (n->op) {
        case Op::Const: return num(0.0);
        case Op::Var: return num(1.0);
        case Op::Add: return add(diff(a), diff(b));
        case Op::Sub: return sub(diff(a), diff(b));
        case Op::Neg: return neg(diff(a));
        case Op::Mul: return add(mul(diff(a), b), mul(a, diff(b)));
        case Op::Div: return div(sub(mul(diff(a), b), mul(a, diff(b))), mul(b, b));
        case Op::Pow:
            if (is_const(b)) return mul(mul(b, pow(a, num(b->value - 1.0))), diff(a));
            return mul(n, add(mul(diff(b), unary(Op::Log, a)), div(mul(b, diff(a)), a)));
        case Op::Sin: return mul(unary(Op::Cos, a), diff(a));
        case Op::Cos: return neg(mul(unary(Op::Sin, a), diff(a)));
        case Op::Tanh: return mul(sub(num(1.0), mul(n, n)), diff(a));
        case Op::Exp: return mul(n, diff(a));
        case Op::Log: return div(diff(a), a);
        case Op::Sqrt: return div(diff(a), mul(num(2.0), n));
    }
    return num(0.0);
}

void print(const Expression::Node& n, std::ostream& os) {
    static const char* names[] = {"", "", "+", "-", "*", "/", "^", "-", "sin", "cos", "tanh", "exp", "log", "sqrt"};
    switch (n.op) {
        case Op::Const: os << n.value; break;
        case Op::Var: os << 'x'; break;
        case Op::Add: case Op::Sub: case Op::Mul: case Op::Div: case Op::Pow:
            os << '(';
            print(*n.a, os);
            os << ' ' << names[static_cast<int>(n.op)] << ' ';
            print(*n.b, os);
            os << ')';
            break;
        case Op::Neg:
            os << "(-";
            print(*n.a, os);
            os << ')';
            break;
        default:
            os << names[static_cast<int>(n.op)] << '(';
            print(*n.a, os);
            os << ')';
    }
}

class Parser {
public:
    explicit Parser(const std::string& text) : s_(normalize(text)) {}

    NodePtr parse() {
        NodePtr e = expr();
        skip();
        if (pos_ != s_.size()) fail("unexpected trailing input");
        return e;
    }

private:
    // Accept the UTF-8 middle dot and minus sign as operators.
    static std::string normalize(const std::string& in) {
        std::string out;
        for (std::size_t i = 0; i < in.size(); ++i) {
            const auto c = static_cast<unsigned char>(in[i]);
            if (c == 0xC2 && i + 1 < in.size() && static_cast<unsigned char>(in[i + 1]) == 0xB7) {
                out += '*';
                ++i;
            } else if (c == 0xE2 && i + 2 < in.size() && static_cast<unsigned char>(in[i + 1]) == 0x88 &&
                       static_cast<unsigned char>(in[i + 2]) == 0x92) {
                out += '-';
                i += 2;
            } else {
                out += in[i];
            }
        }
        return out;
    }

    [[noreturn]] void fail(const std::string& msg) const {
        throw ConfigError("expression '" + s_ + "': " + msg + " at position " + std::to_string(pos_));
    }
    void skip() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }
    bool accept(char c) {
        skip();
        if (pos_ < s_.size() && s_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    NodePtr expr() {
        NodePtr lhs = term();
        for (;;) {
            if (accept('+')) lhs = add(lhs, term());
            else if (accept('-')) lhs = sub(lhs, term());
            else return lhs;
        }
    }
    NodePtr term() {
        NodePtr lhs = signed_factor();
        for (;;) {
            if (accept('*')) lhs = mul(lhs, signed_factor());
            else if (accept('/')) lhs = div(lhs, signed_factor());
            else return lhs;
        }
    }
    NodePtr signed_factor() {
        if (accept('-')) return neg(signed_factor());
        if (accept('+')) return signed_factor();
        return power();
    }
    NodePtr power() {
        NodePtr base = primary();
        if (accept('^')) return pow(base, signed_factor());
        return base;
    }
    NodePtr primary() {
        skip();
        if (pos_ >= s_.size()) fail("unexpected end of input");
        if (accept('(')) {
            NodePtr e = expr();
            if (!accept(')')) fail("expected ')'");
            return e;
        }
        const char c = s_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            const char* begin = s_.c_str() + pos_;
            char* end = nullptr;
            const double v = std::strtod(begin, &end);
            if (end == begin) fail("bad number");
            pos_ += static_cast<std::size_t>(end - begin);
            return num(v);
        }
        if (std::isalpha(static_cast<unsigned char>(c))) {
            std::size_t start = pos_;
            while (pos_ < s_.size() && std::isalnum(static_cast<unsigned char>(s_[pos_]))) ++pos_;
            const std::string id = s_.substr(start, pos_ - start);
            if (id == "x") return make(Op::Var);
            if (id == "pi") return num(std::numbers::pi);
            if (id == "e") return num(std::numbers::e);
            Op op;
            if (id == "sin") op = Op::Sin;
            else if (id == "cos") op = Op::Cos;
            else if (id == "tanh") op = Op::Tanh;
            else if (id == "exp") op = Op::Exp;
            else if (id == "log") op = Op::Log;
            else if (id == "sqrt") op = Op::Sqrt;
            else fail("unknown identifier '" + id + "'");
            if (!accept('(')) fail("expected '(' after " + id);
            NodePtr arg = expr();
            if (!accept(')')) fail("expected ')'");
            return unary(op, arg);
        }
        fail(std::string("unexpected character '") + c + "'");
    }

    std::string s_;
    std::size_t pos_ = 0;
};

}  // namespace

Expression Expression::parse(const std::string& text) { return Expression(Parser(text).parse()); }

Expression Expression::constant(double value) { return Expression(num(value)); }

double Expression::operator()(double x) const { return eval(*root_, x); }

Expression Expression::derivative() const { return Expression(diff(root_)); }

bool Expression::is_constant() const { return is_const(root_); }

std::string Expression::to_string() const {
    std::ostringstream os;
    os.precision(17);
    print(*root_, os);
    return os.str();
}

}  // namespace pvedge
