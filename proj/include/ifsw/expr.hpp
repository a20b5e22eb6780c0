#pragma once

// Arithmetic expression language used for maps, weights, potentials and
// test functions on [0,1]^d.
//
//   expr    = term { ("+" | "-") term } ;
//   term    = unary { ("*" | "/") unary } ;
//   unary   = "-" unary | power ;
//   power   = primary [ "^" unary ] ;
//   primary = number | variable | "pi" | function "(" expr { "," expr } ")"
//           | "(" expr ")" ;
//
// Variables are x1..xd (and the alias x when d == 1). Functions are
// sin cos exp ln abs sqrt (one argument) and min max (two arguments).

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <memory>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace ifsw {

class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t position)
        : std::runtime_error(what + " at position " + std::to_string(position)),
          position_(position) {}

    std::size_t position() const noexcept { return position_; }

private:
    std::size_t position_;
};

/// Raised when an expression evaluates to a non-finite value or hits a
/// singular operation; carries the offending subexpression.
class DomainError : public std::domain_error {
public:
    DomainError(const std::string& what, std::string subexpression)
        : std::domain_error(what + " in '" + subexpression + "'"),
          subexpression_(std::move(subexpression)) {}

    const std::string& subexpression() const noexcept { return subexpression_; }

private:
    std::string subexpression_;
};

enum class Op : std::uint8_t {
    number,
    variable,
    negate,
    add,
    subtract,
    multiply,
    divide,
    power,
    sin,
    cos,
    exp,
    ln,
    abs,
    sqrt,
    min,
    max,
};

namespace detail {

struct ExprNode {
    Op op = Op::number;
    double value = 0.0;
    int var = 0;
    std::vector<std::shared_ptr<const ExprNode>> args;
};

using NodePtr = std::shared_ptr<const ExprNode>;

struct Instr {
    Op op;
    double value;
    int var;
};

struct Program {
    std::vector<Instr> code;
    std::size_t max_stack = 0;
    int arity = 0;
};

inline int function_arity(Op op) {
    switch (op) {
    case Op::min:
    case Op::max:
        return 2;
    default:
        return 1;
    }
}

inline const char* function_name(Op op) {
    switch (op) {
    case Op::sin: return "sin";
    case Op::cos: return "cos";
    case Op::exp: return "exp";
    case Op::ln: return "ln";
    case Op::abs: return "abs";
    case Op::sqrt: return "sqrt";
    case Op::min: return "min";
    case Op::max: return "max";
    default: return "";
    }
}

inline bool lookup_function(std::string_view name, Op& op) {
    static constexpr std::array<std::pair<std::string_view, Op>, 8> table{{
        {"sin", Op::sin},
        {"cos", Op::cos},
        {"exp", Op::exp},
        {"ln", Op::ln},
        {"abs", Op::abs},
        {"sqrt", Op::sqrt},
        {"min", Op::min},
        {"max", Op::max},
    }};
    for (const auto& [n, o] : table) {
        if (n == name) {
            op = o;
            return true;
        }
    }
    return false;
}

inline bool is_function(Op op) { return op >= Op::sin; }

// Binding strength used by the printer; larger binds tighter.
inline int precedence(Op op) {
    switch (op) {
    case Op::add:
    case Op::subtract:
        return 1;
    case Op::multiply:
    case Op::divide:
        return 2;
    case Op::negate:
        return 3;
    case Op::power:
        return 4;
    default:
        return 5;
    }
}

inline NodePtr make_node(Op op, std::vector<NodePtr> args, double value = 0.0, int var = 0) {
    auto n = std::make_shared<ExprNode>();
    n->op = op;
    n->value = value;
    n->var = var;
    n->args = std::move(args);
    return n;
}

inline std::string format_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void print(const ExprNode& n, std::string& out);

inline void print_child(const ExprNode& child, bool parens, std::string& out) {
    if (parens) out += '(';
    print(child, out);
    if (parens) out += ')';
}

inline void print(const ExprNode& n, std::string& out) {
    switch (n.op) {
    case Op::number:
        out += format_number(n.value);
        return;
    case Op::variable:
        out += 'x';
        out += std::to_string(n.var + 1);
        return;
    case Op::negate: {
        const auto& a = *n.args[0];
        out += '-';
        print_child(a, precedence(a.op) < precedence(Op::negate), out);
        return;
    }
    case Op::power: {
        const auto& base = *n.args[0];
        const auto& expo = *n.args[1];
        print_child(base, precedence(base.op) <= precedence(Op::power), out);
        out += '^';
        print_child(expo, precedence(expo.op) < precedence(Op::negate), out);
        return;
    }
    case Op::add:
    case Op::subtract:
    case Op::multiply:
    case Op::divide: {
        const auto& lhs = *n.args[0];
        const auto& rhs = *n.args[1];
        const int p = precedence(n.op);
        print_child(lhs, precedence(lhs.op) < p, out);
        switch (n.op) {
        case Op::add: out += " + "; break;
        case Op::subtract: out += " - "; break;
        case Op::multiply: out += '*'; break;
        default: out += '/'; break;
        }
        print_child(rhs, precedence(rhs.op) <= p, out);
        return;
    }
    default:
        out += function_name(n.op);
        out += '(';
        for (std::size_t k = 0; k < n.args.size(); ++k) {
            if (k) out += ", ";
            print(*n.args[k], out);
        }
        out += ')';
        return;
    }
}

inline bool equal(const ExprNode& a, const ExprNode& b) {
    if (a.op != b.op || a.args.size() != b.args.size()) return false;
    if (a.op == Op::number) return a.value == b.value || (std::isnan(a.value) && std::isnan(b.value));
    if (a.op == Op::variable) return a.var == b.var;
    for (std::size_t k = 0; k < a.args.size(); ++k) {
        if (!equal(*a.args[k], *b.args[k])) return false;
    }
    return true;
}

inline double apply_op(Op op, double a, double b) {
    switch (op) {
    case Op::negate: return -a;
    case Op::add: return a + b;
    case Op::subtract: return a - b;
    case Op::multiply: return a * b;
    case Op::divide: return a / b;
    case Op::power: return std::pow(a, b);
    case Op::sin: return std::sin(a);
    case Op::cos: return std::cos(a);
    case Op::exp: return std::exp(a);
    case Op::ln: return std::log(a);
    case Op::abs: return std::abs(a);
    case Op::sqrt: return std::sqrt(a);
    case Op::min: return std::min(a, b);
    case Op::max: return std::max(a, b);
    default: return a;
    }
}

// Non-empty result means the operation is singular for these arguments.
inline const char* singularity(Op op, double a, double b) {
    switch (op) {
    case Op::divide:
        return b == 0.0 ? "division by zero" : nullptr;
    case Op::ln:
        return a <= 0.0 ? "logarithm of nonpositive argument" : nullptr;
    case Op::sqrt:
        return a < 0.0 ? "square root of negative argument" : nullptr;
    default:
        return nullptr;
    }
}

inline void compile(const ExprNode& n, Program& prog, std::size_t& depth) {
    for (const auto& a : n.args) compile(*a, prog, depth);
    prog.code.push_back({n.op, n.value, n.var});
    if (n.op == Op::number || n.op == Op::variable) {
        ++depth;
        prog.max_stack = std::max(prog.max_stack, depth);
        if (n.op == Op::variable) prog.arity = std::max(prog.arity, n.var + 1);
    } else {
        depth -= n.args.size() - 1;
    }
}

// Slow path: re-evaluates the tree to name the failing subexpression.
inline double locate_failure(const ExprNode& n, std::span<const double> x) {
    if (n.op == Op::number) return n.value;
    if (n.op == Op::variable) return x[static_cast<std::size_t>(n.var)];
    const double a = locate_failure(*n.args[0], x);
    const double b = n.args.size() > 1 ? locate_failure(*n.args[1], x) : 0.0;
    std::string text;
    if (const char* why = singularity(n.op, a, b)) {
        print(n, text);
        throw DomainError(why, text);
    }
    const double r = apply_op(n.op, a, b);
    if (!std::isfinite(r)) {
        print(n, text);
        throw DomainError("non-finite result", text);
    }
    return r;
}

class Parser {
public:
    Parser(std::string_view src, int dimension) : src_(src), dim_(dimension) {}

    NodePtr parse() {
        skip_space();
        if (pos_ >= src_.size()) throw ParseError("empty expression", pos_);
        auto n = expression();
        skip_space();
        if (pos_ < src_.size()) throw ParseError(std::string("unexpected '") + src_[pos_] + "'", pos_);
        return n;
    }

private:
    void skip_space() {
        while (pos_ < src_.size() && (src_[pos_] == ' ' || src_[pos_] == '\t' || src_[pos_] == '\n' || src_[pos_] == '\r'))
            ++pos_;
    }

    bool accept(char c) {
        skip_space();
        if (pos_ < src_.size() && src_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    NodePtr expression() {
        auto lhs = term();
        for (;;) {
            if (accept('+')) lhs = make_node(Op::add, {lhs, term()});
            else if (accept('-')) lhs = make_node(Op::subtract, {lhs, term()});
            else return lhs;
        }
    }

    NodePtr term() {
        auto lhs = unary();
        for (;;) {
            if (accept('*')) lhs = make_node(Op::multiply, {lhs, unary()});
            else if (accept('/')) lhs = make_node(Op::divide, {lhs, unary()});
            else return lhs;
        }
    }

    NodePtr unary() {
        if (accept('-')) return make_node(Op::negate, {unary()});
        return power();
    }

    NodePtr power() {
        auto base = primary();
        if (accept('^')) return make_node(Op::power, {base, unary()});
        return base;
    }

    NodePtr primary() {
        skip_space();
        if (pos_ >= src_.size()) throw ParseError("unexpected end of input", pos_);
        const char c = src_[pos_];
        if (c == '(') {
            ++pos_;
            auto inner = expression();
            if (!accept(')')) throw ParseError("expected ')'", pos_);
            return inner;
        }
        if ((c >= '0' && c <= '9') || c == '.') return number();
        if (std::isalpha(static_cast<unsigned char>(c))) return identifier();
        throw ParseError(std::string("unexpected '") + c + "'", pos_);
    }

    NodePtr number() {
        const std::size_t start = pos_;
        auto digits = [&] {
            std::size_t k = 0;
            while (pos_ < src_.size() && src_[pos_] >= '0' && src_[pos_] <= '9') {
                ++pos_;
                ++k;
            }
            return k;
        };
        std::size_t count = digits();
        if (pos_ < src_.size() && src_[pos_] == '.') {
            ++pos_;
            count += digits();
        }
        if (count == 0) throw ParseError("malformed number", start);
        if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
            std::size_t save = pos_++;
            if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) ++pos_;
            if (digits() == 0) pos_ = save;
        }
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(src_.data() + start, src_.data() + pos_, v);
        if (ec != std::errc() || ptr != src_.data() + pos_ || !std::isfinite(v))
            throw ParseError("malformed number", start);
        return make_node(Op::number, {}, v);
    }

    NodePtr identifier() {
        const std::size_t start = pos_;
        while (pos_ < src_.size() && std::isalnum(static_cast<unsigned char>(src_[pos_]))) ++pos_;
        const std::string_view name = src_.substr(start, pos_ - start);

        Op fn{};
        if (lookup_function(name, fn)) {
            if (!accept('(')) throw ParseError("expected '(' after " + std::string(name), pos_);
            std::vector<NodePtr> args{expression()};
            while (accept(',')) args.push_back(expression());
            if (!accept(')')) throw ParseError("expected ')'", pos_);
            if (static_cast<int>(args.size()) != function_arity(fn))
                throw ParseError("arity mismatch: " + std::string(name) + " takes " +
                                     std::to_string(function_arity(fn)) + " argument(s), got " +
                                     std::to_string(args.size()),
                                 start);
            return make_node(fn, std::move(args));
        }
        if (name == "pi") return make_node(Op::number, {}, std::numbers::pi);
        if (name == "x" && dim_ == 1) return make_node(Op::variable, {}, 0.0, 0);
        if (name.size() >= 2 && name[0] == 'x') {
            int index = 0;
            auto [ptr, ec] = std::from_chars(name.data() + 1, name.data() + name.size(), index);
            if (ec == std::errc() && ptr == name.data() + name.size() && index >= 1 && index <= dim_ &&
                name[1] != '0')
                return make_node(Op::variable, {}, 0.0, index - 1);
        }
        throw ParseError("unknown identifier '" + std::string(name) + "'", start);
    }

    std::string_view src_;
    int dim_;
    std::size_t pos_ = 0;
};

} // namespace detail

/// Immutable expression over variables x1..xd. Copies share the tree.
class Expr {
public:
    Expr() : Expr(detail::make_node(Op::number, {}, 0.0)) {}

    /// Parses `source` with variables x1..x{dimension} available.
    static Expr parse(std::string_view source, int dimension) {
        if (dimension < 1) throw std::invalid_argument("expression dimension must be >= 1");
        return Expr(detail::Parser(source, dimension).parse());
    }

    /// Negative values become a negated literal, the shape the parser yields.
    static Expr number(double v) {
        if (std::signbit(v) && v != 0.0) return -Expr(detail::make_node(Op::number, {}, -v));
        return Expr(detail::make_node(Op::number, {}, v));
    }

    static Expr variable(int index) { return Expr(detail::make_node(Op::variable, {}, 0.0, index)); }

    static Expr call(Op fn, std::vector<Expr> args) {
        if (!detail::is_function(fn) || static_cast<int>(args.size()) != detail::function_arity(fn))
            throw std::invalid_argument("bad function call construction");
        std::vector<detail::NodePtr> nodes;
        for (auto& a : args) nodes.push_back(a.root_);
        return Expr(detail::make_node(fn, std::move(nodes)));
    }

    friend Expr operator+(const Expr& a, const Expr& b) { return binary(Op::add, a, b); }
    friend Expr operator-(const Expr& a, const Expr& b) { return binary(Op::subtract, a, b); }
    friend Expr operator*(const Expr& a, const Expr& b) { return binary(Op::multiply, a, b); }
    friend Expr operator/(const Expr& a, const Expr& b) { return binary(Op::divide, a, b); }
    friend Expr pow(const Expr& a, const Expr& b) { return binary(Op::power, a, b); }
    Expr operator-() const { return Expr(detail::make_node(Op::negate, {root_})); }

    /// Evaluates at `x`; throws DomainError on a singular or non-finite step.
    double operator()(std::span<const double> x) const {
        if (static_cast<int>(x.size()) < program_->arity)
            throw std::invalid_argument("point has " + std::to_string(x.size()) + " coordinates, expression uses " +
                                        std::to_string(program_->arity));
        constexpr std::size_t inline_depth = 32;
        std::array<double, inline_depth> small{};
        std::vector<double> large;
        double* stack = small.data();
        if (program_->max_stack > inline_depth) {
            large.resize(program_->max_stack);
            stack = large.data();
        }
        std::size_t top = 0;
        for (const auto& in : program_->code) {
            switch (in.op) {
            case Op::number:
                stack[top++] = in.value;
                continue;
            case Op::variable:
                stack[top++] = x[static_cast<std::size_t>(in.var)];
                continue;
            default:
                break;
            }
            const bool two = in.op == Op::add || in.op == Op::subtract || in.op == Op::multiply ||
                             in.op == Op::divide || in.op == Op::power || in.op == Op::min || in.op == Op::max;
            const double b = two ? stack[--top] : 0.0;
            const double a = stack[top - 1];
            const double r = detail::apply_op(in.op, a, b);
            if (detail::singularity(in.op, a, b) || !std::isfinite(r)) {
                detail::locate_failure(*root_, x);
                throw DomainError("non-finite result", str());
            }
            stack[top - 1] = r;
        }
        return stack[0];
    }

    double eval(std::span<const double> x) const { return (*this)(x); }

    std::string str() const {
        std::string out;
        detail::print(*root_, out);
        return out;
    }

    /// Replaces variable k by `replacement[k]`; used to build compositions like psi o tau_i.
    Expr substitute(std::span<const Expr> replacement) const { return Expr(substitute(root_, replacement)); }

    /// Number of leading variables referenced (max index + 1).
    int arity() const noexcept { return program_->arity; }

    int depth() const { return depth(*root_); }

    const detail::ExprNode& root() const noexcept { return *root_; }

    friend bool operator==(const Expr& a, const Expr& b) { return detail::equal(*a.root_, *b.root_); }

private:
    explicit Expr(detail::NodePtr root) : root_(std::move(root)) {
        auto prog = std::make_shared<detail::Program>();
        std::size_t depth = 0;
        detail::compile(*root_, *prog, depth);
        program_ = std::move(prog);
    }

    static Expr binary(Op op, const Expr& a, const Expr& b) { return Expr(detail::make_node(op, {a.root_, b.root_})); }

    static detail::NodePtr substitute(const detail::NodePtr& n, std::span<const Expr> rep) {
        if (n->op == Op::variable) {
            if (static_cast<std::size_t>(n->var) >= rep.size())
                throw std::invalid_argument("substitution missing variable x" + std::to_string(n->var + 1));
            return rep[static_cast<std::size_t>(n->var)].root_;
        }
        if (n->args.empty()) return n;
        std::vector<detail::NodePtr> args;
        for (const auto& a : n->args) args.push_back(substitute(a, rep));
        return detail::make_node(n->op, std::move(args), n->value, n->var);
    }

    static int depth(const detail::ExprNode& n) {
        int d = 0;
        for (const auto& a : n.args) d = std::max(d, depth(*a));
        return d + 1;
    }

    detail::NodePtr root_;
    std::shared_ptr<const detail::Program> program_;
};

} // namespace ifsw
