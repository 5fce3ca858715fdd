#ifndef TSNET_EXPR_HPP
#define TSNET_EXPR_HPP

#include <cctype>
#include <cmath>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <utility>

#include "errors.hpp"
#include "timescale.hpp"

namespace tsnet {

/**
 * Tiny scalar expression language for the coefficient functions found
 * in model configs: literals, one free variable (spelled "t" or "x"),
 * unary {neg, abs, sin, cos, exp, sqrt, ln}, binary {+ - * / ^} and the
 * named constants pi and e.  Immutable after parse; evaluation is pure.
 */
class Expr {
public:
    enum class UnaryOp { Neg, Abs, Sin, Cos, Exp, Sqrt, Ln };
    enum class BinaryOp { Add, Sub, Mul, Div, Pow };

    struct Node;
    using NodePtr = std::shared_ptr<const Node>;

    struct Node {
        enum class Tag { Literal, Var, Unary, Binary } tag;
        double value = 0.0;       // Literal
        UnaryOp uop{};            // Unary
        BinaryOp bop{};           // Binary
        NodePtr a, b;             // operands
    };

    Expr() = default;

    static Expr parse(const std::string& src) { return Expr(Parser(src).run()); }

    double eval(double v) const {
        if (!root_) throw DomainError("empty expression");
        return eval_node(*root_, v);
    }

    std::string print() const { return root_ ? print_node(*root_, 0) : std::string(); }

    bool same_structure(const Expr& other) const { return node_eq(root_, other.root_); }

    bool depends_on_var() const { return root_ && contains_var(*root_); }

    const NodePtr& root() const { return root_; }

    /**
     * Exact range of the expression when it is affine in a single
     * bounded trigonometric atom (K*|sin|, a + b*cos^2, ...), treating
     * the atom as attaining its full analytic range.  Returns nothing
     * for shapes outside that family; callers fall back to sampling.
     */
    std::optional<std::pair<double, double>> analytic_range() const {
        if (!root_) return std::nullopt;
        auto aff = affine_form(*root_);
        if (!aff) return std::nullopt;
        double lo = aff->c0 + aff->c1 * (aff->c1 >= 0 ? aff->atom_lo : aff->atom_hi);
        double hi = aff->c0 + aff->c1 * (aff->c1 >= 0 ? aff->atom_hi : aff->atom_lo);
        return std::make_pair(lo, hi);
    }

private:
    explicit Expr(NodePtr root) : root_(std::move(root)) {}

    NodePtr root_;

    static NodePtr make_literal(double v) {
        auto n = std::make_shared<Node>();
        n->tag = Node::Tag::Literal;
        n->value = v;
        return n;
    }
    static NodePtr make_var() {
        auto n = std::make_shared<Node>();
        n->tag = Node::Tag::Var;
        return n;
    }
    static NodePtr make_unary(UnaryOp op, NodePtr a) {
        auto n = std::make_shared<Node>();
        n->tag = Node::Tag::Unary;
        n->uop = op;
        n->a = std::move(a);
        return n;
    }
    static NodePtr make_binary(BinaryOp op, NodePtr a, NodePtr b) {
        auto n = std::make_shared<Node>();
        n->tag = Node::Tag::Binary;
        n->bop = op;
        n->a = std::move(a);
        n->b = std::move(b);
        return n;
    }

    static double eval_node(const Node& n, double v) {
        switch (n.tag) {
            case Node::Tag::Literal: return n.value;
            case Node::Tag::Var: return v;
            case Node::Tag::Unary: {
                double x = eval_node(*n.a, v);
                switch (n.uop) {
                    case UnaryOp::Neg: return -x;
                    case UnaryOp::Abs: return std::abs(x);
                    case UnaryOp::Sin: return std::sin(x);
                    case UnaryOp::Cos: return std::cos(x);
                    case UnaryOp::Exp: return std::exp(x);
                    case UnaryOp::Sqrt:
                        if (x < 0.0) throw DomainError("sqrt of negative value in " + print_node(n, 0));
                        return std::sqrt(x);
                    case UnaryOp::Ln:
                        if (x <= 0.0) throw DomainError("ln of nonpositive value in " + print_node(n, 0));
                        return std::log(x);
                }
                break;
            }
            case Node::Tag::Binary: {
                double x = eval_node(*n.a, v);
                double y = eval_node(*n.b, v);
                switch (n.bop) {
                    case BinaryOp::Add: return x + y;
                    case BinaryOp::Sub: return x - y;
                    case BinaryOp::Mul: return x * y;
                    case BinaryOp::Div:
                        if (y == 0.0) throw DomainError("division by zero in " + print_node(n, 0));
                        return x / y;
                    case BinaryOp::Pow: {
                        if (x < 0.0 && y != std::floor(y))
                            throw DomainError("fractional power of negative base in " + print_node(n, 0));
                        if (x == 0.0 && y < 0.0)
                            throw DomainError("zero raised to negative power in " + print_node(n, 0));
                        return std::pow(x, y);
                    }
                }
                break;
            }
        }
        throw DomainError("malformed expression node");
    }

    // Precedence levels for printing: 0 add, 1 mul, 2 unary, 3 pow, 4 atom.
    static int node_prec(const Node& n) {
        switch (n.tag) {
            case Node::Tag::Literal: return n.value < 0 ? 2 : 4;
            case Node::Tag::Var: return 4;
            case Node::Tag::Unary: return n.uop == UnaryOp::Neg ? 2 : 4;
            case Node::Tag::Binary:
                switch (n.bop) {
                    case BinaryOp::Add:
                    case BinaryOp::Sub: return 0;
                    case BinaryOp::Mul:
                    case BinaryOp::Div: return 1;
                    case BinaryOp::Pow: return 3;
                }
        }
        return 4;
    }

    static std::string fmt_number(double v) {
        std::ostringstream os;
        os.precision(17);
        os << v;
        return os.str();
    }

    static std::string wrap_if(const Node& n, int min_prec) {
        std::string s = print_node(n, 0);
        if (node_prec(n) < min_prec) return "(" + s + ")";
        return s;
    }

    static std::string print_node(const Node& n, int) {
        switch (n.tag) {
            case Node::Tag::Literal: return fmt_number(n.value);
            case Node::Tag::Var: return "t";
            case Node::Tag::Unary: {
                static const char* names[] = {"-", "abs", "sin", "cos", "exp", "sqrt", "ln"};
                if (n.uop == UnaryOp::Neg) return "-" + wrap_if(*n.a, 3);
                return std::string(names[static_cast<int>(n.uop)]) + "(" + print_node(*n.a, 0) + ")";
            }
            case Node::Tag::Binary: {
                switch (n.bop) {
                    case BinaryOp::Add: return wrap_if(*n.a, 0) + " + " + wrap_if(*n.b, 1);
                    case BinaryOp::Sub: return wrap_if(*n.a, 0) + " - " + wrap_if(*n.b, 1);
                    case BinaryOp::Mul: return wrap_if(*n.a, 1) + "*" + wrap_if(*n.b, 2);
                    case BinaryOp::Div: return wrap_if(*n.a, 1) + "/" + wrap_if(*n.b, 2);
                    case BinaryOp::Pow: return wrap_if(*n.a, 4) + "^" + wrap_if(*n.b, 4);
                }
            }
        }
        return "?";
    }

    static bool node_eq(const NodePtr& a, const NodePtr& b) {
        if (!a || !b) return !a && !b;
        if (a->tag != b->tag) return false;
        switch (a->tag) {
            case Node::Tag::Literal: return a->value == b->value;
            case Node::Tag::Var: return true;
            case Node::Tag::Unary: return a->uop == b->uop && node_eq(a->a, b->a);
            case Node::Tag::Binary:
                return a->bop == b->bop && node_eq(a->a, b->a) && node_eq(a->b, b->b);
        }
        return false;
    }

    static bool contains_var(const Node& n) {
        switch (n.tag) {
            case Node::Tag::Literal: return false;
            case Node::Tag::Var: return true;
            case Node::Tag::Unary: return contains_var(*n.a);
            case Node::Tag::Binary: return contains_var(*n.a) || contains_var(*n.b);
        }
        return false;
    }

    // ---- affine-in-one-atom range analysis ----

    struct AffineForm {
        double c0 = 0.0;      // constant part
        double c1 = 0.0;      // coefficient of the atom (0 when no atom)
        bool has_atom = false;
        double atom_lo = 0.0, atom_hi = 0.0;
    };

    static std::optional<double> fold_const(const Node& n) {
        if (contains_var(n)) return std::nullopt;
        try {
            return eval_node(n, 0.0);
        } catch (const DomainError&) {
            return std::nullopt;
        }
    }

    // Bounded trig atom: sin/cos of a var-dependent argument, possibly
    // wrapped in abs or raised to a positive integer power.
    static std::optional<std::pair<double, double>> atom_range(const Node& n) {
        if (n.tag == Node::Tag::Unary && (n.uop == UnaryOp::Sin || n.uop == UnaryOp::Cos)) {
            if (contains_var(*n.a)) return std::make_pair(-1.0, 1.0);
            return std::nullopt;
        }
        if (n.tag == Node::Tag::Unary && n.uop == UnaryOp::Abs) {
            auto inner = atom_range(*n.a);
            if (!inner) return std::nullopt;
            double lo = inner->first, hi = inner->second;
            double alo = (lo <= 0.0 && hi >= 0.0) ? 0.0 : std::min(std::abs(lo), std::abs(hi));
            return std::make_pair(alo, std::max(std::abs(lo), std::abs(hi)));
        }
        if (n.tag == Node::Tag::Binary && n.bop == BinaryOp::Pow) {
            auto base = atom_range(*n.a);
            auto exp = fold_const(*n.b);
            if (!base || !exp) return std::nullopt;
            double k = *exp;
            if (k != std::floor(k) || k <= 0.0) return std::nullopt;
            double lo = base->first, hi = base->second;
            if (static_cast<long long>(k) % 2 == 0) {
                double m = (lo <= 0.0 && hi >= 0.0) ? 0.0
                                                    : std::min(std::pow(lo, k), std::pow(hi, k));
                return std::make_pair(m, std::max(std::pow(lo, k), std::pow(hi, k)));
            }
            return std::make_pair(std::pow(lo, k), std::pow(hi, k));
        }
        return std::nullopt;
    }

    static std::optional<AffineForm> affine_form(const Node& n) {
        if (auto c = fold_const(n)) {
            AffineForm f;
            f.c0 = *c;
            return f;
        }
        if (auto ar = atom_range(n)) {
            AffineForm f;
            f.c1 = 1.0;
            f.has_atom = true;
            f.atom_lo = ar->first;
            f.atom_hi = ar->second;
            return f;
        }
        if (n.tag == Node::Tag::Unary && n.uop == UnaryOp::Neg) {
            auto f = affine_form(*n.a);
            if (!f) return std::nullopt;
            f->c0 = -f->c0;
            f->c1 = -f->c1;
            return f;
        }
        if (n.tag == Node::Tag::Binary) {
            if (n.bop == BinaryOp::Add || n.bop == BinaryOp::Sub) {
                auto fa = affine_form(*n.a);
                auto fb = affine_form(*n.b);
                if (!fa || !fb) return std::nullopt;
                double s = n.bop == BinaryOp::Add ? 1.0 : -1.0;
                if (fa->has_atom && fb->has_atom) return std::nullopt;  // two atoms: give up
                AffineForm f;
                f.c0 = fa->c0 + s * fb->c0;
                if (fa->has_atom) {
                    f.c1 = fa->c1;
                    f.has_atom = true;
                    f.atom_lo = fa->atom_lo;
                    f.atom_hi = fa->atom_hi;
                } else if (fb->has_atom) {
                    f.c1 = s * fb->c1;
                    f.has_atom = true;
                    f.atom_lo = fb->atom_lo;
                    f.atom_hi = fb->atom_hi;
                }
                return f;
            }
            if (n.bop == BinaryOp::Mul) {
                auto ca = fold_const(*n.a);
                auto cb = fold_const(*n.b);
                const Node* other = ca ? n.b.get() : n.a.get();
                auto c = ca ? ca : cb;
                if (!c) return std::nullopt;
                auto f = affine_form(*other);
                if (!f) return std::nullopt;
                f->c0 *= *c;
                f->c1 *= *c;
                return f;
            }
            if (n.bop == BinaryOp::Div) {
                auto cb = fold_const(*n.b);
                if (!cb || *cb == 0.0) return std::nullopt;
                auto f = affine_form(*n.a);
                if (!f) return std::nullopt;
                f->c0 /= *cb;
                f->c1 /= *cb;
                return f;
            }
        }
        return std::nullopt;
    }

    // ---- recursive descent parser ----

    class Parser {
    public:
        explicit Parser(const std::string& src) : src_(src) {}

        NodePtr run() {
            NodePtr e = parse_sum();
            skip_ws();
            if (pos_ < src_.size()) throw ParseError(pos_, "trailing characters");
            return e;
        }

    private:
        const std::string& src_;
        std::size_t pos_ = 0;

        void skip_ws() {
            while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
        }

        bool eat(char c) {
            skip_ws();
            if (pos_ < src_.size() && src_[pos_] == c) {
                ++pos_;
                return true;
            }
            return false;
        }

        char peek() {
            skip_ws();
            return pos_ < src_.size() ? src_[pos_] : '\0';
        }

        NodePtr parse_sum() {
            NodePtr lhs = parse_product();
            for (;;) {
                if (eat('+')) lhs = make_binary(BinaryOp::Add, lhs, parse_product());
                else if (eat('-')) lhs = make_binary(BinaryOp::Sub, lhs, parse_product());
                else return lhs;
            }
        }

        NodePtr parse_product() {
            NodePtr lhs = parse_unary();
            for (;;) {
                if (eat('*')) lhs = make_binary(BinaryOp::Mul, lhs, parse_unary());
                else if (eat('/')) lhs = make_binary(BinaryOp::Div, lhs, parse_unary());
                else return lhs;
            }
        }

        NodePtr parse_unary() {
            if (eat('-')) return make_unary(UnaryOp::Neg, parse_unary());
            return parse_power();
        }

        NodePtr parse_power() {
            NodePtr lhs = parse_primary();
            while (eat('^')) {
                // exponent may carry its own sign, e.g. 2^-3
                NodePtr rhs = eat('-') ? make_unary(UnaryOp::Neg, parse_primary()) : parse_primary();
                lhs = make_binary(BinaryOp::Pow, lhs, rhs);
            }
            return lhs;
        }

        NodePtr parse_primary() {
            skip_ws();
            if (pos_ >= src_.size()) throw ParseError(pos_, "unexpected end of input");
            char c = src_[pos_];
            if (c == '(') {
                ++pos_;
                NodePtr e = parse_sum();
                if (!eat(')')) throw ParseError(pos_, "expected ')'");
                return e;
            }
            if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
            if (std::isalpha(static_cast<unsigned char>(c))) return parse_ident();
            throw ParseError(pos_, std::string("unexpected character '") + c + "'");
        }

        NodePtr parse_number() {
            std::size_t start = pos_;
            while (pos_ < src_.size() &&
                   (std::isdigit(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '.'))
                ++pos_;
            // exponent suffix
            if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
                std::size_t save = pos_;
                ++pos_;
                if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) ++pos_;
                if (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
                    while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_])))
                        ++pos_;
                } else {
                    pos_ = save;  // 'e' was the Euler constant, not an exponent
                }
            }
            try {
                return make_literal(std::stod(src_.substr(start, pos_ - start)));
            } catch (const std::exception&) {
                throw ParseError(start, "malformed number");
            }
        }

        NodePtr parse_ident() {
            std::size_t start = pos_;
            while (pos_ < src_.size() && std::isalnum(static_cast<unsigned char>(src_[pos_]))) ++pos_;
            std::string name = src_.substr(start, pos_ - start);
            if (name == "t" || name == "x") return make_var();
            if (name == "pi") return make_literal(M_PI);
            if (name == "e") return make_literal(M_E);

            UnaryOp op;
            if (name == "abs") op = UnaryOp::Abs;
            else if (name == "sin") op = UnaryOp::Sin;
            else if (name == "cos") op = UnaryOp::Cos;
            else if (name == "exp") op = UnaryOp::Exp;
            else if (name == "sqrt") op = UnaryOp::Sqrt;
            else if (name == "ln") op = UnaryOp::Ln;
            else throw ParseError(start, "unknown identifier '" + name + "'");

            if (!eat('(')) throw ParseError(pos_, "expected '(' after '" + name + "'");
            NodePtr arg = parse_sum();
            if (!eat(')')) throw ParseError(pos_, "expected ')'");
            return make_unary(op, arg);
        }
    };
};

/**
 * Sampled sup/inf of an expression over a grid: nodes plus midpoints of
 * dense sub-intervals.  The sup is estimated from below and the inf
 * from above; on pure lattices every point is sampled and the bracket
 * is exact.
 */
inline std::pair<double, double> sup_inf_estimate(const Expr& e, const Grid& grid) {
    if (grid.size() == 0) throw EmptyWindow("empty grid");
    double hi = -std::numeric_limits<double>::infinity();
    double lo = std::numeric_limits<double>::infinity();
    auto visit = [&](double t) {
        double v = e.eval(t);
        hi = std::max(hi, v);
        lo = std::min(lo, v);
    };
    for (std::size_t k = 0; k < grid.size(); ++k) {
        visit(grid.nodes[k]);
        if (k + 1 < grid.size() && grid.mu[k] == 0.0)
            visit(0.5 * (grid.nodes[k] + grid.nodes[k + 1]));
    }
    return {hi, lo};
}

} // namespace tsnet

#endif
