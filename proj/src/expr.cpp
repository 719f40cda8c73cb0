#include "sdde/expr.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>

namespace sdde {

namespace {

enum class OpCode : unsigned char { push, load, add, sub, mul, div, pow, neg, exp, log, sqrt, abs, tanh, sin, cos };

struct Op {
    OpCode code;
    std::size_t slot = 0;
    double value = 0.0;
};

constexpr std::array<std::pair<std::string_view, Expr::Func>, 7> kFunctions{{
    {"exp", Expr::Func::exp},
    {"log", Expr::Func::log},
    {"sqrt", Expr::Func::sqrt},
    {"abs", Expr::Func::abs},
    {"tanh", Expr::Func::tanh},
    {"sin", Expr::Func::sin},
    {"cos", Expr::Func::cos},
}};

std::optional<Expr::Func> lookup_function(std::string_view name) {
    for (const auto& [n, f] : kFunctions)
        if (n == name) return f;
    return std::nullopt;
}

OpCode call_opcode(Expr::Func f) {
    switch (f) {
    case Expr::Func::exp: return OpCode::exp;
    case Expr::Func::log: return OpCode::log;
    case Expr::Func::sqrt: return OpCode::sqrt;
    case Expr::Func::abs: return OpCode::abs;
    case Expr::Func::tanh: return OpCode::tanh;
    case Expr::Func::sin: return OpCode::sin;
    case Expr::Func::cos: return OpCode::cos;
    }
    return OpCode::exp;
}

class Parser {
public:
    Parser(std::string_view src, const std::vector<std::string>& vars, std::vector<Expr::Node>& nodes)
        : src_(src), vars_(vars), nodes_(nodes) {}

    int parse() {
        skip_ws();
        if (pos_ >= src_.size()) throw ParseError(ParseError::Kind::syntax, pos_, "empty expression");
        int root = expr();
        skip_ws();
        if (pos_ < src_.size())
            throw ParseError(ParseError::Kind::syntax, pos_, std::string("unexpected '") + src_[pos_] + "'");
        return root;
    }

private:
    std::string_view src_;
    const std::vector<std::string>& vars_;
    std::vector<Expr::Node>& nodes_;
    std::size_t pos_ = 0;

    void skip_ws() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    }

    bool accept(char c) {
        skip_ws();
        if (pos_ < src_.size() && src_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    void expect(char c) {
        if (!accept(c)) {
            if (pos_ >= src_.size())
                throw ParseError(ParseError::Kind::syntax, pos_, std::string("expected '") + c + "' before end of input");
            throw ParseError(ParseError::Kind::syntax, pos_, std::string("expected '") + c + "'");
        }
    }

    int add_node(Expr::Node n) {
        nodes_.push_back(n);
        return static_cast<int>(nodes_.size() - 1);
    }

    int binary(Expr::Kind kind, int lhs, int rhs) {
        Expr::Node n{kind};
        n.lhs = lhs;
        n.rhs = rhs;
        return add_node(n);
    }

    int expr() {
        int lhs = term();
        for (;;) {
            if (accept('+'))
                lhs = binary(Expr::Kind::add, lhs, term());
            else if (accept('-'))
                lhs = binary(Expr::Kind::sub, lhs, term());
            else
                return lhs;
        }
    }

    int term() {
        int lhs = factor();
        for (;;) {
            if (accept('*'))
                lhs = binary(Expr::Kind::mul, lhs, factor());
            else if (accept('/'))
                lhs = binary(Expr::Kind::div, lhs, factor());
            else
                return lhs;
        }
    }

    int factor() {
        if (accept('-')) {
            Expr::Node n{Expr::Kind::neg};
            n.lhs = factor();
            return add_node(n);
        }
        int b = base();
        if (accept('^')) return binary(Expr::Kind::pow, b, factor());
        return b;
    }

    int base() {
        skip_ws();
        if (pos_ >= src_.size()) throw ParseError(ParseError::Kind::syntax, pos_, "unexpected end of input");
        const char c = src_[pos_];
        if (c == '(') {
            ++pos_;
            int inner = expr();
            expect(')');
            return inner;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return identifier();
        throw ParseError(ParseError::Kind::syntax, pos_, std::string("unexpected '") + c + "'");
    }

    int number() {
        const std::size_t start = pos_;
        auto digits = [&] {
            std::size_t n = 0;
            while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_, ++n;
            return n;
        };
        std::size_t n = digits();
        if (pos_ < src_.size() && src_[pos_] == '.') {
            ++pos_;
            n += digits();
        }
        if (n == 0) throw ParseError(ParseError::Kind::syntax, start, "malformed number");
        if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
            ++pos_;
            if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) ++pos_;
            if (digits() == 0) throw ParseError(ParseError::Kind::syntax, pos_, "malformed exponent");
        }
        double value = 0.0;
        auto [ptr, ec] = std::from_chars(src_.data() + start, src_.data() + pos_, value);
        if (ec != std::errc() || ptr != src_.data() + pos_ || !std::isfinite(value))
            throw ParseError(ParseError::Kind::syntax, start, "number out of range");
        Expr::Node node{Expr::Kind::number};
        node.number = value;
        return add_node(node);
    }

    int identifier() {
        const std::size_t start = pos_;
        while (pos_ < src_.size() &&
               (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
            ++pos_;
        const std::string_view name = src_.substr(start, pos_ - start);
        skip_ws();
        const bool is_call = pos_ < src_.size() && src_[pos_] == '(';
        if (is_call) {
            auto func = lookup_function(name);
            if (!func)
                throw ParseError(ParseError::Kind::unknown_identifier, start,
                                 "unknown function '" + std::string(name) + "'");
            ++pos_;
            skip_ws();
            if (pos_ < src_.size() && src_[pos_] == ')')
                throw ParseError(ParseError::Kind::arity, pos_,
                                 std::string(name) + " expects exactly one argument, got none");
            int arg = expr();
            skip_ws();
            if (pos_ < src_.size() && src_[pos_] == ',')
                throw ParseError(ParseError::Kind::arity, pos_,
                                 std::string(name) + " expects exactly one argument");
            expect(')');
            Expr::Node n{Expr::Kind::call};
            n.func = *func;
            n.lhs = arg;
            return add_node(n);
        }
        auto it = std::find(vars_.begin(), vars_.end(), name);
        if (it == vars_.end()) {
            if (lookup_function(name))
                throw ParseError(ParseError::Kind::arity, start,
                                 "function '" + std::string(name) + "' used without an argument");
            throw ParseError(ParseError::Kind::unknown_identifier, start,
                             "unknown identifier '" + std::string(name) + "'");
        }
        Expr::Node n{Expr::Kind::variable};
        n.slot = static_cast<std::size_t>(it - vars_.begin());
        return add_node(n);
    }
};

std::string format_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace

struct Expr::Impl {
    std::string source;
    std::vector<std::string> vars;
    std::vector<Node> nodes;
    int root = -1;
    std::vector<Op> program;
    std::size_t max_depth = 0;
    std::optional<double> constant;

    void compile() {
        program.clear();
        std::size_t depth = 0;
        emit(root, depth);
        bool has_vars = std::any_of(nodes.begin(), nodes.end(), [](const Node& n) { return n.kind == Kind::variable; });
        if (!has_vars) {
            Expr tmp(std::shared_ptr<const Impl>(this, [](const Impl*) {}));
            const std::vector<double> unused(vars.size(), 0.0);
            auto r = tmp.try_eval(std::span<const double>(unused));
            if (r) constant = r.value;
        }
    }

    void emit(int idx, std::size_t& depth) {
        const Node& n = nodes[static_cast<std::size_t>(idx)];
        auto bump = [&] {
            ++depth;
            max_depth = std::max(max_depth, depth);
        };
        switch (n.kind) {
        case Kind::number:
            program.push_back({OpCode::push, 0, n.number});
            bump();
            break;
        case Kind::variable:
            program.push_back({OpCode::load, n.slot, 0.0});
            bump();
            break;
        case Kind::neg:
            emit(n.lhs, depth);
            program.push_back({OpCode::neg});
            break;
        case Kind::call:
            emit(n.lhs, depth);
            program.push_back({call_opcode(n.func)});
            break;
        default: {
            emit(n.lhs, depth);
            emit(n.rhs, depth);
            OpCode code = OpCode::add;
            switch (n.kind) {
            case Kind::add: code = OpCode::add; break;
            case Kind::sub: code = OpCode::sub; break;
            case Kind::mul: code = OpCode::mul; break;
            case Kind::div: code = OpCode::div; break;
            case Kind::pow: code = OpCode::pow; break;
            default: break;
            }
            program.push_back({code});
            --depth;
        }
        }
    }
};

Expr::Expr() : Expr(constant(0.0)) {}

Expr::Expr(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {}

Expr Expr::parse(std::string_view source, std::vector<std::string> declared_vars) {
    auto impl = std::make_shared<Impl>();
    impl->source = std::string(source);
    impl->vars = std::move(declared_vars);
    Parser parser(impl->source, impl->vars, impl->nodes);
    impl->root = parser.parse();
    impl->compile();
    return Expr(std::move(impl));
}

Expr Expr::constant(double value) {
    auto impl = std::make_shared<Impl>();
    impl->source = format_number(value);
    Node n{Kind::number};
    n.number = value;
    impl->nodes.push_back(n);
    impl->root = 0;
    impl->compile();
    return Expr(std::move(impl));
}

EvalResult Expr::try_eval(std::span<const double> args) const noexcept {
    const Impl& im = *impl_;
    if (args.size() < im.vars.size())
        return {0.0, EvalError{EvalErrc::unbound_variable, "expected " + std::to_string(im.vars.size()) + " arguments"}};

    std::array<double, 64> small{};
    std::vector<double> large;
    double* stack = small.data();
    if (im.max_depth > small.size()) {
        large.resize(im.max_depth);
        stack = large.data();
    }
    std::size_t sp = 0;
    auto fail = [](EvalErrc code, const char* what) { return EvalResult{0.0, EvalError{code, what}}; };

    for (const Op& op : im.program) {
        double r = 0.0;
        switch (op.code) {
        case OpCode::push: stack[sp++] = op.value; continue;
        case OpCode::load: stack[sp++] = args[op.slot]; continue;
        case OpCode::add: --sp; r = stack[sp - 1] + stack[sp]; break;
        case OpCode::sub: --sp; r = stack[sp - 1] - stack[sp]; break;
        case OpCode::mul: --sp; r = stack[sp - 1] * stack[sp]; break;
        case OpCode::div:
            --sp;
            if (stack[sp] == 0.0) return fail(EvalErrc::division_by_zero, "division by zero");
            r = stack[sp - 1] / stack[sp];
            break;
        case OpCode::pow:
            --sp;
            if (stack[sp - 1] < 0.0 && std::trunc(stack[sp]) != stack[sp])
                return fail(EvalErrc::domain, "negative base raised to a non-integer power");
            if (stack[sp - 1] == 0.0 && stack[sp] < 0.0)
                return fail(EvalErrc::division_by_zero, "zero raised to a negative power");
            r = std::pow(stack[sp - 1], stack[sp]);
            break;
        case OpCode::neg: r = -stack[sp - 1]; break;
        case OpCode::exp: r = std::exp(stack[sp - 1]); break;
        case OpCode::log:
            if (stack[sp - 1] <= 0.0) return fail(EvalErrc::domain, "log of a non-positive number");
            r = std::log(stack[sp - 1]);
            break;
        case OpCode::sqrt:
            if (stack[sp - 1] < 0.0) return fail(EvalErrc::domain, "sqrt of a negative number");
            r = std::sqrt(stack[sp - 1]);
            break;
        case OpCode::abs: r = std::fabs(stack[sp - 1]); break;
        case OpCode::tanh: r = std::tanh(stack[sp - 1]); break;
        case OpCode::sin: r = std::sin(stack[sp - 1]); break;
        case OpCode::cos: r = std::cos(stack[sp - 1]); break;
        }
        if (!std::isfinite(r)) return fail(EvalErrc::non_finite, "non-finite intermediate result");
        stack[sp - 1] = r;
    }
    const double out = stack[0];
    if (!std::isfinite(out)) return fail(EvalErrc::non_finite, "non-finite result");
    return {out, std::nullopt};
}

double Expr::eval(std::span<const double> args) const {
    auto r = try_eval(args);
    if (!r) throw EvalException(*r.error);
    return r.value;
}

EvalResult Expr::try_eval(const Env& env) const {
    const auto& vars = impl_->vars;
    std::vector<double> args(vars.size());
    for (std::size_t i = 0; i < vars.size(); ++i) {
        auto it = env.find(vars[i]);
        if (it == env.end()) {
            // Unreferenced declared variables may stay unbound.
            const bool used = std::any_of(impl_->nodes.begin(), impl_->nodes.end(), [&](const Node& n) {
                return n.kind == Kind::variable && n.slot == i;
            });
            if (used) return {0.0, EvalError{EvalErrc::unbound_variable, "unbound variable '" + vars[i] + "'"}};
            continue;
        }
        args[i] = it->second;
    }
    return try_eval(std::span<const double>(args));
}

double Expr::eval(const Env& env) const {
    auto r = try_eval(env);
    if (!r) throw EvalException(*r.error);
    return r.value;
}

const std::vector<std::string>& Expr::variables() const noexcept { return impl_->vars; }

std::optional<std::size_t> Expr::slot_of(std::string_view name) const noexcept {
    const auto& v = impl_->vars;
    auto it = std::find(v.begin(), v.end(), name);
    if (it == v.end()) return std::nullopt;
    return static_cast<std::size_t>(it - v.begin());
}

std::optional<double> Expr::constant_value() const noexcept { return impl_->constant; }

const std::string& Expr::source() const noexcept { return impl_->source; }
const std::vector<Expr::Node>& Expr::nodes() const noexcept { return impl_->nodes; }
int Expr::root() const noexcept { return impl_->root; }

std::string_view function_name(Expr::Func f) noexcept {
    for (const auto& [n, fn] : kFunctions)
        if (fn == f) return n;
    return "?";
}

std::string Expr::to_string() const {
    const auto& nodes = impl_->nodes;
    const auto& vars = impl_->vars;
    auto rec = [&](auto&& self, int idx) -> std::string {
        const Node& n = nodes[static_cast<std::size_t>(idx)];
        switch (n.kind) {
        case Kind::number: return format_number(n.number);
        case Kind::variable: return vars[n.slot];
        case Kind::neg: return "(-" + self(self, n.lhs) + ")";
        case Kind::call: return std::string(function_name(n.func)) + "(" + self(self, n.lhs) + ")";
        default: break;
        }
        const char* op = "+";
        switch (n.kind) {
        case Kind::sub: op = "-"; break;
        case Kind::mul: op = "*"; break;
        case Kind::div: op = "/"; break;
        case Kind::pow: op = "^"; break;
        default: break;
        }
        return "(" + self(self, n.lhs) + " " + op + " " + self(self, n.rhs) + ")";
    };
    return rec(rec, impl_->root);
}

double diff_fd(const Expr& e, std::string_view var, const Env& point, double step) {
    if (!(step > 0.0)) throw std::invalid_argument("diff_fd: step must be positive");
    Env p = point;
    auto it = p.find(var);
    if (it == p.end()) it = p.emplace(std::string(var), 0.0).first;
    const double x = it->second;
    it->second = x + step;
    const double fp = e.eval(p);
    it->second = x - step;
    const double fm = e.eval(p);
    return (fp - fm) / (2.0 * step);
}

} // namespace sdde
