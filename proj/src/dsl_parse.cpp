#include "tabrobust/dsl.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

namespace tabrobust {

ParseError::ParseError(const std::string& msg, int line_, int column_)
    : std::runtime_error(line_ > 0 ? msg + " (line " + std::to_string(line_) + ", column " +
                                         std::to_string(column_) + ")"
                                   : msg + " (column " + std::to_string(column_) + ")"),
      line(line_), column(column_) {}

namespace {

constexpr double kDivGuard = 1e-9;

enum class Tok { End, Num, Ident, LParen, RParen, Comma,
                 Plus, Minus, Star, Slash,
                 Le, Ge, Lt, Gt, EqEq,
                 If, Then, And, Or, Min, Max, Abs };

struct Token {
    Tok kind;
    double num = 0.0;
    std::string text;
    int column = 0; // 1-based start
};

class Lexer {
public:
    explicit Lexer(const std::string& src) : src_(src) { tokenize(); }
    const std::vector<Token>& tokens() const { return toks_; }

private:
    void fail(const std::string& msg, std::size_t pos) const {
        throw ParseError(msg, 0, static_cast<int>(pos) + 1);
    }

    void tokenize() {
        std::size_t i = 0;
        while (i < src_.size()) {
            char c = src_[i];
            if (std::isspace(static_cast<unsigned char>(c))) { ++i; continue; }
            int col = static_cast<int>(i) + 1;
            if (std::isdigit(static_cast<unsigned char>(c)) || (c == '.' && i + 1 < src_.size() &&
                std::isdigit(static_cast<unsigned char>(src_[i + 1])))) {
                double v = 0.0;
                auto res = std::from_chars(src_.data() + i, src_.data() + src_.size(), v);
                if (res.ec != std::errc()) fail("malformed number", i);
                i = static_cast<std::size_t>(res.ptr - src_.data());
                toks_.push_back({Tok::Num, v, "", col});
                continue;
            }
            if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
                std::size_t j = i;
                while (j < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[j])) || src_[j] == '_'))
                    ++j;
                std::string word = src_.substr(i, j - i);
                Tok k = Tok::Ident;
                if (word == "if") k = Tok::If;
                else if (word == "then") k = Tok::Then;
                else if (word == "and") k = Tok::And;
                else if (word == "or") k = Tok::Or;
                else if (word == "min") k = Tok::Min;
                else if (word == "max") k = Tok::Max;
                else if (word == "abs") k = Tok::Abs;
                toks_.push_back({k, 0.0, word, col});
                i = j;
                continue;
            }
            auto two = src_.substr(i, 2);
            if (two == "<=") { toks_.push_back({Tok::Le, 0, "", col}); i += 2; continue; }
            if (two == ">=") { toks_.push_back({Tok::Ge, 0, "", col}); i += 2; continue; }
            if (two == "==") { toks_.push_back({Tok::EqEq, 0, "", col}); i += 2; continue; }
            switch (c) {
                case '<': toks_.push_back({Tok::Lt, 0, "", col}); break;
                case '>': toks_.push_back({Tok::Gt, 0, "", col}); break;
                case '(': toks_.push_back({Tok::LParen, 0, "", col}); break;
                case ')': toks_.push_back({Tok::RParen, 0, "", col}); break;
                case ',': toks_.push_back({Tok::Comma, 0, "", col}); break;
                case '+': toks_.push_back({Tok::Plus, 0, "", col}); break;
                case '-': toks_.push_back({Tok::Minus, 0, "", col}); break;
                case '*': toks_.push_back({Tok::Star, 0, "", col}); break;
                case '/': toks_.push_back({Tok::Slash, 0, "", col}); break;
                default: fail(std::string("unexpected character '") + c + "'", i);
            }
            ++i;
        }
        toks_.push_back({Tok::End, 0.0, "", static_cast<int>(src_.size()) + 1});
    }

    const std::string& src_;
    std::vector<Token> toks_;
};

// Recursive-descent parser with backtracking on "(" (a parenthesized group
// is boolean iff it contains a top-level comparison).
class Parser {
public:
    Parser(const std::string& text, const FeatureSchema& schema)
        : lexer_(text), schema_(schema) {
        expr_.text = text;
    }

    Expr parse() {
        expr_.root = parse_impl();
        expect(Tok::End, "end of constraint");
        check_div_guards();
        return std::move(expr_);
    }

private:
    const Token& peek() const { return lexer_.tokens()[pos_]; }
    Token take() { return lexer_.tokens()[pos_++]; }
    bool accept(Tok k) {
        if (peek().kind == k) { ++pos_; return true; }
        return false;
    }
    void expect(Tok k, const std::string& what) {
        if (!accept(k))
            throw ParseError("expected " + what, 0, peek().column);
    }

    std::int32_t add(ExprNode n) {
        expr_.nodes.push_back(std::move(n));
        return static_cast<std::int32_t>(expr_.nodes.size()) - 1;
    }

    // impl := "if" clause "then" clause | clause
    std::int32_t parse_impl() {
        if (accept(Tok::If)) {
            std::int32_t a = parse_or();
            expect(Tok::Then, "'then'");
            std::int32_t b = parse_or();
            ExprNode n; n.kind = ExprKind::Implies;
            n.kids = {a, b};
            return add(std::move(n));
        }
        return parse_or();
    }

    // "and" binds tighter than "or"; chains flatten into n-ary nodes
    std::int32_t parse_or() {
        std::int32_t first = parse_and();
        if (peek().kind != Tok::Or) return first;
        ExprNode n; n.kind = ExprKind::Or;
        n.kids.push_back(first);
        while (accept(Tok::Or)) n.kids.push_back(parse_and());
        return add(std::move(n));
    }

    std::int32_t parse_and() {
        std::int32_t first = parse_bool_atom();
        if (peek().kind != Tok::And) return first;
        ExprNode n; n.kind = ExprKind::And;
        n.kids.push_back(first);
        while (accept(Tok::And)) n.kids.push_back(parse_bool_atom());
        return add(std::move(n));
    }

    std::int32_t parse_bool_atom() {
        if (peek().kind == Tok::LParen) {
            std::size_t save_pos = pos_;
            std::size_t save_nodes = expr_.nodes.size();
            try {
                take(); // (
                std::int32_t inner = parse_impl();
                expect(Tok::RParen, "')'");
                return inner;
            } catch (const ParseError&) {
                pos_ = save_pos;
                expr_.nodes.resize(save_nodes);
            }
        }
        return parse_cmp();
    }

    std::int32_t parse_cmp() {
        std::int32_t lhs = parse_expr();
        CmpOp op;
        switch (peek().kind) {
            case Tok::Le: op = CmpOp::Le; break;
            case Tok::Ge: op = CmpOp::Ge; break;
            case Tok::Lt: op = CmpOp::Lt; break;
            case Tok::Gt: op = CmpOp::Gt; break;
            case Tok::EqEq: op = CmpOp::Eq; break;
            default:
                throw ParseError("expected comparison operator", 0, peek().column);
        }
        take();
        std::int32_t rhs = parse_expr();
        ExprNode n; n.kind = ExprKind::Cmp;
        n.op = op;
        n.kids = {lhs, rhs};
        return add(std::move(n));
    }

    std::int32_t parse_expr() {
        std::int32_t lhs = parse_term();
        while (peek().kind == Tok::Plus || peek().kind == Tok::Minus) {
            bool plus = take().kind == Tok::Plus;
            std::int32_t rhs = parse_term();
            ExprNode n; n.kind = plus ? ExprKind::Add : ExprKind::Sub;
            n.kids = {lhs, rhs};
            lhs = add(std::move(n));
        }
        return lhs;
    }

    std::int32_t parse_term() {
        std::int32_t lhs = parse_factor();
        while (peek().kind == Tok::Star || peek().kind == Tok::Slash) {
            bool mul = take().kind == Tok::Star;
            std::int32_t rhs = parse_factor();
            ExprNode n; n.kind = mul ? ExprKind::Mul : ExprKind::Div;
            n.kids = {lhs, rhs};
            lhs = add(std::move(n));
        }
        return lhs;
    }

    std::int32_t parse_factor() {
        const Token& t = peek();
        switch (t.kind) {
            case Tok::Minus: {
                take();
                if (peek().kind == Tok::Num) { // fold "-3" into a literal
                    Token num = take();
                    ExprNode n; n.kind = ExprKind::Num;
                    n.num = -num.num;
                    return add(std::move(n));
                }
                std::int32_t kid = parse_factor();
                ExprNode n; n.kind = ExprKind::Neg;
                n.kids = {kid};
                return add(std::move(n));
            }
            case Tok::Num: {
                take();
                ExprNode n; n.kind = ExprKind::Num;
                n.num = t.num;
                return add(std::move(n));
            }
            case Tok::Ident: {
                take();
                int idx = schema_.find(t.text);
                if (idx < 0)
                    throw ParseError("unknown feature '" + t.text + "'", 0, t.column);
                ExprNode n; n.kind = ExprKind::Feat;
                n.feat = idx;
                return add(std::move(n));
            }
            case Tok::LParen: {
                take();
                std::int32_t inner = parse_expr();
                expect(Tok::RParen, "')'");
                return inner;
            }
            case Tok::Min:
            case Tok::Max:
            case Tok::Abs: {
                Tok fn = take().kind;
                expect(Tok::LParen, "'('");
                std::vector<std::int32_t> args{parse_expr()};
                while (accept(Tok::Comma)) args.push_back(parse_expr());
                expect(Tok::RParen, "')'");
                if (fn == Tok::Abs) {
                    if (args.size() != 1)
                        throw ParseError("abs takes exactly one argument", 0, t.column);
                    ExprNode n; n.kind = ExprKind::Abs;
                    n.kids = {args[0]};
                    return add(std::move(n));
                }
                if (args.size() < 2)
                    throw ParseError(std::string(fn == Tok::Min ? "min" : "max") +
                                         " needs at least two arguments", 0, t.column);
                ExprNode n; n.kind = fn == Tok::Min ? ExprKind::Min : ExprKind::Max;
                n.kids = std::move(args);
                return add(std::move(n));
            }
            default:
                throw ParseError("expected expression", 0, t.column);
        }
    }

    // Denominators must be syntactically bounded away from zero: a constant,
    // or a (possibly negated) feature whose box excludes (-g, g).
    void check_div_guards() const {
        for (const auto& n : expr_.nodes) {
            if (n.kind != ExprKind::Div) continue;
            const ExprNode* d = &expr_.node(n.kids[1]);
            while (d->kind == ExprKind::Neg) d = &expr_.node(d->kids[0]);
            if (d->kind == ExprKind::Feat) {
                const auto& f = schema_.features[static_cast<std::size_t>(d->feat)];
                if (f.lower >= kDivGuard || f.upper <= -kDivGuard) continue;
                throw ParseError("denominator feature '" + f.name +
                                     "' has bounds that allow values near zero", 0, 1);
            }
            if (is_constant(n.kids[1])) {
                double v = eval_const(n.kids[1]);
                if (std::abs(v) > kDivGuard) continue;
                throw ParseError("constant denominator is zero (or too close to zero)", 0, 1);
            }
            throw ParseError("denominator must be a constant or a zero-excluding feature", 0, 1);
        }
    }

    bool is_constant(std::int32_t i) const {
        const ExprNode& n = expr_.node(i);
        if (n.kind == ExprKind::Feat || n.kind == ExprKind::Cmp || n.kind == ExprKind::And ||
            n.kind == ExprKind::Or || n.kind == ExprKind::Implies)
            return n.kind == ExprKind::Num;
        for (auto k : n.kids)
            if (!is_constant(k)) return false;
        return true;
    }

    double eval_const(std::int32_t i) const {
        std::vector<double> dummy(schema_.dim(), 0.0);
        return eval_arith(expr_, i, dummy);
    }

    Lexer lexer_;
    const FeatureSchema& schema_;
    Expr expr_;
    std::size_t pos_ = 0;
};

bool is_boolean_kind(ExprKind k) {
    return k == ExprKind::Cmp || k == ExprKind::And || k == ExprKind::Or || k == ExprKind::Implies;
}

} // namespace

Expr parse_constraint(const std::string& text, const FeatureSchema& schema) {
    Parser p(text, schema);
    Expr e = p.parse();
    if (!is_boolean_kind(e.node(e.root).kind))
        throw ParseError("constraint must be a comparison or boolean combination", 0, 1);
    return e;
}

std::int32_t definition_target(const Expr& e) {
    const ExprNode& root = e.node(e.root);
    if (root.kind != ExprKind::Cmp || root.op != CmpOp::Eq) return -1;
    const ExprNode& lhs = e.node(root.kids[0]);
    if (lhs.kind != ExprKind::Feat) return -1;
    return lhs.feat;
}

namespace {

void collect_feats(const Expr& e, std::int32_t i, std::set<std::int32_t>& out) {
    const ExprNode& n = e.node(i);
    if (n.kind == ExprKind::Feat) out.insert(n.feat);
    for (auto k : n.kids) collect_feats(e, k, out);
}

// Kahn topological sort of the definitions by "uses the target of".
std::vector<std::int32_t> order_definitions(const ConstraintSet& cs, const FeatureSchema& schema) {
    const auto& defs = cs.definitions;
    std::map<std::int32_t, std::size_t> target_to_def; // feature -> position in defs
    for (std::size_t i = 0; i < defs.size(); ++i) {
        std::int32_t tgt = definition_target(cs.constraints[static_cast<std::size_t>(defs[i])]);
        if (target_to_def.count(tgt))
            throw ParseError("feature '" + schema.features[static_cast<std::size_t>(tgt)].name +
                                 "' has more than one definition", 0, 1);
        target_to_def[tgt] = i;
    }
    std::vector<std::vector<std::size_t>> dependents(defs.size());
    std::vector<int> indegree(defs.size(), 0);
    for (std::size_t i = 0; i < defs.size(); ++i) {
        const Expr& e = cs.constraints[static_cast<std::size_t>(defs[i])];
        std::set<std::int32_t> used;
        collect_feats(e, e.node(e.root).kids[1], used);
        for (auto f : used) {
            auto it = target_to_def.find(f);
            if (it == target_to_def.end()) continue;
            dependents[it->second].push_back(i);
            ++indegree[i];
        }
    }
    std::vector<std::int32_t> order;
    std::vector<std::size_t> ready;
    for (std::size_t i = 0; i < defs.size(); ++i)
        if (indegree[i] == 0) ready.push_back(i);
    while (!ready.empty()) {
        std::size_t i = ready.front();
        ready.erase(ready.begin());
        order.push_back(defs[i]);
        for (auto j : dependents[i])
            if (--indegree[j] == 0) ready.push_back(j);
    }
    if (order.size() != defs.size())
        throw ParseError("definition cycle among derived features", 0, 1);
    return order;
}

FeatureKind parse_kind(const std::string& s) {
    if (s == "continuous") return FeatureKind::Continuous;
    if (s == "integer") return FeatureKind::Integer;
    if (s == "categorical") return FeatureKind::Categorical;
    throw ConfigError("unknown feature kind '" + s + "'");
}

} // namespace

ParsedSchema parse_schema(const std::string& json_text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("schema is not valid JSON: ") + e.what(), 1, 1);
    }
    if (!doc.is_object() || !doc.contains("features"))
        throw ConfigError("schema document needs a top-level 'features' array");

    ParsedSchema ps;
    static const std::set<std::string> allowed_keys{"name", "kind", "lower", "upper",
                                                    "mutable", "levels"};
    for (const auto& jf : doc["features"]) {
        for (auto it = jf.begin(); it != jf.end(); ++it)
            if (!allowed_keys.count(it.key()))
                throw ConfigError("unknown key '" + it.key() + "' in feature object");
        FeatureDef f;
        f.name = jf.at("name").get<std::string>();
        f.kind = parse_kind(jf.at("kind").get<std::string>());
        f.is_mutable = jf.value("mutable", true);
        if (f.kind == FeatureKind::Categorical) {
            f.levels = jf.at("levels").get<std::vector<std::string>>();
            f.lower = 0.0;
            f.upper = static_cast<double>(f.levels.size()) - 1.0;
        } else {
            f.lower = jf.at("lower").get<double>();
            f.upper = jf.at("upper").get<double>();
        }
        ps.schema.features.push_back(std::move(f));
    }
    ps.schema.validate();

    ps.constraints.tau = doc.value("tau", 1e-4);
    if (ps.constraints.tau <= 0.0)
        throw ConfigError("tau must be > 0");

    if (doc.contains("constraints")) {
        int idx = 0;
        for (const auto& jc : doc["constraints"]) {
            try {
                ps.constraints.constraints.push_back(
                    parse_constraint(jc.get<std::string>(), ps.schema));
            } catch (const ParseError& e) {
                throw ParseError("constraint " + std::to_string(idx) + ": " + e.what(),
                                 e.line, e.column);
            }
            ++idx;
        }
    }
    auto& cs = ps.constraints;
    for (std::size_t i = 0; i < cs.constraints.size(); ++i)
        if (definition_target(cs.constraints[i]) >= 0)
            cs.definitions.push_back(static_cast<std::int32_t>(i));
    cs.repair_order = order_definitions(cs, ps.schema);

    // Fingerprint of the canonical reprint: independent of JSON formatting.
    std::string canon;
    for (const auto& f : ps.schema.features) {
        canon += f.name + "|" + kind_name(f.kind) + "|" + format_double(f.lower) + "|" +
                 format_double(f.upper) + "|" + (f.is_mutable ? "m" : "i");
        for (const auto& l : f.levels) canon += "|" + l;
        canon += "\n";
    }
    for (const auto& c : cs.constraints) canon += to_text(c, ps.schema) + "\n";
    canon += format_double(cs.tau);
    ps.hash = fnv1a(canon.data(), canon.size());
    return ps;
}

ParsedSchemaPtr load_schema_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open schema file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return std::make_shared<const ParsedSchema>(parse_schema(ss.str()));
}

bool structurally_equal(const Expr& a, const Expr& b) {
    struct Cmp2 {
        const Expr &a, &b;
        bool eq(std::int32_t i, std::int32_t j) const {
            const ExprNode& x = a.node(i);
            const ExprNode& y = b.node(j);
            if (x.kind != y.kind || x.kids.size() != y.kids.size()) return false;
            if (x.kind == ExprKind::Num &&
                std::memcmp(&x.num, &y.num, sizeof(double)) != 0) return false;
            if (x.kind == ExprKind::Feat && x.feat != y.feat) return false;
            if (x.kind == ExprKind::Cmp && x.op != y.op) return false;
            for (std::size_t k = 0; k < x.kids.size(); ++k)
                if (!eq(x.kids[k], y.kids[k])) return false;
            return true;
        }
    };
    return Cmp2{a, b}.eq(a.root, b.root);
}

namespace {

// Arithmetic precedence for printing: 0 add/sub, 1 mul/div, 2 unary, 3 atom.
int arith_prec(const ExprNode& n) {
    switch (n.kind) {
        case ExprKind::Add: case ExprKind::Sub: return 0;
        case ExprKind::Mul: case ExprKind::Div: return 1;
        case ExprKind::Neg: return 2;
        default: return 3;
    }
}

void print_arith(const Expr& e, std::int32_t i, int min_prec, std::string& out,
                 const FeatureSchema& schema);

void print_child(const Expr& e, std::int32_t i, int min_prec, std::string& out,
                 const FeatureSchema& schema) {
    bool paren = arith_prec(e.node(i)) < min_prec;
    if (paren) out += "(";
    print_arith(e, i, 0, out, schema);
    if (paren) out += ")";
}

void print_arith(const Expr& e, std::int32_t i, int, std::string& out,
                 const FeatureSchema& schema) {
    const ExprNode& n = e.node(i);
    switch (n.kind) {
        case ExprKind::Num: out += format_double(n.num); return;
        case ExprKind::Feat: out += schema.features[static_cast<std::size_t>(n.feat)].name; return;
        case ExprKind::Neg:
            out += "-";
            if (e.node(n.kids[0]).kind == ExprKind::Num) {
                // "-3" would re-lex as a folded literal; keep the Neg node
                out += "(" + format_double(e.node(n.kids[0]).num) + ")";
                return;
            }
            print_child(e, n.kids[0], 3, out, schema);
            return;
        case ExprKind::Add:
        case ExprKind::Sub:
            print_child(e, n.kids[0], 0, out, schema);
            out += n.kind == ExprKind::Add ? " + " : " - ";
            print_child(e, n.kids[1], 1, out, schema);
            return;
        case ExprKind::Mul:
        case ExprKind::Div:
            print_child(e, n.kids[0], 1, out, schema);
            out += n.kind == ExprKind::Mul ? " * " : " / ";
            print_child(e, n.kids[1], 2, out, schema);
            return;
        case ExprKind::Min:
        case ExprKind::Max:
        case ExprKind::Abs: {
            out += n.kind == ExprKind::Min ? "min(" : n.kind == ExprKind::Max ? "max(" : "abs(";
            for (std::size_t k = 0; k < n.kids.size(); ++k) {
                if (k) out += ", ";
                print_arith(e, n.kids[k], 0, out, schema);
            }
            out += ")";
            return;
        }
        default: out += "?"; return;
    }
}

const char* cmp_text(CmpOp op) {
    switch (op) {
        case CmpOp::Le: return " <= ";
        case CmpOp::Ge: return " >= ";
        case CmpOp::Lt: return " < ";
        case CmpOp::Gt: return " > ";
        case CmpOp::Eq: return " == ";
    }
    return " ? ";
}

// Boolean nesting levels: 0 = top, 1 = implication operand, 2 = "or"
// operand, 3 = "and" operand. Parentheses appear exactly where re-parsing
// would otherwise flatten or re-associate the tree.
void print_bool(const Expr& e, std::int32_t i, int level, std::string& out,
                const FeatureSchema& schema) {
    const ExprNode& n = e.node(i);
    switch (n.kind) {
        case ExprKind::Cmp:
            print_arith(e, n.kids[0], 0, out, schema);
            out += cmp_text(n.op);
            print_arith(e, n.kids[1], 0, out, schema);
            return;
        case ExprKind::Implies:
            if (level >= 1) out += "(";
            out += "if ";
            print_bool(e, n.kids[0], 1, out, schema);
            out += " then ";
            print_bool(e, n.kids[1], 1, out, schema);
            if (level >= 1) out += ")";
            return;
        case ExprKind::Or: {
            bool paren = level >= 2;
            if (paren) out += "(";
            for (std::size_t k = 0; k < n.kids.size(); ++k) {
                if (k) out += " or ";
                print_bool(e, n.kids[k], 2, out, schema);
            }
            if (paren) out += ")";
            return;
        }
        case ExprKind::And: {
            bool paren = level >= 3;
            if (paren) out += "(";
            for (std::size_t k = 0; k < n.kids.size(); ++k) {
                if (k) out += " and ";
                print_bool(e, n.kids[k], 3, out, schema);
            }
            if (paren) out += ")";
            return;
        }
        default: out += "?"; return;
    }
}

} // namespace

std::string to_text(const Expr& e, const FeatureSchema& schema) {
    std::string out;
    print_bool(e, e.root, 0, out, schema);
    return out;
}

} // namespace tabrobust
