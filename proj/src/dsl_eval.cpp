#include "tabrobust/dsl.hpp"

#include <cmath>

namespace tabrobust {

namespace {
constexpr double kDivGuard = 1e-9;

double arith_value(const Expr& e, std::int32_t i, std::span<const double> x) {
    const ExprNode& n = e.node(i);
    switch (n.kind) {
        case ExprKind::Num: return n.num;
        case ExprKind::Feat: return x[static_cast<std::size_t>(n.feat)];
        case ExprKind::Neg: return -arith_value(e, n.kids[0], x);
        case ExprKind::Abs: return std::abs(arith_value(e, n.kids[0], x));
        case ExprKind::Add: return arith_value(e, n.kids[0], x) + arith_value(e, n.kids[1], x);
        case ExprKind::Sub: return arith_value(e, n.kids[0], x) - arith_value(e, n.kids[1], x);
        case ExprKind::Mul: return arith_value(e, n.kids[0], x) * arith_value(e, n.kids[1], x);
        case ExprKind::Div: {
            double den = arith_value(e, n.kids[1], x);
            if (std::abs(den) <= kDivGuard)
                throw DataError("division guard violated while evaluating '" + e.text + "'");
            return arith_value(e, n.kids[0], x) / den;
        }
        case ExprKind::Min: {
            double v = arith_value(e, n.kids[0], x);
            for (std::size_t k = 1; k < n.kids.size(); ++k)
                v = std::min(v, arith_value(e, n.kids[k], x));
            return v;
        }
        case ExprKind::Max: {
            double v = arith_value(e, n.kids[0], x);
            for (std::size_t k = 1; k < n.kids.size(); ++k)
                v = std::max(v, arith_value(e, n.kids[k], x));
            return v;
        }
        default:
            throw std::logic_error("arith_value on boolean node");
    }
}

bool bool_value(const Expr& e, std::int32_t i, std::span<const double> x) {
    const ExprNode& n = e.node(i);
    switch (n.kind) {
        case ExprKind::Cmp: {
            double l = arith_value(e, n.kids[0], x);
            double r = arith_value(e, n.kids[1], x);
            switch (n.op) {
                case CmpOp::Le: return l <= r;
                case CmpOp::Ge: return l >= r;
                case CmpOp::Lt: return l < r;
                case CmpOp::Gt: return l > r;
                case CmpOp::Eq: return l == r;
            }
            return false;
        }
        case ExprKind::And:
            for (auto k : n.kids)
                if (!bool_value(e, k, x)) return false;
            return true;
        case ExprKind::Or:
            for (auto k : n.kids)
                if (bool_value(e, k, x)) return true;
            return false;
        case ExprKind::Implies:
            return !bool_value(e, n.kids[0], x) || bool_value(e, n.kids[1], x);
        default:
            throw std::logic_error("bool_value on arithmetic node");
    }
}

} // namespace

double eval_arith(const Expr& e, std::int32_t node, std::span<const double> x_raw) {
    return arith_value(e, node, x_raw);
}

bool eval_constraint(const Expr& e, std::span<const double> x_raw) {
    return bool_value(e, e.root, x_raw);
}

} // namespace tabrobust
