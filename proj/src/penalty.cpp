#include "tabrobust/penalty.hpp"

#include <cmath>
#include <limits>

namespace tabrobust {

namespace {

struct Ctx {
    const Expr& e;
    std::span<const double> x;
    double tau;
    double* slack = nullptr; // min kink margin tracker, optional

    void note_kink(double margin) const {
        if (slack) *slack = std::min(*slack, std::abs(margin));
    }
};

double arith(const Ctx& c, std::int32_t i);

void arith_grad(const Ctx& c, std::int32_t i, double adj, std::span<double> g) {
    if (adj == 0.0) return;
    const ExprNode& n = c.e.node(i);
    switch (n.kind) {
        case ExprKind::Num: return;
        case ExprKind::Feat: g[static_cast<std::size_t>(n.feat)] += adj; return;
        case ExprKind::Neg: arith_grad(c, n.kids[0], -adj, g); return;
        case ExprKind::Abs: {
            double v = arith(c, n.kids[0]);
            double s = v > 0 ? 1.0 : v < 0 ? -1.0 : 0.0; // sign(0) = 0
            arith_grad(c, n.kids[0], s * adj, g);
            return;
        }
        case ExprKind::Add:
            arith_grad(c, n.kids[0], adj, g);
            arith_grad(c, n.kids[1], adj, g);
            return;
        case ExprKind::Sub:
            arith_grad(c, n.kids[0], adj, g);
            arith_grad(c, n.kids[1], -adj, g);
            return;
        case ExprKind::Mul: {
            double a = arith(c, n.kids[0]);
            double b = arith(c, n.kids[1]);
            arith_grad(c, n.kids[0], adj * b, g);
            arith_grad(c, n.kids[1], adj * a, g);
            return;
        }
        case ExprKind::Div: {
            double a = arith(c, n.kids[0]);
            double b = arith(c, n.kids[1]);
            arith_grad(c, n.kids[0], adj / b, g);
            arith_grad(c, n.kids[1], -adj * a / (b * b), g);
            return;
        }
        case ExprKind::Min:
        case ExprKind::Max: {
            // deterministic: first extremal child carries the gradient
            bool is_min = n.kind == ExprKind::Min;
            std::size_t best = 0;
            double bv = arith(c, n.kids[0]);
            for (std::size_t k = 1; k < n.kids.size(); ++k) {
                double v = arith(c, n.kids[k]);
                if (is_min ? v < bv : v > bv) { bv = v; best = k; }
            }
            arith_grad(c, n.kids[best], adj, g);
            return;
        }
        default:
            throw std::logic_error("arith_grad on boolean node");
    }
}

double arith(const Ctx& c, std::int32_t i) {
    const ExprNode& n = c.e.node(i);
    switch (n.kind) {
        case ExprKind::Num: return n.num;
        case ExprKind::Feat: return c.x[static_cast<std::size_t>(n.feat)];
        case ExprKind::Neg: return -arith(c, n.kids[0]);
        case ExprKind::Abs: {
            double v = arith(c, n.kids[0]);
            c.note_kink(v);
            return std::abs(v);
        }
        case ExprKind::Add: return arith(c, n.kids[0]) + arith(c, n.kids[1]);
        case ExprKind::Sub: return arith(c, n.kids[0]) - arith(c, n.kids[1]);
        case ExprKind::Mul: return arith(c, n.kids[0]) * arith(c, n.kids[1]);
        case ExprKind::Div: {
            double den = arith(c, n.kids[1]);
            if (std::abs(den) <= 1e-9)
                throw DataError("division guard violated while evaluating '" + c.e.text + "'");
            return arith(c, n.kids[0]) / den;
        }
        case ExprKind::Min:
        case ExprKind::Max: {
            bool is_min = n.kind == ExprKind::Min;
            std::vector<double> vals(n.kids.size());
            for (std::size_t k = 0; k < n.kids.size(); ++k) vals[k] = arith(c, n.kids[k]);
            double bv = vals[0];
            for (double v : vals) bv = is_min ? std::min(bv, v) : std::max(bv, v);
            // margin to the argmin/argmax switch: gap to the runner-up
            double gap = std::numeric_limits<double>::infinity();
            for (double v : vals)
                if (v != bv) gap = std::min(gap, std::abs(v - bv));
            if (std::isfinite(gap)) c.note_kink(gap);
            return bv;
        }
        default:
            throw std::logic_error("arith on boolean node");
    }
}

double hinge(const Ctx& c, double u) {
    c.note_kink(u);
    return u > 0 ? u : 0.0;
}

double pen(const Ctx& c, std::int32_t i);
double pen_neg(const Ctx& c, std::int32_t i);

double pen_cmp(const Ctx& c, const ExprNode& n, bool negated) {
    double l = arith(c, n.kids[0]);
    double r = arith(c, n.kids[1]);
    CmpOp op = n.op;
    if (!negated) {
        switch (op) {
            case CmpOp::Le: return hinge(c, l - r);
            case CmpOp::Ge: return hinge(c, r - l);
            case CmpOp::Lt: return hinge(c, l - r + c.tau);
            case CmpOp::Gt: return hinge(c, r - l + c.tau);
            case CmpOp::Eq: c.note_kink(l - r); return std::abs(l - r);
        }
    } else {
        switch (op) {
            case CmpOp::Le: return hinge(c, r - l + c.tau); // not(a<=b) = a>b
            case CmpOp::Ge: return hinge(c, l - r + c.tau); // not(a>=b) = a<b
            case CmpOp::Lt: return hinge(c, r - l);         // not(a<b)  = a>=b
            case CmpOp::Gt: return hinge(c, l - r);         // not(a>b)  = a<=b
            case CmpOp::Eq: {                               // not(a==b): apart by >= tau
                c.note_kink(l - r);
                return hinge(c, c.tau - std::abs(l - r));
            }
        }
    }
    return 0.0;
}

double pen(const Ctx& c, std::int32_t i) {
    const ExprNode& n = c.e.node(i);
    switch (n.kind) {
        case ExprKind::Cmp: return pen_cmp(c, n, false);
        case ExprKind::And: {
            double s = 0.0;
            for (auto k : n.kids) s += pen(c, k);
            return s;
        }
        case ExprKind::Or: {
            std::vector<double> vals(n.kids.size());
            for (std::size_t k = 0; k < n.kids.size(); ++k) vals[k] = pen(c, n.kids[k]);
            double v = vals[0];
            for (double w : vals) v = std::min(v, w);
            // the branch switch is only a kink where the min is active (> 0)
            if (v > 0.0)
                for (double w : vals)
                    if (w != v) c.note_kink(w - v);
            return v;
        }
        case ExprKind::Implies: {
            double a = pen_neg(c, n.kids[0]);
            double b = pen(c, n.kids[1]);
            double v = std::min(a, b);
            if (v > 0.0) c.note_kink(a - b);
            return v;
        }
        default:
            throw std::logic_error("pen on arithmetic node");
    }
}

double pen_neg(const Ctx& c, std::int32_t i) {
    const ExprNode& n = c.e.node(i);
    switch (n.kind) {
        case ExprKind::Cmp: return pen_cmp(c, n, true);
        case ExprKind::And: { // not(and) = or(not)
            std::vector<double> vals(n.kids.size());
            for (std::size_t k = 0; k < n.kids.size(); ++k) vals[k] = pen_neg(c, n.kids[k]);
            double v = vals[0];
            for (double w : vals) v = std::min(v, w);
            if (v > 0.0)
                for (double w : vals)
                    if (w != v) c.note_kink(w - v);
            return v;
        }
        case ExprKind::Or: { // not(or) = and(not)
            double s = 0.0;
            for (auto k : n.kids) s += pen_neg(c, k);
            return s;
        }
        case ExprKind::Implies: // not(A -> B) = A and not B
            return pen(c, n.kids[0]) + pen_neg(c, n.kids[1]);
        default:
            throw std::logic_error("pen_neg on arithmetic node");
    }
}

void pen_grad(const Ctx& c, std::int32_t i, double adj, std::span<double> g);
void pen_neg_grad(const Ctx& c, std::int32_t i, double adj, std::span<double> g);

void pen_cmp_grad(const Ctx& c, const ExprNode& n, bool negated, double adj,
                  std::span<double> g) {
    double l = arith(c, n.kids[0]);
    double r = arith(c, n.kids[1]);
    auto hinge_lr = [&](double u, double sl, double sr) {
        if (u > 0) { // subgradient 0 at the kink
            arith_grad(c, n.kids[0], sl * adj, g);
            arith_grad(c, n.kids[1], sr * adj, g);
        }
    };
    CmpOp op = n.op;
    if (!negated) {
        switch (op) {
            case CmpOp::Le: hinge_lr(l - r, 1, -1); return;
            case CmpOp::Ge: hinge_lr(r - l, -1, 1); return;
            case CmpOp::Lt: hinge_lr(l - r + c.tau, 1, -1); return;
            case CmpOp::Gt: hinge_lr(r - l + c.tau, -1, 1); return;
            case CmpOp::Eq: {
                double s = l > r ? 1.0 : l < r ? -1.0 : 0.0;
                arith_grad(c, n.kids[0], s * adj, g);
                arith_grad(c, n.kids[1], -s * adj, g);
                return;
            }
        }
    } else {
        switch (op) {
            case CmpOp::Le: hinge_lr(r - l + c.tau, -1, 1); return;
            case CmpOp::Ge: hinge_lr(l - r + c.tau, 1, -1); return;
            case CmpOp::Lt: hinge_lr(r - l, -1, 1); return;
            case CmpOp::Gt: hinge_lr(l - r, 1, -1); return;
            case CmpOp::Eq: {
                double u = c.tau - std::abs(l - r);
                if (u > 0) {
                    double s = l > r ? 1.0 : l < r ? -1.0 : 0.0;
                    arith_grad(c, n.kids[0], -s * adj, g);
                    arith_grad(c, n.kids[1], s * adj, g);
                }
                return;
            }
        }
    }
}

void pen_grad(const Ctx& c, std::int32_t i, double adj, std::span<double> g) {
    const ExprNode& n = c.e.node(i);
    switch (n.kind) {
        case ExprKind::Cmp: pen_cmp_grad(c, n, false, adj, g); return;
        case ExprKind::And:
            for (auto k : n.kids) pen_grad(c, k, adj, g);
            return;
        case ExprKind::Or: {
            std::size_t best = 0;
            double bv = pen(c, n.kids[0]);
            for (std::size_t k = 1; k < n.kids.size(); ++k) {
                double v = pen(c, n.kids[k]);
                if (v < bv) { bv = v; best = k; }
            }
            pen_grad(c, n.kids[best], adj, g);
            return;
        }
        case ExprKind::Implies: {
            double a = pen_neg(c, n.kids[0]);
            double b = pen(c, n.kids[1]);
            if (a <= b) // first-child tie-break
                pen_neg_grad(c, n.kids[0], adj, g);
            else
                pen_grad(c, n.kids[1], adj, g);
            return;
        }
        default:
            throw std::logic_error("pen_grad on arithmetic node");
    }
}

void pen_neg_grad(const Ctx& c, std::int32_t i, double adj, std::span<double> g) {
    const ExprNode& n = c.e.node(i);
    switch (n.kind) {
        case ExprKind::Cmp: pen_cmp_grad(c, n, true, adj, g); return;
        case ExprKind::And: {
            std::size_t best = 0;
            double bv = pen_neg(c, n.kids[0]);
            for (std::size_t k = 1; k < n.kids.size(); ++k) {
                double v = pen_neg(c, n.kids[k]);
                if (v < bv) { bv = v; best = k; }
            }
            pen_neg_grad(c, n.kids[best], adj, g);
            return;
        }
        case ExprKind::Or:
            for (auto k : n.kids) pen_neg_grad(c, k, adj, g);
            return;
        case ExprKind::Implies:
            pen_grad(c, n.kids[0], adj, g);
            pen_neg_grad(c, n.kids[1], adj, g);
            return;
        default:
            throw std::logic_error("pen_neg_grad on arithmetic node");
    }
}

} // namespace

PenaltyProgram::PenaltyProgram(const FeatureSchema& schema, const ConstraintSet& cs)
    : schema_(&schema), cs_(&cs) {}

double PenaltyProgram::value(std::size_t i, std::span<const double> x_raw) const {
    const Expr& e = cs_->constraints[i];
    Ctx c{e, x_raw, cs_->tau};
    return pen(c, e.root);
}

double PenaltyProgram::total(std::span<const double> x_raw) const {
    double s = 0.0;
    for (std::size_t i = 0; i < size(); ++i) s += value(i, x_raw);
    return s;
}

void PenaltyProgram::grad_accum(std::size_t i, std::span<const double> x_raw, double w,
                                std::span<double> grad) const {
    const Expr& e = cs_->constraints[i];
    Ctx c{e, x_raw, cs_->tau};
    pen_grad(c, e.root, w, grad);
}

std::vector<double> PenaltyProgram::total_grad(std::span<const double> x_raw) const {
    std::vector<double> g(schema_->dim(), 0.0);
    for (std::size_t i = 0; i < size(); ++i) grad_accum(i, x_raw, 1.0, g);
    return g;
}

double PenaltyProgram::kink_slack(std::span<const double> x_raw) const {
    double slack = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < size(); ++i) {
        const Expr& e = cs_->constraints[i];
        Ctx c{e, x_raw, cs_->tau, &slack};
        pen(c, e.root);
    }
    return slack;
}

PenaltyProgram compile_penalty(const FeatureSchema& schema, const ConstraintSet& cs) {
    return {schema, cs};
}

} // namespace tabrobust
