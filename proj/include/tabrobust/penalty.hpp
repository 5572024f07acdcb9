#pragma once

#include <span>
#include <vector>

#include "tabrobust/dsl.hpp"

namespace tabrobust {

/// Differentiable translation of a ConstraintSet. Per constraint w:
///   pen(a <= b) = max(0, a - b)          pen(a >= b) = max(0, b - a)
///   pen(a <  b) = max(0, a - b + tau)    pen(a >  b) = max(0, b - a + tau)
///   pen(a == b) = |a - b|
///   pen(and)    = sum of children        pen(or) = min of children
///   pen(if A then B) = min(pen(not A), pen(B)), negation pushed to the
///   comparisons (not(a <= b) = a > b, not(a == b) holds at distance >= tau).
/// Subgradients: 0 at the max(0,.) kink and at |0|; argmin ties take the
/// first child. Values are >= 0 and zero exactly when the interpreter says
/// satisfied, up to the tau margin on strict operators.
///
/// Immutable after construction; safe to share across attack workers.
class PenaltyProgram {
public:
    PenaltyProgram(const FeatureSchema& schema, const ConstraintSet& cs);

    std::size_t size() const { return cs_->constraints.size(); }
    double tau() const { return cs_->tau; }

    /// Penalty of constraint i at raw x.
    double value(std::size_t i, std::span<const double> x_raw) const;

    /// Aggregate penalty: sum over all constraints.
    double total(std::span<const double> x_raw) const;

    /// grad += w * d pen_i / d x_raw.
    void grad_accum(std::size_t i, std::span<const double> x_raw, double w,
                    std::span<double> grad) const;

    /// d(total)/d x_raw.
    std::vector<double> total_grad(std::span<const double> x_raw) const;

    /// Smallest distance-to-switch among all max/min/abs kinks encountered at
    /// x; finite-difference checks stay away from points where this is tiny.
    double kink_slack(std::span<const double> x_raw) const;

private:
    const FeatureSchema* schema_;
    const ConstraintSet* cs_;
};

PenaltyProgram compile_penalty(const FeatureSchema& schema, const ConstraintSet& cs);

} // namespace tabrobust
