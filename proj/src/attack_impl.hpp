#pragma once

// Shared internals of the attack engine.

#include "tabrobust/attack.hpp"
#include "tabrobust/repair.hpp"

namespace tabrobust {

struct AttackContext {
    const Predictor& model;
    const ParsedSchema& ps;
    const ScaledView& view;
    PenaltyProgram penalty;
    const AttackBudget& budget;

    AttackContext(const Predictor& m, const AttackBudget& b)
        : model(m), ps(*m.schema()), view(m.view()),
          penalty(ps.schema, ps.constraints), budget(b) {}

    double dist(std::span<const double> a_raw, std::span<const double> b_raw) const {
        return budget.norm == Norm::L2 ? view.scaled_l2(a_raw, b_raw)
                                       : view.scaled_linf(a_raw, b_raw);
    }

    bool immutables_unchanged(std::span<const double> x0, std::span<const double> cand) const {
        for (std::size_t i = 0; i < ps.dim(); ++i)
            if (!ps.schema.features[i].is_mutable &&
                std::memcmp(&x0[i], &cand[i], sizeof(double)) != 0)
                return false;
        return true;
    }

    /// Success = label flip + interpreter-valid + penalty within tol_c +
    /// inside the epsilon ball + immutables bitwise intact.
    bool full_success(std::span<const double> x0, std::span<const double> cand, int y,
                      double* dist_out, double* pen_out) const {
        double d = dist(x0, cand);
        double p = penalty.total(cand);
        if (dist_out) *dist_out = d;
        if (pen_out) *pen_out = p;
        if (model.predict_label(cand) == y) return false;
        if (p > budget.tol_c) return false;
        if (d > budget.epsilon + 1e-6) return false;
        if (!immutables_unchanged(x0, cand)) return false;
        for (const auto& c : ps.constraints.constraints)
            if (!eval_constraint(c, cand)) return false;
        return true;
    }

    /// Penalised attack objective, maximised by CAPGD.
    double lstar(std::span<const double> x_raw, int y) const {
        return model.cross_entropy(x_raw, y) -
               budget.lambda_penalty * penalty.total(x_raw);
    }
};

AttackOutcome capgd_one(const AttackContext& ctx, std::span<const double> x0, int y,
                        CapgdDiag* diag);
AttackOutcome moeva_one(const AttackContext& ctx, std::span<const double> x0, int y, Rng rng,
                        std::span<const double> warm_center);

} // namespace tabrobust
