#include <cmath>

#include "attack_impl.hpp"

namespace tabrobust {

std::vector<int> capgd_checkpoints(int total_steps) {
    std::vector<int> cps;
    double p_prev = 0.0, p = 0.22;
    while (true) {
        int t = static_cast<int>(std::ceil(p * total_steps));
        if (t >= total_steps) break;
        if (cps.empty() || t > cps.back()) cps.push_back(t);
        double gap = std::max(p - p_prev - 0.03, 0.06);
        p_prev = p;
        p += gap;
    }
    return cps;
}

namespace {
constexpr double kMomentum = 0.75;
constexpr double kRho = 0.75; // required fraction of improving steps
} // namespace

AttackOutcome capgd_one(const AttackContext& ctx, std::span<const double> x0, int y,
                        CapgdDiag* diag) {
    const std::size_t D = ctx.ps.dim();
    const auto& feats = ctx.ps.schema.features;
    const double eps = ctx.budget.epsilon;
    const int T = ctx.budget.capgd_steps;

    AttackOutcome out;
    out.x.assign(x0.begin(), x0.end());
    out.y = y;
    out.stage = AttackStage::Capgd;

    auto checkpoints = capgd_checkpoints(T);
    std::size_t next_cp = 0;

    std::vector<double> s0 = ctx.view.scale(x0);
    std::vector<double> x_cur(x0.begin(), x0.end());
    std::vector<double> s_cur = s0;
    std::vector<double> s_prev = s0;

    double eta = 2.0 * eps;
    double lstar_cur = ctx.lstar(x_cur, y);
    double best_lstar = lstar_cur;
    std::vector<double> best_x = x_cur; // best-L* feasible iterate (init is feasible)
    if (diag) diag->init_lstar = lstar_cur;

    double best_dist = std::numeric_limits<double>::infinity();
    std::optional<std::vector<double>> best_success;
    double best_success_pen = 0.0;

    // the clean point itself counts as a candidate (distance 0)
    {
        double d = 0.0, p = 0.0;
        if (ctx.full_success(x0, x_cur, y, &d, &p)) {
            best_success = x_cur;
            best_dist = d;
            best_success_pen = p;
        }
    }

    int improved = 0, since_cp = 0;
    std::vector<double> z(D), x_new(D), g(D);
    for (int t = 1; t <= T; ++t) {
        out.iterations = t;
        // g = d/ds [ CE - lambda * penalty ]
        g = ctx.model.loss_grad_input(x_cur, y);
        {
            std::vector<double> pg(D, 0.0);
            for (std::size_t i = 0; i < ctx.penalty.size(); ++i)
                ctx.penalty.grad_accum(i, x_cur, 1.0, pg);
            for (std::size_t i = 0; i < D; ++i)
                g[i] -= ctx.budget.lambda_penalty * pg[i] * ctx.view.jacobian(i);
        }
        bool finite = true;
        for (double v : g) finite = finite && std::isfinite(v);
        if (!finite) {
            out.success = false;
            out.x_adv.reset();
            return out; // sample marked failed; the batch keeps going
        }

        if (ctx.budget.norm == Norm::Linf) {
            for (std::size_t i = 0; i < D; ++i)
                z[i] = s_cur[i] + eta * (g[i] > 0 ? 1.0 : g[i] < 0 ? -1.0 : 0.0);
        } else {
            double nrm = 0.0;
            for (double v : g) nrm += v * v;
            nrm = std::sqrt(nrm);
            double sc = nrm > 0 ? eta / nrm : 0.0;
            for (std::size_t i = 0; i < D; ++i) z[i] = s_cur[i] + sc * g[i];
        }
        for (std::size_t i = 0; i < D; ++i) z[i] += kMomentum * (s_cur[i] - s_prev[i]);
        for (std::size_t i = 0; i < D; ++i)
            if (!feats[i].is_mutable) z[i] = s0[i];

        // projection onto the epsilon ball around s0
        if (ctx.budget.norm == Norm::Linf) {
            for (std::size_t i = 0; i < D; ++i)
                z[i] = std::clamp(z[i], s0[i] - eps, s0[i] + eps);
        } else {
            double nrm = 0.0;
            for (std::size_t i = 0; i < D; ++i) {
                double d = z[i] - s0[i];
                nrm += d * d;
            }
            nrm = std::sqrt(nrm);
            if (nrm > eps) {
                double sc = eps / nrm;
                for (std::size_t i = 0; i < D; ++i) z[i] = s0[i] + sc * (z[i] - s0[i]);
            }
        }

        // back to raw space, pin immutables bitwise, repair
        x_new = ctx.view.unscale(z);
        for (std::size_t i = 0; i < D; ++i)
            if (!feats[i].is_mutable) x_new[i] = x0[i];
        repair_inplace(x_new, ctx.ps.schema, ctx.ps.constraints);

        auto s_new = ctx.view.scale(x_new);
        double d_new = ctx.dist(x0, x_new);
        bool feasible = d_new <= eps + 1e-6; // repair may push past the ball

        double lstar_new = ctx.lstar(x_new, y);
        if (lstar_new > lstar_cur) ++improved;
        ++since_cp;
        if (feasible && lstar_new > best_lstar) {
            best_lstar = lstar_new;
            best_x = x_new;
        }
        double dcand = 0.0, pcand = 0.0;
        if (ctx.full_success(x0, x_new, y, &dcand, &pcand) && dcand < best_dist) {
            best_success = x_new;
            best_dist = dcand;
            best_success_pen = pcand;
        }

        s_prev = s_cur;
        s_cur = s_new;
        x_cur = x_new;
        lstar_cur = lstar_new;

        if (next_cp < checkpoints.size() && t == checkpoints[next_cp]) {
            if (improved < static_cast<int>(std::ceil(kRho * since_cp))) {
                eta *= 0.5;
                x_cur = best_x;
                s_cur = ctx.view.scale(x_cur);
                s_prev = s_cur; // momentum restarts from the best point
                lstar_cur = ctx.lstar(x_cur, y);
            }
            if (diag) {
                diag->checkpoints.push_back(t);
                diag->eta_at_checkpoint.push_back(eta);
            }
            improved = 0;
            since_cp = 0;
            ++next_cp;
        }
    }

    if (diag) {
        diag->final_best_lstar = best_lstar;
        diag->best_iterate = best_x;
    }
    if (best_success) {
        out.success = true;
        out.x_adv = std::move(*best_success);
        out.distance = best_dist;
        out.penalty = best_success_pen;
    } else {
        out.success = false;
        out.distance = 0.0;
        out.penalty = ctx.penalty.total(x0);
    }
    return out;
}

} // namespace tabrobust
