#include <algorithm>
#include <cmath>
#include <numeric>

#include "attack_impl.hpp"

namespace tabrobust {

namespace {

bool dominates(const std::array<double, 3>& a, const std::array<double, 3>& b) {
    bool strictly = false;
    for (int i = 0; i < 3; ++i) {
        if (a[i] > b[i]) return false;
        if (a[i] < b[i]) strictly = true;
    }
    return strictly;
}

double ref_distance(const std::array<double, 3>& f) {
    // weighted distance to the reference point (0,0,0), weights (1,1,1)
    return std::sqrt(f[0] * f[0] + f[1] * f[1] + f[2] * f[2]);
}

} // namespace

std::vector<std::vector<int>> non_dominated_sort(
    std::span<const std::array<double, 3>> objectives) {
    std::size_t n = objectives.size();
    std::vector<int> dominated_by(n, 0);
    std::vector<std::vector<int>> dominates_list(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            if (dominates(objectives[i], objectives[j]))
                dominates_list[i].push_back(static_cast<int>(j));
            else if (dominates(objectives[j], objectives[i]))
                ++dominated_by[i];
        }
    std::vector<std::vector<int>> fronts;
    std::vector<int> current;
    for (std::size_t i = 0; i < n; ++i)
        if (dominated_by[i] == 0) current.push_back(static_cast<int>(i));
    while (!current.empty()) {
        fronts.push_back(current);
        std::vector<int> next;
        for (int i : current)
            for (int j : dominates_list[static_cast<std::size_t>(i)])
                if (--dominated_by[static_cast<std::size_t>(j)] == 0) next.push_back(j);
        std::sort(next.begin(), next.end());
        current = std::move(next);
    }
    return fronts;
}

namespace {

struct Individual {
    std::vector<double> x; // raw units, repaired
    std::array<double, 3> f{0, 0, 0};
    int rank = 0;
    double ref = 0.0;
};

struct MoevaRun {
    const AttackContext& ctx;
    std::span<const double> x0;
    int y;
    Rng& rng;
    mutable long evals = 0;

    std::size_t D() const { return ctx.ps.dim(); }

    void evaluate(Individual& ind) const {
        ++evals;
        auto p = ctx.model.predict_row(ind.x);
        ind.f[0] = p[static_cast<std::size_t>(y)];
        ind.f[1] = ctx.dist(x0, ind.x);
        ind.f[2] = ctx.penalty.total(ind.x);
        ind.ref = ref_distance(ind.f);
    }

    void mutate_coord(std::vector<double>& x, std::size_t i) const {
        const FeatureDef& fd = ctx.ps.schema.features[i];
        switch (fd.kind) {
            case FeatureKind::Continuous: {
                // sigma = 0.1 eps in scaled units
                double sigma = 0.1 * ctx.budget.epsilon * ctx.view.jacobian(i);
                x[i] += sigma * rng.normal();
                break;
            }
            case FeatureKind::Integer:
                x[i] += rng.uniform() < 0.5 ? 1.0 : -1.0;
                break;
            case FeatureKind::Categorical:
                x[i] = static_cast<double>(
                    rng.uniform_int(0, static_cast<std::int64_t>(fd.levels.size()) - 1));
                break;
        }
    }

    Individual make_jittered(std::span<const double> center, double jitter) const {
        Individual ind;
        ind.x.assign(center.begin(), center.end());
        for (std::size_t i = 0; i < D(); ++i) {
            const FeatureDef& fd = ctx.ps.schema.features[i];
            if (!fd.is_mutable) continue;
            switch (fd.kind) {
                case FeatureKind::Continuous:
                    ind.x[i] += jitter * ctx.budget.epsilon * ctx.view.jacobian(i) * rng.normal();
                    break;
                case FeatureKind::Integer:
                    if (rng.uniform() < jitter) ind.x[i] += rng.uniform() < 0.5 ? 1.0 : -1.0;
                    break;
                case FeatureKind::Categorical:
                    if (rng.uniform() < jitter)
                        ind.x[i] = static_cast<double>(
                            rng.uniform_int(0, static_cast<std::int64_t>(fd.levels.size()) - 1));
                    break;
            }
        }
        finalize(ind);
        return ind;
    }

    void finalize(Individual& ind) const {
        for (std::size_t i = 0; i < D(); ++i)
            if (!ctx.ps.schema.features[i].is_mutable) ind.x[i] = x0[i];
        repair_inplace(ind.x, ctx.ps.schema, ctx.ps.constraints);
        evaluate(ind);
    }

    // binary tournament on (rank, reference distance)
    const Individual& tournament(const std::vector<Individual>& pop) const {
        auto n = static_cast<std::int64_t>(pop.size());
        const Individual& a = pop[static_cast<std::size_t>(rng.uniform_int(0, n - 1))];
        const Individual& b = pop[static_cast<std::size_t>(rng.uniform_int(0, n - 1))];
        if (a.rank != b.rank) return a.rank < b.rank ? a : b;
        return a.ref <= b.ref ? a : b;
    }

    Individual offspring(const std::vector<Individual>& pop, double pm) const {
        const Individual& pa = tournament(pop);
        const Individual& pb = tournament(pop);
        Individual child;
        child.x = pa.x;
        for (std::size_t i = 0; i < D(); ++i) {
            if (!ctx.ps.schema.features[i].is_mutable) continue;
            if (rng.uniform() < 0.5) child.x[i] = pb.x[i]; // uniform crossover
            if (rng.uniform() < pm) mutate_coord(child.x, i);
        }
        finalize(child);
        return child;
    }
};

void assign_ranks(std::vector<Individual>& pop) {
    std::vector<std::array<double, 3>> objs(pop.size());
    for (std::size_t i = 0; i < pop.size(); ++i) objs[i] = pop[i].f;
    auto fronts = non_dominated_sort(objs);
    for (std::size_t r = 0; r < fronts.size(); ++r)
        for (int i : fronts[r]) pop[static_cast<std::size_t>(i)].rank = static_cast<int>(r);
}

// mu+lambda survival: non-dominated fronts, the last admitted front biased
// toward the reference point (simplified R-NSGA-III niching)
std::vector<Individual> survive(std::vector<Individual> pool, std::size_t keep) {
    std::vector<std::array<double, 3>> objs(pool.size());
    for (std::size_t i = 0; i < pool.size(); ++i) objs[i] = pool[i].f;
    auto fronts = non_dominated_sort(objs);
    std::vector<Individual> next;
    next.reserve(keep);
    for (const auto& front : fronts) {
        if (next.size() >= keep) break;
        if (next.size() + front.size() <= keep) {
            for (int i : front) next.push_back(std::move(pool[static_cast<std::size_t>(i)]));
        } else {
            std::vector<int> order(front.begin(), front.end());
            std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
                return pool[static_cast<std::size_t>(a)].ref < pool[static_cast<std::size_t>(b)].ref;
            });
            for (int i : order) {
                if (next.size() >= keep) break;
                next.push_back(std::move(pool[static_cast<std::size_t>(i)]));
            }
        }
    }
    assign_ranks(next);
    return next;
}

} // namespace

AttackOutcome moeva_one(const AttackContext& ctx, std::span<const double> x0, int y, Rng rng,
                        std::span<const double> warm_center) {
    MoevaRun run{ctx, x0, y, rng};
    const auto P = static_cast<std::size_t>(ctx.budget.moeva_population);

    AttackOutcome out;
    out.x.assign(x0.begin(), x0.end());
    out.y = y;
    out.stage = AttackStage::Moeva;

    double best_dist = std::numeric_limits<double>::infinity();
    std::optional<std::vector<double>> best_success;
    double best_pen = 0.0;
    auto consider = [&](const Individual& ind) {
        double d = 0.0, p = 0.0;
        if (ctx.full_success(x0, ind.x, y, &d, &p) && d < best_dist) {
            best_success = ind.x;
            best_dist = d;
            best_pen = p;
        }
    };

    std::span<const double> center = warm_center.empty() ? x0 : warm_center;
    std::vector<Individual> pop;
    pop.reserve(P);
    {
        Individual first; // the unperturbed point always participates
        first.x.assign(x0.begin(), x0.end());
        run.finalize(first);
        consider(first);
        pop.push_back(std::move(first));
    }
    while (pop.size() < P) {
        Individual ind = run.make_jittered(center, ctx.budget.init_jitter);
        consider(ind);
        pop.push_back(std::move(ind));
    }
    assign_ranks(pop);

    double pm = 0.0;
    {
        int n_mut = 0;
        for (const auto& f : ctx.ps.schema.features) n_mut += f.is_mutable ? 1 : 0;
        pm = 1.0 / std::max(1, n_mut);
    }

    for (int gen = 0; gen < ctx.budget.moeva_generations; ++gen) {
        if (ctx.budget.moeva_max_evals > 0 && run.evals >= ctx.budget.moeva_max_evals) break;
        out.iterations = gen + 1;
        std::vector<Individual> pool = pop;
        for (std::size_t i = 0; i < P; ++i) {
            Individual child = run.offspring(pop, pm);
            consider(child);
            pool.push_back(std::move(child));
        }
        pop = survive(std::move(pool), P);
    }

    if (best_success) {
        out.success = true;
        out.x_adv = std::move(*best_success);
        out.distance = best_dist;
        out.penalty = best_pen;
    } else {
        out.success = false;
        out.penalty = ctx.penalty.total(x0);
    }
    return out;
}

} // namespace tabrobust
