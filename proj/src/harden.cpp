#include "tabrobust/harden.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "tabrobust/optimizer.hpp"

namespace tabrobust {

void HardeningConfig::validate() const {
    if (!(defense_epsilon > 0)) throw ConfigError("defense epsilon must be > 0");
    if (n_split < 2) throw ConfigError("n_split must be >= 2");
    if (max_epochs < 0) throw ConfigError("max_epochs must be >= 0");
    if (!(alpha > 0.5 && alpha <= 1.0)) throw ConfigError("alpha must satisfy 0.5 < alpha <= 1");
    if (eta0 <= 0) throw ConfigError("eta0 must be > 0");
    if (eta_floor_frac < 0) throw ConfigError("eta_floor_frac must be >= 0");
    if (lr <= 0) throw ConfigError("learning rate must be > 0");
    if (val_slice < 1) throw ConfigError("val_slice must be >= 1");
    if (max_retries < 0) throw ConfigError("max_retries must be >= 0");
}

std::string ConvergenceTrace::to_csv() const {
    std::string out = "t,drift,f_val,g_hat,eta_t,retries,accepted\n";
    for (const TraceRow& r : rows) {
        out += std::to_string(r.t) + "," + format_double(r.drift) + "," + format_double(r.f_val) +
               "," + (std::isnan(r.g_hat) ? "" : format_double(r.g_hat)) + "," +
               format_double(r.eta) + "," + std::to_string(r.retries) + "," +
               (r.accepted ? "1" : "0") + "\n";
    }
    return out;
}

namespace {

std::vector<AttackOutcome> run_inner(const Predictor& model, const Matrix& X,
                                     std::span<const int> y, InnerAttack kind,
                                     AttackBudget budget) {
    switch (kind) {
        case InnerAttack::Identity: return attack_identity(model, X, y);
        case InnerAttack::Capgd: return attack_capgd(model, X, y, budget);
        case InnerAttack::Caa: return attack_caa(model, X, y, budget);
    }
    throw std::logic_error("bad inner attack");
}

struct RobustLossSlice {
    Matrix X;
    std::vector<int> y;
    std::vector<int> rows; // train row indices the slice took
    InnerAttack inner;
    AttackBudget budget; // epsilon = defense epsilon, fixed seed

    /// F_val: mean cross-entropy on the slice after the inner attack, the
    /// tractable stand-in for the inner max.
    double eval(const Predictor& model) const {
        auto outcomes = run_inner(model, X, y, inner, budget);
        double loss = 0.0;
        for (std::size_t i = 0; i < outcomes.size(); ++i) {
            const auto& o = outcomes[i];
            const std::vector<double>& xe = o.x_adv ? *o.x_adv : o.x;
            loss += model.cross_entropy(xe, y[i]);
        }
        return loss / static_cast<double>(outcomes.size());
    }
};

// Rows are excluded by content, so the slice stays disjoint from the
// context no matter which file the context was originally sampled from.
RobustLossSlice make_slice(const Dataset& train, const Matrix* exclude_rows,
                           const HardeningConfig& cfg) {
    std::set<std::uint64_t> taken;
    if (exclude_rows)
        for (std::size_t r = 0; r < exclude_rows->rows(); ++r)
            taken.insert(fnv1a(exclude_rows->row(r)));
    std::vector<int> avail;
    for (std::size_t i = 0; i < train.rows(); ++i)
        if (!taken.count(fnv1a(train.X.row(i)))) avail.push_back(static_cast<int>(i));
    if (avail.size() < 8)
        throw DataError("hardening needs held-out rows outside the context for F_val; only " +
                        std::to_string(avail.size()) +
                        " of the training rows are not context rows (fit with a context cap "
                        "below the training size, or pass a larger dataset)");
    Rng rng(mix_seed(cfg.seed, 0x5a1ce));
    rng.shuffle(avail);
    auto n = std::min<std::size_t>(avail.size(), static_cast<std::size_t>(cfg.val_slice));
    RobustLossSlice s;
    s.X = Matrix(0, train.dim());
    for (std::size_t i = 0; i < n; ++i) {
        s.X.push_row(train.X.row(static_cast<std::size_t>(avail[i])));
        s.y.push_back(train.y[static_cast<std::size_t>(avail[i])]);
        s.rows.push_back(avail[i]);
    }
    s.inner = cfg.inner;
    s.budget = cfg.inner_budget;
    s.budget.epsilon = cfg.defense_epsilon;
    s.budget.seed = mix_seed(cfg.seed, 0xf5a1);
    return s;
}

double frobenius_scaled(const ScaledView& view, const Matrix& a, const Matrix& b) {
    double s = 0.0;
    for (std::size_t r = 0; r < a.rows(); ++r)
        for (std::size_t c = 0; c < a.cols(); ++c) {
            double d = view.scale1(c, a.at(r, c)) - view.scale1(c, b.at(r, c));
            s += d * d;
        }
    return std::sqrt(s);
}

std::uint64_t context_fingerprint(const ContextState& ctx) {
    std::uint64_t h = fnv1a(ctx.X.data());
    h = fnv1a(ctx.y.data(), ctx.y.size() * sizeof(int), h);
    return h;
}

ContextState rows_to_context(const Matrix& X, const std::vector<int>& y,
                             const std::vector<int>& rows) {
    ContextState ctx;
    ctx.X = Matrix(0, X.cols());
    for (int r : rows) {
        ctx.X.push_row(X.row(static_cast<std::size_t>(r)));
        ctx.y.push_back(y[static_cast<std::size_t>(r)]);
    }
    return ctx;
}

} // namespace

HardenedArtifact harden_aft(PredictorPtr model, const Dataset& train,
                            const HardeningConfig& cfg) {
    cfg.validate();
    if (!model->caps().trainable)
        throw CapabilityError("AFT needs trainable weights; " + model->kind() +
                              " has none");

    // the bound context must come back bit-identical
    std::optional<ContextState> original_ctx;
    std::uint64_t ctx_before = 0;
    if (const ContextState* c = model->context()) {
        original_ctx = *c;
        ctx_before = context_fingerprint(*c);
    }

    // held-out slice for F_val; folds rotate over the rest of train
    RobustLossSlice slice = make_slice(train, nullptr, cfg);
    std::vector<char> in_slice(train.rows(), 0);
    for (int r : slice.rows) in_slice[static_cast<std::size_t>(r)] = 1;
    std::vector<int> pool;
    for (std::size_t i = 0; i < train.rows(); ++i)
        if (!in_slice[i]) pool.push_back(static_cast<int>(i));
    if (static_cast<int>(pool.size()) < cfg.n_split)
        throw DataError("not enough training rows outside the F_val slice for fold rotation");

    HardenedArtifact art;
    art.model = model;

    auto& params = model->params();
    AdamW opt(params.size(), cfg.lr, cfg.weight_decay);
    std::vector<double> grad(params.size());

    AttackBudget inner_budget = cfg.inner_budget;
    inner_budget.epsilon = cfg.defense_epsilon;

    double best_fval = std::numeric_limits<double>::infinity();
    std::vector<double> best_params = params; // early stopping restores the best epoch
    int stale = 0;
    int t = 0;
    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        auto folds = split_folds(static_cast<int>(pool.size()), cfg.n_split,
                                 mix_seed(cfg.seed, 0xaf7 + static_cast<std::uint64_t>(epoch)));
        double fval = 0.0;
        for (const auto& fold : folds) {
            std::vector<int> target_rows, other_rows;
            for (const auto& f : folds) {
                for (int i : f) {
                    int row = pool[static_cast<std::size_t>(i)];
                    (&f == &fold ? target_rows : other_rows).push_back(row);
                }
            }
            if (model->caps().context)
                model->bind_context(rows_to_context(train.X, train.y, other_rows));

            Matrix tx(0, train.dim());
            std::vector<int> ty;
            for (int r : target_rows) {
                tx.push_row(train.X.row(static_cast<std::size_t>(r)));
                ty.push_back(train.y[static_cast<std::size_t>(r)]);
            }
            inner_budget.seed = mix_seed(cfg.seed, 0xa77ac0 + static_cast<std::uint64_t>(t));
            auto adv = run_inner(*model, tx, ty, cfg.inner, inner_budget);

            // one step on the clean+adversarial batch (equal halves)
            std::fill(grad.begin(), grad.end(), 0.0);
            double wgt = 1.0 / static_cast<double>(2 * tx.rows());
            std::vector<double> before = params;
            for (std::size_t i = 0; i < tx.rows(); ++i) {
                model->param_grad_accum(tx.row(i), ty[i], wgt, grad);
                const std::vector<double>& xe = adv[i].x_adv ? *adv[i].x_adv : adv[i].x;
                model->param_grad_accum(xe, ty[i], wgt, grad);
            }
            opt.step(params, grad);
            model->params_updated();

            double drift = 0.0;
            for (std::size_t i = 0; i < params.size(); ++i) {
                double d = params[i] - before[i];
                drift += d * d;
            }
            // F_val is always measured against the artifact that ships: the
            // model with its real context
            if (original_ctx) model->bind_context(*original_ctx);
            fval = slice.eval(*model);
            art.trace.rows.push_back(
                {t, std::sqrt(drift), fval, std::numeric_limits<double>::quiet_NaN(), cfg.lr, 0,
                 true});
            ++t;
        }
        art.epochs_run = epoch;
        if (fval < best_fval - 1e-12) {
            best_fval = fval;
            best_params = params;
            stale = 0;
        } else if (++stale >= cfg.patience) {
            break;
        }
    }
    if (cfg.max_epochs > 0) {
        params = best_params;
        model->params_updated();
    }

    if (original_ctx) {
        model->bind_context(*original_ctx);
        if (context_fingerprint(*model->context()) != ctx_before)
            throw std::logic_error("AFT mutated the context");
    }
    return art;
}

HardenedArtifact harden_aicl(PredictorPtr model, const Dataset& train,
                             const HardeningConfig& cfg) {
    cfg.validate();
    if (!model->caps().context)
        throw CapabilityError("AICL needs an in-context model; " + model->kind() +
                              " takes no context");
    const ContextState* bound = model->context();
    if (!bound) throw DataError("AICL needs a bound context");

    const std::uint64_t theta_before = model->theta_hash();
    ContextState clean_ctx = *bound;
    ContextState adv_ctx = clean_ctx;
    auto n_ctx = static_cast<int>(clean_ctx.size());
    if (n_ctx < cfg.n_split) throw DataError("context smaller than n_split");

    RobustLossSlice slice = make_slice(train, &clean_ctx.X, cfg);
    const ScaledView& view = model->view();

    // probe coordinates are fixed per run so g_hat is comparable across t
    std::vector<std::pair<int, int>> probes;
    if (cfg.probe_every > 0 && cfg.probe_coords > 0) {
        Rng rng(mix_seed(cfg.seed, 0x9e0be));
        for (int i = 0; i < cfg.probe_coords; ++i)
            probes.emplace_back(static_cast<int>(rng.uniform_int(0, n_ctx - 1)),
                                static_cast<int>(rng.uniform_int(0, static_cast<std::int64_t>(train.dim()) - 1)));
    }

    auto bind_full = [&]() {
        ContextState full = adv_ctx;
        model->bind_context(std::move(full));
    };

    auto f_val_full = [&]() {
        bind_full();
        return slice.eval(*model);
    };

    auto probe_ghat = [&]() {
        if (probes.empty()) return std::numeric_limits<double>::quiet_NaN();
        double sq = 0.0;
        for (auto [i, j] : probes) {
            double keep = adv_ctx.X.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
            double s = view.scale1(static_cast<std::size_t>(j), keep);
            adv_ctx.X.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) =
                view.unscale1(static_cast<std::size_t>(j), s + cfg.probe_h);
            double up = f_val_full();
            adv_ctx.X.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) =
                view.unscale1(static_cast<std::size_t>(j), s - cfg.probe_h);
            double down = f_val_full();
            adv_ctx.X.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = keep;
            double g = (up - down) / (2 * cfg.probe_h);
            sq += g * g;
        }
        return std::sqrt(sq);
    };

    HardenedArtifact art;
    art.model = model;

    AttackBudget inner_budget = cfg.inner_budget;
    double f_accepted = f_val_full(); // baseline for the acceptance rule
    double best_fval = f_accepted;
    Matrix best_ctx_X = adv_ctx.X; // early stopping restores the best epoch
    int stale = 0;
    int t = 0;
    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        auto folds = split_folds(n_ctx, cfg.n_split,
                                 mix_seed(cfg.seed, 0xa1c1 + static_cast<std::uint64_t>(epoch)));
        double fval = f_accepted;
        for (const auto& fold : folds) {
            double eta_t = cfg.constant_eta
                               ? cfg.eta0
                               : cfg.eta0 / std::pow(1.0 + static_cast<double>(t), cfg.alpha);
            double eps_eff = std::min(cfg.defense_epsilon,
                                      std::max(eta_t * cfg.defense_epsilon,
                                               cfg.eta_floor_frac * cfg.defense_epsilon));

            std::vector<int> other_rows;
            for (const auto& f : folds)
                if (&f != &fold) other_rows.insert(other_rows.end(), f.begin(), f.end());
            ContextState pseudo = rows_to_context(adv_ctx.X, adv_ctx.y, other_rows);

            // targets: always the CLEAN copies of the fold rows
            Matrix tx(0, train.dim());
            std::vector<int> ty;
            for (int r : fold) {
                tx.push_row(clean_ctx.X.row(static_cast<std::size_t>(r)));
                ty.push_back(clean_ctx.y[static_cast<std::size_t>(r)]);
            }

            Matrix fold_before(0, train.dim());
            for (int r : fold) fold_before.push_row(adv_ctx.X.row(static_cast<std::size_t>(r)));

            auto attack_fold = [&](double eps) {
                model->bind_context(pseudo);
                AttackBudget bgt = inner_budget;
                bgt.epsilon = eps;
                bgt.seed = mix_seed(cfg.seed, 0xf01d00 + static_cast<std::uint64_t>(t));
                return run_inner(*model, tx, ty, cfg.inner, bgt);
            };
            auto write_fold = [&](const std::vector<AttackOutcome>& adv, bool force_clean) {
                for (std::size_t k = 0; k < fold.size(); ++k) {
                    auto row = static_cast<std::size_t>(fold[k]);
                    if (force_clean) {
                        adv_ctx.X.set_row(row, clean_ctx.X.row(row));
                    } else if (adv[k].success) {
                        adv_ctx.X.set_row(row, *adv[k].x_adv);
                    } else if (cfg.on_fail == HardeningConfig::OnFail::KeepClean) {
                        adv_ctx.X.set_row(row, clean_ctx.X.row(row));
                    } // KeepPrior: leave the previous adversarial row in place
                }
            };

            int retries = 0;
            bool accepted = true;
            if (!cfg.acceptance_rule) {
                write_fold(attack_fold(eps_eff), false);
                fval = f_val_full();
            } else {
                // shrink eta and retry until the held-out robust loss is no
                // worse than at the last accepted step
                double eps_try = eps_eff;
                accepted = false;
                for (retries = 0; retries <= cfg.max_retries; ++retries) {
                    write_fold(attack_fold(eps_try), false);
                    fval = f_val_full();
                    if (fval <= f_accepted + 1e-12) {
                        accepted = true;
                        break;
                    }
                    // undo before retrying at half the step
                    for (std::size_t k = 0; k < fold.size(); ++k)
                        adv_ctx.X.set_row(static_cast<std::size_t>(fold[k]), fold_before.row(k));
                    eps_try = std::max(0.5 * eps_try,
                                       cfg.eta_floor_frac * cfg.defense_epsilon);
                }
                if (!accepted) {
                    write_fold({}, true); // give the fold back its clean rows
                    fval = f_val_full();
                    retries = cfg.max_retries;
                } else {
                    f_accepted = std::min(f_accepted, fval);
                }
            }

            Matrix fold_after(0, train.dim());
            for (int r : fold) fold_after.push_row(adv_ctx.X.row(static_cast<std::size_t>(r)));
            double drift = frobenius_scaled(view, fold_before, fold_after);

            double ghat = std::numeric_limits<double>::quiet_NaN();
            if (!probes.empty() && cfg.probe_every > 0 && t % cfg.probe_every == 0)
                ghat = probe_ghat();

            art.trace.rows.push_back({t, drift, fval, ghat, eta_t, retries, accepted});
            ++t;
        }
        art.epochs_run = epoch;
        if (model->theta_hash() != theta_before)
            throw std::logic_error("AICL touched the model weights");
        if (fval < best_fval - 1e-12) {
            best_fval = fval;
            best_ctx_X = adv_ctx.X;
            stale = 0;
        } else if (++stale >= cfg.patience) {
            break;
        }
    }
    adv_ctx.X = std::move(best_ctx_X);

    // labels stay bit-identical to the clean origin by construction
    adv_ctx.y = clean_ctx.y;
    adv_ctx.provenance.kind = ContextProvenance::Hardened;
    adv_ctx.provenance.run_id = hash_hex(mix_seed(cfg.seed, theta_before));
    art.clean_context = clean_ctx;
    art.hardened_context = adv_ctx;
    model->bind_context(adv_ctx);
    if (model->theta_hash() != theta_before)
        throw std::logic_error("AICL touched the model weights");
    return art;
}

namespace {
double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}
} // namespace

ConvergenceSummary convergence_report(const ConvergenceTrace& trace) {
    if (trace.rows.size() < 10)
        throw ConfigError("convergence report needs at least 10 outer iterations");
    ConvergenceSummary s;
    std::vector<double> d_first, d_last, g_first, g_last;
    for (std::size_t i = 0; i < 5; ++i) {
        d_first.push_back(trace.rows[i].drift);
        d_last.push_back(trace.rows[trace.rows.size() - 5 + i].drift);
        double gf = trace.rows[i].g_hat;
        double gl = trace.rows[trace.rows.size() - 5 + i].g_hat;
        if (!std::isnan(gf)) g_first.push_back(gf);
        if (!std::isnan(gl)) g_last.push_back(gl);
    }
    s.drift_first = median_of(d_first);
    s.drift_last = median_of(d_last);
    if (s.drift_first == 0.0)
        s.drift_ratio = s.drift_last == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    else
        s.drift_ratio = s.drift_last / s.drift_first;
    s.converging = s.drift_ratio < 0.5;
    if (!g_first.empty()) s.ghat_first = median_of(g_first);
    if (!g_last.empty()) s.ghat_last = median_of(g_last);
    for (const auto& r : trace.rows) s.eta.push_back(r.eta);
    return s;
}

std::string ConvergenceSummary::to_text() const {
    std::ostringstream os;
    os << "drift median first5=" << format_double(drift_first)
       << " last5=" << format_double(drift_last) << " ratio=" << format_double(drift_ratio)
       << " -> " << (converging ? "converging" : "not converging") << "\n";
    if (!std::isnan(ghat_first))
        os << "g_hat median first5=" << format_double(ghat_first)
           << " last5=" << format_double(ghat_last) << "\n";
    os << "eta_t:";
    for (std::size_t i = 0; i < eta.size() && i < 25; ++i) os << " " << format_double(eta[i]);
    if (eta.size() > 25) os << " ...";
    os << "\n";
    return os.str();
}

} // namespace tabrobust
