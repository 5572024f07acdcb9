// tabrobust: constrained evasion attacks and hardening for tabular
// classifiers. Subcommands: gen, fit, attack, defend, transfer, sweep,
// report. Exit codes: 0 ok, 2 config error, 3 capability error, 4 data error.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>

#include "tabrobust/manifest.hpp"
#include "tabrobust/synthetic.hpp"

namespace fs = std::filesystem;
using namespace tabrobust;

namespace {

struct CommonFlags {
    std::string config_path;
    std::vector<std::string> sets;
    std::string out_dir;
    int threads = 0; // 0: keep config value
    bool print_config = false;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--config", f.config_path, "JSON config file");
    cmd->add_option("--set", f.sets, "override a config key, key=value (repeatable)");
    cmd->add_option("--out", f.out_dir, "output directory (default: $TABROBUST_OUT/<cmd>-<id>)");
    cmd->add_option("--threads", f.threads, "worker threads (0 = config, -1 = all cores)");
    cmd->add_flag("--print-config", f.print_config, "print the effective config and exit");
}

RunConfig make_config(const std::string& command, const CommonFlags& f) {
    RunConfig cfg = RunConfig::defaults(command);
    if (!f.config_path.empty()) cfg.merge_file(f.config_path);
    for (const auto& kv : f.sets) cfg.set_override(kv);
    return cfg;
}

std::string resolve_out_dir(const CommonFlags& f, const RunManifest& manifest,
                            const std::string& command) {
    if (!f.out_dir.empty()) return f.out_dir;
    const char* root = std::getenv("TABROBUST_OUT");
    std::string base = root && *root ? root : ".";
    return base + "/" + command + "-" + manifest.id().substr(0, 8);
}

void apply_threads(const RunConfig& cfg, const CommonFlags& f) {
    int n = f.threads != 0 ? f.threads : cfg.integer("threads");
    set_max_threads(n < 0 ? 0 : n);
}

Dataset load_data(const RunConfig& cfg, const ParsedSchemaPtr& ps, const std::string& key) {
    std::string path = cfg.str(key);
    if (path.empty()) throw ConfigError("config key '" + key + "' must name a CSV file");
    std::string policy = cfg.str("row_policy");
    if (policy != "abort" && policy != "reject")
        throw ConfigError("row_policy must be abort or reject");
    LoadReport report;
    Dataset ds = load_csv(path, ps, policy == "abort" ? RowPolicy::Abort : RowPolicy::Reject,
                          &report);
    for (std::size_t i = 0; i < report.rejected_rows.size(); ++i)
        std::cerr << "rejected row " << report.rejected_rows[i] << ": " << report.reasons[i]
                  << "\n";
    return ds;
}

ParsedSchemaPtr load_schema(const RunConfig& cfg) {
    std::string path = cfg.str("schema");
    if (path.empty()) throw ConfigError("config key 'schema' must name a schema file");
    return load_schema_file(path);
}

AttackSubset subset_from(const std::string& name) {
    if (name == "correct-positive") return AttackSubset::CorrectPositive;
    if (name == "all-positive") return AttackSubset::AllPositive;
    throw ConfigError("subset must be correct-positive or all-positive");
}

Dataset attacked_subset(const Predictor& model, const Dataset& data, AttackSubset mode,
                        int max_samples) {
    auto rows = select_attack_subset(model, data, mode);
    if (max_samples > 0 && static_cast<int>(rows.size()) > max_samples)
        rows.resize(static_cast<std::size_t>(max_samples));
    if (rows.empty()) throw DataError("the attacked subset is empty");
    return data.subset(rows);
}

std::vector<AttackOutcome> run_attack(const std::string& name, const Predictor& model,
                                      const Matrix& X, std::span<const int> y,
                                      const AttackBudget& budget) {
    if (name == "identity") return attack_identity(model, X, y);
    if (name == "capgd") return attack_capgd(model, X, y, budget);
    if (name == "moeva") return attack_moeva(model, X, y, budget);
    if (name == "caa") return attack_caa(model, X, y, budget);
    throw ConfigError("unknown attack '" + name + "'");
}

Campaign make_campaign(const std::string& attack, const Predictor& model,
                       const Dataset& sub, AttackBudget budget, std::uint64_t seed) {
    budget.seed = seed;
    Campaign c;
    c.header.schema_hash = hash_hex(model.schema()->hash);
    c.header.model_id = model.model_id();
    c.header.attack = attack;
    c.header.budget = budget;
    c.outcomes = run_attack(attack, model, sub.X, sub.y, budget);
    return c;
}

struct AttackTable {
    // attack -> per-seed robust accuracy
    std::map<std::string, std::vector<double>> rows;
    std::vector<std::string> notices;

    std::string to_markdown(const std::string& title) const {
        std::string out = "# " + title + "\n\n| attack | robust accuracy | seeds |\n|---|---|---|\n";
        for (const auto& [attack, vals] : rows) {
            double mean = 0, lo = 1e300, hi = -1e300;
            for (double v : vals) {
                mean += v;
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
            mean /= static_cast<double>(vals.size());
            char buf[64];
            if (vals.size() > 1)
                std::snprintf(buf, sizeof(buf), "%.4f ± %.4f", mean, 0.5 * (hi - lo));
            else
                std::snprintf(buf, sizeof(buf), "%.4f", mean);
            out += "| " + attack + " | " + buf + " | " + std::to_string(vals.size()) + " |\n";
        }
        for (const auto& n : notices) out += "\n> " + n + "\n";
        return out;
    }
    std::string to_csv() const {
        std::string out = "attack,seed_index,robust_accuracy\n";
        for (const auto& [attack, vals] : rows)
            for (std::size_t i = 0; i < vals.size(); ++i)
                out += attack + "," + std::to_string(i) + "," + format_double(vals[i]) + "\n";
        return out;
    }
};

// ---- fit ------------------------------------------------------------------

ContextScorer icl_probe_scorer(const RunConfig& cfg) {
    IclConfig probe;
    probe.k = cfg.integer("icl.k");
    probe.gamma = cfg.num("icl.gamma");
    probe.tau_init = cfg.num("icl.tau_init");
    probe.lr = cfg.num("icl.lr");
    probe.epochs = std::min(cfg.integer("icl.epochs"), 10); // cheap probe fits
    probe.n_split = cfg.integer("icl.n_split");
    probe.seed = cfg.seed("seed");
    return [probe](const ContextState& ctx, const Dataset& val) {
        Dataset ctx_ds;
        ctx_ds.ps = val.ps;
        ctx_ds.X = ctx.X;
        ctx_ds.y = ctx.y;
        ctx_ds.n_classes = val.n_classes;
        auto model = fit_icl(ctx_ds, probe, ctx);
        std::vector<double> scores(val.rows());
        for (std::size_t r = 0; r < val.rows(); ++r)
            scores[r] = model->predict_row(val.X.row(r))[1];
        return metric_panel(val.y, scores).mcc;
    };
}

int cmd_fit(const RunConfig& cfg, const CommonFlags& flags) {
    auto ps = load_schema(cfg);
    Dataset train = load_data(cfg, ps, "data");
    std::string model_kind = cfg.str("model");
    std::uint64_t seed = cfg.seed("seed");

    PredictorPtr model;
    nlohmann::ordered_json provenance;
    if (model_kind == "logistic") {
        model = fit_logistic(train, {.lr = cfg.num("logistic.lr"),
                                     .iterations = cfg.integer("logistic.iterations"),
                                     .seed = seed});
    } else if (model_kind == "mlp") {
        MlpConfig mc;
        mc.hidden = cfg.at("mlp.hidden").get<std::vector<int>>();
        mc.activation = cfg.str("mlp.activation");
        mc.lr = cfg.num("mlp.lr");
        mc.epochs = cfg.integer("mlp.epochs");
        mc.seed = seed;
        model = fit_mlp(train, mc);
    } else if (model_kind == "forest") {
        model = fit_forest(train, {.n_trees = cfg.integer("forest.n_trees"),
                                   .max_depth = cfg.integer("forest.max_depth"),
                                   .min_leaf = cfg.integer("forest.min_leaf"),
                                   .seed = seed});
    } else if (model_kind == "icl") {
        IclConfig ic;
        ic.k = cfg.integer("icl.k");
        ic.gamma = cfg.num("icl.gamma");
        ic.tau_init = cfg.num("icl.tau_init");
        ic.lr = cfg.num("icl.lr");
        ic.epochs = cfg.integer("icl.epochs");
        ic.n_split = cfg.integer("icl.n_split");
        ic.seed = seed;

        int cap = cfg.integer("context.cap");
        std::string mode_name = cfg.str("context.rebalance");
        Rebalance mode = mode_name == "on"    ? Rebalance::On
                         : mode_name == "off" ? Rebalance::Off
                                              : Rebalance::Both;
        std::vector<std::uint64_t> ctx_seeds;
        for (int i = 0; i < cfg.integer("context.n_seeds"); ++i)
            ctx_seeds.push_back(static_cast<std::uint64_t>(i));
        ContextState ctx = sample_context(train, cap, ctx_seeds, mode, icl_probe_scorer(cfg),
                                          cfg.seed("context.selection_seed"));
        provenance = {{"kind", ctx.provenance.kind == ContextProvenance::FullTrain
                                   ? "full-train"
                                   : "seeded-subsample"},
                      {"seed", ctx.provenance.seed},
                      {"rebalanced", ctx.provenance.rebalanced},
                      {"mcc", ctx.provenance.mcc},
                      {"rows", ctx.size()}};
        // W trains on the context rows themselves; source_rows already
        // index into the full training set
        Dataset fit_rows = ctx.provenance.kind == ContextProvenance::FullTrain
                               ? train
                               : train.subset(ctx.source_rows);
        model = fit_icl(fit_rows, ic, std::move(ctx));
    } else {
        throw ConfigError("model must be one of logistic, mlp, forest, icl");
    }

    // final train/validation loss for the manifest
    double train_loss = 0.0;
    for (std::size_t r = 0; r < train.rows(); ++r)
        train_loss += model->cross_entropy(train.X.row(r), train.y[r]);
    train_loss /= static_cast<double>(train.rows());
    if (!std::isfinite(train_loss)) throw DataError("non-finite training loss");

    std::vector<int> val_rows;
    {
        std::vector<int> order(train.rows());
        for (std::size_t i = 0; i < train.rows(); ++i) order[i] = static_cast<int>(i);
        Rng rng(mix_seed(seed, 0x7a11));
        rng.shuffle(order);
        auto n_val = std::max<std::size_t>(1, train.rows() / 5);
        val_rows.assign(order.end() - static_cast<long>(n_val), order.end());
    }
    double val_loss = 0.0;
    for (int r : val_rows)
        val_loss += model->cross_entropy(train.X.row(static_cast<std::size_t>(r)),
                                         train.y[static_cast<std::size_t>(r)]);
    val_loss /= static_cast<double>(val_rows.size());

    RunManifest manifest(cfg);
    manifest.fingerprint_file("schema", cfg.str("schema"));
    manifest.fingerprint_file("data", cfg.str("data"));
    manifest.set("schema_hash", hash_hex(ps->hash));
    manifest.set("model_id", model->model_id());
    manifest.set("train_loss", train_loss);
    manifest.set("val_loss", val_loss);
    if (!provenance.empty()) manifest.set("context_provenance", provenance);
    manifest.add_output("checkpoint.json");

    std::string dir = resolve_out_dir(flags, manifest, "fit");
    fs::create_directories(dir);
    write_text_file(dir + "/checkpoint.json", checkpoint_to_json(*model));
    manifest.write(dir);
    std::cout << "fit: " << model->model_id() << " -> " << dir << "\n";
    return 0;
}

// ---- gen ------------------------------------------------------------------

int cmd_gen(const RunConfig& cfg, const CommonFlags& flags) {
    SyntheticTaskSpec spec;
    spec.gen = gen_from_name(cfg.str("task"));
    spec.rows = cfg.integer("rows");
    spec.balance = cfg.num("balance");
    spec.extra_dims = cfg.integer("extra_dims");
    spec.seed = cfg.seed("seed");
    GeneratedTask task = gen_synthetic(spec);

    RunManifest manifest(cfg);
    manifest.add_output("schema.json");
    manifest.add_output("data.csv");
    std::string dir = resolve_out_dir(flags, manifest, "gen");
    fs::create_directories(dir);
    write_text_file(dir + "/schema.json", task.schema_json);
    write_text_file(dir + "/data.csv", task.csv_text);
    manifest.write(dir);
    std::cout << "gen: " << gen_name(spec.gen) << " rows=" << spec.rows << " -> " << dir << "\n";
    return 0;
}

// ---- attack ----------------------------------------------------------------

int cmd_attack(const RunConfig& cfg, const CommonFlags& flags) {
    auto ps = load_schema(cfg);
    auto model = load_checkpoint(cfg.str("checkpoint"), ps);
    Dataset data = load_data(cfg, ps, "data");
    AttackBudget budget = cfg.budget("budget");
    auto attacks = cfg.at("attacks").get<std::vector<std::string>>();
    auto seeds = cfg.at("seeds").get<std::vector<std::uint64_t>>();
    if (seeds.empty()) throw ConfigError("attack needs at least one seed");
    AttackSubset subset = subset_from(cfg.str("subset"));
    Dataset sub = attacked_subset(*model, data, subset, cfg.integer("max_samples"));

    RunManifest manifest(cfg);
    manifest.fingerprint_file("schema", cfg.str("schema"));
    manifest.fingerprint_file("data", cfg.str("data"));
    manifest.fingerprint_file("checkpoint", cfg.str("checkpoint"));
    manifest.set("schema_hash", hash_hex(ps->hash));
    manifest.set("model_id", model->model_id());
    manifest.set("norm", budget.norm == Norm::L2 ? "l2" : "linf");
    manifest.set("subset_convention", subset_name(subset));
    manifest.set("seeds", seeds);
    manifest.set("attacked_samples", sub.rows());

    AttackTable table;
    std::vector<std::pair<std::string, Campaign>> files;
    for (const auto& attack : attacks) {
        bool skipped = false;
        for (auto seed : seeds) {
            try {
                Campaign c = make_campaign(attack, *model, sub, budget, seed);
                table.rows[attack].push_back(robust_accuracy(c.outcomes).value);
                files.emplace_back("campaign-" + attack + "-seed" + std::to_string(seed) +
                                       ".jsonl",
                                   std::move(c));
            } catch (const CapabilityError& e) {
                table.notices.push_back("skipped " + attack + ": " + e.what());
                skipped = true;
                break;
            }
        }
        if (skipped) continue;
    }
    if (files.empty()) throw CapabilityError("no requested attack applies to this model");

    std::string dir = resolve_out_dir(flags, manifest, "attack");
    for (const auto& [name, _] : files) manifest.add_output(name);
    manifest.add_output("report.md");
    manifest.add_output("report.csv");
    fs::create_directories(dir);
    for (const auto& [name, campaign] : files) save_campaign(dir + "/" + name, campaign);
    write_text_file(dir + "/report.md",
                    table.to_markdown("robust accuracy: " + model->model_id()));
    write_text_file(dir + "/report.csv", table.to_csv());
    manifest.write(dir);
    std::cout << "attack: " << files.size() << " campaigns -> " << dir << "\n";
    return 0;
}

// ---- defend ----------------------------------------------------------------

HardeningConfig harden_config(const RunConfig& cfg) {
    HardeningConfig hc;
    std::string mode = cfg.str("mode");
    if (mode != "aft" && mode != "aicl") throw ConfigError("mode must be aft or aicl");
    hc.mode = mode == "aft" ? HardenMode::Aft : HardenMode::Aicl;
    std::string inner = cfg.str("inner");
    hc.inner = inner == "capgd"      ? InnerAttack::Capgd
               : inner == "caa"      ? InnerAttack::Caa
               : inner == "identity" ? InnerAttack::Identity
                                     : throw ConfigError("inner must be capgd, caa or identity");
    hc.defense_epsilon = cfg.num("defense_epsilon");
    hc.n_split = cfg.integer("n_split");
    hc.max_epochs = cfg.integer("epochs");
    hc.lr = cfg.num("lr");
    hc.weight_decay = cfg.num("weight_decay");
    hc.eta0 = cfg.num("eta0");
    hc.alpha = cfg.num("alpha");
    hc.eta_floor_frac = cfg.num("eta_floor");
    hc.constant_eta = cfg.flag("constant_eta");
    hc.acceptance_rule = cfg.flag("acceptance_rule");
    hc.max_retries = cfg.integer("max_retries");
    std::string on_fail = cfg.str("on_fail");
    if (on_fail != "keep-clean" && on_fail != "keep-prior")
        throw ConfigError("on_fail must be keep-clean or keep-prior");
    hc.on_fail = on_fail == "keep-clean" ? HardeningConfig::OnFail::KeepClean
                                         : HardeningConfig::OnFail::KeepPrior;
    hc.patience = cfg.integer("patience");
    hc.val_slice = cfg.integer("val_slice");
    hc.probe_coords = cfg.integer("probe_coords");
    hc.probe_h = cfg.num("probe_h");
    hc.probe_every = cfg.integer("probe_every");
    hc.inner_budget = cfg.budget("inner_budget");
    hc.seed = cfg.seed("seed");
    hc.validate();
    return hc;
}

int cmd_defend(const RunConfig& cfg, const CommonFlags& flags) {
    auto ps = load_schema(cfg);
    Dataset train = load_data(cfg, ps, "data");
    auto before = load_checkpoint(cfg.str("checkpoint"), ps);
    auto model = load_checkpoint(cfg.str("checkpoint"), ps); // hardened in place
    HardeningConfig hc = harden_config(cfg);

    HardenedArtifact art = hc.mode == HardenMode::Aft ? harden_aft(model, train, hc)
                                                      : harden_aicl(model, train, hc);

    // before/after robust accuracy at the (stronger) attack budget
    AttackBudget eval_budget = cfg.budget("eval.budget");
    auto eval_attacks = cfg.at("eval.attacks").get<std::vector<std::string>>();
    auto eval_seeds = cfg.at("eval.seeds").get<std::vector<std::uint64_t>>();
    AttackSubset eval_subset = subset_from(cfg.str("eval.subset"));
    Dataset sub = attacked_subset(*before, train, eval_subset, cfg.integer("eval.max_samples"));

    auto clean_acc = [&](const Predictor& m) {
        int ok = 0;
        for (std::size_t r = 0; r < sub.rows(); ++r)
            ok += m.predict_label(sub.X.row(r)) == sub.y[r];
        return static_cast<double>(ok) / static_cast<double>(sub.rows());
    };

    std::string compare = "# hardening: " + cfg.str("mode") + " with inner " + cfg.str("inner") +
                          "\n\n| metric | before | after |\n|---|---|---|\n";
    {
        char buf[128];
        std::snprintf(buf, sizeof(buf), "| clean accuracy | %.4f | %.4f |\n", clean_acc(*before),
                      clean_acc(*model));
        compare += buf;
    }
    for (const auto& attack : eval_attacks) {
        std::vector<double> rb, ra;
        for (auto seed : eval_seeds) {
            AttackBudget b = eval_budget;
            b.seed = seed;
            rb.push_back(robust_accuracy(run_attack(attack, *before, sub.X, sub.y, b)).value);
            ra.push_back(robust_accuracy(run_attack(attack, *model, sub.X, sub.y, b)).value);
        }
        auto mean = [](const std::vector<double>& v) {
            double s = 0;
            for (double x : v) s += x;
            return s / static_cast<double>(v.size());
        };
        char buf[128];
        std::snprintf(buf, sizeof(buf), "| robust accuracy (%s) | %.4f | %.4f |\n",
                      attack.c_str(), mean(rb), mean(ra));
        compare += buf;
    }
    if (art.trace.rows.size() >= 10)
        compare += "\n## convergence\n\n```\n" + convergence_report(art.trace).to_text() + "```\n";

    RunManifest manifest(cfg);
    manifest.fingerprint_file("schema", cfg.str("schema"));
    manifest.fingerprint_file("data", cfg.str("data"));
    manifest.fingerprint_file("checkpoint", cfg.str("checkpoint"));
    manifest.set("schema_hash", hash_hex(ps->hash));
    manifest.set("model_id_before", before->model_id());
    manifest.set("model_id_after", model->model_id());
    manifest.set("seeds", nlohmann::ordered_json::array({hc.seed}));
    manifest.set("epochs_run", art.epochs_run);
    manifest.add_output("hardened.json");
    manifest.add_output("trace.csv");
    manifest.add_output("compare.md");

    std::string dir = resolve_out_dir(flags, manifest, "defend");
    fs::create_directories(dir);
    write_text_file(dir + "/hardened.json", checkpoint_to_json(*model));
    write_text_file(dir + "/trace.csv", art.trace.to_csv());
    write_text_file(dir + "/compare.md", compare);
    manifest.write(dir);
    std::cout << "defend: " << cfg.str("mode") << " epochs=" << art.epochs_run << " -> " << dir
              << "\n";
    return 0;
}

// ---- transfer ----------------------------------------------------------------

int cmd_transfer(const RunConfig& cfg, const CommonFlags& flags) {
    std::string scenario = cfg.str("scenario");
    std::vector<Campaign> campaigns;
    std::vector<PredictorPtr> targets;
    RunManifest manifest(cfg);

    if (scenario == "none") {
        auto files = cfg.at("campaigns").get<std::vector<std::string>>();
        auto ckpts = cfg.at("targets").get<std::vector<std::string>>();
        if (files.empty() || ckpts.empty())
            throw ConfigError("transfer needs campaign files and target checkpoints");
        auto ps = load_schema(cfg);
        for (const auto& f : files) {
            campaigns.push_back(load_campaign(f));
            manifest.fingerprint_file("campaign:" + f, f);
        }
        for (const auto& c : ckpts) {
            targets.push_back(load_checkpoint(c, ps));
            manifest.fingerprint_file("target:" + c, c);
        }
    } else if (scenario == "exact" || scenario == "subsample10" || scenario == "distribution") {
        auto ps = load_schema(cfg);
        auto target = load_checkpoint(cfg.str("target_checkpoint"), ps);
        const ContextState* tctx = target->context();
        if (!tctx)
            throw CapabilityError("context-knowledge scenarios need an in-context target");
        Dataset train = load_data(cfg, ps, "data");
        std::uint64_t sseed = cfg.seed("scenario_seed");

        ContextState sctx;
        if (scenario == "exact") {
            sctx = *tctx;
        } else if (scenario == "subsample10") {
            // the adversary only got 10% of the target's context
            std::vector<int> idx(tctx->size());
            for (std::size_t i = 0; i < tctx->size(); ++i) idx[i] = static_cast<int>(i);
            Rng rng(mix_seed(sseed, 0x50b));
            rng.shuffle(idx);
            auto keep = std::max<std::size_t>(1, tctx->size() / 10);
            idx.resize(keep);
            sctx.X = Matrix(0, train.dim());
            for (int i : idx) {
                sctx.X.push_row(tctx->X.row(static_cast<std::size_t>(i)));
                sctx.y.push_back(tctx->y[static_cast<std::size_t>(i)]);
            }
            sctx.provenance.kind = ContextProvenance::SeededSubsample;
            sctx.provenance.seed = sseed;
        } else {
            // same-distribution rebuild: rows from train, excluding the
            // target's own context rows where the pool allows
            std::vector<char> taken(train.rows(), 0);
            for (int r : tctx->source_rows)
                if (r >= 0 && static_cast<std::size_t>(r) < train.rows())
                    taken[static_cast<std::size_t>(r)] = 1;
            std::vector<int> pool, fallback;
            for (std::size_t i = 0; i < train.rows(); ++i)
                (taken[i] ? fallback : pool).push_back(static_cast<int>(i));
            Rng rng(mix_seed(sseed, 0xd157));
            rng.shuffle(pool);
            rng.shuffle(fallback);
            std::vector<int> rows;
            for (int r : pool) {
                if (rows.size() >= tctx->size()) break;
                rows.push_back(r);
            }
            for (int r : fallback) {
                if (rows.size() >= tctx->size()) break;
                rows.push_back(r);
            }
            sctx.X = Matrix(0, train.dim());
            for (int r : rows) {
                sctx.X.push_row(train.X.row(static_cast<std::size_t>(r)));
                sctx.y.push_back(train.y[static_cast<std::size_t>(r)]);
            }
            sctx.source_rows = rows;
            sctx.provenance.kind = ContextProvenance::SeededSubsample;
            sctx.provenance.seed = sseed;
        }

        auto surrogate = checkpoint_from_json(checkpoint_to_json(*target), ps);
        surrogate->bind_context(std::move(sctx));

        AttackBudget budget = cfg.budget("budget");
        AttackSubset subset = subset_from(cfg.str("subset"));
        Dataset sub = attacked_subset(*surrogate, train, subset, cfg.integer("max_samples"));
        for (auto seed : cfg.at("seeds").get<std::vector<std::uint64_t>>())
            campaigns.push_back(make_campaign(cfg.str("attack"), *surrogate, sub, budget, seed));
        targets.push_back(target);
        manifest.set("scenario", scenario);
    } else {
        throw ConfigError("scenario must be none, exact, subsample10 or distribution");
    }

    TransferMatrix matrix = transfer_matrix(campaigns, targets);
    manifest.add_output("matrix.md");
    manifest.add_output("matrix.csv");
    std::string dir = resolve_out_dir(flags, manifest, "transfer");
    fs::create_directories(dir);
    write_text_file(dir + "/matrix.md", matrix.to_markdown());
    write_text_file(dir + "/matrix.csv", matrix.to_csv());
    manifest.write(dir);
    std::cout << "transfer: " << matrix.sources.size() << " sources x " << matrix.targets.size()
              << " targets -> " << dir << "\n";
    return 0;
}

// ---- sweep ----------------------------------------------------------------

int cmd_sweep(const RunConfig& cfg, const CommonFlags& flags) {
    std::string axis = cfg.str("axis");
    if (axis != "epsilon" && axis != "capgd_steps" && axis != "moeva_generations" &&
        axis != "context_size")
        throw ConfigError("axis must be epsilon, capgd_steps, moeva_generations or context_size");
    auto values = cfg.at("values").get<std::vector<double>>();
    if (values.empty()) throw ConfigError("sweep needs at least one value");
    std::sort(values.begin(), values.end());

    auto ps = load_schema(cfg);
    auto model = load_checkpoint(cfg.str("checkpoint"), ps);
    Dataset data = load_data(cfg, ps, "data");
    AttackBudget base = cfg.budget("budget");
    std::string attack = cfg.str("attack");
    auto seeds = cfg.at("seeds").get<std::vector<std::uint64_t>>();
    AttackSubset subset = subset_from(cfg.str("subset"));
    int max_samples = cfg.integer("max_samples");

    std::vector<SweepPoint> points;
    if (axis == "epsilon") {
        // nested budgets: a sample broken at a smaller epsilon stays broken,
        // so the curve is non-increasing by construction
        Dataset sub = attacked_subset(*model, data, subset, max_samples);
        for (auto seed : seeds) {
            std::vector<AttackOutcome> merged;
            for (double eps : values) {
                AttackBudget b = base;
                b.epsilon = eps;
                b.seed = seed;
                if (merged.empty()) {
                    merged = run_attack(attack, *model, sub.X, sub.y, b);
                } else {
                    Matrix X(0, sub.dim());
                    std::vector<int> y;
                    std::vector<std::size_t> slots;
                    for (std::size_t i = 0; i < merged.size(); ++i)
                        if (!merged[i].success) {
                            X.push_row(sub.X.row(i));
                            y.push_back(sub.y[i]);
                            slots.push_back(i);
                        }
                    if (X.rows() > 0) {
                        auto retry = run_attack(attack, *model, X, y, b);
                        for (std::size_t k = 0; k < slots.size(); ++k)
                            if (retry[k].success) merged[slots[k]] = retry[k];
                    }
                }
                points.push_back({eps, model->model_id(), seed, robust_accuracy(merged).value});
            }
        }
    } else if (axis == "context_size") {
        if (!model->caps().context)
            throw CapabilityError("context_size sweeps need an in-context model");
        for (double v : values) {
            int cap = static_cast<int>(v);
            for (auto seed : seeds) {
                auto resized = checkpoint_from_json(checkpoint_to_json(*model), ps);
                std::vector<std::uint64_t> one{seed};
                auto flat = [](const ContextState&, const Dataset&) { return 0.0; };
                resized->bind_context(
                    sample_context(data, cap, one, Rebalance::Off, flat, seed));
                Dataset sub = attacked_subset(*resized, data, subset, max_samples);
                AttackBudget b = base;
                b.seed = seed;
                auto outs = run_attack(attack, *resized, sub.X, sub.y, b);
                points.push_back({v, model->model_id(), seed, robust_accuracy(outs).value});
            }
        }
    } else {
        Dataset sub = attacked_subset(*model, data, subset, max_samples);
        for (double v : values) {
            AttackBudget b = base;
            if (axis == "capgd_steps") b.capgd_steps = static_cast<int>(v);
            else b.moeva_generations = static_cast<int>(v);
            for (auto seed : seeds) {
                b.seed = seed;
                auto outs = run_attack(attack, *model, sub.X, sub.y, b);
                points.push_back({v, model->model_id(), seed, robust_accuracy(outs).value});
            }
        }
    }

    SweepReport report = sweep_report(axis, std::move(points));
    RunManifest manifest(cfg);
    manifest.fingerprint_file("schema", cfg.str("schema"));
    manifest.fingerprint_file("data", cfg.str("data"));
    manifest.fingerprint_file("checkpoint", cfg.str("checkpoint"));
    manifest.set("norm", base.norm == Norm::L2 ? "l2" : "linf");
    manifest.set("subset_convention", subset_name(subset));
    manifest.set("seeds", seeds);
    manifest.add_output("sweep.csv");
    manifest.add_output("sweep.md");
    std::string dir = resolve_out_dir(flags, manifest, "sweep");
    fs::create_directories(dir);
    write_text_file(dir + "/sweep.csv", report.to_csv());
    write_text_file(dir + "/sweep.md", report.to_markdown());
    manifest.write(dir);
    std::cout << "sweep: axis=" << axis << " -> " << dir << "\n";
    return 0;
}

// ---- report ----------------------------------------------------------------

int cmd_report(const RunConfig& cfg, const CommonFlags& flags) {
    auto files = cfg.at("campaigns").get<std::vector<std::string>>();
    if (files.empty()) throw ConfigError("report needs campaign files");
    RunManifest manifest(cfg);
    std::map<std::string, std::vector<double>> by_label;
    for (const auto& f : files) {
        Campaign c = load_campaign(f);
        manifest.fingerprint_file("campaign:" + f, f);
        by_label[c.header.model_id + "/" + c.header.attack].push_back(
            robust_accuracy(c.outcomes).value);
    }
    AttackTable table;
    table.rows = std::move(by_label);
    manifest.add_output("report.md");
    manifest.add_output("report.csv");
    std::string dir = resolve_out_dir(flags, manifest, "report");
    fs::create_directories(dir);
    write_text_file(dir + "/report.md", table.to_markdown("robust accuracy"));
    write_text_file(dir + "/report.csv", table.to_csv());
    manifest.write(dir);
    std::cout << "report: " << files.size() << " campaigns -> " << dir << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"constrained evasion attacks and in-context hardening for tabular classifiers"};
    app.require_subcommand(1);

    struct Sub {
        std::string name;
        int (*run)(const RunConfig&, const CommonFlags&);
        CommonFlags flags;
        CLI::App* cmd = nullptr;
    };
    std::vector<Sub> subs{{"gen", cmd_gen, {}, nullptr},
                          {"fit", cmd_fit, {}, nullptr},
                          {"attack", cmd_attack, {}, nullptr},
                          {"defend", cmd_defend, {}, nullptr},
                          {"transfer", cmd_transfer, {}, nullptr},
                          {"sweep", cmd_sweep, {}, nullptr},
                          {"report", cmd_report, {}, nullptr}};
    const std::map<std::string, std::string> blurb{
        {"gen", "generate a synthetic constrained task (schema + CSV)"},
        {"fit", "train a model and write a checkpoint"},
        {"attack", "run seeded attack campaigns and report robust accuracy"},
        {"defend", "harden a model (AFT or AICL) and compare before/after"},
        {"transfer", "replay campaigns onto targets, or run a context-knowledge scenario"},
        {"sweep", "robust accuracy across a budget axis"},
        {"report", "aggregate existing campaign files"}};
    for (auto& s : subs) {
        s.cmd = app.add_subcommand(s.name, blurb.at(s.name));
        add_common(s.cmd, s.flags);
    }

    try {
        app.parse(argc, argv);
        for (auto& s : subs) {
            if (!s.cmd->parsed()) continue;
            RunConfig cfg = make_config(s.name, s.flags);
            if (s.flags.print_config) {
                std::cout << cfg.dump();
                return 0;
            }
            apply_threads(cfg, s.flags);
            return s.run(cfg, s.flags);
        }
        return 2;
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const CapabilityError& e) {
        std::cerr << "capability error: " << e.what() << "\n";
        return 3;
    } catch (const ParseError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 4;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
