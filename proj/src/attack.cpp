#include <fstream>
#include <sstream>

#include <json.hpp>

#include "attack_impl.hpp"

namespace tabrobust {

void AttackBudget::validate() const {
    if (!(epsilon > 0.0)) throw ConfigError("epsilon must be > 0");
    if (capgd_steps < 1) throw ConfigError("capgd_steps must be >= 1");
    if (moeva_population < 1) throw ConfigError("moeva_population must be >= 1");
    if (moeva_generations < 0) throw ConfigError("moeva_generations must be >= 0");
    if (lambda_penalty < 0) throw ConfigError("lambda_penalty must be >= 0");
    if (tol_c < 0) throw ConfigError("tol_c must be >= 0");
    if (init_jitter < 0) throw ConfigError("init_jitter must be >= 0");
    if (moeva_max_evals < 0) throw ConfigError("moeva_max_evals must be >= 0");
}

const char* stage_name(AttackStage s) {
    switch (s) {
        case AttackStage::Identity: return "identity";
        case AttackStage::Capgd: return "capgd";
        case AttackStage::Moeva: return "moeva";
    }
    return "?";
}

std::vector<AttackOutcome> attack_identity(const Predictor& model, const Matrix& X,
                                           std::span<const int> y) {
    AttackBudget unit; // identity needs no budget; penalties still recorded
    AttackContext ctx(model, unit);
    std::vector<AttackOutcome> out(X.rows());
    parallel_for(X.rows(), [&](std::size_t r) {
        AttackOutcome& o = out[r];
        auto row = X.row(r);
        o.x.assign(row.begin(), row.end());
        o.x_adv = o.x;
        o.y = y[r];
        o.stage = AttackStage::Identity;
        o.distance = 0.0;
        o.penalty = ctx.penalty.total(row);
        o.success = model.predict_label(row) != y[r];
    });
    return out;
}

std::vector<AttackOutcome> attack_capgd(const Predictor& model, const Matrix& X,
                                        std::span<const int> y, const AttackBudget& budget,
                                        std::vector<CapgdDiag>* diags) {
    budget.validate();
    if (!model.caps().input_grad)
        throw CapabilityError("CAPGD needs input gradients; " + model.kind() +
                              " does not expose them");
    AttackContext ctx(model, budget);
    std::vector<AttackOutcome> out(X.rows());
    if (diags) diags->resize(X.rows());
    parallel_for(X.rows(), [&](std::size_t r) {
        out[r] = capgd_one(ctx, X.row(r), y[r], diags ? &(*diags)[r] : nullptr);
    });
    return out;
}

std::vector<AttackOutcome> attack_moeva(const Predictor& model, const Matrix& X,
                                        std::span<const int> y, const AttackBudget& budget) {
    budget.validate();
    AttackContext ctx(model, budget);
    std::vector<AttackOutcome> out(X.rows());
    parallel_for(X.rows(), [&](std::size_t r) {
        out[r] = moeva_one(ctx, X.row(r), y[r], Rng::for_sample(budget.seed, r), {});
    });
    return out;
}

std::vector<AttackOutcome> attack_caa(const Predictor& model, const Matrix& X,
                                      std::span<const int> y, const AttackBudget& budget) {
    budget.validate();
    if (!model.caps().input_grad) {
        // gradient-free victim: straight to the search attack
        return attack_moeva(model, X, y, budget);
    }
    std::vector<CapgdDiag> diags;
    std::vector<AttackOutcome> out =
        attack_capgd(model, X, y, budget, budget.caa_warm_start ? &diags : nullptr);
    std::vector<std::size_t> todo;
    for (std::size_t r = 0; r < out.size(); ++r)
        if (!out[r].success) todo.push_back(r);

    AttackContext ctx(model, budget);
    parallel_for(todo.size(), [&](std::size_t k) {
        std::size_t r = todo[k];
        std::span<const double> warm;
        if (budget.caa_warm_start && !diags[r].best_iterate.empty())
            warm = diags[r].best_iterate;
        // the per-sample stream is keyed by the sample's index, so CAA's
        // MOEVA stage matches a standalone MOEVA run on the same sample
        out[r] = moeva_one(ctx, X.row(r), y[r], Rng::for_sample(budget.seed, r), warm);
    });
    return out;
}

std::vector<AttackOutcome> replay(std::span<const AttackOutcome> outcomes,
                                  const Predictor& target, const AttackBudget& budget) {
    AttackContext ctx(target, budget);
    std::vector<AttackOutcome> out(outcomes.size());
    parallel_for(outcomes.size(), [&](std::size_t r) {
        AttackOutcome o = outcomes[r];
        const std::vector<double>& cand = o.x_adv ? *o.x_adv : o.x;
        o.success = ctx.full_success(o.x, cand, o.y, &o.distance, &o.penalty);
        out[r] = std::move(o);
    });
    return out;
}

// ---- campaign store ------------------------------------------------------

namespace {

nlohmann::ordered_json budget_to_json(const AttackBudget& b) {
    return {{"epsilon", b.epsilon},
            {"norm", b.norm == Norm::L2 ? "l2" : "linf"},
            {"capgd_steps", b.capgd_steps},
            {"moeva_generations", b.moeva_generations},
            {"moeva_population", b.moeva_population},
            {"lambda_penalty", b.lambda_penalty},
            {"tol_c", b.tol_c},
            {"init_jitter", b.init_jitter},
            {"moeva_max_evals", b.moeva_max_evals},
            {"caa_warm_start", b.caa_warm_start},
            {"seed", b.seed}};
}

AttackBudget budget_from_json(const nlohmann::json& j) {
    AttackBudget b;
    b.epsilon = j.at("epsilon").get<double>();
    b.norm = j.at("norm").get<std::string>() == "linf" ? Norm::Linf : Norm::L2;
    b.capgd_steps = j.at("capgd_steps").get<int>();
    b.moeva_generations = j.at("moeva_generations").get<int>();
    b.moeva_population = j.at("moeva_population").get<int>();
    b.lambda_penalty = j.at("lambda_penalty").get<double>();
    b.tol_c = j.at("tol_c").get<double>();
    b.init_jitter = j.at("init_jitter").get<double>();
    b.moeva_max_evals = j.value("moeva_max_evals", 0L);
    b.caa_warm_start = j.at("caa_warm_start").get<bool>();
    b.seed = j.at("seed").get<std::uint64_t>();
    return b;
}

AttackStage stage_from_name(const std::string& s) {
    if (s == "identity") return AttackStage::Identity;
    if (s == "capgd") return AttackStage::Capgd;
    if (s == "moeva") return AttackStage::Moeva;
    throw DataError("unknown attack stage: " + s);
}

} // namespace

std::string campaign_to_jsonl(const Campaign& c) {
    std::string out;
    nlohmann::ordered_json h;
    h["type"] = "campaign-header";
    h["schema_hash"] = c.header.schema_hash;
    h["model_id"] = c.header.model_id;
    h["attack"] = c.header.attack;
    h["budget"] = budget_to_json(c.header.budget);
    out += h.dump() + "\n";
    for (std::size_t i = 0; i < c.outcomes.size(); ++i) {
        const AttackOutcome& o = c.outcomes[i];
        nlohmann::ordered_json j;
        j["i"] = i;
        j["y"] = o.y;
        j["x"] = o.x;
        if (o.x_adv)
            j["x_adv"] = *o.x_adv;
        else
            j["x_adv"] = nullptr;
        j["success"] = o.success;
        j["distance"] = o.distance;
        j["penalty"] = o.penalty;
        j["iterations"] = o.iterations;
        j["stage"] = stage_name(o.stage);
        out += j.dump() + "\n";
    }
    return out;
}

Campaign campaign_from_jsonl(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty campaign file");
    nlohmann::json h = nlohmann::json::parse(line, nullptr, false);
    if (h.is_discarded()) throw DataError("campaign header is not valid JSON");
    if (h.value("type", "") != "campaign-header")
        throw DataError("campaign file does not start with a header line");
    Campaign c;
    c.header.schema_hash = h.at("schema_hash").get<std::string>();
    c.header.model_id = h.at("model_id").get<std::string>();
    c.header.attack = h.at("attack").get<std::string>();
    c.header.budget = budget_from_json(h.at("budget"));
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line);
        AttackOutcome o;
        o.y = j.at("y").get<int>();
        o.x = j.at("x").get<std::vector<double>>();
        if (!j.at("x_adv").is_null()) o.x_adv = j.at("x_adv").get<std::vector<double>>();
        o.success = j.at("success").get<bool>();
        o.distance = j.at("distance").get<double>();
        o.penalty = j.at("penalty").get<double>();
        o.iterations = j.at("iterations").get<int>();
        o.stage = stage_from_name(j.at("stage").get<std::string>());
        c.outcomes.push_back(std::move(o));
    }
    return c;
}

void save_campaign(const std::string& path, const Campaign& c) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write campaign file: " + path);
    out << campaign_to_jsonl(c);
}

Campaign load_campaign(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open campaign file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return campaign_from_jsonl(ss.str());
}

} // namespace tabrobust
