#include "tabrobust/manifest.hpp"

#include <ctime>
#include <fstream>
#include <sstream>

namespace tabrobust {

const char* kVersion = "0.1.0";

namespace {

nlohmann::ordered_json budget_defaults(double epsilon) {
    return {{"epsilon", epsilon},
            {"norm", "l2"},
            {"capgd_steps", 10},
            {"moeva_generations", 100},
            {"moeva_population", 64},
            {"lambda_penalty", 1.0},
            {"tol_c", 1e-9},
            {"init_jitter", 0.1},
            {"moeva_max_evals", 0},
            {"caa_warm_start", false}};
}

nlohmann::ordered_json defaults_for(const std::string& command) {
    using J = nlohmann::ordered_json;
    if (command == "gen")
        return {{"task", "two-gaussians-constrained"},
                {"rows", 400},
                {"balance", 0.5},
                {"extra_dims", 0},
                {"seed", 0},
                {"threads", 1}};
    if (command == "fit")
        return {{"model", "icl"},
                {"schema", ""},
                {"data", ""},
                {"row_policy", "abort"},
                {"seed", 0},
                {"threads", 1},
                {"logistic", J{{"lr", 0.5}, {"iterations", 600}}},
                {"mlp", J{{"hidden", J::array({64, 64})},
                          {"activation", "relu"},
                          {"lr", 0.01},
                          {"epochs", 200}}},
                {"forest", J{{"n_trees", 50}, {"max_depth", 6}, {"min_leaf", 2}}},
                {"icl", J{{"k", 0},
                          {"gamma", 1e-3},
                          {"tau_init", 1.0},
                          {"lr", 0.05},
                          {"epochs", 30},
                          {"n_split", 5}}},
                {"context", J{{"cap", 10000},
                              {"n_seeds", 10},
                              {"rebalance", "both"},
                              {"selection_seed", 1}}}};
    if (command == "attack")
        return {{"checkpoint", ""},
                {"schema", ""},
                {"data", ""},
                {"row_policy", "abort"},
                {"attacks", nlohmann::ordered_json::array({"identity", "capgd", "moeva", "caa"})},
                {"seeds", nlohmann::ordered_json::array({1, 2, 3, 4, 5})},
                {"subset", "correct-positive"},
                {"max_samples", 0},
                {"threads", 1},
                {"budget", budget_defaults(0.5)}};
    if (command == "defend")
        return {{"checkpoint", ""},
                {"schema", ""},
                {"data", ""},
                {"row_policy", "abort"},
                {"mode", "aicl"},
                {"inner", "capgd"},
                {"defense_epsilon", 0.3},
                {"n_split", 5},
                {"epochs", 20},
                {"lr", 1e-6},
                {"weight_decay", 0.01},
                {"eta0", 1.0},
                {"alpha", 0.7},
                {"eta_floor", 0.05},
                {"constant_eta", false},
                {"acceptance_rule", false},
                {"max_retries", 3},
                {"on_fail", "keep-clean"},
                {"patience", 3},
                {"val_slice", 128},
                {"probe_coords", 64},
                {"probe_h", 1e-3},
                {"probe_every", 1},
                {"seed", 0},
                {"threads", 1},
                {"inner_budget", budget_defaults(0.3)},
                {"eval",
                 nlohmann::ordered_json{{"attacks", nlohmann::ordered_json::array({"capgd"})},
                                        {"seeds", nlohmann::ordered_json::array({1})},
                                        {"subset", "correct-positive"},
                                        {"max_samples", 0},
                                        {"budget", budget_defaults(0.5)}}}};
    if (command == "transfer")
        return {{"campaigns", nlohmann::ordered_json::array()},
                {"targets", nlohmann::ordered_json::array()},
                {"schema", ""},
                {"scenario", "none"}, // none | exact | subsample10 | distribution
                {"target_checkpoint", ""},
                {"data", ""},
                {"row_policy", "abort"},
                {"attack", "caa"},
                {"seeds", nlohmann::ordered_json::array({1})},
                {"subset", "correct-positive"},
                {"max_samples", 0},
                {"scenario_seed", 1},
                {"threads", 1},
                {"budget", budget_defaults(0.5)}};
    if (command == "sweep")
        return {{"axis", "epsilon"},
                {"values", nlohmann::ordered_json::array({0.25, 0.5, 1.0})},
                {"checkpoint", ""},
                {"schema", ""},
                {"data", ""},
                {"row_policy", "abort"},
                {"attack", "caa"},
                {"seeds", nlohmann::ordered_json::array({1, 2, 3})},
                {"subset", "correct-positive"},
                {"max_samples", 0},
                {"context_cap", 0},
                {"threads", 1},
                {"budget", budget_defaults(0.5)}};
    if (command == "report")
        return {{"campaigns", nlohmann::ordered_json::array()}, {"threads", 1}};
    throw ConfigError("unknown command '" + command + "'");
}

void merge_into(nlohmann::ordered_json& base, const nlohmann::json& overlay,
                const std::string& prefix) {
    if (!overlay.is_object())
        throw ConfigError("config overlay must be a JSON object");
    for (auto it = overlay.begin(); it != overlay.end(); ++it) {
        std::string path = prefix.empty() ? it.key() : prefix + "." + it.key();
        if (!base.contains(it.key()))
            throw ConfigError("unknown config key '" + path + "'");
        if (base[it.key()].is_object() && it.value().is_object())
            merge_into(base[it.key()], it.value(), path);
        else
            base[it.key()] = it.value();
    }
}

nlohmann::json parse_override_value(const std::string& text) {
    // JSON literal when it parses, bare string otherwise
    auto parsed = nlohmann::json::parse(text, nullptr, false);
    if (!parsed.is_discarded()) return parsed;
    return nlohmann::json(text);
}

} // namespace

RunConfig RunConfig::defaults(const std::string& command) {
    RunConfig cfg;
    cfg.command_ = command;
    cfg.doc_ = defaults_for(command);
    return cfg;
}

void RunConfig::merge_file(const std::string& path) {
    nlohmann::json overlay;
    try {
        overlay = nlohmann::json::parse(read_text_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config file " + path + " is not valid JSON: " + e.what());
    }
    merge(overlay);
}

void RunConfig::merge(const nlohmann::json& overlay) { merge_into(doc_, overlay, ""); }

void RunConfig::set_override(const std::string& key_eq_value) {
    auto eq = key_eq_value.find('=');
    if (eq == std::string::npos)
        throw ConfigError("--set expects key=value, got '" + key_eq_value + "'");
    std::string path = key_eq_value.substr(0, eq);
    nlohmann::json value = parse_override_value(key_eq_value.substr(eq + 1));
    // build a nested overlay from the dotted path
    nlohmann::json overlay = value;
    std::size_t end = path.size();
    while (true) {
        auto dot = path.rfind('.', end - 1);
        std::string key = path.substr(dot == std::string::npos ? 0 : dot + 1,
                                      end - (dot == std::string::npos ? 0 : dot + 1));
        nlohmann::json wrapped;
        wrapped[key] = overlay;
        overlay = wrapped;
        if (dot == std::string::npos) break;
        end = dot;
    }
    merge(overlay);
}

const nlohmann::ordered_json& RunConfig::at(const std::string& path) const {
    const nlohmann::ordered_json* cur = &doc_;
    std::size_t start = 0;
    while (true) {
        auto dot = path.find('.', start);
        std::string key = path.substr(start, dot == std::string::npos ? std::string::npos
                                                                      : dot - start);
        if (!cur->contains(key)) throw ConfigError("unknown config key '" + path + "'");
        cur = &(*cur)[key];
        if (dot == std::string::npos) return *cur;
        start = dot + 1;
    }
}

AttackBudget RunConfig::budget(const std::string& path) const {
    const auto& j = at(path);
    AttackBudget b;
    b.epsilon = j.at("epsilon").get<double>();
    std::string norm = j.at("norm").get<std::string>();
    if (norm != "l2" && norm != "linf") throw ConfigError("norm must be l2 or linf");
    b.norm = norm == "linf" ? Norm::Linf : Norm::L2;
    b.capgd_steps = j.at("capgd_steps").get<int>();
    b.moeva_generations = j.at("moeva_generations").get<int>();
    b.moeva_population = j.at("moeva_population").get<int>();
    b.lambda_penalty = j.at("lambda_penalty").get<double>();
    b.tol_c = j.at("tol_c").get<double>();
    b.init_jitter = j.at("init_jitter").get<double>();
    b.moeva_max_evals = j.at("moeva_max_evals").get<long>();
    b.caa_warm_start = j.at("caa_warm_start").get<bool>();
    b.validate();
    return b;
}

RunManifest::RunManifest(const RunConfig& cfg) {
    doc_["manifest"] = "tabrobust-run-v1";
    doc_["version"] = kVersion;
    doc_["command"] = cfg.command();
    doc_["config"] = cfg.doc();
    doc_["fingerprints"] = nlohmann::ordered_json::object();
    doc_["outputs"] = nlohmann::ordered_json::array();
}

void RunManifest::set(const std::string& key, nlohmann::ordered_json value) {
    doc_[key] = std::move(value);
}

void RunManifest::add_output(const std::string& filename) { doc_["outputs"].push_back(filename); }

void RunManifest::fingerprint_file(const std::string& label, const std::string& path) {
    doc_["fingerprints"][label] = hash_hex(file_fingerprint(path));
}

std::string RunManifest::id() const {
    std::string canon = doc_.dump();
    return hash_hex(fnv1a(canon.data(), canon.size()));
}

void RunManifest::write(const std::string& dir) const {
    nlohmann::ordered_json out = doc_;
    out["manifest_id"] = id();
    std::time_t now = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    out["created_at"] = buf; // excluded from the id: reruns share identity
    write_text_file(dir + "/manifest.json", out.dump(2) + "\n");
}

std::uint64_t file_fingerprint(const std::string& path) {
    std::string content = read_text_file(path);
    return fnv1a(content.data(), content.size());
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write file: " + path);
    out << content;
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace tabrobust
