#include "tabrobust/model.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "models_impl.hpp"

namespace tabrobust {

Predictor::Predictor(ParsedSchemaPtr ps, int n_classes, Capabilities caps)
    : ps_(std::move(ps)), view_(ps_->schema), caps_(caps), n_classes_(n_classes) {}

void Predictor::check_arity(std::span<const double> x) const {
    if (x.size() != dim())
        throw DataError("row has " + std::to_string(x.size()) + " features, schema has " +
                        std::to_string(dim()));
}

std::vector<double> Predictor::predict_row(std::span<const double> x_raw) const {
    check_arity(x_raw);
    return predict_row_impl(x_raw);
}

Matrix Predictor::predict(const Matrix& X_raw) const {
    if (X_raw.cols() != dim())
        throw DataError("batch has " + std::to_string(X_raw.cols()) + " columns, schema has " +
                        std::to_string(dim()));
    Matrix out(X_raw.rows(), static_cast<std::size_t>(n_classes_));
    parallel_for(X_raw.rows(), [&](std::size_t r) {
        auto p = predict_row_impl(X_raw.row(r));
        out.set_row(r, p);
    });
    return out;
}

int Predictor::predict_label(std::span<const double> x_raw) const {
    auto p = predict_row(x_raw);
    int best = 0;
    for (int c = 1; c < n_classes_; ++c)
        if (p[static_cast<std::size_t>(c)] > p[static_cast<std::size_t>(best)]) best = c;
    return best;
}

double Predictor::cross_entropy(std::span<const double> x_raw, int y) const {
    auto p = predict_row(x_raw);
    return -std::log(std::max(p[static_cast<std::size_t>(y)], 1e-300));
}

std::vector<double> Predictor::loss_grad_input(std::span<const double> x_raw, int y) const {
    if (!caps_.input_grad)
        throw CapabilityError(kind() + " does not expose input gradients");
    check_arity(x_raw);
    return input_grad_impl(x_raw, y);
}

Matrix Predictor::loss_grad_context(std::span<const double> x_raw, int y) const {
    if (!caps_.context_grad)
        throw CapabilityError(kind() + " does not expose context gradients");
    check_arity(x_raw);
    return context_grad_impl(x_raw, y);
}

void Predictor::bind_context(ContextState) {
    throw CapabilityError(kind() + " does not take a context");
}

std::vector<double>& Predictor::params() {
    throw CapabilityError(kind() + " has no trainable weights");
}

const std::vector<double>& Predictor::params() const {
    return const_cast<Predictor*>(this)->params();
}

void Predictor::param_grad_accum(std::span<const double>, int, double, std::span<double>) const {
    throw CapabilityError(kind() + " has no trainable weights");
}

std::uint64_t Predictor::theta_hash() const { return theta_hash_impl(); }

std::vector<double> Predictor::input_grad_impl(std::span<const double>, int) const {
    throw CapabilityError(kind() + " does not expose input gradients");
}

Matrix Predictor::context_grad_impl(std::span<const double>, int) const {
    throw CapabilityError(kind() + " does not expose context gradients");
}

// ---- checkpoints ---------------------------------------------------------

namespace {

nlohmann::ordered_json context_to_json(const ContextState& ctx) {
    nlohmann::ordered_json j;
    j["rows"] = ctx.X.rows();
    nlohmann::ordered_json xs = nlohmann::ordered_json::array();
    for (std::size_t r = 0; r < ctx.X.rows(); ++r) {
        auto row = ctx.X.row(r);
        xs.push_back(std::vector<double>(row.begin(), row.end()));
    }
    j["X"] = std::move(xs);
    j["y"] = ctx.y;
    j["source_rows"] = ctx.source_rows;
    const char* kinds[] = {"full-train", "seeded-subsample", "hardened"};
    nlohmann::ordered_json prov;
    prov["kind"] = kinds[static_cast<int>(ctx.provenance.kind)];
    prov["seed"] = ctx.provenance.seed;
    prov["rebalanced"] = ctx.provenance.rebalanced;
    prov["mcc"] = ctx.provenance.mcc;
    prov["run_id"] = ctx.provenance.run_id;
    j["provenance"] = std::move(prov);
    return j;
}

ContextState context_from_json(const nlohmann::json& j, std::size_t dim) {
    ContextState ctx;
    ctx.X = Matrix(0, dim);
    for (const auto& row : j.at("X"))
        ctx.X.push_row(row.get<std::vector<double>>());
    ctx.y = j.at("y").get<std::vector<int>>();
    ctx.source_rows = j.at("source_rows").get<std::vector<int>>();
    const auto& prov = j.at("provenance");
    std::string kind = prov.at("kind").get<std::string>();
    ctx.provenance.kind = kind == "full-train"      ? ContextProvenance::FullTrain
                          : kind == "hardened"      ? ContextProvenance::Hardened
                                                    : ContextProvenance::SeededSubsample;
    ctx.provenance.seed = prov.at("seed").get<std::uint64_t>();
    ctx.provenance.rebalanced = prov.at("rebalanced").get<bool>();
    ctx.provenance.mcc = prov.at("mcc").get<double>();
    ctx.provenance.run_id = prov.at("run_id").get<std::string>();
    return ctx;
}

} // namespace

std::string checkpoint_to_json(const Predictor& model) {
    nlohmann::ordered_json j;
    j["format"] = "tabrobust-checkpoint-v1";
    j["model"] = model.kind();
    j["schema_hash"] = hash_hex(model.schema()->hash);
    j["n_classes"] = model.n_classes();
    j["capabilities"] = {{"input_grad", model.caps().input_grad},
                         {"context", model.caps().context},
                         {"context_grad", model.caps().context_grad},
                         {"trainable", model.caps().trainable}};
    if (model.kind() == "logistic")
        j["payload"] = static_cast<const LogisticClassifier&>(model).payload();
    else if (model.kind() == "mlp")
        j["payload"] = static_cast<const MlpClassifier&>(model).payload();
    else if (model.kind() == "forest")
        j["payload"] = static_cast<const ForestClassifier&>(model).payload();
    else if (model.kind() == "icl")
        j["payload"] = static_cast<const InContextClassifier&>(model).payload();
    else
        throw std::logic_error("unknown model kind " + model.kind());
    if (const ContextState* ctx = model.context())
        j["context"] = context_to_json(*ctx);
    return j.dump(2) + "\n";
}

void save_checkpoint(const std::string& path, const Predictor& model) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write checkpoint: " + path);
    out << checkpoint_to_json(model);
}

PredictorPtr checkpoint_from_json(const std::string& json_text, ParsedSchemaPtr ps) {
    nlohmann::json j = nlohmann::json::parse(json_text, nullptr, false);
    if (j.is_discarded()) throw DataError("checkpoint is not valid JSON");
    if (j.value("format", "") != "tabrobust-checkpoint-v1")
        throw DataError("not a tabrobust checkpoint");
    if (j.at("schema_hash").get<std::string>() != hash_hex(ps->hash))
        throw DataError("checkpoint schema hash does not match the provided schema");
    std::string kind = j.at("model").get<std::string>();
    const auto& payload = j.at("payload");
    PredictorPtr model;
    if (kind == "logistic")
        model = LogisticClassifier::from_payload(ps, payload);
    else if (kind == "mlp")
        model = MlpClassifier::from_payload(ps, payload);
    else if (kind == "forest")
        model = ForestClassifier::from_payload(ps, payload);
    else if (kind == "icl")
        model = InContextClassifier::from_payload(ps, payload);
    else
        throw DataError("unknown model kind in checkpoint: " + kind);
    if (j.contains("context"))
        model->bind_context(context_from_json(j.at("context"), ps->dim()));
    return model;
}

PredictorPtr load_checkpoint(const std::string& path, ParsedSchemaPtr ps) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return checkpoint_from_json(ss.str(), std::move(ps));
}

} // namespace tabrobust
