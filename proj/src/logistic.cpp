#include <cmath>

#include "models_impl.hpp"

namespace tabrobust {

namespace {
double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }
} // namespace

LogisticClassifier::LogisticClassifier(ParsedSchemaPtr ps, std::vector<double> params_wb)
    : Predictor(std::move(ps), 2, {.input_grad = true, .trainable = true}),
      wb_(std::move(params_wb)) {
    if (wb_.size() != dim() + 1)
        throw ConfigError("logistic parameter vector must have D+1 entries");
}

double LogisticClassifier::margin(std::span<const double> x_raw) const {
    double z = wb_[dim()];
    for (std::size_t i = 0; i < dim(); ++i) z += wb_[i] * view_.scale1(i, x_raw[i]);
    return z;
}

std::vector<double> LogisticClassifier::predict_row_impl(std::span<const double> x_raw) const {
    double p1 = sigmoid(margin(x_raw));
    return {1.0 - p1, p1};
}

std::vector<double> LogisticClassifier::input_grad_impl(std::span<const double> x_raw,
                                                        int y) const {
    double r = sigmoid(margin(x_raw)) - static_cast<double>(y); // dCE/dz
    std::vector<double> g(dim());
    for (std::size_t i = 0; i < dim(); ++i) g[i] = r * wb_[i];
    return g;
}

void LogisticClassifier::param_grad_accum(std::span<const double> x_raw, int y, double w,
                                          std::span<double> g) const {
    double r = sigmoid(margin(x_raw)) - static_cast<double>(y);
    for (std::size_t i = 0; i < dim(); ++i) g[i] += w * r * view_.scale1(i, x_raw[i]);
    g[dim()] += w * r;
}

nlohmann::ordered_json LogisticClassifier::payload() const {
    return {{"wb", wb_}};
}

std::shared_ptr<LogisticClassifier> LogisticClassifier::from_payload(ParsedSchemaPtr ps,
                                                                     const nlohmann::json& j) {
    return std::make_shared<LogisticClassifier>(std::move(ps),
                                                j.at("wb").get<std::vector<double>>());
}

PredictorPtr fit_logistic(const Dataset& train, const LogisticConfig& cfg) {
    if (train.rows() == 0) throw DataError("empty training set");
    bool has0 = false, has1 = false;
    for (int v : train.y) (v == 0 ? has0 : has1) = true;
    if (!has0 || !has1) throw DataError("degenerate single-class training set");
    if (train.n_classes != 2) throw ConfigError("logistic is binary only");

    auto model = std::make_shared<LogisticClassifier>(
        train.ps, std::vector<double>(train.dim() + 1, 0.0));
    Matrix S = model->view().scale_rows(train.X);
    auto& wb = model->params();
    std::vector<double> g(wb.size());
    double inv_n = 1.0 / static_cast<double>(train.rows());
    for (int it = 0; it < cfg.iterations; ++it) {
        std::fill(g.begin(), g.end(), 0.0);
        for (std::size_t r = 0; r < train.rows(); ++r) {
            auto s = S.row(r);
            double z = wb[train.dim()];
            for (std::size_t i = 0; i < train.dim(); ++i) z += wb[i] * s[i];
            double res = sigmoid(z) - static_cast<double>(train.y[r]);
            for (std::size_t i = 0; i < train.dim(); ++i) g[i] += res * s[i];
            g[train.dim()] += res;
        }
        for (std::size_t i = 0; i < wb.size(); ++i) wb[i] -= cfg.lr * inv_n * g[i];
    }
    model->params_updated();
    return model;
}

PredictorPtr make_logistic_raw(ParsedSchemaPtr ps, std::span<const double> w_raw, double b_raw) {
    // z = sum w_raw x_raw + b = sum (w_raw * range) s + (b + sum w_raw * lo)
    ScaledView view(ps->schema);
    std::vector<double> wb(ps->dim() + 1, 0.0);
    double b = b_raw;
    for (std::size_t i = 0; i < ps->dim(); ++i) {
        wb[i] = w_raw[i] * view.jacobian(i);
        b += w_raw[i] * view.unscale1(i, 0.0);
    }
    wb[ps->dim()] = b;
    return std::make_shared<LogisticClassifier>(std::move(ps), std::move(wb));
}

} // namespace tabrobust
