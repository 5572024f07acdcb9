#include <cmath>

#include "models_impl.hpp"
#include "tabrobust/optimizer.hpp"

namespace tabrobust {

namespace {

void softmax_inplace(std::vector<double>& z) {
    double mx = z[0];
    for (double v : z) mx = std::max(mx, v);
    double sum = 0.0;
    for (double& v : z) {
        v = std::exp(v - mx);
        sum += v;
    }
    for (double& v : z) v /= sum;
}

} // namespace

struct MlpClassifier::Trace {
    // act[0] is the scaled input; act[l] the post-activation of layer l;
    // pre[l] the pre-activation of layer l (1-based like act).
    std::vector<std::vector<double>> act;
    std::vector<std::vector<double>> pre;
    std::vector<double> probs;
};

std::size_t MlpClassifier::param_count(std::size_t in, const std::vector<int>& hidden,
                                       int classes) {
    std::size_t n = 0;
    std::size_t prev = in;
    for (int h : hidden) {
        n += prev * static_cast<std::size_t>(h) + static_cast<std::size_t>(h);
        prev = static_cast<std::size_t>(h);
    }
    n += prev * static_cast<std::size_t>(classes) + static_cast<std::size_t>(classes);
    return n;
}

MlpClassifier::MlpClassifier(ParsedSchemaPtr ps, int n_classes, std::vector<int> hidden,
                             bool tanh_act, std::vector<double> flat_params)
    : Predictor(std::move(ps), n_classes, {.input_grad = true, .trainable = true}),
      tanh_(tanh_act), theta_(std::move(flat_params)) {
    sizes_.push_back(static_cast<int>(dim()));
    for (int h : hidden) sizes_.push_back(h);
    sizes_.push_back(n_classes);
    if (theta_.size() != param_count(dim(), hidden, n_classes))
        throw ConfigError("mlp parameter vector has the wrong length");
}

void MlpClassifier::forward(std::span<const double> s, Trace& tr) const {
    std::size_t L = sizes_.size() - 1;
    tr.act.assign(L + 1, {});
    tr.pre.assign(L + 1, {});
    tr.act[0].assign(s.begin(), s.end());
    const double* p = theta_.data();
    for (std::size_t l = 1; l <= L; ++l) {
        auto in = static_cast<std::size_t>(sizes_[l - 1]);
        auto out = static_cast<std::size_t>(sizes_[l]);
        const double* W = p;
        const double* b = p + in * out;
        p += in * out + out;
        auto& pre = tr.pre[l];
        pre.resize(out);
        for (std::size_t j = 0; j < out; ++j) {
            double z = b[j];
            const double* wr = W + j * in;
            for (std::size_t i = 0; i < in; ++i) z += wr[i] * tr.act[l - 1][i];
            pre[j] = z;
        }
        if (l == L) {
            tr.probs = pre;
            softmax_inplace(tr.probs);
            tr.act[l] = tr.probs;
        } else {
            auto& a = tr.act[l];
            a.resize(out);
            for (std::size_t j = 0; j < out; ++j)
                a[j] = tanh_ ? std::tanh(pre[j]) : std::max(0.0, pre[j]);
        }
    }
}

void MlpClassifier::backward(const Trace& tr, int y, double w, std::span<double> dx,
                             std::span<double> dtheta) const {
    std::size_t L = sizes_.size() - 1;
    std::vector<double> delta = tr.probs; // dCE/dlogits = p - onehot
    delta[static_cast<std::size_t>(y)] -= 1.0;

    // walk layers backwards; param block offsets are recomputed per layer
    std::vector<std::size_t> offsets(L + 1, 0);
    {
        std::size_t off = 0;
        for (std::size_t l = 1; l <= L; ++l) {
            offsets[l] = off;
            off += static_cast<std::size_t>(sizes_[l - 1]) * static_cast<std::size_t>(sizes_[l]) +
                   static_cast<std::size_t>(sizes_[l]);
        }
    }
    for (std::size_t l = L;; --l) {
        auto in = static_cast<std::size_t>(sizes_[l - 1]);
        auto out = static_cast<std::size_t>(sizes_[l]);
        const double* W = theta_.data() + offsets[l];
        if (!dtheta.empty()) {
            double* dW = dtheta.data() + offsets[l];
            double* db = dW + in * out;
            for (std::size_t j = 0; j < out; ++j) {
                double d = w * delta[j];
                double* dwr = dW + j * in;
                for (std::size_t i = 0; i < in; ++i) dwr[i] += d * tr.act[l - 1][i];
                db[j] += d;
            }
        }
        if (l == 1) {
            if (!dx.empty()) {
                for (std::size_t i = 0; i < in; ++i) {
                    double acc = 0.0;
                    for (std::size_t j = 0; j < out; ++j) acc += W[j * in + i] * delta[j];
                    dx[i] += w * acc;
                }
            }
            break;
        }
        std::vector<double> prev(in, 0.0);
        for (std::size_t i = 0; i < in; ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < out; ++j) acc += W[j * in + i] * delta[j];
            double pre = tr.pre[l - 1][i];
            double dact = tanh_ ? 1.0 - std::tanh(pre) * std::tanh(pre) : (pre > 0 ? 1.0 : 0.0);
            prev[i] = acc * dact;
        }
        delta = std::move(prev);
    }
}

std::vector<double> MlpClassifier::predict_row_impl(std::span<const double> x_raw) const {
    Trace tr;
    forward(view_.scale(x_raw), tr);
    return tr.probs;
}

std::vector<double> MlpClassifier::input_grad_impl(std::span<const double> x_raw, int y) const {
    Trace tr;
    forward(view_.scale(x_raw), tr);
    std::vector<double> dx(dim(), 0.0);
    backward(tr, y, 1.0, dx, {});
    return dx;
}

void MlpClassifier::param_grad_accum(std::span<const double> x_raw, int y, double w,
                                     std::span<double> g) const {
    Trace tr;
    forward(view_.scale(x_raw), tr);
    backward(tr, y, w, {}, g);
}

nlohmann::ordered_json MlpClassifier::payload() const {
    std::vector<int> hidden(sizes_.begin() + 1, sizes_.end() - 1);
    return {{"hidden", hidden}, {"activation", tanh_ ? "tanh" : "relu"}, {"theta", theta_}};
}

std::shared_ptr<MlpClassifier> MlpClassifier::from_payload(ParsedSchemaPtr ps,
                                                           const nlohmann::json& j) {
    // n_classes recovered from the parameter count bookkeeping below
    auto hidden = j.at("hidden").get<std::vector<int>>();
    auto theta = j.at("theta").get<std::vector<double>>();
    bool tanh_act = j.at("activation").get<std::string>() == "tanh";
    // classes = remaining params / (last_hidden + 1)
    std::size_t prev = ps->dim();
    std::size_t used = 0;
    for (int h : hidden) {
        used += prev * static_cast<std::size_t>(h) + static_cast<std::size_t>(h);
        prev = static_cast<std::size_t>(h);
    }
    auto classes = static_cast<int>((theta.size() - used) / (prev + 1));
    return std::make_shared<MlpClassifier>(std::move(ps), classes, hidden, tanh_act,
                                           std::move(theta));
}

PredictorPtr fit_mlp(const Dataset& train, const MlpConfig& cfg) {
    if (train.rows() == 0) throw DataError("empty training set");
    bool multi = false;
    for (int v : train.y)
        if (v != train.y[0]) multi = true;
    if (!multi) throw DataError("degenerate single-class training set");
    if (cfg.activation != "relu" && cfg.activation != "tanh")
        throw ConfigError("mlp activation must be relu or tanh");

    bool tanh_act = cfg.activation == "tanh";
    std::size_t n_params = MlpClassifier::param_count(train.dim(), cfg.hidden, train.n_classes);
    std::vector<double> theta(n_params);
    {
        // Glorot-style normal init, seeded
        Rng rng(mix_seed(cfg.seed, 0x317a11));
        std::vector<int> sizes{static_cast<int>(train.dim())};
        for (int h : cfg.hidden) sizes.push_back(h);
        sizes.push_back(train.n_classes);
        std::size_t off = 0;
        for (std::size_t l = 1; l < sizes.size(); ++l) {
            auto in = static_cast<std::size_t>(sizes[l - 1]);
            auto out = static_cast<std::size_t>(sizes[l]);
            double scale = std::sqrt(2.0 / static_cast<double>(in + out));
            for (std::size_t i = 0; i < in * out; ++i) theta[off + i] = scale * rng.normal();
            off += in * out;
            for (std::size_t i = 0; i < out; ++i) theta[off + i] = 0.0;
            off += out;
        }
    }
    auto model = std::make_shared<MlpClassifier>(train.ps, train.n_classes, cfg.hidden, tanh_act,
                                                 std::move(theta));
    auto& params = model->params();
    AdamW opt(params.size(), cfg.lr);
    std::vector<double> g(params.size());
    double inv_n = 1.0 / static_cast<double>(train.rows());
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::fill(g.begin(), g.end(), 0.0);
        for (std::size_t r = 0; r < train.rows(); ++r)
            model->param_grad_accum(train.X.row(r), train.y[r], inv_n, g);
        opt.step(params, g);
    }
    model->params_updated();
    return model;
}

} // namespace tabrobust
