#include <cmath>

#include "models_impl.hpp"
#include "tabrobust/optimizer.hpp"

namespace tabrobust {

InContextClassifier::InContextClassifier(ParsedSchemaPtr ps, int n_classes, int k, double gamma,
                                         std::vector<double> theta)
    : Predictor(std::move(ps), n_classes,
                {.input_grad = true, .context = true, .context_grad = true, .trainable = true}),
      k_(k), gamma_(gamma), theta_(std::move(theta)) {
    if (theta_.size() != static_cast<std::size_t>(k_) * dim() + 1)
        throw ConfigError("icl parameter vector must have k*D+1 entries");
    if (gamma_ < 0) throw ConfigError("gamma must be >= 0");
}

double InContextClassifier::tau() const { return std::exp(theta_.back()); }

void InContextClassifier::bind_context(ContextState ctx) {
    if (ctx.size() == 0) throw DataError("empty context");
    for (int label : ctx.y)
        if (label < 0 || label >= n_classes_)
            throw DataError("context label outside the model's classes");
    ctx_ = std::move(ctx);
    ctx_scaled_ = view_.scale_rows(ctx_->X);
    refresh_cache();
}

void InContextClassifier::refresh_cache() {
    if (!ctx_) return;
    std::size_t n = ctx_scaled_.rows();
    wc_ = Matrix(n, static_cast<std::size_t>(k_));
    const double* W = theta_.data();
    for (std::size_t i = 0; i < n; ++i) {
        auto c = ctx_scaled_.row(i);
        auto out = wc_.row(i);
        for (int r = 0; r < k_; ++r) {
            double acc = 0.0;
            const double* wr = W + static_cast<std::size_t>(r) * dim();
            for (std::size_t j = 0; j < dim(); ++j) acc += wr[j] * c[j];
            out[static_cast<std::size_t>(r)] = acc;
        }
    }
}

void InContextClassifier::attention(std::span<const double> x_raw, Attention& at) const {
    if (!ctx_) throw DataError("icl model has no bound context");
    std::size_t n = ctx_scaled_.rows();
    at.xs = view_.scale(x_raw);
    at.wx.assign(static_cast<std::size_t>(k_), 0.0);
    const double* W = theta_.data();
    for (int r = 0; r < k_; ++r) {
        double acc = 0.0;
        const double* wr = W + static_cast<std::size_t>(r) * dim();
        for (std::size_t j = 0; j < dim(); ++j) acc += wr[j] * at.xs[j];
        at.wx[static_cast<std::size_t>(r)] = acc;
    }
    double t = tau();
    at.attn.resize(n);
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
        double d = 0.0;
        auto wci = wc_.row(i);
        for (int r = 0; r < k_; ++r) {
            double u = at.wx[static_cast<std::size_t>(r)] - wci[static_cast<std::size_t>(r)];
            d += u * u;
        }
        at.attn[i] = -d / t; // scores, softmaxed in place below
        mx = std::max(mx, at.attn[i]);
    }
    double sum = 0.0;
    for (double& s : at.attn) {
        s = std::exp(s - mx);
        sum += s;
    }
    for (double& s : at.attn) s /= sum;

    at.p.assign(static_cast<std::size_t>(n_classes_), gamma_);
    for (std::size_t i = 0; i < n; ++i) at.p[static_cast<std::size_t>(ctx_->y[i])] += at.attn[i];
    double z = static_cast<double>(n_classes_) * gamma_ + 1.0;
    for (double& v : at.p) v /= z;
}

std::vector<double> InContextClassifier::score_adjoints(const Attention& at, int y) const {
    // dL/ds_l = a_l (q - [y_l = y]) / (gamma + q), L = -log p_y
    std::size_t n = at.attn.size();
    double q = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        if (ctx_->y[i] == y) q += at.attn[i];
    std::vector<double> g(n);
    for (std::size_t l = 0; l < n; ++l)
        g[l] = at.attn[l] * (q - (ctx_->y[l] == y ? 1.0 : 0.0)) / (gamma_ + q);
    return g;
}

std::vector<double> InContextClassifier::predict_row_impl(std::span<const double> x_raw) const {
    Attention at;
    attention(x_raw, at);
    return at.p;
}

std::vector<double> InContextClassifier::input_grad_impl(std::span<const double> x_raw,
                                                         int y) const {
    Attention at;
    attention(x_raw, at);
    auto g = score_adjoints(at, y);
    std::size_t n = at.attn.size();
    double t = tau();
    // m = sum_l g_l u_l, then dL/dxhat = (-2/tau) W^T m
    std::vector<double> m(static_cast<std::size_t>(k_), 0.0);
    for (std::size_t l = 0; l < n; ++l) {
        auto wcl = wc_.row(l);
        for (int r = 0; r < k_; ++r)
            m[static_cast<std::size_t>(r)] +=
                g[l] * (at.wx[static_cast<std::size_t>(r)] - wcl[static_cast<std::size_t>(r)]);
    }
    std::vector<double> dx(dim(), 0.0);
    const double* W = theta_.data();
    for (int r = 0; r < k_; ++r) {
        double coeff = -2.0 / t * m[static_cast<std::size_t>(r)];
        const double* wr = W + static_cast<std::size_t>(r) * dim();
        for (std::size_t j = 0; j < dim(); ++j) dx[j] += coeff * wr[j];
    }
    return dx;
}

Matrix InContextClassifier::context_grad_impl(std::span<const double> x_raw, int y) const {
    Attention at;
    attention(x_raw, at);
    auto g = score_adjoints(at, y);
    std::size_t n = at.attn.size();
    double t = tau();
    Matrix dc(n, dim());
    const double* W = theta_.data();
    for (std::size_t l = 0; l < n; ++l) {
        auto wcl = wc_.row(l);
        auto out = dc.row(l);
        double coeff = 2.0 * g[l] / t;
        for (int r = 0; r < k_; ++r) {
            double ur = at.wx[static_cast<std::size_t>(r)] - wcl[static_cast<std::size_t>(r)];
            const double* wr = W + static_cast<std::size_t>(r) * dim();
            for (std::size_t j = 0; j < dim(); ++j) out[j] += coeff * ur * wr[j];
        }
    }
    return dc;
}

void InContextClassifier::param_grad_accum(std::span<const double> x_raw, int y, double w,
                                           std::span<double> gout) const {
    Attention at;
    attention(x_raw, at);
    auto g = score_adjoints(at, y);
    std::size_t n = at.attn.size();
    double t = tau();
    double drho = 0.0;
    for (std::size_t l = 0; l < n; ++l) {
        auto wcl = wc_.row(l);
        auto cl = ctx_scaled_.row(l);
        double coeff = -2.0 * g[l] / t;
        double d = 0.0;
        for (int r = 0; r < k_; ++r) {
            double ur = at.wx[static_cast<std::size_t>(r)] - wcl[static_cast<std::size_t>(r)];
            d += ur * ur;
            double* grow = gout.data() + static_cast<std::size_t>(r) * dim();
            for (std::size_t j = 0; j < dim(); ++j)
                grow[j] += w * coeff * ur * (at.xs[j] - cl[j]);
        }
        drho += g[l] * d / t; // ds_l/drho = d_l / tau
    }
    gout[static_cast<std::size_t>(k_) * dim()] += w * drho;
}

nlohmann::ordered_json InContextClassifier::payload() const {
    return {{"n_classes", n_classes_}, {"k", k_}, {"gamma", gamma_}, {"theta", theta_}};
}

std::shared_ptr<InContextClassifier> InContextClassifier::from_payload(ParsedSchemaPtr ps,
                                                                       const nlohmann::json& j) {
    return std::make_shared<InContextClassifier>(
        std::move(ps), j.at("n_classes").get<int>(), j.at("k").get<int>(),
        j.at("gamma").get<double>(), j.at("theta").get<std::vector<double>>());
}

PredictorPtr fit_icl(const Dataset& train, const IclConfig& cfg) {
    ContextState ctx;
    ctx.X = train.X;
    ctx.y = train.y;
    ctx.source_rows.resize(train.rows());
    for (std::size_t i = 0; i < train.rows(); ++i) ctx.source_rows[i] = static_cast<int>(i);
    ctx.provenance.kind = ContextProvenance::FullTrain;
    return fit_icl(train, cfg, std::move(ctx));
}

PredictorPtr fit_icl(const Dataset& train, const IclConfig& cfg, ContextState context) {
    if (train.rows() == 0) throw DataError("empty training set");
    bool multi = false;
    for (int v : train.y)
        if (v != train.y[0]) multi = true;
    if (!multi) throw DataError("degenerate single-class training set");
    int n_split = cfg.n_split;
    if (n_split < 2 || train.rows() < static_cast<std::size_t>(n_split))
        throw ConfigError("icl fit needs n_split >= 2 and at least n_split rows");

    int k = cfg.k > 0 ? cfg.k : std::min<int>(16, static_cast<int>(train.dim()));
    std::vector<double> theta(static_cast<std::size_t>(k) * train.dim() + 1);
    Rng rng(mix_seed(cfg.seed, 0x1c1));
    double scale = 1.0 / std::sqrt(static_cast<double>(train.dim()));
    for (std::size_t i = 0; i + 1 < theta.size(); ++i) theta[i] = scale * rng.normal();
    theta.back() = std::log(cfg.tau_init);

    auto model = std::make_shared<InContextClassifier>(train.ps, train.n_classes, k, cfg.gamma,
                                                       std::move(theta));
    auto& params = model->params();
    AdamW opt(params.size(), cfg.lr);
    std::vector<double> g(params.size());

    // pseudo-context / pseudo-query training on rotating fold splits
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        auto folds = split_folds(static_cast<int>(train.rows()), n_split,
                                 mix_seed(cfg.seed, 0xe90c + static_cast<std::uint64_t>(epoch)));
        for (const auto& fold : folds) {
            std::vector<int> others;
            for (const auto& other : folds)
                if (&other != &fold) others.insert(others.end(), other.begin(), other.end());
            Dataset pctx = train.subset(others);
            ContextState pseudo;
            pseudo.X = std::move(pctx.X);
            pseudo.y = std::move(pctx.y);
            model->bind_context(std::move(pseudo));

            std::fill(g.begin(), g.end(), 0.0);
            double inv = 1.0 / static_cast<double>(fold.size());
            for (int r : fold)
                model->param_grad_accum(train.X.row(static_cast<std::size_t>(r)),
                                        train.y[static_cast<std::size_t>(r)], inv, g);
            opt.step(params, g);
            model->params_updated();
        }
    }
    model->bind_context(std::move(context));
    return model;
}

} // namespace tabrobust
