#pragma once

// Concrete model classes, internal to the library. The public surface is the
// Predictor interface plus the fit_* / checkpoint functions in model.hpp.

#include <json.hpp>

#include "tabrobust/model.hpp"

namespace tabrobust {

class LogisticClassifier final : public Predictor {
public:
    LogisticClassifier(ParsedSchemaPtr ps, std::vector<double> params_wb);

    std::string kind() const override { return "logistic"; }
    std::vector<double>& params() override { return wb_; }
    void param_grad_accum(std::span<const double> x_raw, int y, double w,
                          std::span<double> g) const override;

    nlohmann::ordered_json payload() const;
    static std::shared_ptr<LogisticClassifier> from_payload(ParsedSchemaPtr ps,
                                                            const nlohmann::json& j);

protected:
    std::vector<double> predict_row_impl(std::span<const double> x_raw) const override;
    std::vector<double> input_grad_impl(std::span<const double> x_raw, int y) const override;
    std::uint64_t theta_hash_impl() const override { return fnv1a(wb_); }

private:
    double margin(std::span<const double> x_raw) const; // w . s + b
    std::vector<double> wb_;                            // scaled-space w (D) then b
};

class MlpClassifier final : public Predictor {
public:
    MlpClassifier(ParsedSchemaPtr ps, int n_classes, std::vector<int> hidden, bool tanh_act,
                  std::vector<double> flat_params);

    std::string kind() const override { return "mlp"; }
    std::vector<double>& params() override { return theta_; }
    void param_grad_accum(std::span<const double> x_raw, int y, double w,
                          std::span<double> g) const override;

    static std::size_t param_count(std::size_t in, const std::vector<int>& hidden, int classes);

    nlohmann::ordered_json payload() const;
    static std::shared_ptr<MlpClassifier> from_payload(ParsedSchemaPtr ps,
                                                       const nlohmann::json& j);

protected:
    std::vector<double> predict_row_impl(std::span<const double> x_raw) const override;
    std::vector<double> input_grad_impl(std::span<const double> x_raw, int y) const override;
    std::uint64_t theta_hash_impl() const override { return fnv1a(theta_); }

private:
    struct Trace; // forward pass activations, for backprop
    void forward(std::span<const double> s, Trace& tr) const;
    // backprop into dx (scaled) and/or dtheta; either may be null
    void backward(const Trace& tr, int y, double w, std::span<double> dx,
                  std::span<double> dtheta) const;

    std::vector<int> sizes_; // [D, hidden..., C]
    bool tanh_ = false;
    std::vector<double> theta_;
};

class ForestClassifier final : public Predictor {
public:
    struct Node {
        int feat = -1;       // -1: leaf
        double thr = 0.0;    // scaled-space threshold, go left when s <= thr
        int left = -1, right = -1;
        int vote = 0;        // leaf: majority class
    };
    struct Tree {
        std::vector<Node> nodes;
    };

    ForestClassifier(ParsedSchemaPtr ps, int n_classes, std::vector<Tree> trees);

    std::string kind() const override { return "forest"; }

    nlohmann::ordered_json payload() const;
    static std::shared_ptr<ForestClassifier> from_payload(ParsedSchemaPtr ps,
                                                          const nlohmann::json& j);

protected:
    std::vector<double> predict_row_impl(std::span<const double> x_raw) const override;
    std::uint64_t theta_hash_impl() const override;

private:
    std::vector<Tree> trees_;
};

/// Learned-metric attention over the bound context: scores
/// s_i = -|W xhat - W chat_i|^2 / tau, a = softmax(s), and
/// p(j|x) = (gamma + sum_i a_i [y_i = j]) / (C gamma + 1).
class InContextClassifier final : public Predictor {
public:
    InContextClassifier(ParsedSchemaPtr ps, int n_classes, int k, double gamma,
                        std::vector<double> theta /* W (k x D) then log tau */);

    std::string kind() const override { return "icl"; }
    int k() const { return k_; }
    double gamma() const { return gamma_; }
    double tau() const;

    void bind_context(ContextState ctx) override;
    const ContextState* context() const override { return ctx_ ? &*ctx_ : nullptr; }

    std::vector<double>& params() override { return theta_; }
    void params_updated() override { refresh_cache(); }
    void param_grad_accum(std::span<const double> x_raw, int y, double w,
                          std::span<double> g) const override;

    nlohmann::ordered_json payload() const;
    static std::shared_ptr<InContextClassifier> from_payload(ParsedSchemaPtr ps,
                                                             const nlohmann::json& j);

protected:
    std::vector<double> predict_row_impl(std::span<const double> x_raw) const override;
    std::vector<double> input_grad_impl(std::span<const double> x_raw, int y) const override;
    Matrix context_grad_impl(std::span<const double> x_raw, int y) const override;
    std::uint64_t theta_hash_impl() const override { return fnv1a(theta_); }

private:
    struct Attention {
        std::vector<double> xs;   // scaled query
        std::vector<double> wx;   // W xhat (k)
        std::vector<double> attn; // softmax weights (n)
        std::vector<double> p;    // class probabilities
    };
    void attention(std::span<const double> x_raw, Attention& at) const;
    /// dL/ds_l coefficients shared by all gradient paths.
    std::vector<double> score_adjoints(const Attention& at, int y) const;
    void refresh_cache();

    int k_;
    double gamma_;
    std::vector<double> theta_; // W row-major (k x D), then log tau
    std::optional<ContextState> ctx_;
    Matrix ctx_scaled_; // n x D
    Matrix wc_;         // n x k, rows W chat_i
};

} // namespace tabrobust
