#pragma once

#include <memory>
#include <optional>
#include <string>

#include "tabrobust/dataset.hpp"

namespace tabrobust {

struct Capabilities {
    bool input_grad = false;    // loss_grad_input available
    bool context = false;       // conditions on a bound ContextState
    bool context_grad = false;  // loss_grad_context available
    bool trainable = false;     // exposes a flat parameter vector
};

/// Capability-tagged classifier handle. All models take raw-unit rows at the
/// interface and do their math in scaled space; gradients come back in
/// scaled coordinates. Fitted predictors are immutable during inference and
/// safe for concurrent batched prediction; weight updates (AFT) require the
/// exclusive ownership the hardening module enforces.
class Predictor {
public:
    virtual ~Predictor() = default;

    const Capabilities& caps() const { return caps_; }
    std::size_t dim() const { return ps_->dim(); }
    int n_classes() const { return n_classes_; }
    const ParsedSchemaPtr& schema() const { return ps_; }
    const ScaledView& view() const { return view_; }

    virtual std::string kind() const = 0;
    std::string model_id() const { return kind() + "-" + hash_hex(theta_hash()); }

    /// Class probabilities (>= 0, summing to 1) for one raw-unit row.
    std::vector<double> predict_row(std::span<const double> x_raw) const;
    Matrix predict(const Matrix& X_raw) const; // batched, sample-parallel
    int predict_label(std::span<const double> x_raw) const;

    double cross_entropy(std::span<const double> x_raw, int y) const;

    /// d CE(h(x), y) / d x_scaled. CapabilityError unless caps().input_grad.
    std::vector<double> loss_grad_input(std::span<const double> x_raw, int y) const;

    /// d CE(h(x), y) / d scaled context rows, n x D.
    Matrix loss_grad_context(std::span<const double> x_raw, int y) const;

    virtual void bind_context(ContextState ctx);
    virtual const ContextState* context() const { return nullptr; }

    /// Flat trainable parameter vector; call params_updated() after writes.
    virtual std::vector<double>& params();
    const std::vector<double>& params() const;
    virtual void params_updated() {}

    /// g += w * d CE(h(x), y) / d theta.
    virtual void param_grad_accum(std::span<const double> x_raw, int y, double w,
                                  std::span<double> g) const;

    std::uint64_t theta_hash() const;

protected:
    Predictor(ParsedSchemaPtr ps, int n_classes, Capabilities caps);

    void check_arity(std::span<const double> x) const;

    virtual std::vector<double> predict_row_impl(std::span<const double> x_raw) const = 0;
    virtual std::vector<double> input_grad_impl(std::span<const double>, int) const;
    virtual Matrix context_grad_impl(std::span<const double>, int) const;
    virtual std::uint64_t theta_hash_impl() const = 0;

    ParsedSchemaPtr ps_;
    ScaledView view_;
    Capabilities caps_;
    int n_classes_;
};

using PredictorPtr = std::shared_ptr<Predictor>;

// ---- model zoo ---------------------------------------------------------

struct LogisticConfig {
    double lr = 0.5;
    int iterations = 600;
    std::uint64_t seed = 0; // unused (deterministic zero init); kept for manifest symmetry
};

struct MlpConfig {
    std::vector<int> hidden{64, 64};
    std::string activation = "relu"; // or "tanh"
    double lr = 1e-2;
    int epochs = 200;
    std::uint64_t seed = 0;
};

struct ForestConfig {
    int n_trees = 50;
    int max_depth = 6;
    int min_leaf = 2;
    std::uint64_t seed = 0;
};

struct IclConfig {
    int k = 0;       // embedding dim; 0 = min(16, D)
    double gamma = 1e-3;
    double tau_init = 1.0;
    double lr = 5e-2;
    int epochs = 30;
    int n_split = 5;
    std::uint64_t seed = 0;
};

PredictorPtr fit_logistic(const Dataset& train, const LogisticConfig& cfg);
PredictorPtr fit_mlp(const Dataset& train, const MlpConfig& cfg);
PredictorPtr fit_forest(const Dataset& train, const ForestConfig& cfg);
/// Fits W and the temperature on pseudo-context/pseudo-query fold splits,
/// then binds the full training set as the context.
PredictorPtr fit_icl(const Dataset& train, const IclConfig& cfg);
PredictorPtr fit_icl(const Dataset& train, const IclConfig& cfg, ContextState context);

/// Hand-constructed logistic over raw-unit weights (tests, closed forms).
PredictorPtr make_logistic_raw(ParsedSchemaPtr ps, std::span<const double> w_raw, double b_raw);

// ---- checkpoints ---------------------------------------------------------

/// Versioned JSON container with schema hash, capability flags, parameters
/// and (for in-context models) the bound context and its provenance.
std::string checkpoint_to_json(const Predictor& model);
void save_checkpoint(const std::string& path, const Predictor& model);
PredictorPtr checkpoint_from_json(const std::string& json_text, ParsedSchemaPtr ps);
PredictorPtr load_checkpoint(const std::string& path, ParsedSchemaPtr ps);

} // namespace tabrobust
