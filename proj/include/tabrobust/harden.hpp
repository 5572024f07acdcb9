#pragma once

#include <limits>

#include "tabrobust/attack.hpp"

namespace tabrobust {

enum class HardenMode { Aft, Aicl };
enum class InnerAttack { Capgd, Caa, Identity };

struct HardeningConfig {
    HardenMode mode = HardenMode::Aicl;
    double defense_epsilon = 0.3;
    InnerAttack inner = InnerAttack::Capgd;
    int n_split = 5;
    int max_epochs = 20;

    // AFT weight updates: adaptive moments with decoupled weight decay
    double lr = 1e-6;
    double weight_decay = 0.01;

    // AICL context step sizes eta_t = eta0 / (1 + t)^alpha scale the inner
    // attack radius; the floor keeps late-stage attacks non-degenerate
    double eta0 = 1.0;
    double alpha = 0.7;
    double eta_floor_frac = 0.05;
    bool constant_eta = false;

    // acceptance rule: held-out robust loss may never rise at accepted steps
    bool acceptance_rule = false;
    int max_retries = 3;

    enum class OnFail { KeepClean, KeepPrior } on_fail = OnFail::KeepClean;

    int patience = 3; // epochs without F_val improvement before stopping

    // empirical robust loss: configured attack at defense epsilon on a fixed
    // held-out slice, and finite-difference probes of its context gradient
    int val_slice = 128;
    int probe_coords = 64;
    double probe_h = 1e-3;
    int probe_every = 1; // folds between probe evaluations; 0 disables

    AttackBudget inner_budget; // counts for the inner attack; epsilon is overridden
    std::uint64_t seed = 0;

    void validate() const;
};

struct TraceRow {
    int t = 0;          // outer iteration (one fold replacement)
    double drift = 0.0; // Frobenius move of the context (or theta) in scaled space
    double f_val = 0.0; // empirical robust loss on the held-out slice
    double g_hat = std::numeric_limits<double>::quiet_NaN(); // probe gradient norm
    double eta = 0.0;   // schedule value before the floor clamp
    int retries = 0;
    bool accepted = true;
};

struct ConvergenceTrace {
    std::vector<TraceRow> rows;
    std::string to_csv() const; // t,drift,f_val,g_hat,eta_t,retries,accepted
};

struct HardenedArtifact {
    PredictorPtr model;
    std::optional<ContextState> clean_context;    // AICL: the paired clean copy
    std::optional<ContextState> hardened_context; // AICL: what got bound
    ConvergenceTrace trace;
    int epochs_run = 0;
};

/// Madry-style fine-tuning with rotating fold splits: each fold becomes the
/// adversarial pseudo-target set once per epoch, the others act as the
/// pseudo-context; one optimizer step per fold on a 50/50 clean+adversarial
/// batch. The bound context is bit-identical afterwards.
HardenedArtifact harden_aft(PredictorPtr model, const Dataset& train, const HardeningConfig& cfg);

/// Context replacement with frozen weights: per fold, attack the clean copy
/// of the fold at eta_t-scaled defense epsilon against the adversarial copy
/// of the rest, and write back the constraint-valid successes. Labels are
/// never touched; rows that resist attack keep their clean values.
HardenedArtifact harden_aicl(PredictorPtr model, const Dataset& train, const HardeningConfig& cfg);

struct ConvergenceSummary {
    double drift_first = 0, drift_last = 0, drift_ratio = 0;
    double ghat_first = std::numeric_limits<double>::quiet_NaN();
    double ghat_last = std::numeric_limits<double>::quiet_NaN();
    bool converging = false;
    std::vector<double> eta;
    std::string to_text() const;
};

/// Trend summary over a trace of >= 10 outer iterations: medians of the
/// first and last five drift values, the probe-gradient trend, the eta
/// sequence, and the drift-ratio convergence flag.
ConvergenceSummary convergence_report(const ConvergenceTrace& trace);

} // namespace tabrobust
