#pragma once

#include "tabrobust/attack.hpp"

namespace tabrobust {

struct MetricPanel {
    std::optional<double> auroc; // absent when y_true is single-class
    double mcc = 0, f1 = 0, accuracy = 0, recall = 0, precision = 0;
    long tp = 0, fp = 0, tn = 0, fn = 0;
    int positive_class = 1;
};

/// Binary panel: threshold 0.5 for the counted metrics; AUROC by trapezoid
/// over the score-sorted ROC with tied scores grouped (equivalently, average
/// ranks). Zero denominators give 0 (recall, precision, F1, MCC).
MetricPanel metric_panel(std::span<const int> y_true, std::span<const double> scores,
                         int positive_class = 1);

enum class AttackSubset { CorrectPositive, AllPositive };

const char* subset_name(AttackSubset s);

/// Rows the attacker targets: positive-class samples, optionally restricted
/// to the ones the model classifies correctly on clean data.
std::vector<int> select_attack_subset(const Predictor& model, const Dataset& data,
                                      AttackSubset mode);

struct RobustAccuracyRecord {
    double value = 0.0; // fraction of attacked samples still classified correctly
    int n = 0;
    int still_correct = 0;
};

RobustAccuracyRecord robust_accuracy(std::span<const AttackOutcome> outcomes);

// ---- transfer matrices ----------------------------------------------------

struct TransferCell {
    double mean = 0.0;
    double half_range = 0.0; // (max - min) / 2 over seeds
    std::vector<double> per_seed;
};

struct TransferMatrix {
    std::vector<std::string> sources; // "model-id/attack"
    std::vector<std::string> targets;
    std::vector<std::vector<TransferCell>> cells; // [source][target]
    std::string to_markdown() const;
    std::string to_csv() const;
};

/// Replays each campaign on each target and aggregates robust accuracy by
/// (source, attack) across seeds. All inputs must share one schema hash.
TransferMatrix transfer_matrix(std::span<const Campaign> campaigns,
                               std::span<const PredictorPtr> targets);

// ---- sweeps ---------------------------------------------------------------

struct SweepPoint {
    double parameter = 0.0;
    std::string model;
    std::uint64_t seed = 0;
    double robust_accuracy = 0.0;
};

struct SweepReport {
    std::string axis;
    std::vector<SweepPoint> points;
    bool single_value = false; // flat report, flagged
    std::string to_csv() const;      // tidy: parameter,model,seed,robust_accuracy
    std::string to_markdown() const; // per-model mean +- half-range rows
};

SweepReport sweep_report(const std::string& axis, std::vector<SweepPoint> points);

} // namespace tabrobust
