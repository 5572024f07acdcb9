#pragma once

// Test-only oracles, kept independent of the implementation paths they audit.

#include <functional>
#include <optional>
#include <vector>

#include "tabrobust/common.hpp"
#include "tabrobust/schema.hpp"

namespace oracles {

/// Central finite differences of f at x, step h per coordinate.
std::vector<double> finite_diff(const std::function<double(std::span<const double>)>& f,
                                std::vector<double> x, double h);

/// Largest relative component error between an analytic gradient and its
/// finite-difference estimate: |a - b| / max(1, |a|, |b|) maximised over i.
double grad_rel_err(std::span<const double> analytic, std::span<const double> numeric);

/// Uniform random point in the schema box (raw units; integers/categoricals
/// land on valid grid values).
std::vector<double> random_box_point(const tabrobust::FeatureSchema& schema, tabrobust::Rng& rng,
                                     bool snap_discrete = true);

/// Direct-formula binary metrics at threshold 0.5, plus all-pairs AUROC
/// (ties counted 1/2). Independent of the library implementations.
struct BruteMetrics {
    long tp = 0, fp = 0, tn = 0, fn = 0;
    double precision = 0, recall = 0, f1 = 0, accuracy = 0, mcc = 0;
    std::optional<double> auroc;
};
BruteMetrics brute_metrics(std::span<const int> y, std::span<const double> scores);

} // namespace oracles
