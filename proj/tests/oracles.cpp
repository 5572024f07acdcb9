#include "oracles.hpp"

#include <cmath>

namespace oracles {

std::vector<double> finite_diff(const std::function<double(std::span<const double>)>& f,
                                std::vector<double> x, double h) {
    std::vector<double> g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        double keep = x[i];
        x[i] = keep + h;
        double up = f(x);
        x[i] = keep - h;
        double down = f(x);
        x[i] = keep;
        g[i] = (up - down) / (2.0 * h);
    }
    return g;
}

double grad_rel_err(std::span<const double> analytic, std::span<const double> numeric) {
    double worst = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        double denom = std::max({1.0, std::abs(analytic[i]), std::abs(numeric[i])});
        worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / denom);
    }
    return worst;
}

std::vector<double> random_box_point(const tabrobust::FeatureSchema& schema, tabrobust::Rng& rng,
                                     bool snap_discrete) {
    std::vector<double> x(schema.dim());
    for (std::size_t i = 0; i < schema.dim(); ++i) {
        const auto& f = schema.features[i];
        double v = rng.uniform(f.lower, f.upper);
        if (snap_discrete && f.kind != tabrobust::FeatureKind::Continuous)
            v = std::round(v);
        x[i] = v;
    }
    return x;
}

BruteMetrics brute_metrics(std::span<const int> y, std::span<const double> scores) {
    BruteMetrics m;
    for (std::size_t i = 0; i < y.size(); ++i) {
        bool pred = scores[i] >= 0.5;
        bool pos = y[i] == 1;
        if (pos && pred) ++m.tp;
        else if (pos && !pred) ++m.fn;
        else if (!pos && pred) ++m.fp;
        else ++m.tn;
    }
    auto ratio = [](double num, double den) { return den == 0 ? 0.0 : num / den; };
    m.precision = ratio(m.tp, m.tp + m.fp);
    m.recall = ratio(m.tp, m.tp + m.fn);
    m.f1 = ratio(2.0 * m.tp, 2.0 * m.tp + m.fp + m.fn);
    m.accuracy = ratio(m.tp + m.tn, m.tp + m.tn + m.fp + m.fn);
    double d1 = static_cast<double>(m.tp + m.fp), d2 = static_cast<double>(m.tp + m.fn);
    double d3 = static_cast<double>(m.tn + m.fp), d4 = static_cast<double>(m.tn + m.fn);
    if (d1 == 0 || d2 == 0 || d3 == 0 || d4 == 0)
        m.mcc = 0.0;
    else
        m.mcc = (static_cast<double>(m.tp) * m.tn - static_cast<double>(m.fp) * m.fn) /
                std::sqrt(d1 * d2 * d3 * d4);
    // all-pairs AUROC
    long pos = m.tp + m.fn, neg = m.fp + m.tn;
    if (pos > 0 && neg > 0) {
        double wins = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) {
            if (y[i] != 1) continue;
            for (std::size_t j = 0; j < y.size(); ++j) {
                if (y[j] == 1) continue;
                if (scores[i] > scores[j]) wins += 1.0;
                else if (scores[i] == scores[j]) wins += 0.5;
            }
        }
        m.auroc = wins / (static_cast<double>(pos) * static_cast<double>(neg));
    }
    return m;
}

} // namespace oracles
