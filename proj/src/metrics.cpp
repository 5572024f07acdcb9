#include "tabrobust/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

namespace tabrobust {

MetricPanel metric_panel(std::span<const int> y_true, std::span<const double> scores,
                         int positive_class) {
    if (y_true.empty() || y_true.size() != scores.size())
        throw ConfigError("metric_panel needs equally sized, non-empty labels and scores");
    MetricPanel m;
    m.positive_class = positive_class;
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        bool pos = y_true[i] == positive_class;
        bool pred = scores[i] >= 0.5;
        if (pos && pred) ++m.tp;
        else if (pos) ++m.fn;
        else if (pred) ++m.fp;
        else ++m.tn;
    }
    auto ratio = [](double num, double den) { return den == 0.0 ? 0.0 : num / den; };
    m.precision = ratio(static_cast<double>(m.tp), static_cast<double>(m.tp + m.fp));
    m.recall = ratio(static_cast<double>(m.tp), static_cast<double>(m.tp + m.fn));
    m.f1 = ratio(2.0 * static_cast<double>(m.tp),
                 static_cast<double>(2 * m.tp + m.fp + m.fn));
    m.accuracy = ratio(static_cast<double>(m.tp + m.tn),
                       static_cast<double>(m.tp + m.tn + m.fp + m.fn));
    double d1 = static_cast<double>(m.tp + m.fp), d2 = static_cast<double>(m.tp + m.fn);
    double d3 = static_cast<double>(m.tn + m.fp), d4 = static_cast<double>(m.tn + m.fn);
    m.mcc = (d1 == 0 || d2 == 0 || d3 == 0 || d4 == 0)
                ? 0.0
                : (static_cast<double>(m.tp) * static_cast<double>(m.tn) -
                   static_cast<double>(m.fp) * static_cast<double>(m.fn)) /
                      std::sqrt(d1 * d2 * d3 * d4);

    long pos_n = m.tp + m.fn, neg_n = m.fp + m.tn;
    if (pos_n > 0 && neg_n > 0) {
        // descending scores; ties collapse into one ROC segment, so the
        // trapezoid credits them half, matching the rank-sum identity
        std::vector<std::size_t> order(y_true.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
        double area = 0.0, tp_cum = 0.0, fp_cum = 0.0;
        std::size_t i = 0;
        while (i < order.size()) {
            std::size_t j = i;
            long dtp = 0, dfp = 0;
            while (j < order.size() && scores[order[j]] == scores[order[i]]) {
                (y_true[order[j]] == positive_class ? dtp : dfp)++;
                ++j;
            }
            area += static_cast<double>(dfp) * (tp_cum + 0.5 * static_cast<double>(dtp));
            tp_cum += static_cast<double>(dtp);
            fp_cum += static_cast<double>(dfp);
            i = j;
        }
        m.auroc = area / (static_cast<double>(pos_n) * static_cast<double>(neg_n));
    }
    return m;
}

const char* subset_name(AttackSubset s) {
    return s == AttackSubset::CorrectPositive ? "correct-positive" : "all-positive";
}

std::vector<int> select_attack_subset(const Predictor& model, const Dataset& data,
                                      AttackSubset mode) {
    std::vector<int> rows;
    for (std::size_t r = 0; r < data.rows(); ++r) {
        if (data.y[r] != data.positive_class) continue;
        if (mode == AttackSubset::CorrectPositive &&
            model.predict_label(data.X.row(r)) != data.y[r])
            continue;
        rows.push_back(static_cast<int>(r));
    }
    return rows;
}

RobustAccuracyRecord robust_accuracy(std::span<const AttackOutcome> outcomes) {
    if (outcomes.empty()) throw DataError("robust_accuracy over an empty outcome set");
    RobustAccuracyRecord rec;
    rec.n = static_cast<int>(outcomes.size());
    for (const auto& o : outcomes) rec.still_correct += o.success ? 0 : 1;
    rec.value = static_cast<double>(rec.still_correct) / static_cast<double>(rec.n);
    return rec;
}

// ---- transfer matrices ----------------------------------------------------

TransferMatrix transfer_matrix(std::span<const Campaign> campaigns,
                               std::span<const PredictorPtr> targets) {
    if (campaigns.empty() || targets.empty())
        throw DataError("transfer_matrix needs campaigns and targets");
    const std::string schema_hash = campaigns[0].header.schema_hash;
    for (const auto& c : campaigns)
        if (c.header.schema_hash != schema_hash)
            throw DataError("campaigns span different schemas");
    for (const auto& t : targets)
        if (hash_hex(t->schema()->hash) != schema_hash)
            throw DataError("target schema hash differs from the campaigns'");

    TransferMatrix m;
    std::map<std::string, std::vector<const Campaign*>> by_source;
    for (const auto& c : campaigns)
        by_source[c.header.model_id + "/" + c.header.attack].push_back(&c);
    for (const auto& [label, _] : by_source) m.sources.push_back(label);
    for (const auto& t : targets) m.targets.push_back(t->model_id());

    m.cells.resize(m.sources.size(), std::vector<TransferCell>(targets.size()));
    for (std::size_t si = 0; si < m.sources.size(); ++si) {
        const auto& group = by_source[m.sources[si]];
        for (std::size_t ti = 0; ti < targets.size(); ++ti) {
            TransferCell& cell = m.cells[si][ti];
            for (const Campaign* c : group) {
                auto replayed = replay(c->outcomes, *targets[ti], c->header.budget);
                cell.per_seed.push_back(robust_accuracy(replayed).value);
            }
            double lo = *std::min_element(cell.per_seed.begin(), cell.per_seed.end());
            double hi = *std::max_element(cell.per_seed.begin(), cell.per_seed.end());
            cell.mean = std::accumulate(cell.per_seed.begin(), cell.per_seed.end(), 0.0) /
                        static_cast<double>(cell.per_seed.size());
            cell.half_range = 0.5 * (hi - lo);
        }
    }
    return m;
}

namespace {
std::string fmt3(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f", v);
    return buf;
}
} // namespace

std::string TransferMatrix::to_markdown() const {
    std::string out = "| source \\ target |";
    for (const auto& t : targets) out += " " + t + " |";
    out += "\n|---|";
    for (std::size_t i = 0; i < targets.size(); ++i) out += "---|";
    out += "\n";
    for (std::size_t s = 0; s < sources.size(); ++s) {
        out += "| " + sources[s] + " |";
        for (std::size_t t = 0; t < targets.size(); ++t) {
            const TransferCell& c = cells[s][t];
            out += " " + fmt3(c.mean);
            if (c.per_seed.size() > 1) out += " ± " + fmt3(c.half_range);
            out += " |";
        }
        out += "\n";
    }
    return out;
}

std::string TransferMatrix::to_csv() const {
    std::string out = "source,target,mean,half_range,n_seeds\n";
    for (std::size_t s = 0; s < sources.size(); ++s)
        for (std::size_t t = 0; t < targets.size(); ++t) {
            const TransferCell& c = cells[s][t];
            out += sources[s] + "," + targets[t] + "," + format_double(c.mean) + "," +
                   format_double(c.half_range) + "," + std::to_string(c.per_seed.size()) + "\n";
        }
    return out;
}

// ---- sweeps ---------------------------------------------------------------

SweepReport sweep_report(const std::string& axis, std::vector<SweepPoint> points) {
    if (points.empty()) throw DataError("sweep_report without points");
    SweepReport rep;
    rep.axis = axis;
    std::stable_sort(points.begin(), points.end(), [](const SweepPoint& a, const SweepPoint& b) {
        if (a.model != b.model) return a.model < b.model;
        if (a.parameter != b.parameter) return a.parameter < b.parameter;
        return a.seed < b.seed;
    });
    std::set<double> distinct;
    for (const auto& p : points) distinct.insert(p.parameter);
    rep.single_value = distinct.size() < 2;
    rep.points = std::move(points);
    return rep;
}

std::string SweepReport::to_csv() const {
    std::string out = axis + ",model,seed,robust_accuracy\n";
    for (const auto& p : points)
        out += format_double(p.parameter) + "," + p.model + "," + std::to_string(p.seed) + "," +
               format_double(p.robust_accuracy) + "\n";
    return out;
}

std::string SweepReport::to_markdown() const {
    // per (model, parameter): mean +- half-range over seeds
    std::map<std::string, std::map<double, std::vector<double>>> agg;
    for (const auto& p : points) agg[p.model][p.parameter].push_back(p.robust_accuracy);
    std::string out = "| model | " + axis + " | robust accuracy |\n|---|---|---|\n";
    for (const auto& [model, by_param] : agg) {
        for (const auto& [param, vals] : by_param) {
            double mean = std::accumulate(vals.begin(), vals.end(), 0.0) /
                          static_cast<double>(vals.size());
            double lo = *std::min_element(vals.begin(), vals.end());
            double hi = *std::max_element(vals.begin(), vals.end());
            out += "| " + model + " | " + format_double(param) + " | " + fmt3(mean);
            if (vals.size() > 1) out += " ± " + fmt3(0.5 * (hi - lo));
            out += " |\n";
        }
    }
    if (single_value) out += "\n(warning: single parameter value, the curve is flat)\n";
    return out;
}

} // namespace tabrobust
