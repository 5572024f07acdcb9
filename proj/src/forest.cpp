#include <algorithm>
#include <cmath>
#include <numeric>

#include "models_impl.hpp"

namespace tabrobust {

ForestClassifier::ForestClassifier(ParsedSchemaPtr ps, int n_classes, std::vector<Tree> trees)
    : Predictor(std::move(ps), n_classes, {}), trees_(std::move(trees)) {}

std::vector<double> ForestClassifier::predict_row_impl(std::span<const double> x_raw) const {
    auto s = view_.scale(x_raw);
    std::vector<double> votes(static_cast<std::size_t>(n_classes_), 0.0);
    for (const Tree& t : trees_) {
        int i = 0;
        while (t.nodes[static_cast<std::size_t>(i)].feat >= 0) {
            const Node& nd = t.nodes[static_cast<std::size_t>(i)];
            i = s[static_cast<std::size_t>(nd.feat)] <= nd.thr ? nd.left : nd.right;
        }
        votes[static_cast<std::size_t>(t.nodes[static_cast<std::size_t>(i)].vote)] += 1.0;
    }
    for (double& v : votes) v /= static_cast<double>(trees_.size());
    return votes;
}

std::uint64_t ForestClassifier::theta_hash_impl() const {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (const Tree& t : trees_)
        for (const Node& n : t.nodes) {
            h = fnv1a(&n.feat, sizeof(n.feat), h);
            h = fnv1a(&n.thr, sizeof(n.thr), h);
            h = fnv1a(&n.vote, sizeof(n.vote), h);
        }
    return h;
}

nlohmann::ordered_json ForestClassifier::payload() const {
    nlohmann::ordered_json trees = nlohmann::ordered_json::array();
    for (const Tree& t : trees_) {
        nlohmann::ordered_json nodes = nlohmann::ordered_json::array();
        for (const Node& n : t.nodes)
            nodes.push_back({n.feat, n.thr, n.left, n.right, n.vote});
        trees.push_back(std::move(nodes));
    }
    return {{"n_classes", n_classes_}, {"trees", std::move(trees)}};
}

std::shared_ptr<ForestClassifier> ForestClassifier::from_payload(ParsedSchemaPtr ps,
                                                                 const nlohmann::json& j) {
    std::vector<Tree> trees;
    for (const auto& jt : j.at("trees")) {
        Tree t;
        for (const auto& jn : jt) {
            Node n;
            n.feat = jn[0].get<int>();
            n.thr = jn[1].get<double>();
            n.left = jn[2].get<int>();
            n.right = jn[3].get<int>();
            n.vote = jn[4].get<int>();
            t.nodes.push_back(n);
        }
        trees.push_back(std::move(t));
    }
    return std::make_shared<ForestClassifier>(std::move(ps), j.at("n_classes").get<int>(),
                                              std::move(trees));
}

namespace {

using Tree = ForestClassifier::Tree;
using Node = ForestClassifier::Node;

struct TreeBuilder {
    const Matrix& S; // scaled train rows
    const std::vector<int>& y;
    int n_classes;
    int max_depth;
    int min_leaf;
    int mtry;
    Rng& rng;
    Tree tree;

    int majority(const std::vector<int>& rows) const {
        std::vector<int> counts(static_cast<std::size_t>(n_classes), 0);
        for (int r : rows) ++counts[static_cast<std::size_t>(y[static_cast<std::size_t>(r)])];
        int best = 0;
        for (int c = 1; c < n_classes; ++c)
            if (counts[static_cast<std::size_t>(c)] > counts[static_cast<std::size_t>(best)])
                best = c;
        return best;
    }

    static double gini(std::span<const int> counts, int total) {
        if (total == 0) return 0.0;
        double g = 1.0;
        for (int c : counts) {
            double p = static_cast<double>(c) / total;
            g -= p * p;
        }
        return g;
    }

    int build(std::vector<int> rows, int depth) {
        int id = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();

        bool pure = true;
        for (int r : rows)
            if (y[static_cast<std::size_t>(r)] != y[static_cast<std::size_t>(rows[0])]) {
                pure = false;
                break;
            }
        if (pure || depth >= max_depth || static_cast<int>(rows.size()) < 2 * min_leaf) {
            tree.nodes[static_cast<std::size_t>(id)].vote = majority(rows);
            return id;
        }

        // mtry random features, deduplicated; candidate thresholds are the
        // midpoints between consecutive distinct values
        std::vector<int> feats(S.cols());
        std::iota(feats.begin(), feats.end(), 0);
        rng.shuffle(feats);
        feats.resize(static_cast<std::size_t>(std::min<int>(mtry, static_cast<int>(S.cols()))));
        std::sort(feats.begin(), feats.end()); // deterministic evaluation order

        double best_score = std::numeric_limits<double>::infinity();
        int best_feat = -1;
        double best_thr = 0.0;

        std::vector<int> order(rows.size());
        std::vector<int> left_counts(static_cast<std::size_t>(n_classes));
        std::vector<int> right_counts(static_cast<std::size_t>(n_classes));
        for (int f : feats) {
            std::iota(order.begin(), order.end(), 0);
            std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
                return S.at(static_cast<std::size_t>(rows[static_cast<std::size_t>(a)]),
                            static_cast<std::size_t>(f)) <
                       S.at(static_cast<std::size_t>(rows[static_cast<std::size_t>(b)]),
                            static_cast<std::size_t>(f));
            });
            std::fill(left_counts.begin(), left_counts.end(), 0);
            std::fill(right_counts.begin(), right_counts.end(), 0);
            for (int r : rows)
                ++right_counts[static_cast<std::size_t>(y[static_cast<std::size_t>(r)])];
            int n = static_cast<int>(rows.size());
            for (int k = 0; k + 1 < n; ++k) {
                int r = rows[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])];
                int cls = y[static_cast<std::size_t>(r)];
                ++left_counts[static_cast<std::size_t>(cls)];
                --right_counts[static_cast<std::size_t>(cls)];
                double v = S.at(static_cast<std::size_t>(r), static_cast<std::size_t>(f));
                int rn = rows[static_cast<std::size_t>(order[static_cast<std::size_t>(k + 1)])];
                double vn = S.at(static_cast<std::size_t>(rn), static_cast<std::size_t>(f));
                if (v == vn) continue;
                int nl = k + 1, nr = n - nl;
                if (nl < min_leaf || nr < min_leaf) continue;
                double score = (nl * gini(left_counts, nl) + nr * gini(right_counts, nr)) / n;
                if (score < best_score) {
                    best_score = score;
                    best_feat = f;
                    // threshold at the left value: any strictly monotone
                    // rescaling of a feature then leaves every comparison
                    // s <= thr unchanged
                    best_thr = v;
                }
            }
        }
        if (best_feat < 0) {
            tree.nodes[static_cast<std::size_t>(id)].vote = majority(rows);
            return id;
        }
        std::vector<int> lrows, rrows;
        for (int r : rows) {
            if (S.at(static_cast<std::size_t>(r), static_cast<std::size_t>(best_feat)) <= best_thr)
                lrows.push_back(r);
            else
                rrows.push_back(r);
        }
        int left = build(std::move(lrows), depth + 1);
        int right = build(std::move(rrows), depth + 1);
        Node& nd = tree.nodes[static_cast<std::size_t>(id)];
        nd.feat = best_feat;
        nd.thr = best_thr;
        nd.left = left;
        nd.right = right;
        return id;
    }
};

} // namespace

PredictorPtr fit_forest(const Dataset& train, const ForestConfig& cfg) {
    if (train.rows() < 2) throw DataError("forest needs at least two training rows");
    bool multi = false;
    for (int v : train.y)
        if (v != train.y[0]) multi = true;
    if (!multi) throw DataError("degenerate single-class training set");

    ScaledView view(train.ps->schema);
    Matrix S = view.scale_rows(train.X);
    int mtry = std::max(1, static_cast<int>(std::lround(std::sqrt(static_cast<double>(S.cols())))));

    std::vector<Tree> trees;
    trees.reserve(static_cast<std::size_t>(cfg.n_trees));
    for (int t = 0; t < cfg.n_trees; ++t) {
        Rng rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(t)));
        std::vector<int> rows(train.rows());
        for (auto& r : rows)
            r = static_cast<int>(rng.uniform_int(0, static_cast<std::int64_t>(train.rows()) - 1));
        TreeBuilder builder{S, train.y, train.n_classes, cfg.max_depth, cfg.min_leaf,
                            mtry, rng, {}};
        builder.build(std::move(rows), 0);
        trees.push_back(std::move(builder.tree));
    }
    return std::make_shared<ForestClassifier>(train.ps, train.n_classes, std::move(trees));
}

} // namespace tabrobust
