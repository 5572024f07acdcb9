#include "tabrobust/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace tabrobust {

ScaledView::ScaledView(const FeatureSchema& schema) {
    lo_.reserve(schema.dim());
    range_.reserve(schema.dim());
    constant_.reserve(schema.dim());
    for (const auto& f : schema.features) {
        lo_.push_back(f.lower);
        range_.push_back(f.upper - f.lower);
        constant_.push_back(f.upper == f.lower);
    }
}

std::vector<double> ScaledView::scale(std::span<const double> raw) const {
    std::vector<double> s(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) s[i] = scale1(i, raw[i]);
    return s;
}

std::vector<double> ScaledView::unscale(std::span<const double> s) const {
    std::vector<double> r(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) r[i] = unscale1(i, s[i]);
    return r;
}

Matrix ScaledView::scale_rows(const Matrix& raw) const {
    Matrix out(raw.rows(), raw.cols());
    for (std::size_t r = 0; r < raw.rows(); ++r)
        for (std::size_t i = 0; i < raw.cols(); ++i) out.at(r, i) = scale1(i, raw.at(r, i));
    return out;
}

double ScaledView::scaled_l2(std::span<const double> a, std::span<const double> b) const {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = scale1(i, a[i]) - scale1(i, b[i]);
        s += d * d;
    }
    return std::sqrt(s);
}

double ScaledView::scaled_linf(std::span<const double> a, std::span<const double> b) const {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        m = std::max(m, std::abs(scale1(i, a[i]) - scale1(i, b[i])));
    return m;
}

Dataset Dataset::subset(std::span<const int> rows_idx) const {
    Dataset out;
    out.ps = ps;
    out.n_classes = n_classes;
    out.positive_class = positive_class;
    out.X = Matrix(rows_idx.size(), X.cols());
    out.y.reserve(rows_idx.size());
    for (std::size_t k = 0; k < rows_idx.size(); ++k) {
        out.X.set_row(k, X.row(static_cast<std::size_t>(rows_idx[k])));
        out.y.push_back(y[static_cast<std::size_t>(rows_idx[k])]);
    }
    return out;
}

namespace {

// RFC-4180 field splitting for one record that may span quoted newlines has
// already been handled by the reader; this splits a single logical line.
std::vector<std::string> split_csv_record(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char ch = line[i];
        if (quoted) {
            if (ch == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += ch;
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += ch;
        }
    }
    fields.push_back(std::move(cur));
    return fields;
}

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += "\"\"";
        out += ch;
    }
    out += "\"";
    return out;
}

} // namespace

Dataset load_csv_text(const std::string& text, ParsedSchemaPtr ps, RowPolicy policy,
                      LoadReport* report) {
    const FeatureSchema& schema = ps->schema;
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty CSV");
    if (!line.empty() && line.back() == '\r') line.pop_back();

    auto header = split_csv_record(line);
    std::vector<int> col_of_feature(schema.dim(), -1);
    int label_col = -1;
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (header[c] == "label") {
            label_col = static_cast<int>(c);
            continue;
        }
        int fi = schema.find(header[c]);
        if (fi >= 0) col_of_feature[static_cast<std::size_t>(fi)] = static_cast<int>(c);
    }
    for (std::size_t i = 0; i < schema.dim(); ++i)
        if (col_of_feature[i] < 0)
            throw DataError("CSV is missing column '" + schema.features[i].name + "'");
    if (label_col < 0) throw DataError("CSV is missing the 'label' column");

    Dataset ds;
    ds.ps = ps;
    ds.X = Matrix(0, schema.dim());
    int max_label = 0;
    int row_no = 0;

    auto fail_row = [&](const std::string& why) {
        if (policy == RowPolicy::Abort)
            throw DataError("row " + std::to_string(row_no) + ": " + why);
        if (report) {
            report->rejected_rows.push_back(row_no);
            report->reasons.push_back(why);
        }
    };

    std::vector<double> xrow(schema.dim());
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        ++row_no;
        auto fields = split_csv_record(line);
        if (fields.size() != header.size()) {
            fail_row("expected " + std::to_string(header.size()) + " fields, got " +
                     std::to_string(fields.size()));
            continue;
        }
        bool ok = true;
        for (std::size_t i = 0; i < schema.dim() && ok; ++i) {
            const FeatureDef& f = schema.features[i];
            const std::string& cell = fields[static_cast<std::size_t>(col_of_feature[i])];
            if (f.kind == FeatureKind::Categorical) {
                auto it = std::find(f.levels.begin(), f.levels.end(), cell);
                if (it == f.levels.end()) {
                    fail_row("column '" + f.name + "': '" + cell + "' is not a level");
                    ok = false;
                    break;
                }
                xrow[i] = static_cast<double>(it - f.levels.begin());
            } else {
                double v = 0.0;
                auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
                if (res.ec != std::errc() || res.ptr != cell.data() + cell.size()) {
                    fail_row("column '" + f.name + "': cannot parse '" + cell + "'");
                    ok = false;
                    break;
                }
                if (v < f.lower || v > f.upper) {
                    fail_row("column '" + f.name + "': " + cell + " outside [" +
                             format_double(f.lower) + ", " + format_double(f.upper) + "]");
                    ok = false;
                    break;
                }
                if (f.kind == FeatureKind::Integer && v != std::round(v)) {
                    fail_row("column '" + f.name + "': " + cell + " is not an integer");
                    ok = false;
                    break;
                }
                xrow[i] = v;
            }
        }
        if (!ok) continue;
        for (const auto& c : ps->constraints.constraints) {
            if (!eval_constraint(c, xrow)) {
                fail_row("violates constraint '" + c.text + "'");
                ok = false;
                break;
            }
        }
        if (!ok) continue;
        const std::string& lab = fields[static_cast<std::size_t>(label_col)];
        int yv = 0;
        auto res = std::from_chars(lab.data(), lab.data() + lab.size(), yv);
        if (res.ec != std::errc() || res.ptr != lab.data() + lab.size() || yv < 0) {
            fail_row("label: cannot parse '" + lab + "'");
            continue;
        }
        ds.X.push_row(xrow);
        ds.y.push_back(yv);
        max_label = std::max(max_label, yv);
    }
    ds.n_classes = std::max(2, max_label + 1);
    return ds;
}

Dataset load_csv(const std::string& path, ParsedSchemaPtr ps, RowPolicy policy,
                 LoadReport* report) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open CSV file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return load_csv_text(ss.str(), std::move(ps), policy, report);
}

std::string to_csv_text(const Dataset& ds) {
    const FeatureSchema& schema = ds.ps->schema;
    std::string out;
    for (std::size_t i = 0; i < schema.dim(); ++i) {
        out += csv_escape(schema.features[i].name);
        out += ",";
    }
    out += "label\n";
    for (std::size_t r = 0; r < ds.rows(); ++r) {
        for (std::size_t i = 0; i < schema.dim(); ++i) {
            const FeatureDef& f = schema.features[i];
            double v = ds.X.at(r, i);
            if (f.kind == FeatureKind::Categorical)
                out += csv_escape(f.levels[static_cast<std::size_t>(std::llround(v))]);
            else
                out += format_double(v);
            out += ",";
        }
        out += std::to_string(ds.y[r]);
        out += "\n";
    }
    return out;
}

void save_csv(const std::string& path, const Dataset& ds) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write CSV file: " + path);
    out << to_csv_text(ds);
}

std::vector<std::vector<int>> split_folds(int count, int n_split, std::uint64_t epoch_seed) {
    if (n_split < 2) throw ConfigError("n_split must be >= 2");
    if (count < n_split) throw ConfigError("n_split exceeds the number of rows");
    std::vector<int> perm(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) perm[static_cast<std::size_t>(i)] = i;
    Rng rng(mix_seed(epoch_seed, 0xf01d5));
    rng.shuffle(perm);
    std::vector<std::vector<int>> folds(static_cast<std::size_t>(n_split));
    int base = count / n_split;
    int rem = count % n_split;
    std::size_t pos = 0;
    for (int s = 0; s < n_split; ++s) {
        int len = base + (s < rem ? 1 : 0);
        folds[static_cast<std::size_t>(s)].assign(perm.begin() + static_cast<long>(pos),
                                                  perm.begin() + static_cast<long>(pos + len));
        pos += static_cast<std::size_t>(len);
    }
    return folds;
}

namespace {

ContextState make_candidate(const Dataset& pool, int cap, std::uint64_t seed, bool rebalance,
                            int n_classes) {
    ContextState ctx;
    ctx.provenance.kind = ContextProvenance::SeededSubsample;
    ctx.provenance.seed = seed;
    ctx.provenance.rebalanced = rebalance;

    Rng rng(mix_seed(seed, 0xc0117e));
    std::vector<int> chosen;
    if (!rebalance) {
        std::vector<int> idx(pool.rows());
        for (std::size_t i = 0; i < pool.rows(); ++i) idx[i] = static_cast<int>(i);
        rng.shuffle(idx);
        chosen.assign(idx.begin(), idx.begin() + std::min<std::size_t>(idx.size(),
                                                                       static_cast<std::size_t>(cap)));
    } else {
        // equal quotas floor(cap / C); remainder goes to the majority class;
        // classes smaller than their quota are taken whole
        std::vector<std::vector<int>> by_class(static_cast<std::size_t>(n_classes));
        for (std::size_t i = 0; i < pool.rows(); ++i)
            by_class[static_cast<std::size_t>(pool.y[i])].push_back(static_cast<int>(i));
        std::size_t majority = 0;
        for (std::size_t c = 1; c < by_class.size(); ++c)
            if (by_class[c].size() > by_class[majority].size()) majority = c;
        int quota = cap / n_classes;
        int rem = cap - quota * n_classes;
        for (std::size_t c = 0; c < by_class.size(); ++c) {
            int want = quota + (c == majority ? rem : 0);
            auto& rows = by_class[c];
            rng.shuffle(rows);
            int take = std::min<int>(want, static_cast<int>(rows.size()));
            chosen.insert(chosen.end(), rows.begin(), rows.begin() + take);
        }
        std::sort(chosen.begin(), chosen.end());
    }
    ctx.X = Matrix(chosen.size(), pool.dim());
    for (std::size_t k = 0; k < chosen.size(); ++k) {
        ctx.X.set_row(k, pool.X.row(static_cast<std::size_t>(chosen[k])));
        ctx.y.push_back(pool.y[static_cast<std::size_t>(chosen[k])]);
    }
    ctx.source_rows = std::move(chosen);
    return ctx;
}

} // namespace

ContextState sample_context(const Dataset& train, int cap, std::span<const std::uint64_t> seeds,
                            Rebalance mode, const ContextScorer& scorer,
                            std::uint64_t selection_seed) {
    if (train.rows() == 0) throw DataError("empty training set");
    if (cap < train.n_classes) throw ConfigError("context cap below the number of classes");

    if (train.rows() <= static_cast<std::size_t>(cap)) {
        ContextState ctx;
        ctx.X = train.X;
        ctx.y = train.y;
        ctx.source_rows.resize(train.rows());
        for (std::size_t i = 0; i < train.rows(); ++i) ctx.source_rows[i] = static_cast<int>(i);
        ctx.provenance.kind = ContextProvenance::FullTrain;
        return ctx;
    }

    // candidates draw from the first 80% of a seeded shuffle; the last 20%
    // is the validation slice the scorer sees
    std::vector<int> order(train.rows());
    for (std::size_t i = 0; i < train.rows(); ++i) order[i] = static_cast<int>(i);
    Rng rng(mix_seed(selection_seed, 0x5e1ec7));
    rng.shuffle(order);
    auto n_val = static_cast<std::size_t>(std::max<double>(1.0, 0.2 * static_cast<double>(order.size())));
    std::vector<int> val_rows(order.end() - static_cast<long>(n_val), order.end());
    std::vector<int> pool_rows(order.begin(), order.end() - static_cast<long>(n_val));
    Dataset pool = train.subset(pool_rows);
    Dataset val = train.subset(val_rows);

    struct Candidate {
        std::uint64_t seed;
        bool rebalance;
    };
    std::vector<Candidate> cands;
    for (auto s : seeds) {
        if (mode == Rebalance::Both || mode == Rebalance::Off) cands.push_back({s, false});
        if (mode == Rebalance::Both || mode == Rebalance::On) cands.push_back({s, true});
    }
    if (cands.empty()) throw ConfigError("sample_context needs at least one seed");

    std::vector<ContextState> built(cands.size());
    std::vector<double> score(cands.size());
    parallel_for(cands.size(), [&](std::size_t i) {
        built[i] = make_candidate(pool, cap, cands[i].seed, cands[i].rebalance, train.n_classes);
        score[i] = scorer(built[i], val);
    });

    // argmax MCC; ties by lowest seed, then non-rebalanced first
    std::size_t best = 0;
    for (std::size_t i = 1; i < cands.size(); ++i) {
        bool better = score[i] > score[best];
        if (score[i] == score[best]) {
            if (cands[i].seed < cands[best].seed)
                better = true;
            else if (cands[i].seed == cands[best].seed && !cands[i].rebalance &&
                     cands[best].rebalance)
                better = true;
        }
        if (better) best = i;
    }
    ContextState ctx = std::move(built[best]);
    ctx.provenance.mcc = score[best];
    // map candidate rows back to the original training indices
    for (auto& r : ctx.source_rows) r = pool_rows[static_cast<std::size_t>(r)];
    return ctx;
}

} // namespace tabrobust
