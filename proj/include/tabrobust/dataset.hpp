#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "tabrobust/common.hpp"
#include "tabrobust/dsl.hpp"

namespace tabrobust {

/// Per-feature min-max affine maps between raw units and [0, 1], anchored on
/// the schema bounds (not the data range: adversarial points may leave the
/// data range but never the schema box). Constant features map to 0.5.
class ScaledView {
public:
    ScaledView() = default;
    explicit ScaledView(const FeatureSchema& schema);

    std::size_t dim() const { return lo_.size(); }

    double scale1(std::size_t i, double raw) const {
        return constant_[i] ? 0.5 : (raw - lo_[i]) / range_[i];
    }
    double unscale1(std::size_t i, double s) const {
        return constant_[i] ? lo_[i] : lo_[i] + s * range_[i];
    }
    /// d raw / d scaled for feature i (0 for constant features).
    double jacobian(std::size_t i) const { return constant_[i] ? 0.0 : range_[i]; }

    std::vector<double> scale(std::span<const double> raw) const;
    std::vector<double> unscale(std::span<const double> s) const;
    Matrix scale_rows(const Matrix& raw) const;

    /// Norm of (scale(a) - scale(b)).
    double scaled_l2(std::span<const double> a_raw, std::span<const double> b_raw) const;
    double scaled_linf(std::span<const double> a_raw, std::span<const double> b_raw) const;

private:
    std::vector<double> lo_, range_;
    std::vector<bool> constant_;
};

struct Dataset {
    ParsedSchemaPtr ps;
    Matrix X;               // raw units
    std::vector<int> y;     // labels in {0, ..., C-1}
    int n_classes = 2;
    int positive_class = 1;

    std::size_t rows() const { return X.rows(); }
    std::size_t dim() const { return X.cols(); }

    Dataset subset(std::span<const int> rows_idx) const;
};

enum class RowPolicy { Reject, Abort };

struct LoadReport {
    std::vector<int> rejected_rows;      // 1-based data row numbers
    std::vector<std::string> reasons;
};

/// RFC-4180 CSV with a header of all schema feature names (any order) plus a
/// `label` column. Rows are validated against bounds and the constraint set.
Dataset load_csv(const std::string& path, ParsedSchemaPtr ps,
                 RowPolicy policy = RowPolicy::Abort, LoadReport* report = nullptr);
Dataset load_csv_text(const std::string& text, ParsedSchemaPtr ps,
                      RowPolicy policy = RowPolicy::Abort, LoadReport* report = nullptr);

std::string to_csv_text(const Dataset& ds);
void save_csv(const std::string& path, const Dataset& ds);

/// Seeded permutation, then contiguous near-equal folds (sizes differ <= 1).
std::vector<std::vector<int>> split_folds(int count, int n_split, std::uint64_t epoch_seed);

struct ContextProvenance {
    enum Kind { FullTrain, SeededSubsample, Hardened } kind = FullTrain;
    std::uint64_t seed = 0;
    bool rebalanced = false;
    double mcc = 0.0;       // selection score, when selected by sampling
    std::string run_id;     // hardened contexts: the producing run
};

/// The labeled rows an in-context model conditions on.
struct ContextState {
    Matrix X;               // raw units, n <= cap
    std::vector<int> y;
    std::vector<int> source_rows; // indices into the originating dataset (-1 if unknown)
    ContextProvenance provenance;

    std::size_t size() const { return X.rows(); }
};

enum class Rebalance { Both, On, Off };

/// Fits a probe model on the candidate context and scores it (MCC) on the
/// given validation slice.
using ContextScorer = std::function<double(const ContextState&, const Dataset& val)>;

/// Under the cap: the whole training set. Over it: one candidate per
/// (seed x rebalance mode), scored concurrently, deterministic argmax with
/// ties broken by lowest seed then non-rebalanced first.
ContextState sample_context(const Dataset& train, int cap, std::span<const std::uint64_t> seeds,
                            Rebalance mode, const ContextScorer& scorer,
                            std::uint64_t selection_seed = 1);

} // namespace tabrobust
