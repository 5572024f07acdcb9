#pragma once

#include "tabrobust/dataset.hpp"

namespace tabrobust {

/// Desk-scale stand-in tasks. Both carry one definition constraint, one
/// inequality and one implication, so every attack path (clip, round,
/// recompute, penalty, repair) gets exercised.
struct SyntheticTaskSpec {
    enum class Gen { TwoGaussiansConstrained, IntegerGrid };
    Gen gen = Gen::TwoGaussiansConstrained;
    int rows = 400;
    double balance = 0.5; // fraction of class 1
    // extra unconstrained noise features (two-gaussians only; the integer
    // grid stays at 4 features so it remains exhaustively enumerable)
    int extra_dims = 0;
    std::uint64_t seed = 0;

    void validate() const;
};

struct GeneratedTask {
    std::string schema_json;
    std::string csv_text;
};

/// Deterministic per seed; every emitted row passes load_csv validation.
/// Throws DataError when rejection sampling exhausts its budget (an
/// unsatisfiable constraint template for the requested shape).
GeneratedTask gen_synthetic(const SyntheticTaskSpec& spec);

SyntheticTaskSpec::Gen gen_from_name(const std::string& name);
const char* gen_name(SyntheticTaskSpec::Gen g);

} // namespace tabrobust
