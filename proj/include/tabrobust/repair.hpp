#pragma once

#include <span>
#include <vector>

#include "tabrobust/dsl.hpp"

namespace tabrobust {

/// Deterministic projection back into the constraint-abiding data space:
/// clip to bounds, round integer features (half away from zero), snap
/// categorical encodings to the nearest level, then recompute definition
/// features in dependency order. Idempotent; definitions hold exactly after.
void repair_inplace(std::span<double> x_raw, const FeatureSchema& schema,
                    const ConstraintSet& cs);

std::vector<double> repair(std::span<const double> x_raw, const FeatureSchema& schema,
                           const ConstraintSet& cs);

} // namespace tabrobust
