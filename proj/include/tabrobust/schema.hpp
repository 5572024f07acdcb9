#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "tabrobust/common.hpp"

namespace tabrobust {

enum class FeatureKind { Continuous, Integer, Categorical };

struct FeatureDef {
    std::string name;
    FeatureKind kind = FeatureKind::Continuous;
    double lower = 0.0;
    double upper = 0.0; // categorical: [0, levels-1], raw value = level index
    bool is_mutable = true;
    std::vector<std::string> levels;
};

/// Ordered feature declarations; the data-space box every attack respects.
class FeatureSchema {
public:
    std::vector<FeatureDef> features;

    std::size_t dim() const { return features.size(); }
    const FeatureDef& operator[](std::size_t i) const { return features[i]; }

    /// -1 when absent.
    int find(const std::string& name) const;
    std::size_t index_of(const std::string& name) const; // throws DataError

    bool in_box(std::span<const double> x_raw) const;

    /// Unique names, ordered bounds, unique non-empty categorical levels.
    void validate() const; // throws ConfigError
};

const char* kind_name(FeatureKind k);

} // namespace tabrobust
