#include "tabrobust/schema.hpp"

#include <set>

namespace tabrobust {

int FeatureSchema::find(const std::string& name) const {
    for (std::size_t i = 0; i < features.size(); ++i)
        if (features[i].name == name) return static_cast<int>(i);
    return -1;
}

std::size_t FeatureSchema::index_of(const std::string& name) const {
    int i = find(name);
    if (i < 0) throw DataError("unknown feature '" + name + "'");
    return static_cast<std::size_t>(i);
}

bool FeatureSchema::in_box(std::span<const double> x_raw) const {
    for (std::size_t i = 0; i < features.size(); ++i)
        if (x_raw[i] < features[i].lower || x_raw[i] > features[i].upper) return false;
    return true;
}

void FeatureSchema::validate() const {
    if (features.empty()) throw ConfigError("schema has no features");
    std::set<std::string> names;
    for (const auto& f : features) {
        if (f.name.empty()) throw ConfigError("feature with empty name");
        if (!names.insert(f.name).second)
            throw ConfigError("duplicate feature name '" + f.name + "'");
        if (f.kind == FeatureKind::Categorical) {
            if (f.levels.empty())
                throw ConfigError("categorical feature '" + f.name + "' has no levels");
            std::set<std::string> lv(f.levels.begin(), f.levels.end());
            if (lv.size() != f.levels.size())
                throw ConfigError("categorical feature '" + f.name + "' has duplicate levels");
        } else {
            if (!(f.lower <= f.upper))
                throw ConfigError("feature '" + f.name + "' has lower > upper");
        }
    }
}

const char* kind_name(FeatureKind k) {
    switch (k) {
        case FeatureKind::Continuous: return "continuous";
        case FeatureKind::Integer: return "integer";
        case FeatureKind::Categorical: return "categorical";
    }
    return "?";
}

} // namespace tabrobust
