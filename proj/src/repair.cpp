#include "tabrobust/repair.hpp"

#include <algorithm>
#include <cmath>

namespace tabrobust {

void repair_inplace(std::span<double> x_raw, const FeatureSchema& schema,
                    const ConstraintSet& cs) {
    for (std::size_t i = 0; i < schema.dim(); ++i) {
        const FeatureDef& f = schema.features[i];
        double v = std::clamp(x_raw[i], f.lower, f.upper);
        switch (f.kind) {
            case FeatureKind::Continuous:
                break;
            case FeatureKind::Integer:
            case FeatureKind::Categorical:
                // std::round is half away from zero; bounds are integral
                v = std::round(v);
                v = std::clamp(v, f.lower, f.upper);
                break;
        }
        x_raw[i] = v;
    }
    for (auto ci : cs.repair_order) {
        const Expr& e = cs.constraints[static_cast<std::size_t>(ci)];
        const ExprNode& root = e.node(e.root);
        auto target = static_cast<std::size_t>(e.node(root.kids[0]).feat);
        x_raw[target] = eval_arith(e, root.kids[1], x_raw);
    }
}

std::vector<double> repair(std::span<const double> x_raw, const FeatureSchema& schema,
                           const ConstraintSet& cs) {
    std::vector<double> out(x_raw.begin(), x_raw.end());
    repair_inplace(out, schema, cs);
    return out;
}

} // namespace tabrobust
