#include "tabrobust/synthetic.hpp"

#include <cmath>
#include <cstring>

namespace tabrobust {

namespace {

const char* kTwoGaussiansSchema = R"json({
  "features": [
    {"name": "x0", "kind": "continuous", "lower": -4, "upper": 4},
    {"name": "x1", "kind": "continuous", "lower": -4, "upper": 4},
    {"name": "sum2", "kind": "continuous", "lower": -8, "upper": 8},
    {"name": "shift", "kind": "continuous", "lower": -4, "upper": 4, "mutable": false}
  ],
  "constraints": [
    "sum2 == x0 + x1",
    "x0 + x1 <= 6",
    "if shift > 1 then x1 >= -3"
  ],
  "tau": 0.0001
}
)json";

const char* kIntegerGridSchema = R"json({
  "features": [
    {"name": "a", "kind": "integer", "lower": 0, "upper": 9},
    {"name": "b", "kind": "integer", "lower": 0, "upper": 9},
    {"name": "c", "kind": "integer", "lower": 0, "upper": 9},
    {"name": "d", "kind": "integer", "lower": 0, "upper": 9}
  ],
  "constraints": [
    "d == min(a + b, 9)",
    "a <= b + 3",
    "if c > 0 then b > 0"
  ],
  "tau": 0.0001
}
)json";

} // namespace

void SyntheticTaskSpec::validate() const {
    if (rows < 4) throw ConfigError("synthetic task needs at least 4 rows");
    if (!(balance > 0.0 && balance < 1.0)) throw ConfigError("balance must be in (0, 1)");
    if (extra_dims < 0) throw ConfigError("extra_dims must be >= 0");
    if (extra_dims > 0 && gen == Gen::IntegerGrid)
        throw ConfigError("the integer grid is fixed at 4 features");
}

SyntheticTaskSpec::Gen gen_from_name(const std::string& name) {
    if (name == "two-gaussians-constrained") return SyntheticTaskSpec::Gen::TwoGaussiansConstrained;
    if (name == "integer-grid") return SyntheticTaskSpec::Gen::IntegerGrid;
    throw ConfigError("unknown synthetic task '" + name + "'");
}

const char* gen_name(SyntheticTaskSpec::Gen g) {
    return g == SyntheticTaskSpec::Gen::TwoGaussiansConstrained ? "two-gaussians-constrained"
                                                                : "integer-grid";
}

GeneratedTask gen_synthetic(const SyntheticTaskSpec& spec) {
    spec.validate();
    bool gauss = spec.gen == SyntheticTaskSpec::Gen::TwoGaussiansConstrained;
    GeneratedTask task;
    task.schema_json = gauss ? kTwoGaussiansSchema : kIntegerGridSchema;
    if (gauss && spec.extra_dims > 0) {
        std::string extras;
        for (int i = 0; i < spec.extra_dims; ++i)
            extras += ",\n    {\"name\": \"noise" + std::to_string(i) +
                      "\", \"kind\": \"continuous\", \"lower\": -4, \"upper\": 4}";
        auto pos = task.schema_json.find("\"mutable\": false}");
        task.schema_json.insert(pos + std::strlen("\"mutable\": false}"), extras);
    }
    auto ps = std::make_shared<const ParsedSchema>(parse_schema(task.schema_json));

    int want1 = static_cast<int>(std::lround(spec.balance * spec.rows));
    int want0 = spec.rows - want1;
    if (want0 == 0 || want1 == 0) throw ConfigError("requested balance leaves a class empty");

    Dataset ds;
    ds.ps = ps;
    ds.X = Matrix(0, ps->dim());
    Rng rng(mix_seed(spec.seed, gauss ? 0x9a55 : 0x9a1d));

    auto valid = [&](std::span<const double> x) {
        if (!ps->schema.in_box(x)) return false;
        for (const auto& c : ps->constraints.constraints)
            if (!eval_constraint(c, x)) return false;
        return true;
    };

    long budget = 4000L * spec.rows;
    std::vector<std::pair<std::vector<double>, int>> rows;
    int have0 = 0, have1 = 0;
    while (have0 < want0 || have1 < want1) {
        if (--budget < 0)
            throw DataError("rejection sampling budget exhausted; the constraint template "
                            "cannot produce the requested class balance");
        std::vector<double> x(ps->dim());
        int y;
        if (gauss) {
            y = rng.uniform() < 0.5 ? 1 : 0;
            double c = y ? 1.5 : -1.5;
            x[0] = c + 0.7 * rng.normal();
            x[1] = c + 0.7 * rng.normal();
            x[2] = x[0] + x[1]; // definition target
            x[3] = 0.9 * (2 * y - 1) + 0.8 * rng.normal();
            for (std::size_t j = 4; j < ps->dim(); ++j) x[j] = rng.normal();
        } else {
            x[0] = static_cast<double>(rng.uniform_int(0, 9));
            x[1] = static_cast<double>(rng.uniform_int(0, 9));
            x[2] = static_cast<double>(rng.uniform_int(0, 9));
            x[3] = std::min(x[0] + x[1], 9.0);
            y = 2 * x[0] + x[1] + 3 * x[2] + x[3] >= 35.0 ? 1 : 0;
        }
        if (!valid(x)) continue;
        int& have = y ? have1 : have0;
        int want = y ? want1 : want0;
        if (have >= want) continue;
        ++have;
        rows.emplace_back(std::move(x), y);
    }
    // the quota loop groups classes by arrival; a seeded shuffle mixes them
    rng.shuffle(rows);
    for (auto& [x, y] : rows) {
        ds.X.push_row(x);
        ds.y.push_back(y);
    }
    task.csv_text = to_csv_text(ds);
    return task;
}

} // namespace tabrobust
