// Times the sample-parallel kernels against their serial reference and
// checks that both paths produce identical outcomes.

#include <iostream>

#include <omp.h>

#include "tabrobust/attack.hpp"
#include "tabrobust/synthetic.hpp"

using namespace tabrobust;

namespace {

struct Task {
    ParsedSchemaPtr ps;
    Dataset data;
    PredictorPtr model;
};

Task make_task(int rows) {
    SyntheticTaskSpec spec;
    spec.gen = SyntheticTaskSpec::Gen::TwoGaussiansConstrained;
    spec.rows = rows;
    spec.seed = 7;
    GeneratedTask gen = gen_synthetic(spec);
    Task t;
    t.ps = std::make_shared<const ParsedSchema>(parse_schema(gen.schema_json));
    t.data = load_csv_text(gen.csv_text, t.ps);
    IclConfig cfg;
    cfg.epochs = 10;
    cfg.seed = 1;
    t.model = fit_icl(t.data, cfg);
    return t;
}

template <class F>
double timed(const F& fn) {
    double t0 = omp_get_wtime();
    fn();
    return omp_get_wtime() - t0;
}

void report(const char* name, double serial, double parallel, bool identical) {
    std::printf("%-28s serial %8.3fs  parallel %8.3fs  speedup %5.2fx  identical %s\n", name,
                serial, parallel, serial / parallel, identical ? "yes" : "NO");
}

} // namespace

int main(int argc, char** argv) {
    int rows = argc > 1 ? std::atoi(argv[1]) : 400;
    int threads = argc > 2 ? std::atoi(argv[2]) : 0;
    Task task = make_task(rows);
    std::printf("rows=%d threads=%d\n", rows, threads <= 0 ? omp_get_num_procs() : threads);

    AttackBudget budget;
    budget.epsilon = 0.5;
    budget.seed = 3;

    {
        Matrix serial_out, parallel_out;
        set_max_threads(1);
        double ts = timed([&] { serial_out = task.model->predict(task.data.X); });
        set_max_threads(threads);
        double tp = timed([&] { parallel_out = task.model->predict(task.data.X); });
        report("predict (batch)", ts, tp, serial_out == parallel_out);
    }
    {
        std::vector<AttackOutcome> a, b;
        set_max_threads(1);
        double ts = timed([&] { a = attack_capgd(*task.model, task.data.X, task.data.y, budget); });
        set_max_threads(threads);
        double tp = timed([&] { b = attack_capgd(*task.model, task.data.X, task.data.y, budget); });
        bool same = a.size() == b.size();
        for (std::size_t i = 0; same && i < a.size(); ++i)
            same = a[i].success == b[i].success && a[i].x_adv == b[i].x_adv;
        report("attack_capgd", ts, tp, same);
    }
    {
        AttackBudget mb = budget;
        mb.moeva_generations = 40;
        std::vector<AttackOutcome> a, b;
        set_max_threads(1);
        double ts = timed([&] { a = attack_moeva(*task.model, task.data.X, task.data.y, mb); });
        set_max_threads(threads);
        double tp = timed([&] { b = attack_moeva(*task.model, task.data.X, task.data.y, mb); });
        bool same = a.size() == b.size();
        for (std::size_t i = 0; same && i < a.size(); ++i)
            same = a[i].success == b[i].success && a[i].x_adv == b[i].x_adv;
        report("attack_moeva", ts, tp, same);
    }
    return 0;
}
