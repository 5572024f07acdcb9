#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "tabrobust/attack.hpp"
#include "tabrobust/manifest.hpp"

// Drives the installed binary end to end. TABROBUST_BIN comes from CMake.

namespace fs = std::filesystem;
using namespace tabrobust;

namespace {

struct CliRun {
    int exit_code;
    std::string dir;
};

std::string bin() { return TABROBUST_BIN; }

fs::path scratch_root() {
    auto p = fs::temp_directory_path() / "tabrobust_cli";
    fs::create_directories(p);
    return p;
}

int run_cli(const std::string& args) {
    std::string cmd = bin() + " " + args + " >/dev/null 2>&1";
    int rc = std::system(cmd.c_str());
    return WEXITSTATUS(rc);
}

std::string slurp(const fs::path& p) { return read_text_file(p.string()); }

// manifests differ only in created_at across reruns
std::string strip_created_at(std::string text) {
    auto pos = text.find("\"created_at\"");
    if (pos == std::string::npos) return text;
    auto end = text.find('\n', pos);
    text.erase(pos, end - pos);
    return text;
}

struct Workspace {
    fs::path root;
    std::string gauss, grid, fit_icl, fit_forest;

    Workspace() {
        root = scratch_root() / "ws";
        fs::remove_all(root);
        fs::create_directories(root);
        gauss = (root / "gauss").string();
        grid = (root / "grid").string();
        REQUIRE(run_cli("gen --set rows=420 --set seed=3 --out " + gauss) == 0);
        REQUIRE(run_cli("gen --set task=integer-grid --set rows=300 --set seed=5 --out " + grid) ==
                0);
        fit_icl = (root / "fit-icl").string();
        REQUIRE(run_cli("fit --set model=icl --set icl.epochs=8 --set context.cap=260 "
                        "--set context.n_seeds=2 --set schema=" +
                        gauss + "/schema.json --set data=" + gauss + "/data.csv --out " +
                        fit_icl) == 0);
        fit_forest = (root / "fit-forest").string();
        REQUIRE(run_cli("fit --set model=forest --set forest.n_trees=15 --set schema=" + grid +
                        "/schema.json --set data=" + grid + "/data.csv --out " + fit_forest) == 0);
    }
};

Workspace& ws() {
    static Workspace w;
    return w;
}

} // namespace

TEST_SUITE_BEGIN("cli");

TEST_CASE("gen: deterministic, and the outputs load cleanly") {
    auto root = scratch_root();
    std::string a = (root / "gen-a").string();
    std::string b = (root / "gen-b").string();
    REQUIRE(run_cli("gen --set rows=200 --set seed=9 --out " + a) == 0);
    REQUIRE(run_cli("gen --set rows=200 --set seed=9 --out " + b) == 0);
    CHECK(slurp(a + "/data.csv") == slurp(b + "/data.csv"));
    CHECK(slurp(a + "/schema.json") == slurp(b + "/schema.json"));
    CHECK(strip_created_at(slurp(a + "/manifest.json")) ==
          strip_created_at(slurp(b + "/manifest.json")));

    auto ps = load_schema_file(a + "/schema.json");
    LoadReport rep;
    Dataset ds = load_csv(a + "/data.csv", ps, RowPolicy::Reject, &rep);
    CHECK(ds.rows() == 200);
    CHECK(rep.rejected_rows.empty());

    int pos = 0;
    for (int v : ds.y) pos += v;
    CHECK(pos == 100); // requested balance, within one row
}

TEST_CASE("gen: integer-grid rows satisfy their constraints") {
    auto ps = load_schema_file(ws().grid + "/schema.json");
    LoadReport rep;
    Dataset ds = load_csv(ws().grid + "/data.csv", ps, RowPolicy::Reject, &rep);
    CHECK(rep.rejected_rows.empty());
    CHECK(ds.rows() == 300);
}

TEST_CASE("fit: refitting the same config is byte-identical") {
    auto root = scratch_root();
    std::string again = (root / "fit-again").string();
    REQUIRE(run_cli("fit --set model=icl --set icl.epochs=8 --set context.cap=260 "
                    "--set context.n_seeds=2 --set schema=" +
                    ws().gauss + "/schema.json --set data=" + ws().gauss + "/data.csv --out " +
                    again) == 0);
    CHECK(slurp(again + "/checkpoint.json") == slurp(ws().fit_icl + "/checkpoint.json"));
    CHECK(strip_created_at(slurp(again + "/manifest.json")) ==
          strip_created_at(slurp(ws().fit_icl + "/manifest.json")));
}

TEST_CASE("fit: unknown config keys are named") {
    CHECK(run_cli("fit --set modle=icl") == 2);
    CHECK(run_cli("fit --set icl.epochz=3") == 2);
}

TEST_CASE("fit: context provenance lands in the manifest") {
    std::string manifest = slurp(ws().fit_icl + "/manifest.json");
    CHECK(manifest.find("context_provenance") != std::string::npos);
    CHECK(manifest.find("seeded-subsample") != std::string::npos);
    CHECK(manifest.find("mcc") != std::string::npos);
    CHECK(manifest.find("train_loss") != std::string::npos);
}

TEST_CASE("attack: campaigns per seed, reruns byte-identical") {
    auto root = scratch_root();
    std::string a = (root / "atk-a").string();
    std::string b = (root / "atk-b").string();
    std::string common = "attack --set checkpoint=" + ws().fit_icl + "/checkpoint.json" +
                         " --set schema=" + ws().gauss + "/schema.json --set data=" + ws().gauss +
                         "/data.csv --set \"seeds=[1,2]\" --set max_samples=40" +
                         " --set budget.moeva_generations=15 ";
    REQUIRE(run_cli(common + "--out " + a) == 0);
    REQUIRE(run_cli(common + "--out " + b) == 0);

    for (const char* attack : {"identity", "capgd", "moeva", "caa"})
        for (int seed : {1, 2}) {
            std::string name =
                "campaign-" + std::string(attack) + "-seed" + std::to_string(seed) + ".jsonl";
            CAPTURE(name);
            REQUIRE(fs::exists(fs::path(a) / name));
            CHECK(slurp(fs::path(a) / name) == slurp(fs::path(b) / name));
        }
    CHECK(slurp(a + "/report.md") == slurp(b + "/report.md"));
    CHECK(slurp(a + "/report.csv") == slurp(b + "/report.csv"));
    CHECK(strip_created_at(slurp(a + "/manifest.json")) ==
          strip_created_at(slurp(b + "/manifest.json")));
}

TEST_CASE("attack: capgd on a forest is skipped with a notice, caa falls back to moeva") {
    auto root = scratch_root();
    std::string out = (root / "atk-forest").string();
    REQUIRE(run_cli("attack --set checkpoint=" + ws().fit_forest + "/checkpoint.json" +
                    " --set schema=" + ws().grid + "/schema.json --set data=" + ws().grid +
                    "/data.csv --set \"seeds=[1]\" --set max_samples=30" +
                    " --set budget.moeva_generations=10 --out " + out) == 0);
    std::string report = slurp(out + "/report.md");
    CHECK(report.find("skipped capgd") != std::string::npos);
    CHECK_FALSE(fs::exists(fs::path(out) / "campaign-capgd-seed1.jsonl"));
    Campaign caa = load_campaign(out + "/campaign-caa-seed1.jsonl");
    for (const auto& o : caa.outcomes) CHECK(o.stage == AttackStage::Moeva);
}

TEST_CASE("attack: epsilon = 0 is a config error") {
    CHECK(run_cli("attack --set checkpoint=" + ws().fit_icl + "/checkpoint.json" +
                  " --set schema=" + ws().gauss + "/schema.json --set data=" + ws().gauss +
                  "/data.csv --set budget.epsilon=0") == 2);
}

TEST_CASE("defend: aft on a forest is a capability error (exit 3)") {
    CHECK(run_cli("defend --set mode=aft --set checkpoint=" + ws().fit_forest +
                  "/checkpoint.json --set schema=" + ws().grid + "/schema.json --set data=" +
                  ws().grid + "/data.csv") == 3);
}

TEST_CASE("defend: aicl run produces the hardened checkpoint, trace and comparison") {
    auto root = scratch_root();
    std::string out = (root / "defend-aicl").string();
    REQUIRE(run_cli("defend --set mode=aicl --set inner=capgd --set epochs=4 "
                    "--set val_slice=48 --set probe_coords=2 --set probe_every=10 "
                    "--set eval.max_samples=40 --set checkpoint=" +
                    ws().fit_icl + "/checkpoint.json --set schema=" + ws().gauss +
                    "/schema.json --set data=" + ws().gauss + "/data.csv --out " + out) == 0);
    CHECK(fs::exists(fs::path(out) / "hardened.json"));
    std::string trace = slurp(out + "/trace.csv");
    CHECK(trace.find("t,drift,f_val,g_hat,eta_t,retries,accepted") == 0);
    std::string compare = slurp(out + "/compare.md");
    CHECK(compare.find("robust accuracy (capgd)") != std::string::npos);
    CHECK(compare.find("clean accuracy") != std::string::npos);

    // the hardened checkpoint carries a hardened-context provenance
    auto ps = load_schema_file(ws().gauss + "/schema.json");
    auto model = load_checkpoint(out + "/hardened.json", ps);
    REQUIRE(model->context() != nullptr);
    CHECK(model->context()->provenance.kind == ContextProvenance::Hardened);
}

TEST_CASE("defend: identity inner attack equals a clean-training control") {
    auto root = scratch_root();
    std::string out = (root / "defend-ident").string();
    REQUIRE(run_cli("defend --set mode=aicl --set inner=identity --set epochs=2 "
                    "--set val_slice=48 --set probe_every=0 --set eval.max_samples=30 "
                    "--set checkpoint=" +
                    ws().fit_icl + "/checkpoint.json --set schema=" + ws().gauss +
                    "/schema.json --set data=" + ws().gauss + "/data.csv --out " + out) == 0);
    auto ps = load_schema_file(ws().gauss + "/schema.json");
    auto before = load_checkpoint(ws().fit_icl + "/checkpoint.json", ps);
    auto after = load_checkpoint(out + "/hardened.json", ps);
    CHECK(after->context()->X == before->context()->X); // nothing was replaced
}

TEST_CASE("transfer: replay mode and the context-knowledge scenarios") {
    auto root = scratch_root();
    std::string atk = (root / "atk-a").string(); // produced above
    REQUIRE(fs::exists(fs::path(atk) / "campaign-caa-seed1.jsonl"));

    SUBCASE("source onto itself reproduces the white-box diagonal") {
        std::string out = (root / "tr-self").string();
        REQUIRE(run_cli("transfer --set \"campaigns=[\\\"" + atk +
                        "/campaign-caa-seed1.jsonl\\\"]\" --set \"targets=[\\\"" + ws().fit_icl +
                        "/checkpoint.json\\\"]\" --set schema=" + ws().gauss +
                        "/schema.json --out " + out) == 0);
        Campaign c = load_campaign(atk + "/campaign-caa-seed1.jsonl");
        double white_box = robust_accuracy(c.outcomes).value;
        std::string csv = slurp(out + "/matrix.csv");
        CHECK(csv.find(format_double(white_box)) != std::string::npos);
    }
    SUBCASE("scenario runs: exact, subsample10, distribution") {
        for (const char* scenario : {"exact", "subsample10", "distribution"}) {
            std::string out = (root / (std::string("tr-") + scenario)).string();
            CAPTURE(scenario);
            REQUIRE(run_cli(std::string("transfer --set scenario=") + scenario +
                            " --set target_checkpoint=" + ws().fit_icl + "/checkpoint.json" +
                            " --set schema=" + ws().gauss + "/schema.json --set data=" +
                            ws().gauss + "/data.csv --set max_samples=30" +
                            " --set budget.moeva_generations=10 --set attack=capgd --out " +
                            out) == 0);
            CHECK(fs::exists(fs::path(out) / "matrix.md"));
        }
    }
}

TEST_CASE("sweep: epsilon axis is non-increasing; bad axis rejected") {
    auto root = scratch_root();
    std::string out = (root / "sweep-eps").string();
    REQUIRE(run_cli("sweep --set axis=epsilon --set \"values=[0.25,0.5,1.0]\" "
                    "--set attack=capgd --set \"seeds=[1,2]\" --set max_samples=40 "
                    "--set checkpoint=" +
                    ws().fit_icl + "/checkpoint.json --set schema=" + ws().gauss +
                    "/schema.json --set data=" + ws().gauss + "/data.csv --out " + out) == 0);
    // parse the tidy CSV and check monotonicity per seed
    std::ifstream csv(out + "/sweep.csv");
    std::string line;
    std::getline(csv, line);
    CHECK(line == "epsilon,model,seed,robust_accuracy");
    std::map<std::string, std::map<double, double>> by_seed;
    while (std::getline(csv, line)) {
        auto p1 = line.find(','), p2 = line.find(',', p1 + 1), p3 = line.find(',', p2 + 1);
        double eps = std::stod(line.substr(0, p1));
        std::string seed = line.substr(p2 + 1, p3 - p2 - 1);
        by_seed[seed][eps] = std::stod(line.substr(p3 + 1));
    }
    REQUIRE(by_seed.size() == 2);
    for (const auto& [seed, curve] : by_seed) {
        REQUIRE(curve.size() == 3);
        double prev = 2.0;
        for (const auto& [eps, acc] : curve) {
            CHECK(acc <= prev);
            prev = acc;
        }
    }

    CHECK(run_cli("sweep --set axis=bogus --set checkpoint=" + ws().fit_icl +
                  "/checkpoint.json --set schema=" + ws().gauss + "/schema.json --set data=" +
                  ws().gauss + "/data.csv") == 2);
}

TEST_CASE("sweep: context_size axis rebinds resampled contexts") {
    auto root = scratch_root();
    std::string out = (root / "sweep-ctx").string();
    REQUIRE(run_cli("sweep --set axis=context_size --set \"values=[120,240]\" "
                    "--set attack=capgd --set \"seeds=[1]\" --set max_samples=30 "
                    "--set checkpoint=" +
                    ws().fit_icl + "/checkpoint.json --set schema=" + ws().gauss +
                    "/schema.json --set data=" + ws().gauss + "/data.csv --out " + out) == 0);
    std::string csv = slurp(out + "/sweep.csv");
    CHECK(csv.find("context_size,model,seed,robust_accuracy") == 0);
    CHECK(csv.find("120,") != std::string::npos);
    CHECK(csv.find("240,") != std::string::npos);

    // context_size on a context-free model is a capability error
    CHECK(run_cli("sweep --set axis=context_size --set \"values=[50,100]\" "
                  "--set checkpoint=" +
                  ws().fit_forest + "/checkpoint.json --set schema=" + ws().grid +
                  "/schema.json --set data=" + ws().grid + "/data.csv") == 3);
}

TEST_CASE("sweep: a single value produces a flat report with a warning") {
    auto root = scratch_root();
    std::string out = (root / "sweep-flat").string();
    REQUIRE(run_cli("sweep --set axis=epsilon --set \"values=[0.5]\" --set attack=identity "
                    "--set \"seeds=[1]\" --set max_samples=20 --set checkpoint=" +
                    ws().fit_icl + "/checkpoint.json --set schema=" + ws().gauss +
                    "/schema.json --set data=" + ws().gauss + "/data.csv --out " + out) == 0);
    CHECK(slurp(out + "/sweep.md").find("warning") != std::string::npos);
}

TEST_CASE("report aggregates campaign files") {
    auto root = scratch_root();
    std::string atk = (root / "atk-a").string();
    std::string out = (root / "report").string();
    REQUIRE(run_cli("report --set \"campaigns=[\\\"" + atk +
                    "/campaign-capgd-seed1.jsonl\\\",\\\"" + atk +
                    "/campaign-capgd-seed2.jsonl\\\"]\" --out " + out) == 0);
    std::string md = slurp(out + "/report.md");
    CHECK(md.find("capgd") != std::string::npos);
    CHECK(md.find("±") != std::string::npos);
}

TEST_CASE("a run can be reproduced from its manifest's config snapshot") {
    auto root = scratch_root();
    std::string atk = (root / "atk-a").string();
    nlohmann::json manifest = nlohmann::json::parse(slurp(atk + "/manifest.json"));
    std::string cfg_path = (root / "replay-cfg.json").string();
    write_text_file(cfg_path, manifest.at("config").dump());
    std::string out = (root / "atk-replayed").string();
    REQUIRE(run_cli("attack --config " + cfg_path + " --out " + out) == 0);
    for (const char* f : {"report.md", "report.csv", "campaign-caa-seed1.jsonl"})
        CHECK(slurp(fs::path(out) / f) == slurp(fs::path(atk) / f));
}

TEST_CASE("print-config exits 0 without running") {
    CHECK(run_cli("attack --print-config") == 0);
    CHECK(run_cli("defend --print-config") == 0);
}

TEST_SUITE_END();
