#pragma once

#include <array>
#include <optional>

#include "tabrobust/model.hpp"
#include "tabrobust/penalty.hpp"

namespace tabrobust {

enum class Norm { L2, Linf };

/// Perturbation budget: the admissible set is the epsilon-ball in min-max
/// scaled space, with immutable coordinates pinned to zero perturbation.
struct AttackBudget {
    double epsilon = 0.5;
    Norm norm = Norm::L2;
    int capgd_steps = 10;
    int moeva_generations = 100;
    int moeva_population = 64;
    double lambda_penalty = 1.0;
    double tol_c = 1e-9;       // max residual penalty a success may carry
    double init_jitter = 0.1;  // MOEVA population spread, as a fraction of epsilon
    // deterministic per-sample cap on MOEVA model evaluations (0 = none); a
    // wall-clock timeout would break outcome determinism
    long moeva_max_evals = 0;
    bool caa_warm_start = false;
    std::uint64_t seed = 0;

    void validate() const;
};

enum class AttackStage { Identity, Capgd, Moeva };

const char* stage_name(AttackStage s);

struct AttackOutcome {
    std::vector<double> x;                     // original, raw units
    std::optional<std::vector<double>> x_adv;  // raw units; absent on failure
    int y = 0;
    bool success = false;
    double distance = 0.0;  // scaled-space norm of the perturbation
    double penalty = 0.0;
    int iterations = 0;
    AttackStage stage = AttackStage::Identity;
};

/// Step-size schedule state of one CAPGD run, exposed for diagnostics.
struct CapgdDiag {
    std::vector<int> checkpoints;
    std::vector<double> eta_at_checkpoint;
    double init_lstar = 0.0;
    double final_best_lstar = 0.0;
    std::vector<double> best_iterate; // best-L* feasible iterate, raw units
};

/// APGD-style checkpoint iterations for a run of T steps: t0 = ceil(0.22 T),
/// gaps shrinking by 0.03 T down to ceil(0.06 T).
std::vector<int> capgd_checkpoints(int total_steps);

std::vector<AttackOutcome> attack_identity(const Predictor& model, const Matrix& X,
                                           std::span<const int> y);

std::vector<AttackOutcome> attack_capgd(const Predictor& model, const Matrix& X,
                                        std::span<const int> y, const AttackBudget& budget,
                                        std::vector<CapgdDiag>* diags = nullptr);

std::vector<AttackOutcome> attack_moeva(const Predictor& model, const Matrix& X,
                                        std::span<const int> y, const AttackBudget& budget);

/// CAPGD first (when the model exposes input gradients), MOEVA only on the
/// samples CAPGD left unbroken; gradient-free models go straight to MOEVA.
std::vector<AttackOutcome> attack_caa(const Predictor& model, const Matrix& X,
                                      std::span<const int> y, const AttackBudget& budget);

/// Re-evaluates saved adversarial examples against a different target;
/// distances, penalties and success flags are recomputed, never trusted.
std::vector<AttackOutcome> replay(std::span<const AttackOutcome> outcomes,
                                  const Predictor& target, const AttackBudget& budget);

/// Pareto fronts by non-dominated sorting (minimisation); fronts[0] is the
/// non-dominated set, values are indices into the input.
std::vector<std::vector<int>> non_dominated_sort(std::span<const std::array<double, 3>> objectives);

// ---- campaign store ------------------------------------------------------
// One JSON-lines file per campaign: a header line, then one record per
// sample. Consumed by replay and the reporting layer.

struct CampaignHeader {
    std::string schema_hash;
    std::string model_id;
    std::string attack; // identity | capgd | moeva | caa
    AttackBudget budget;
};

struct Campaign {
    CampaignHeader header;
    std::vector<AttackOutcome> outcomes;
};

std::string campaign_to_jsonl(const Campaign& c);
Campaign campaign_from_jsonl(const std::string& text);
void save_campaign(const std::string& path, const Campaign& c);
Campaign load_campaign(const std::string& path);

} // namespace tabrobust
