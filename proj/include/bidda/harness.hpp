#pragma once

#include "bidda/trainer.hpp"

namespace bidda {

// ---------------------------------------------------------------------------
// Ablation matrix: the five configurations of the component study, each a
// fresh training run. Rows 1-2 train one direction only and are scored with
// the classifier that exists in that configuration; the remaining rows use
// the full test-time ensemble.
// ---------------------------------------------------------------------------
struct AblationRow {
    std::string name;
    LossWeights weights;
    bool self_labeling = false;
    double accuracy = 0.0;
    EvalResult eval;

    nlohmann::json to_json() const {
        return {{"name", name},
                {"weights",
                 {{"alpha", weights.alpha},
                  {"beta", weights.beta},
                  {"gamma", weights.gamma},
                  {"mu", weights.mu},
                  {"eta", weights.eta},
                  {"nu", weights.nu}}},
                {"accuracy", accuracy},
                {"eval", eval.to_json()}};
    }
};

inline std::vector<AblationRow> ablation_rows(const LossWeights& base) {
    LossWeights off = base;
    off.alpha = off.beta = off.gamma = off.mu = off.eta = off.nu = 0.0;
    std::vector<AblationRow> rows(5);
    rows[0].name = "s2t_gan";
    rows[0].weights = off;
    rows[0].weights.alpha = base.alpha;
    rows[0].weights.beta = base.beta;
    rows[1].name = "t2s_gan";
    rows[1].weights = off;
    rows[1].weights.gamma = base.gamma;
    rows[1].weights.mu = base.mu;
    rows[2].name = "both_gans";
    rows[2].weights = rows[0].weights;
    rows[2].weights.gamma = base.gamma;
    rows[2].weights.mu = base.mu;
    rows[3].name = "both_plus_consistency";
    rows[3].weights = rows[2].weights;
    rows[3].weights.nu = base.nu;
    rows[4].name = "full_model";
    rows[4].weights = rows[3].weights;
    rows[4].weights.eta = base.eta;
    rows[4].self_labeling = true;
    return rows;
}

template <typename S>
std::vector<AblationRow> ablation_matrix(const ExperimentConfig& base, const DomainPair& data,
                                         std::ostream* progress = nullptr) {
    std::vector<AblationRow> rows = ablation_rows(base.weights);
    for (auto& row : rows) {
        ExperimentConfig cfg = base;
        cfg.output_dir.clear();  // in-memory runs; the caller persists the table
        cfg.weights = row.weights;
        if (!row.self_labeling) cfg.weights.eta = 0.0;
        if (progress) (*progress) << "[ablate] " << row.name << "\n";
        auto outcome = train<S>(cfg, data, progress);
        row.eval = outcome.final_eval;
        if (row.weights.beta > 0 && row.weights.mu > 0)
            row.accuracy = row.eval.acc_ensemble;
        else if (row.weights.beta > 0)
            row.accuracy = row.eval.acc_ct;
        else
            row.accuracy = row.eval.acc_cs_gts;
        if (progress) (*progress) << "[ablate] " << row.name << " accuracy " << row.accuracy << "\n";
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Robustness sweep: beta=mu varied over {0.1, 1, 10} with nu at its default,
// then nu varied over the same grid with beta=mu at their defaults. A run
// counts as completed when no non-finite loss aborted it.
// ---------------------------------------------------------------------------
struct SweepRun {
    std::string parameter;  // "beta_mu" or "nu"
    double value = 0.0;
    bool completed = false;
    std::string error;
    EvalResult eval;

    nlohmann::json to_json() const {
        return {{"parameter", parameter},
                {"value", value},
                {"completed", completed},
                {"error", error},
                {"eval", eval.to_json()}};
    }
};

template <typename S>
std::vector<SweepRun> robustness_sweep(const ExperimentConfig& base, const DomainPair& data,
                                       std::ostream* progress = nullptr) {
    const double grid[3] = {0.1, 1.0, 10.0};
    std::vector<SweepRun> runs;
    auto one = [&](const std::string& param, double v) {
        ExperimentConfig cfg = base;
        cfg.output_dir.clear();
        if (param == "beta_mu") {
            cfg.weights.beta = cfg.weights.mu = v;
        } else {
            cfg.weights.nu = v;
        }
        SweepRun run{param, v, false, "", {}};
        if (progress) (*progress) << "[sweep] " << param << " = " << v << "\n";
        try {
            auto outcome = train<S>(cfg, data, nullptr);
            run.completed = true;
            run.eval = outcome.final_eval;
            if (progress)
                (*progress) << "[sweep] " << param << " = " << v << " ensemble "
                            << run.eval.acc_ensemble << "\n";
        } catch (const TrainingError& e) {
            run.error = e.what();
            if (progress) (*progress) << "[sweep] " << param << " = " << v << " FAILED: " << e.what() << "\n";
        }
        runs.push_back(std::move(run));
    };
    for (double v : grid) one("beta_mu", v);
    for (double v : grid) one("nu", v);
    return runs;
}

}  // namespace bidda
