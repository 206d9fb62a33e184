#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "bidda/datasets.hpp"
#include "bidda/losses.hpp"
#include "bidda/metrics.hpp"

namespace bidda {

struct TrainingSchedule {
    int epochs = 500;
    int eta_activation_epoch = 250;  // self-labeling off before this epoch
    int batch_size = 32;
    double lr_generator = 1e-4;
    double lr_discriminator = 1e-4;
    double lr_classifier = 1e-4;
    double adam_beta1 = 0.5, adam_beta2 = 0.999, adam_eps = 1e-8;
    int checkpoint_interval = 25;
    int eval_interval = 25;

    void validate() const {
        if (epochs < 0) throw ConfigError("schedule.epochs must be >= 0");
        if (eta_activation_epoch > epochs)
            throw ConfigError("schedule.eta_activation_epoch must be <= epochs");
        if (batch_size < 1) throw ConfigError("schedule.batch_size must be >= 1");
        for (double lr : {lr_generator, lr_discriminator, lr_classifier})
            if (lr < 0) throw ConfigError("learning rates must be >= 0");
    }
};

struct ExperimentConfig {
    std::string setting = "synthetic";
    uint64_t seed = 1;
    std::string output_dir = "runs/exp";
    DataConfig data;
    ModelArch arch;
    LossWeights weights;
    TrainingSchedule sched;
    SsimConfig ssim;
    double cycle_weight = 0.0;  // optional image-cycle baseline term

    void validate() const {
        weights.validate();
        sched.validate();
        if (cycle_weight < 0) throw ConfigError("cycle_weight must be >= 0");
    }
};

nlohmann::json default_config_json();
nlohmann::json merge_config(nlohmann::json base, const nlohmann::json& overlay);
// "a.b.c=value" with value parsed as JSON when possible, else as a string.
void apply_override(nlohmann::json& cfg, const std::string& assignment);

ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& c);

// defaults <- file (optional) <- --set overrides, validated.
std::pair<ExperimentConfig, nlohmann::json> load_config(
    const std::string& config_path, const std::vector<std::string>& overrides);

}  // namespace bidda
