#include "bidda/config.hpp"

#include <fstream>

namespace bidda {

nlohmann::json default_config_json() {
    return nlohmann::json{
        {"version", 1},
        {"setting", "synthetic"},
        {"seed", 1},
        {"output_dir", "runs/exp"},
        {"data",
         {{"root", ""},
          {"textures", ""},
          {"ensemble_val_size", 1000},
          {"synthetic",
           {{"source", 2000}, {"target", 2000}, {"image_size", 12}, {"classes", 10}}},
          {"src_train", -1},
          {"src_val", -1},
          {"cache_dir", ""}}},
        {"arch",
         {{"gen_features", 64},
          {"gen_blocks", 4},
          {"noise_dim", 5},
          {"disc_features", {64, 128}},
          {"clf_conv", {32, 48}},
          {"clf_fc", {100, 100}},
          {"clf_kernel", 5},
          {"disc_final_bn", false},
          {"init_std", 0.02},
          {"bn_momentum", 0.99},
          {"leaky_slope", 0.2}}},
        {"loss_weights",
         {{"alpha", 1.0}, {"beta", 10.0}, {"gamma", 1.0}, {"mu", 10.0}, {"eta", 1.0}, {"nu", 1.0}}},
        {"cycle_weight", 0.0},
        {"schedule",
         {{"epochs", 500},
          {"eta_activation_epoch", 250},
          {"batch_size", 32},
          {"lr_generator", 1e-4},
          {"lr_discriminator", 1e-4},
          {"lr_classifier", 1e-4},
          {"adam_beta1", 0.5},
          {"adam_beta2", 0.999},
          {"adam_eps", 1e-8},
          {"checkpoint_interval", 25},
          {"eval_interval", 25}}},
        {"ssim", {{"window", 8}, {"k1", 0.01}, {"k2", 0.03}, {"dynamic_range", 255.0}}}};
}

nlohmann::json merge_config(nlohmann::json base, const nlohmann::json& overlay) {
    if (!overlay.is_object()) return overlay;
    if (!base.is_object()) base = nlohmann::json::object();
    for (auto it = overlay.begin(); it != overlay.end(); ++it) {
        if (it->is_object() && base.contains(it.key()))
            base[it.key()] = merge_config(base[it.key()], *it);
        else
            base[it.key()] = *it;
    }
    return base;
}

void apply_override(nlohmann::json& cfg, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos)
        throw ConfigError("override '" + assignment + "' is not of the form key.path=value");
    const std::string path = assignment.substr(0, eq);
    const std::string raw = assignment.substr(eq + 1);
    nlohmann::json value;
    try {
        value = nlohmann::json::parse(raw);
    } catch (const nlohmann::json::exception&) {
        value = raw;  // unquoted strings
    }
    nlohmann::json* node = &cfg;
    size_t start = 0;
    for (;;) {
        const auto dot = path.find('.', start);
        const std::string key = path.substr(start, dot - start);
        if (key.empty()) throw ConfigError("override '" + assignment + "' has an empty key");
        if (dot == std::string::npos) {
            (*node)[key] = value;
            return;
        }
        node = &(*node)[key];
        start = dot + 1;
    }
}

namespace {

template <typename T>
T get(const nlohmann::json& j, const char* key) {
    if (!j.contains(key)) throw ConfigError(std::string("missing config key '") + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad config value for '") + key + "': " + e.what());
    }
}

}  // namespace

ExperimentConfig config_from_json(const nlohmann::json& j) {
    ExperimentConfig c;
    c.setting = get<std::string>(j, "setting");
    c.seed = get<uint64_t>(j, "seed");
    c.output_dir = get<std::string>(j, "output_dir");
    c.cycle_weight = get<double>(j, "cycle_weight");

    const auto& d = j.at("data");
    c.data.data_root = get<std::string>(d, "root");
    c.data.texture_dir = get<std::string>(d, "textures");
    c.data.ensemble_val_size = get<int>(d, "ensemble_val_size");
    c.data.src_train = get<int>(d, "src_train");
    c.data.src_val = get<int>(d, "src_val");
    c.data.cache_dir = get<std::string>(d, "cache_dir");
    const auto& sy = d.at("synthetic");
    c.data.synth_source = get<int>(sy, "source");
    c.data.synth_target = get<int>(sy, "target");
    c.data.synth_image_size = get<int>(sy, "image_size");
    c.data.synth_classes = get<int>(sy, "classes");
    c.data.seed = c.seed;

    const auto& a = j.at("arch");
    c.arch.gen_features = get<int>(a, "gen_features");
    c.arch.gen_blocks = get<int>(a, "gen_blocks");
    c.arch.noise_dim = get<int>(a, "noise_dim");
    c.arch.disc_f1 = a.at("disc_features").at(0).get<int>();
    c.arch.disc_f2 = a.at("disc_features").at(1).get<int>();
    c.arch.clf_conv1 = a.at("clf_conv").at(0).get<int>();
    c.arch.clf_conv2 = a.at("clf_conv").at(1).get<int>();
    c.arch.clf_fc1 = a.at("clf_fc").at(0).get<int>();
    c.arch.clf_fc2 = a.at("clf_fc").at(1).get<int>();
    c.arch.clf_kernel = get<int>(a, "clf_kernel");
    c.arch.disc_final_bn = get<bool>(a, "disc_final_bn");
    c.arch.init_std = get<double>(a, "init_std");
    c.arch.bn_momentum = get<double>(a, "bn_momentum");
    c.arch.leaky_slope = get<double>(a, "leaky_slope");

    const auto& w = j.at("loss_weights");
    c.weights.alpha = get<double>(w, "alpha");
    c.weights.beta = get<double>(w, "beta");
    c.weights.gamma = get<double>(w, "gamma");
    c.weights.mu = get<double>(w, "mu");
    c.weights.eta = get<double>(w, "eta");
    c.weights.nu = get<double>(w, "nu");

    const auto& s = j.at("schedule");
    c.sched.epochs = get<int>(s, "epochs");
    c.sched.eta_activation_epoch = get<int>(s, "eta_activation_epoch");
    c.sched.batch_size = get<int>(s, "batch_size");
    c.sched.lr_generator = get<double>(s, "lr_generator");
    c.sched.lr_discriminator = get<double>(s, "lr_discriminator");
    c.sched.lr_classifier = get<double>(s, "lr_classifier");
    c.sched.adam_beta1 = get<double>(s, "adam_beta1");
    c.sched.adam_beta2 = get<double>(s, "adam_beta2");
    c.sched.adam_eps = get<double>(s, "adam_eps");
    c.sched.checkpoint_interval = get<int>(s, "checkpoint_interval");
    c.sched.eval_interval = get<int>(s, "eval_interval");

    const auto& ss = j.at("ssim");
    c.ssim.window = get<int>(ss, "window");
    c.ssim.k1 = get<double>(ss, "k1");
    c.ssim.k2 = get<double>(ss, "k2");
    c.ssim.dynamic_range = get<double>(ss, "dynamic_range");

    c.validate();
    c.ssim.validate();
    return c;
}

nlohmann::json config_to_json(const ExperimentConfig& c) {
    nlohmann::json j = default_config_json();
    j["setting"] = c.setting;
    j["seed"] = c.seed;
    j["output_dir"] = c.output_dir;
    j["cycle_weight"] = c.cycle_weight;
    j["data"]["root"] = c.data.data_root;
    j["data"]["textures"] = c.data.texture_dir;
    j["data"]["ensemble_val_size"] = c.data.ensemble_val_size;
    j["data"]["src_train"] = c.data.src_train;
    j["data"]["src_val"] = c.data.src_val;
    j["data"]["cache_dir"] = c.data.cache_dir;
    j["data"]["synthetic"] = {{"source", c.data.synth_source},
                              {"target", c.data.synth_target},
                              {"image_size", c.data.synth_image_size},
                              {"classes", c.data.synth_classes}};
    j["arch"] = {{"gen_features", c.arch.gen_features},
                 {"gen_blocks", c.arch.gen_blocks},
                 {"noise_dim", c.arch.noise_dim},
                 {"disc_features", {c.arch.disc_f1, c.arch.disc_f2}},
                 {"clf_conv", {c.arch.clf_conv1, c.arch.clf_conv2}},
                 {"clf_fc", {c.arch.clf_fc1, c.arch.clf_fc2}},
                 {"clf_kernel", c.arch.clf_kernel},
                 {"disc_final_bn", c.arch.disc_final_bn},
                 {"init_std", c.arch.init_std},
                 {"bn_momentum", c.arch.bn_momentum},
                 {"leaky_slope", c.arch.leaky_slope}};
    j["loss_weights"] = {{"alpha", c.weights.alpha}, {"beta", c.weights.beta},
                         {"gamma", c.weights.gamma}, {"mu", c.weights.mu},
                         {"eta", c.weights.eta},     {"nu", c.weights.nu}};
    j["schedule"] = {{"epochs", c.sched.epochs},
                     {"eta_activation_epoch", c.sched.eta_activation_epoch},
                     {"batch_size", c.sched.batch_size},
                     {"lr_generator", c.sched.lr_generator},
                     {"lr_discriminator", c.sched.lr_discriminator},
                     {"lr_classifier", c.sched.lr_classifier},
                     {"adam_beta1", c.sched.adam_beta1},
                     {"adam_beta2", c.sched.adam_beta2},
                     {"adam_eps", c.sched.adam_eps},
                     {"checkpoint_interval", c.sched.checkpoint_interval},
                     {"eval_interval", c.sched.eval_interval}};
    j["ssim"] = {{"window", c.ssim.window},
                 {"k1", c.ssim.k1},
                 {"k2", c.ssim.k2},
                 {"dynamic_range", c.ssim.dynamic_range}};
    return j;
}

std::pair<ExperimentConfig, nlohmann::json> load_config(
    const std::string& config_path, const std::vector<std::string>& overrides) {
    nlohmann::json j = default_config_json();
    if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in) throw ConfigError("cannot open config file " + config_path);
        try {
            j = merge_config(j, nlohmann::json::parse(in, nullptr, true, true));
        } catch (const nlohmann::json::parse_error& e) {
            throw ConfigError("parse error in " + config_path + ": " + e.what());
        }
    }
    for (const auto& ov : overrides) apply_override(j, ov);
    return {config_from_json(j), j};
}

}  // namespace bidda
