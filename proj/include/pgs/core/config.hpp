#pragma once

#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace pgs {

// Every training threshold and schedule in one place. Field names double as
// the keys of the flat key=value config file format.
struct TrainConfig {
    // Sensitivity extraction
    double tau_e = 0.05;   // edge response binarization threshold
    double tau_s = 0.3;    // pooled smoothing threshold
    int smooth_window = 3; // average pooling window (odd)

    // Dual-branch loss
    double lambda_s = 0.1;   // sensitivity loss weight
    double ssim_weight = 0.2;

    // Sensitivity-guided densification
    int iter_h = 1000;
    int iter_m = 1500;
    double tau_h = 0.9;
    double tau_l = 0.3;
    double tau_h_omega = 25.0;
    double tau_m_omega = 10.0;
    double tau_beta = 0.85;
    double tau_gamma = 0.55;
    double od_exponent = 1.2;
    int warmup_iters = 500;
    int reinit_stride = 4;

    // Density-control schedule inherited from the base method
    double adc_grad_threshold = 2e-4;
    int adc_interval = 100;
    int densify_until = 15000;
    int opacity_reset_interval = 3000;
    double prune_alpha = 0.005;
    double split_scale_divisor = 1.6;
    double percent_dense = 0.01;

    // Optimization
    int total_iters = 3000;
    std::uint64_t seed = 0;
    double lr_means = 1.6e-4;        // scaled by scene extent, decays to lr_means_final
    double lr_means_final = 1.6e-6;  // scaled by scene extent
    double lr_colors = 2.5e-3;
    double lr_opacity = 5e-2;
    double lr_log_scales = 5e-3;
    double lr_rotations = 1e-3;
    double lr_sensitivity = 5e-2;

    // Ablation switches
    bool disable_pe = false;   // skip perception-oriented smoothing of the maps
    bool disable_hd = false;   // skip high-sensitivity densification
    bool disable_md = false;   // skip medium-sensitivity densification
    bool disable_sdr = false;  // skip the depth-reinitialization gate
    bool disable_od = false;   // clone with exponent 1 (no opacity decline)

    // Bookkeeping
    int checkpoint_interval = 500;
    int eval_interval = 500;
    int threads = 0;  // 0 = default_thread_count()
    std::string data_dir;
    std::string out_dir;

    std::vector<std::string> validate() const {
        std::vector<std::string> out;
        if (!(tau_l > 0 && tau_l < tau_h && tau_h < 1))
            out.push_back("requires 0 < tau_l < tau_h < 1");
        if (!(tau_e > 0 && tau_e < 1)) out.push_back("tau_e must be in (0,1)");
        if (!(tau_s > 0 && tau_s < 1)) out.push_back("tau_s must be in (0,1)");
        if (!(lambda_s >= 0 && lambda_s <= 1)) out.push_back("lambda_s must be in [0,1]");
        if (od_exponent < 1) out.push_back("od_exponent must be >= 1");
        if (smooth_window < 1 || smooth_window % 2 == 0)
            out.push_back("smooth_window must be odd and >= 1");
        for (const auto& [v, name] :
             {std::pair<int, const char*>{iter_h, "iter_h"}, {iter_m, "iter_m"},
              {adc_interval, "adc_interval"}, {opacity_reset_interval, "opacity_reset_interval"},
              {checkpoint_interval, "checkpoint_interval"}, {eval_interval, "eval_interval"}})
            if (v < 1) out.push_back(std::string(name) + " must be >= 1");
        return out;
    }
};

namespace detail {

struct ConfigField {
    std::function<void(TrainConfig&, const std::string&)> set;
    std::function<std::string(const TrainConfig&)> get;
};

inline std::string format_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

inline const std::map<std::string, ConfigField>& config_fields() {
    static const std::map<std::string, ConfigField> fields = [] {
        std::map<std::string, ConfigField> m;
        auto add_d = [&m](const std::string& k, double TrainConfig::* p) {
            m[k] = {[p](TrainConfig& c, const std::string& v) { c.*p = std::stod(v); },
                    [p](const TrainConfig& c) { return format_double(c.*p); }};
        };
        auto add_i = [&m](const std::string& k, int TrainConfig::* p) {
            m[k] = {[p](TrainConfig& c, const std::string& v) { c.*p = std::stoi(v); },
                    [p](const TrainConfig& c) { return std::to_string(c.*p); }};
        };
        auto add_b = [&m](const std::string& k, bool TrainConfig::* p) {
            m[k] = {[p](TrainConfig& c, const std::string& v) {
                        if (v == "true" || v == "1")
                            c.*p = true;
                        else if (v == "false" || v == "0")
                            c.*p = false;
                        else
                            throw std::runtime_error("boolean value must be true/false/1/0, got '" + v + "'");
                    },
                    [p](const TrainConfig& c) { return c.*p ? "true" : "false"; }};
        };
        auto add_s = [&m](const std::string& k, std::string TrainConfig::* p) {
            m[k] = {[p](TrainConfig& c, const std::string& v) { c.*p = v; },
                    [p](const TrainConfig& c) { return c.*p; }};
        };
        add_d("tau_e", &TrainConfig::tau_e);
        add_d("tau_s", &TrainConfig::tau_s);
        add_i("smooth_window", &TrainConfig::smooth_window);
        add_d("lambda_s", &TrainConfig::lambda_s);
        add_d("ssim_weight", &TrainConfig::ssim_weight);
        add_i("iter_h", &TrainConfig::iter_h);
        add_i("iter_m", &TrainConfig::iter_m);
        add_d("tau_h", &TrainConfig::tau_h);
        add_d("tau_l", &TrainConfig::tau_l);
        add_d("tau_h_omega", &TrainConfig::tau_h_omega);
        add_d("tau_m_omega", &TrainConfig::tau_m_omega);
        add_d("tau_beta", &TrainConfig::tau_beta);
        add_d("tau_gamma", &TrainConfig::tau_gamma);
        add_d("od_exponent", &TrainConfig::od_exponent);
        add_i("warmup_iters", &TrainConfig::warmup_iters);
        add_i("reinit_stride", &TrainConfig::reinit_stride);
        add_d("adc_grad_threshold", &TrainConfig::adc_grad_threshold);
        add_i("adc_interval", &TrainConfig::adc_interval);
        add_i("densify_until", &TrainConfig::densify_until);
        add_i("opacity_reset_interval", &TrainConfig::opacity_reset_interval);
        add_d("prune_alpha", &TrainConfig::prune_alpha);
        add_d("split_scale_divisor", &TrainConfig::split_scale_divisor);
        add_d("percent_dense", &TrainConfig::percent_dense);
        add_i("total_iters", &TrainConfig::total_iters);
        m["seed"] = {[](TrainConfig& c, const std::string& v) { c.seed = std::stoull(v); },
                     [](const TrainConfig& c) { return std::to_string(c.seed); }};
        add_d("lr_means", &TrainConfig::lr_means);
        add_d("lr_means_final", &TrainConfig::lr_means_final);
        add_d("lr_colors", &TrainConfig::lr_colors);
        add_d("lr_opacity", &TrainConfig::lr_opacity);
        add_d("lr_log_scales", &TrainConfig::lr_log_scales);
        add_d("lr_rotations", &TrainConfig::lr_rotations);
        add_d("lr_sensitivity", &TrainConfig::lr_sensitivity);
        add_b("disable_pe", &TrainConfig::disable_pe);
        add_b("disable_hd", &TrainConfig::disable_hd);
        add_b("disable_md", &TrainConfig::disable_md);
        add_b("disable_sdr", &TrainConfig::disable_sdr);
        add_b("disable_od", &TrainConfig::disable_od);
        add_i("checkpoint_interval", &TrainConfig::checkpoint_interval);
        add_i("eval_interval", &TrainConfig::eval_interval);
        add_i("threads", &TrainConfig::threads);
        add_s("data_dir", &TrainConfig::data_dir);
        add_s("out_dir", &TrainConfig::out_dir);
        return m;
    }();
    return fields;
}

}  // namespace detail

inline void apply_config_line(TrainConfig& cfg, const std::string& key, const std::string& value) {
    const auto& fields = detail::config_fields();
    const auto it = fields.find(key);
    if (it == fields.end()) throw std::runtime_error("unknown config key '" + key + "'");
    it->second.set(cfg, value);
}

// Flat key=value text. '#' starts a comment; blank lines ignored; unknown
// keys are hard errors.
inline TrainConfig parse_config_text(std::istream& in, TrainConfig cfg = {}) {
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config line " + std::to_string(line_no) + ": expected key=value");
        apply_config_line(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return cfg;
}

inline TrainConfig load_config_file(const std::string& path, TrainConfig cfg = {}) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file '" + path + "'");
    return parse_config_text(in, cfg);
}

inline std::string config_to_text(const TrainConfig& cfg) {
    std::ostringstream os;
    for (const auto& [key, field] : detail::config_fields()) os << key << "=" << field.get(cfg) << "\n";
    return os.str();
}

}  // namespace pgs
