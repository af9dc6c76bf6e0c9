#pragma once

#include <map>
#include <string>
#include <vector>

#include "mix2fld/errors.hpp"

namespace mix2fld {

// Built-in experiment presets. Each variant overrides only the documented
// keys of its base; `presets show <name>` prints the exact text, which
// parses like any config file.
namespace presets {

namespace detail {

// Full-scale MNIST base: 10 devices, full-length training and channel
// constants, asymmetric 23/40 dBm powers.
inline const char* kFullScaleBase = R"(# MNIST base configuration (supply IDX files under data/)
scheme = mix2fld
seed = 1
dataset = idx
train_images = data/train-images-idx3-ubyte
train_labels = data/train-labels-idx1-ubyte
test_images = data/t10k-images-idx3-ubyte
test_labels = data/t10k-labels-idx1-ubyte
devices = 10
samples_per_device = 500
partition = iid
arch_hidden = 32
arch_activation = tanh
eta = 0.01
beta = 0.01
local_iters = 6400
conv_iters = 3200
epsilon = 0.05
max_rounds = 100
lambda = 0.1
n_seed = 10
n_inverse = 20
b_mod_bits = 32
b_out_bits = 32
b_s_bits = 6272
n_mod_override = 12544
channel = fading
p_up_dbm = 23
p_dn_dbm = 40
w_mhz = 10
n_channels = 2
r_m = 1000
alpha = 4
n0_dbm_hz = -174
theta_up = 3
theta_dn = 3
tau_ms = 1
t_max_ms = 100
)";

// Desk-scale synthetic base: minutes, not hours, and no dataset files.
inline const char* kDeskBase = R"(# Desk-scale synthetic configuration
scheme = mix2fld
seed = 1
dataset = synthetic
synth_classes = 3
synth_dim = 16
synth_train_per_class = 1000
synth_test_per_class = 150
synth_spread = 0.25
devices = 5
samples_per_device = 210
partition = iid
arch_hidden = 32
arch_activation = tanh
eta = 0.05
beta = 0.01
local_iters = 500
conv_iters = 500
epsilon = 0.001
max_rounds = 50
lambda = 0.1
n_seed = 20
n_inverse = 40
b_mod_bits = 32
b_out_bits = 32
b_s_bits = 128
channel = perfect
t_max_ms = 1000
compute_local_ms = 0.02
compute_conv_ms = 0.02
)";

inline std::string with_overrides(const std::string& base,
                                  const std::vector<std::pair<std::string, std::string>>& over) {
    // Replace in place so overridden keys keep their documented position.
    std::string out;
    std::vector<bool> used(over.size(), false);
    std::size_t start = 0;
    while (start <= base.size()) {
        std::size_t end = base.find('\n', start);
        std::string line = base.substr(start, end == std::string::npos ? end : end - start);
        std::string key = line.substr(0, line.find('='));
        while (!key.empty() && (key.back() == ' ' || key.back() == '\t')) key.pop_back();
        bool replaced = false;
        for (std::size_t i = 0; i < over.size(); ++i) {
            if (key == over[i].first) {
                out += over[i].first + " = " + over[i].second + "\n";
                used[i] = replaced = true;
                break;
            }
        }
        if (!replaced && !(line.empty() && end == std::string::npos)) out += line + "\n";
        if (end == std::string::npos) break;
        start = end + 1;
    }
    for (std::size_t i = 0; i < over.size(); ++i)
        if (!used[i]) out += over[i].first + " = " + over[i].second + "\n";
    return out;
}

}  // namespace detail

inline const std::map<std::string, std::string>& all() {
    static const std::map<std::string, std::string> table = [] {
        using detail::with_overrides;
        std::map<std::string, std::string> t;
        t["base"] = detail::kFullScaleBase;
        t["fig2a"] = detail::kFullScaleBase;  // asymmetric channels, IID
        t["fig2b"] = with_overrides(detail::kFullScaleBase, {{"p_up_dbm", "40"}});
        t["fig2c"] = with_overrides(detail::kFullScaleBase, {{"partition", "noniid"},
                                                         {"scarce_labels", "2"},
                                                         {"scarce_count", "2"},
                                                         {"abundant_count", "62"}});
        t["fig2d"] = with_overrides(detail::kFullScaleBase, {{"p_up_dbm", "40"},
                                                         {"partition", "noniid"},
                                                         {"scarce_labels", "2"},
                                                         {"scarce_count", "2"},
                                                         {"abundant_count", "62"}});
        t["fig3"] = with_overrides(detail::kFullScaleBase, {{"p_up_dbm", "40"},
                                                        {"sweep_devices", "10,50"}});
        t["table2"] = with_overrides(detail::kFullScaleBase,
                                     {{"privacy_mode", "mixup"},
                                      {"privacy_lambdas", "0.001,0.1,0.2,0.3,0.4,0.499"},
                                      {"privacy_n_s", "100"}});
        t["table3"] = with_overrides(detail::kFullScaleBase,
                                     {{"privacy_mode", "mix2up"},
                                      {"privacy_lambdas", "0.001,0.1,0.2,0.3,0.4,0.499"},
                                      {"privacy_n_s", "100"}});
        t["desk"] = detail::kDeskBase;
        // Throttled uplink: model-weight uploads mostly exceed the slot
        // budget while output-sized payloads pass in one slot.
        t["desk_asym"] = with_overrides(detail::kDeskBase, {{"partition", "noniid"},
                                                            {"scarce_labels", "2"},
                                                            {"scarce_count", "2"},
                                                            {"abundant_count", "206"},
                                                            {"synth_spread", "0.4"},
                                                            {"channel", "fading"},
                                                            {"w_mhz", "5"},
                                                            {"n_channels", "1"},
                                                            {"p_up_dbm", "14.4"},
                                                            {"p_dn_dbm", "33"},
                                                            {"t_max_ms", "24"},
                                                            {"n_seed", "50"},
                                                            {"n_inverse", "100"},
                                                            {"conv_iters", "1500"},
                                                            {"compute_local_ms", "0.004"},
                                                            {"compute_conv_ms", "0.004"},
                                                            {"max_rounds", "200"}});
        return t;
    }();
    return table;
}

inline std::vector<std::string> names() {
    std::vector<std::string> out;
    for (const auto& [name, text] : all()) out.push_back(name);
    return out;
}

inline const std::string& text(const std::string& name) {
    const auto& t = all();
    auto it = t.find(name);
    if (it == t.end()) throw ConfigError("unknown preset '" + name + "'");
    return it->second;
}

}  // namespace presets
}  // namespace mix2fld
