#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "mix2fld/channel.hpp"
#include "mix2fld/data.hpp"
#include "mix2fld/errors.hpp"
#include "mix2fld/nn.hpp"

namespace mix2fld {

enum class DatasetKind { Synthetic, Idx };
enum class ChannelKind { Fading, Perfect };
enum class PrivacyMode { None, Mixup, Mix2up, Both };

// Fully resolved experiment configuration. Values arrive from a flat
// `key = value` file in natural units (dBm, MHz, ms) and are converted to
// SI here; the simulation core never sees unit suffixes.
struct ExperimentConfig {
    Scheme scheme = Scheme::Mix2FLD;
    std::uint64_t seed = 1;
    std::string out_dir = "out";

    DatasetKind dataset = DatasetKind::Synthetic;
    std::string train_images, train_labels, test_images, test_labels;
    std::size_t synth_classes = 3;
    std::size_t synth_dim = 16;
    std::size_t synth_train_per_class = 1000;
    std::size_t synth_test_per_class = 150;
    double synth_spread = 0.35;

    std::size_t devices = 5;
    std::size_t samples_per_device = 210;
    PartitionMode partition_mode = PartitionMode::IID;
    std::size_t scarce_labels = 2;
    std::size_t scarce_count = 5;
    std::size_t abundant_count = 200;

    std::vector<std::size_t> arch_hidden = {32};
    Activation arch_activation = Activation::Tanh;

    HyperParams hyper;        // eta, beta, local_iters, conv_iters, epsilon
    std::size_t max_rounds = 50;

    double lambda = 0.1;
    std::size_t n_seed = 10;     // N_s
    std::size_t n_inverse = 20;  // N_I
    KdSign kd_sign = KdSign::Attract;
    bool clip_inverse = false;

    std::uint64_t b_mod_bits = 32;
    std::uint64_t b_out_bits = 32;
    std::uint64_t b_s_bits = 0;       // 0: derived as 8 bits x feature dim
    std::uint64_t n_mod_override = 0; // 0: use the actual parameter count

    ChannelKind channel = ChannelKind::Fading;
    double p_up_dbm = 23.0, p_dn_dbm = 40.0;
    double w_mhz = 10.0;
    std::size_t n_channels = 2;
    double r_m = 1000.0;
    double alpha = 4.0;
    double n0_dbm_hz = -174.0;
    double theta_up = 3.0, theta_dn = 3.0;  // linear target SNR
    double tau_ms = 1.0;
    double t_max_ms = 100.0;

    double compute_local_ms = 0.02;
    double compute_conv_ms = 0.02;

    int ref_device = -1;  // -1: picked at random per run
    std::vector<std::size_t> sweep_devices;

    PrivacyMode privacy_mode = PrivacyMode::None;
    std::vector<double> privacy_lambdas;
    std::size_t privacy_n_s = 100;

    LinkConfig uplink_config() const {
        LinkConfig l;
        l.direction = LinkDirection::Uplink;
        l.tx_power_w = dbm_to_watt(p_up_dbm);
        l.bandwidth_hz = w_mhz * 1e6;
        l.n_channels = n_channels;
        l.n_devices = devices;
        l.distance_m = r_m;
        l.path_loss_exp = alpha;
        l.noise_density_w_hz = dbm_to_watt(n0_dbm_hz);
        l.target_snr = theta_up;
        l.slot_s = tau_ms * 1e-3;
        l.max_slots = static_cast<std::size_t>(t_max_ms / tau_ms + 0.5);
        l.perfect = channel == ChannelKind::Perfect;
        return l;
    }

    LinkConfig downlink_config() const {
        LinkConfig l = uplink_config();
        l.direction = LinkDirection::Downlink;
        l.tx_power_w = dbm_to_watt(p_dn_dbm);
        l.target_snr = theta_dn;
        return l;
    }

    void validate() const {
        if (!(hyper.eta > 0)) throw ConfigError("eta must be > 0");
        if (hyper.beta < 0) throw ConfigError("beta must be >= 0");
        if (!(hyper.epsilon > 0)) throw ConfigError("epsilon must be > 0");
        if (devices == 0) throw ConfigError("devices must be >= 1");
        if (!(lambda > 0.0 && lambda < 0.5))
            throw ConfigError("lambda must lie strictly inside (0, 0.5)");
        if (alpha < 2.0) throw ConfigError("alpha must be >= 2");
        if (max_rounds == 0) throw ConfigError("max_rounds must be >= 1");
        if (is_fld_family(scheme) && n_seed == 0)
            throw ConfigError("scheme " + std::string(to_string(scheme)) + " requires n_seed > 0");
        if (dataset == DatasetKind::Idx &&
            (train_images.empty() || train_labels.empty() || test_images.empty() ||
             test_labels.empty()))
            throw ConfigError("dataset=idx requires train/test image and label paths");
        if (tau_ms <= 0 || t_max_ms < tau_ms) throw ConfigError("tau_ms / t_max_ms out of range");
        uplink_config().validate();
        downlink_config().validate();
    }
};

namespace detail {

struct RawConfig {
    std::map<std::string, std::pair<std::string, int>> entries;  // key -> (value, line)
    std::string source;
};

inline std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    std::size_t b = s.find_last_not_of(" \t\r");
    return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
}

inline RawConfig tokenize_config(std::istream& in, const std::string& source) {
    RawConfig raw;
    raw.source = source;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        std::string t = trim(line);
        if (t.empty()) continue;
        auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError(source + ":" + std::to_string(lineno) + ": expected `key = value`");
        std::string key = trim(t.substr(0, eq));
        std::string value = trim(t.substr(eq + 1));
        if (key.empty())
            throw ConfigError(source + ":" + std::to_string(lineno) + ": empty key");
        if (auto it = raw.entries.find(key); it != raw.entries.end())
            throw ConfigError(source + ": duplicate key '" + key + "' at lines " +
                              std::to_string(it->second.second) + " and " + std::to_string(lineno));
        raw.entries.emplace(key, std::make_pair(value, lineno));
    }
    return raw;
}

class ConfigReader {
public:
    explicit ConfigReader(RawConfig raw) : raw_(std::move(raw)) {}

    bool has(const std::string& key) {
        return raw_.entries.find(key) != raw_.entries.end();
    }

    template <typename F>
    void get(const std::string& key, F&& apply) {
        auto it = raw_.entries.find(key);
        if (it == raw_.entries.end()) return;
        consumed_.push_back(key);
        try {
            apply(it->second.first);
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception& e) {
            throw ConfigError(raw_.source + ":" + std::to_string(it->second.second) + ": key '" +
                              key + "': " + e.what());
        }
    }

    void finish() const {
        for (const auto& [key, value] : raw_.entries)
            if (std::find(consumed_.begin(), consumed_.end(), key) == consumed_.end())
                throw ConfigError(raw_.source + ":" + std::to_string(value.second) +
                                  ": unknown key '" + key + "'");
    }

private:
    RawConfig raw_;
    std::vector<std::string> consumed_;
};

inline double to_double(const std::string& s) {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw ConfigError("trailing characters in number '" + s + "'");
    return v;
}

inline std::uint64_t to_u64(const std::string& s) {
    std::size_t pos = 0;
    unsigned long long v = std::stoull(s, &pos);
    if (pos != s.size()) throw ConfigError("trailing characters in integer '" + s + "'");
    return v;
}

inline bool to_bool(const std::string& s) {
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw ConfigError("expected boolean, got '" + s + "'");
}

template <typename T, typename F>
std::vector<T> split_list(const std::string& s, F&& convert) {
    std::vector<T> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(convert(item));
    }
    return out;
}

inline Scheme parse_scheme(const std::string& s) {
    if (s == "fl") return Scheme::FL;
    if (s == "fd") return Scheme::FD;
    if (s == "fld") return Scheme::FLD;
    if (s == "mixfld") return Scheme::MixFLD;
    if (s == "mix2fld") return Scheme::Mix2FLD;
    throw ConfigError("unknown scheme '" + s + "' (fl|fd|fld|mixfld|mix2fld)");
}

}  // namespace detail

inline ExperimentConfig parse_config_stream(std::istream& in, const std::string& source) {
    detail::ConfigReader r(detail::tokenize_config(in, source));
    ExperimentConfig c;

    if (!r.has("scheme")) throw ConfigError(source + ": missing required key 'scheme'");
    r.get("scheme", [&](const std::string& v) { c.scheme = detail::parse_scheme(v); });
    r.get("seed", [&](const std::string& v) { c.seed = detail::to_u64(v); });
    r.get("out_dir", [&](const std::string& v) { c.out_dir = v; });

    r.get("dataset", [&](const std::string& v) {
        if (v == "synthetic") c.dataset = DatasetKind::Synthetic;
        else if (v == "idx") c.dataset = DatasetKind::Idx;
        else throw ConfigError("unknown dataset '" + v + "' (synthetic|idx)");
    });
    r.get("train_images", [&](const std::string& v) { c.train_images = v; });
    r.get("train_labels", [&](const std::string& v) { c.train_labels = v; });
    r.get("test_images", [&](const std::string& v) { c.test_images = v; });
    r.get("test_labels", [&](const std::string& v) { c.test_labels = v; });
    r.get("synth_classes", [&](const std::string& v) { c.synth_classes = detail::to_u64(v); });
    r.get("synth_dim", [&](const std::string& v) { c.synth_dim = detail::to_u64(v); });
    r.get("synth_train_per_class",
          [&](const std::string& v) { c.synth_train_per_class = detail::to_u64(v); });
    r.get("synth_test_per_class",
          [&](const std::string& v) { c.synth_test_per_class = detail::to_u64(v); });
    r.get("synth_spread", [&](const std::string& v) { c.synth_spread = detail::to_double(v); });

    r.get("devices", [&](const std::string& v) { c.devices = detail::to_u64(v); });
    r.get("samples_per_device",
          [&](const std::string& v) { c.samples_per_device = detail::to_u64(v); });
    r.get("partition", [&](const std::string& v) {
        if (v == "iid") c.partition_mode = PartitionMode::IID;
        else if (v == "noniid") c.partition_mode = PartitionMode::NonIID;
        else throw ConfigError("unknown partition '" + v + "' (iid|noniid)");
    });
    r.get("scarce_labels", [&](const std::string& v) { c.scarce_labels = detail::to_u64(v); });
    r.get("scarce_count", [&](const std::string& v) { c.scarce_count = detail::to_u64(v); });
    r.get("abundant_count", [&](const std::string& v) { c.abundant_count = detail::to_u64(v); });

    r.get("arch_hidden", [&](const std::string& v) {
        c.arch_hidden = detail::split_list<std::size_t>(
            v, [](const std::string& s) { return detail::to_u64(s); });
    });
    r.get("arch_activation", [&](const std::string& v) {
        if (v == "tanh") c.arch_activation = Activation::Tanh;
        else if (v == "relu") c.arch_activation = Activation::Relu;
        else throw ConfigError("unknown activation '" + v + "' (tanh|relu)");
    });

    r.get("eta", [&](const std::string& v) { c.hyper.eta = detail::to_double(v); });
    r.get("beta", [&](const std::string& v) { c.hyper.beta = detail::to_double(v); });
    r.get("local_iters", [&](const std::string& v) { c.hyper.local_iters = detail::to_u64(v); });
    r.get("conv_iters", [&](const std::string& v) { c.hyper.conv_iters = detail::to_u64(v); });
    r.get("epsilon", [&](const std::string& v) { c.hyper.epsilon = detail::to_double(v); });
    r.get("max_rounds", [&](const std::string& v) { c.max_rounds = detail::to_u64(v); });

    r.get("lambda", [&](const std::string& v) { c.lambda = detail::to_double(v); });
    r.get("n_seed", [&](const std::string& v) { c.n_seed = detail::to_u64(v); });
    r.get("n_inverse", [&](const std::string& v) { c.n_inverse = detail::to_u64(v); });
    r.get("kd_sign", [&](const std::string& v) {
        if (v == "attract") c.kd_sign = KdSign::Attract;
        else if (v == "repel") c.kd_sign = KdSign::Repel;
        else throw ConfigError("unknown kd_sign '" + v + "' (attract|repel)");
    });
    r.get("clip", [&](const std::string& v) { c.clip_inverse = detail::to_bool(v); });

    r.get("b_mod_bits", [&](const std::string& v) { c.b_mod_bits = detail::to_u64(v); });
    r.get("b_out_bits", [&](const std::string& v) { c.b_out_bits = detail::to_u64(v); });
    r.get("b_s_bits", [&](const std::string& v) { c.b_s_bits = detail::to_u64(v); });
    r.get("n_mod_override", [&](const std::string& v) { c.n_mod_override = detail::to_u64(v); });

    r.get("channel", [&](const std::string& v) {
        if (v == "fading") c.channel = ChannelKind::Fading;
        else if (v == "perfect") c.channel = ChannelKind::Perfect;
        else throw ConfigError("unknown channel '" + v + "' (fading|perfect)");
    });
    r.get("p_up_dbm", [&](const std::string& v) { c.p_up_dbm = detail::to_double(v); });
    r.get("p_dn_dbm", [&](const std::string& v) { c.p_dn_dbm = detail::to_double(v); });
    r.get("w_mhz", [&](const std::string& v) { c.w_mhz = detail::to_double(v); });
    r.get("n_channels", [&](const std::string& v) { c.n_channels = detail::to_u64(v); });
    r.get("r_m", [&](const std::string& v) { c.r_m = detail::to_double(v); });
    r.get("alpha", [&](const std::string& v) { c.alpha = detail::to_double(v); });
    r.get("n0_dbm_hz", [&](const std::string& v) { c.n0_dbm_hz = detail::to_double(v); });
    r.get("theta_up", [&](const std::string& v) { c.theta_up = detail::to_double(v); });
    r.get("theta_dn", [&](const std::string& v) { c.theta_dn = detail::to_double(v); });
    r.get("tau_ms", [&](const std::string& v) { c.tau_ms = detail::to_double(v); });
    r.get("t_max_ms", [&](const std::string& v) { c.t_max_ms = detail::to_double(v); });

    r.get("compute_local_ms",
          [&](const std::string& v) { c.compute_local_ms = detail::to_double(v); });
    r.get("compute_conv_ms", [&](const std::string& v) { c.compute_conv_ms = detail::to_double(v); });

    r.get("ref_device", [&](const std::string& v) { c.ref_device = int(detail::to_double(v)); });
    r.get("sweep_devices", [&](const std::string& v) {
        c.sweep_devices = detail::split_list<std::size_t>(
            v, [](const std::string& s) { return detail::to_u64(s); });
    });

    r.get("privacy_mode", [&](const std::string& v) {
        if (v == "none") c.privacy_mode = PrivacyMode::None;
        else if (v == "mixup") c.privacy_mode = PrivacyMode::Mixup;
        else if (v == "mix2up") c.privacy_mode = PrivacyMode::Mix2up;
        else if (v == "both") c.privacy_mode = PrivacyMode::Both;
        else throw ConfigError("unknown privacy_mode '" + v + "' (none|mixup|mix2up|both)");
    });
    r.get("privacy_lambdas", [&](const std::string& v) {
        c.privacy_lambdas =
            detail::split_list<double>(v, [](const std::string& s) { return detail::to_double(s); });
    });
    r.get("privacy_n_s", [&](const std::string& v) { c.privacy_n_s = detail::to_u64(v); });

    r.finish();
    c.validate();
    return c;
}

inline ExperimentConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    return parse_config_stream(in, path);
}

inline ExperimentConfig parse_config_text(const std::string& text, const std::string& name) {
    std::istringstream in(text);
    return parse_config_stream(in, name);
}

// Canonical echo of every resolved key, so emitted reports are
// self-describing and re-runnable.
inline std::string resolved_text(const ExperimentConfig& c) {
    std::ostringstream o;
    o.precision(17);
    auto list_u = [](const std::vector<std::size_t>& v) {
        std::string s;
        for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
        return s;
    };
    auto list_d = [](const std::vector<double>& v) {
        std::ostringstream s;
        s.precision(17);
        for (std::size_t i = 0; i < v.size(); ++i) s << (i ? "," : "") << v[i];
        return s.str();
    };
    o << "scheme = " << to_string(c.scheme) << "\n";
    o << "seed = " << c.seed << "\n";
    o << "out_dir = " << c.out_dir << "\n";
    o << "dataset = " << (c.dataset == DatasetKind::Synthetic ? "synthetic" : "idx") << "\n";
    if (c.dataset == DatasetKind::Idx) {
        o << "train_images = " << c.train_images << "\n";
        o << "train_labels = " << c.train_labels << "\n";
        o << "test_images = " << c.test_images << "\n";
        o << "test_labels = " << c.test_labels << "\n";
    } else {
        o << "synth_classes = " << c.synth_classes << "\n";
        o << "synth_dim = " << c.synth_dim << "\n";
        o << "synth_train_per_class = " << c.synth_train_per_class << "\n";
        o << "synth_test_per_class = " << c.synth_test_per_class << "\n";
        o << "synth_spread = " << c.synth_spread << "\n";
    }
    o << "devices = " << c.devices << "\n";
    o << "samples_per_device = " << c.samples_per_device << "\n";
    o << "partition = " << (c.partition_mode == PartitionMode::IID ? "iid" : "noniid") << "\n";
    if (c.partition_mode == PartitionMode::NonIID) {
        o << "scarce_labels = " << c.scarce_labels << "\n";
        o << "scarce_count = " << c.scarce_count << "\n";
        o << "abundant_count = " << c.abundant_count << "\n";
    }
    o << "arch_hidden = " << list_u(c.arch_hidden) << "\n";
    o << "arch_activation = " << to_string(c.arch_activation) << "\n";
    o << "eta = " << c.hyper.eta << "\n";
    o << "beta = " << c.hyper.beta << "\n";
    o << "local_iters = " << c.hyper.local_iters << "\n";
    o << "conv_iters = " << c.hyper.conv_iters << "\n";
    o << "epsilon = " << c.hyper.epsilon << "\n";
    o << "max_rounds = " << c.max_rounds << "\n";
    o << "lambda = " << c.lambda << "\n";
    o << "n_seed = " << c.n_seed << "\n";
    o << "n_inverse = " << c.n_inverse << "\n";
    o << "kd_sign = " << (c.kd_sign == KdSign::Attract ? "attract" : "repel") << "\n";
    o << "clip = " << (c.clip_inverse ? "true" : "false") << "\n";
    o << "b_mod_bits = " << c.b_mod_bits << "\n";
    o << "b_out_bits = " << c.b_out_bits << "\n";
    o << "b_s_bits = " << c.b_s_bits << "\n";
    o << "n_mod_override = " << c.n_mod_override << "\n";
    o << "channel = " << (c.channel == ChannelKind::Fading ? "fading" : "perfect") << "\n";
    o << "p_up_dbm = " << c.p_up_dbm << "\n";
    o << "p_dn_dbm = " << c.p_dn_dbm << "\n";
    o << "w_mhz = " << c.w_mhz << "\n";
    o << "n_channels = " << c.n_channels << "\n";
    o << "r_m = " << c.r_m << "\n";
    o << "alpha = " << c.alpha << "\n";
    o << "n0_dbm_hz = " << c.n0_dbm_hz << "\n";
    o << "theta_up = " << c.theta_up << "\n";
    o << "theta_dn = " << c.theta_dn << "\n";
    o << "tau_ms = " << c.tau_ms << "\n";
    o << "t_max_ms = " << c.t_max_ms << "\n";
    o << "compute_local_ms = " << c.compute_local_ms << "\n";
    o << "compute_conv_ms = " << c.compute_conv_ms << "\n";
    o << "ref_device = " << c.ref_device << "\n";
    if (!c.sweep_devices.empty()) o << "sweep_devices = " << list_u(c.sweep_devices) << "\n";
    if (c.privacy_mode != PrivacyMode::None) {
        o << "privacy_mode = "
          << (c.privacy_mode == PrivacyMode::Mixup
                  ? "mixup"
                  : c.privacy_mode == PrivacyMode::Mix2up ? "mix2up" : "both")
          << "\n";
        o << "privacy_lambdas = " << list_d(c.privacy_lambdas) << "\n";
        o << "privacy_n_s = " << c.privacy_n_s << "\n";
    }
    return o.str();
}

}  // namespace mix2fld
