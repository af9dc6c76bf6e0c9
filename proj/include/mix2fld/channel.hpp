#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include "mix2fld/errors.hpp"
#include "mix2fld/rng.hpp"

namespace mix2fld {

enum class LinkDirection { Uplink, Downlink };

enum class Scheme { FL, FD, FLD, MixFLD, Mix2FLD };

inline const char* to_string(Scheme s) {
    switch (s) {
        case Scheme::FL: return "fl";
        case Scheme::FD: return "fd";
        case Scheme::FLD: return "fld";
        case Scheme::MixFLD: return "mixfld";
        case Scheme::Mix2FLD: return "mix2fld";
    }
    return "?";
}

// True for schemes that upload outputs and download model weights.
inline bool is_fld_family(Scheme s) {
    return s == Scheme::FLD || s == Scheme::MixFLD || s == Scheme::Mix2FLD;
}

// One direction of the radio link, in SI units. Uplink devices share the
// band via FDMA (W_up = W * N_ch / |D|); the downlink multicast uses the
// whole band.
struct LinkConfig {
    LinkDirection direction = LinkDirection::Uplink;
    double tx_power_w = 0.19952623149688797;     // 23 dBm
    double bandwidth_hz = 10e6;                  // total W
    std::size_t n_channels = 2;                  // uplink FDMA channels
    std::size_t n_devices = 10;
    double distance_m = 1000.0;
    double path_loss_exp = 4.0;                  // alpha >= 2
    double noise_density_w_hz = 3.9810717055349695e-21;  // -174 dBm/Hz
    double target_snr = 3.0;                     // theta, linear
    double slot_s = 1e-3;                        // tau
    std::size_t max_slots = 100;                 // T_max, split across directions
    bool perfect = false;                        // every slot decodes

    double effective_bandwidth_hz() const {
        if (direction == LinkDirection::Uplink)
            return bandwidth_hz * static_cast<double>(n_channels) / static_cast<double>(n_devices);
        return bandwidth_hz;
    }

    std::size_t budget_slots() const { return max_slots / 2; }

    void validate() const {
        if (!(tx_power_w > 0) || !(bandwidth_hz > 0) || !(distance_m > 0) ||
            !(noise_density_w_hz > 0) || !(target_snr > 0) || !(slot_s > 0))
            throw ConfigError("link: physical quantities must be positive");
        if (path_loss_exp < 2.0) throw ConfigError("link: path loss exponent must be >= 2");
        if (n_channels == 0 || n_devices == 0 || max_slots == 0)
            throw ConfigError("link: counts must be positive");
    }
};

// Minimum fade power that still decodes: SNR = P h r^-alpha / (W N0) >= theta.
inline double fade_threshold(const LinkConfig& link) {
    return link.target_snr * link.effective_bandwidth_hz() * link.noise_density_w_hz *
           std::pow(link.distance_m, link.path_loss_exp) / link.tx_power_w;
}

// P(h >= threshold) for the unit-mean exponential fade.
inline double success_probability(const LinkConfig& link) {
    if (link.perfect) return 1.0;
    return std::exp(-fade_threshold(link));
}

// Bits delivered by one successfully decoded slot: tau * W * log2(1 + theta).
inline double slot_capacity_bits(const LinkConfig& link) {
    return link.slot_s * link.effective_bandwidth_hz() * std::log2(1.0 + link.target_snr);
}

struct TransmissionResult {
    std::size_t slots = 0;             // consumed (== budget on outage)
    std::size_t successful_slots = 0;
    double bits_delivered = 0.0;
    bool outage = false;
};

// Draws IID unit-mean exponential fades per slot until the payload is
// delivered or the budget runs out. Outage is a result, not an error.
inline TransmissionResult simulate_transmission(const LinkConfig& link, double payload_bits,
                                                std::size_t budget_slots, RngStream& rng) {
    const double cap = slot_capacity_bits(link);
    const double threshold = fade_threshold(link);
    TransmissionResult r;
    for (std::size_t t = 1; t <= budget_slots; ++t) {
        bool ok = link.perfect || rng.exponential(1.0) >= threshold;
        r.slots = t;
        if (ok) {
            ++r.successful_slots;
            r.bits_delivered += cap;
            if (r.bits_delivered >= payload_bits) return r;
        }
    }
    r.slots = budget_slots;
    r.outage = true;
    return r;
}

// Per-round payload sizes in bits. FL moves model weights both ways; FD
// moves N_L output vectors of N_L entries both ways; the FLD family moves
// outputs up (plus seed samples in round 1) and weights down.
struct PayloadSpec {
    Scheme scheme = Scheme::FL;
    std::size_t round = 1;       // p, 1-based
    std::uint64_t b_mod = 32;    // bits per weight
    std::uint64_t b_out = 32;    // bits per output entry
    std::uint64_t b_s = 6272;    // bits per seed sample
    std::uint64_t n_mod = 0;     // model weight count
    std::uint64_t n_labels = 0;  // N_L
    std::uint64_t n_seed = 0;    // N_s

    void validate() const {
        if (b_mod == 0 || b_out == 0 || b_s == 0)
            throw ConfigError("payload: element sizes must be positive");
        if (n_mod == 0 || n_labels == 0) throw ConfigError("payload: counts must be positive");
        if (round == 0) throw ConfigError("payload: rounds are 1-based");
    }
};

inline std::uint64_t payload_bits(const PayloadSpec& spec, LinkDirection dir) {
    spec.validate();
    const std::uint64_t model_bits = spec.b_mod * spec.n_mod;
    const std::uint64_t output_bits = spec.b_out * spec.n_labels * spec.n_labels;
    switch (spec.scheme) {
        case Scheme::FL:
            return model_bits;
        case Scheme::FD:
            return output_bits;
        case Scheme::FLD:
        case Scheme::MixFLD:
        case Scheme::Mix2FLD:
            if (dir == LinkDirection::Uplink)
                return output_bits + (spec.round == 1 ? spec.b_s * spec.n_seed : 0);
            return model_bits;
    }
    return 0;
}

// dBm / dB conversions, applied at config-parse time.
inline double dbm_to_watt(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }
inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

}  // namespace mix2fld
