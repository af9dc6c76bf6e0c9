#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "mix2fld/config.hpp"
#include "mix2fld/data.hpp"
#include "mix2fld/errors.hpp"
#include "mix2fld/mixup.hpp"
#include "mix2fld/protocols.hpp"

namespace mix2fld {

struct PrivacyRow {
    std::string dataset;
    double lambda = 0.0;
    std::string scheme;  // mixup | mix2up
    double privacy = 0.0;
};

struct ExperimentReport {
    ExperimentConfig config;
    std::string resolved;            // config echo, re-parseable
    std::vector<RoundLog> rounds;
    int ref_device = 0;
    std::vector<PrivacyRow> privacy;
};

namespace detail {

// Raw-scale train and test sets per the config's dataset source.
inline std::pair<Dataset, Dataset> build_datasets(const ExperimentConfig& c) {
    if (c.dataset == DatasetKind::Idx) {
        return {load_idx(c.train_images, c.train_labels), load_idx(c.test_images, c.test_labels)};
    }
    RngStream rng = RngStream::derive(c.seed, "data/synth");
    Dataset all = synth_gaussian(c.synth_classes, c.synth_dim,
                                 c.synth_train_per_class + c.synth_test_per_class, c.synth_spread,
                                 rng);
    Dataset train, test;
    train.n_labels = test.n_labels = all.n_labels;
    train.feature_dim = test.feature_dim = all.feature_dim;
    const std::size_t block = c.synth_train_per_class + c.synth_test_per_class;
    for (std::size_t cls = 0; cls < c.synth_classes; ++cls)
        for (std::size_t i = 0; i < block; ++i) {
            Sample& s = all.samples[cls * block + i];
            (i < c.synth_train_per_class ? train : test).samples.push_back(std::move(s));
        }
    return {std::move(train), std::move(test)};
}

inline std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

}  // namespace detail

// Drives one experiment end to end: dataset, partition, protocol rounds.
// Deterministic under (config, seed).
inline ExperimentReport run_experiment(const ExperimentConfig& c) {
    c.validate();
    auto [train_raw, test_raw] = detail::build_datasets(c);

    PartitionSpec pspec;
    pspec.devices = c.devices;
    pspec.per_device = c.samples_per_device;
    pspec.mode = c.partition_mode;
    pspec.scarce_labels = c.scarce_labels;
    pspec.scarce_count = c.scarce_count;
    pspec.abundant_count = c.abundant_count;
    RngStream prng = RngStream::derive(c.seed, "data/partition");
    std::vector<Dataset> locals = partition(train_raw, pspec, prng);
    for (Dataset& d : locals) d = d.normalized();
    Dataset test = test_raw.normalized();

    ArchSpec arch;
    arch.input_dim = train_raw.feature_dim;
    arch.hidden = c.arch_hidden;
    arch.output_dim = train_raw.n_labels;
    arch.activation = c.arch_activation;

    std::vector<DeviceState> devices = make_devices(arch, std::move(locals), c.seed);
    ServerState server = make_server(arch, c.seed);

    RoundContext ctx;
    ctx.scheme = c.scheme;
    ctx.hyper = c.hyper;
    ctx.uplink = c.uplink_config();
    ctx.downlink = c.downlink_config();
    ctx.payload.b_mod = c.b_mod_bits;
    ctx.payload.b_out = c.b_out_bits;
    ctx.payload.b_s = c.b_s_bits != 0 ? c.b_s_bits : 8 * std::uint64_t(train_raw.feature_dim);
    ctx.payload.n_mod = c.n_mod_override != 0 ? c.n_mod_override : arch.param_count();
    ctx.payload.n_labels = train_raw.n_labels;
    ctx.payload.n_seed = c.n_seed;
    ctx.lambda = c.lambda;
    ctx.n_seed = c.n_seed;
    ctx.n_inverse = c.n_inverse;
    ctx.kd_sign = c.kd_sign;
    ctx.clip_inverse = c.clip_inverse;
    ctx.compute.local_iter_s = c.compute_local_ms * 1e-3;
    ctx.compute.conv_iter_s = c.compute_conv_ms * 1e-3;
    ctx.master_seed = c.seed;
    ctx.test_set = &test;

    ExperimentReport report;
    report.config = c;
    report.resolved = resolved_text(c);
    report.ref_device =
        c.ref_device >= 0 ? c.ref_device
                          : static_cast<int>(RngStream::derive(c.seed, "ref").uniform_index(c.devices));
    report.rounds = run_until_converged(ctx, devices, server, c.max_rounds);
    return report;
}

// Privacy sweep over a lambda grid. Raw pairings are drawn once per mode
// and reused for every lambda, so within-table deltas depend only on the
// mixing ratio.
inline std::vector<PrivacyRow> privacy_sweep(const Dataset& raw, std::span<const double> lambdas,
                                             std::size_t n_s, PrivacyMode mode,
                                             std::uint64_t seed,
                                             const std::string& dataset_name = "dataset") {
    if (mode == PrivacyMode::Both) {
        auto rows = privacy_sweep(raw, lambdas, n_s, PrivacyMode::Mixup, seed, dataset_name);
        auto more = privacy_sweep(raw, lambdas, n_s, PrivacyMode::Mix2up, seed, dataset_name);
        rows.insert(rows.end(), more.begin(), more.end());
        return rows;
    }
    if (mode == PrivacyMode::None) return {};
    for (double l : lambdas)
        if (!(l > 0.0 && l < 0.5))
            throw ParameterError("privacy_sweep: lambda grid must lie inside (0, 0.5)");

    std::vector<PrivacyRow> rows;
    if (mode == PrivacyMode::Mixup) {
        RngStream rng = RngStream::derive(seed, "privacy/mixup/pairs");
        std::vector<SeedPair> pairs = select_seed_raw(raw, n_s, rng);
        RawLookup lookup = [&raw](const SampleRef& ref) -> const Sample& {
            return raw.samples[ref.index];
        };
        for (double l : lambdas) {
            std::vector<MixedSample> mixed;
            for (const SeedPair& p : pairs) {
                MixedSample m = mixup_pair(p.first, p.second, l);
                m.device = 0;
                m.source_i = {0, p.index_first};
                m.source_j = {0, p.index_second};
                mixed.push_back(std::move(m));
            }
            rows.push_back({dataset_name, l, "mixup", sample_privacy(mixed, lookup)});
        }
        return rows;
    }

    // Mix2up: split the dataset into two pseudo-devices, mix n_s pairs on
    // each, then inverse-mix n_s samples across them.
    RngStream split_rng = RngStream::derive(seed, "privacy/mix2up/split");
    std::vector<std::size_t> order(raw.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    split_rng.shuffle(order);
    Dataset half[2];
    for (int d = 0; d < 2; ++d) {
        half[d].n_labels = raw.n_labels;
        half[d].feature_dim = raw.feature_dim;
        half[d].feature_scale = raw.feature_scale;
    }
    for (std::size_t i = 0; i < order.size(); ++i)
        half[i % 2].samples.push_back(raw.samples[order[i]]);

    std::vector<std::vector<SeedPair>> pairs(2);
    for (int d = 0; d < 2; ++d) {
        RngStream rng = RngStream::derive(seed, "privacy/mix2up/pairs/d" + std::to_string(d));
        pairs[d] = select_seed_raw(half[d], n_s, rng);
    }
    RawLookup lookup = [&half](const SampleRef& ref) -> const Sample& {
        return half[ref.device].samples[ref.index];
    };
    for (double l : lambdas) {
        std::vector<MixedSample> pool;
        for (int d = 0; d < 2; ++d)
            for (const SeedPair& p : pairs[d]) {
                MixedSample m = mixup_pair(p.first, p.second, l);
                m.device = d;
                m.source_i = {d, p.index_first};
                m.source_j = {d, p.index_second};
                pool.push_back(std::move(m));
            }
        RngStream rng = RngStream::derive(seed, "privacy/mix2up/invmix");
        InverseSet inv = generate_inverse_set(pool, n_s, rng);
        if (inv.samples.empty())
            throw UndefinedMetricError("privacy_sweep: no symmetric pairs could be formed");
        rows.push_back({dataset_name, l, "mix2up", sample_privacy(inv.samples, lookup)});
    }
    return rows;
}

// CSV emission; header rows are always present and numbers carry nine
// significant digits.
inline void emit_csv(const ExperimentReport& report, const std::string& dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw InputError("cannot create output directory " + dir + ": " + ec.message());

    auto open = [&](const char* name) {
        std::ofstream f(fs::path(dir) / name, std::ios::binary);
        if (!f) throw InputError("cannot write " + (fs::path(dir) / name).string());
        return f;
    };
    using detail::fmt;

    {
        std::ofstream f = open("rounds.csv");
        f << "round,scheme,participants,up_bits,dn_bits,t_up,t_dn,sim_time_s,ref_accuracy,"
             "fleet_mean,fleet_var,conv_metric\n";
        for (const RoundLog& r : report.rounds) {
            std::size_t t_up = 0, t_dn = 0;
            for (const auto& t : r.uplink) t_up = std::max(t_up, t.slots);
            for (const auto& t : r.downlink) t_dn = std::max(t_dn, t.slots);
            double ref_acc = 0.0, mean = 0.0, var = 0.0;
            if (!r.accuracy.empty()) {
                ref_acc = r.accuracy[std::size_t(report.ref_device) % r.accuracy.size()];
                for (double a : r.accuracy) mean += a;
                mean /= double(r.accuracy.size());
                for (double a : r.accuracy) var += (a - mean) * (a - mean);
                var /= double(r.accuracy.size());
            }
            f << r.round << ',' << to_string(report.config.scheme) << ',' << r.participants.size()
              << ',' << r.up_payload_bits << ',' << r.dn_payload_bits << ',' << t_up << ',' << t_dn
              << ',' << fmt(r.cum_time_s) << ',' << fmt(ref_acc) << ',' << fmt(mean) << ','
              << fmt(var) << ',' << fmt(r.conv_metric) << '\n';
        }
    }
    {
        std::ofstream f = open("links.csv");
        f << "round,device,direction,payload_bits,slots,successes,outage\n";
        for (const RoundLog& r : report.rounds) {
            for (std::size_t d = 0; d < r.uplink.size(); ++d)
                f << r.round << ',' << d << ",up," << r.up_payload_bits << ',' << r.uplink[d].slots
                  << ',' << r.uplink[d].successful_slots << ',' << (r.uplink[d].outage ? 1 : 0)
                  << '\n';
            for (std::size_t d = 0; d < r.downlink.size(); ++d)
                f << r.round << ',' << d << ",dn," << r.dn_payload_bits << ',' << r.downlink[d].slots
                  << ',' << r.downlink[d].successful_slots << ',' << (r.downlink[d].outage ? 1 : 0)
                  << '\n';
        }
    }
    {
        std::ofstream f = open("ledger.csv");
        f << "direction,per_device_bits,fleet_bits,outages\n";
        std::uint64_t up = 0, dn = 0, up_fleet = 0, dn_fleet = 0, up_out = 0, dn_out = 0;
        for (const RoundLog& r : report.rounds) {
            up += r.up_payload_bits;
            dn += r.downlink.empty() ? 0 : r.dn_payload_bits;
            up_fleet += r.up_payload_bits * r.uplink.size();
            dn_fleet += r.dn_payload_bits * r.downlink.size();
            for (const auto& t : r.uplink) up_out += t.outage ? 1 : 0;
            for (const auto& t : r.downlink) dn_out += t.outage ? 1 : 0;
        }
        f << "up," << up << ',' << up_fleet << ',' << up_out << '\n';
        f << "dn," << dn << ',' << dn_fleet << ',' << dn_out << '\n';
    }
    {
        std::ofstream f = open("privacy.csv");
        f << "dataset,lambda,scheme,privacy\n";
        for (const PrivacyRow& row : report.privacy)
            f << row.dataset << ',' << fmt(row.lambda) << ',' << row.scheme << ','
              << fmt(row.privacy) << '\n';
    }
    {
        std::ofstream f = open("config.txt");
        f << report.resolved;
    }
}

}  // namespace mix2fld
