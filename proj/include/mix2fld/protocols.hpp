#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mix2fld/channel.hpp"
#include "mix2fld/data.hpp"
#include "mix2fld/errors.hpp"
#include "mix2fld/mixup.hpp"
#include "mix2fld/nn.hpp"
#include "mix2fld/rng.hpp"

namespace mix2fld {

// Per-device protocol state. `data` holds the normalized training view;
// output accumulators implement the per-label running averages.
struct DeviceState {
    int id = 0;
    ModelParams model;
    Dataset data;
    std::vector<std::vector<double>> output_sum;   // per ground-truth label
    std::vector<std::size_t> output_count;
    std::vector<OutputVector> teacher;             // adopted global outputs (FD)
    bool has_teacher = false;
    std::vector<Sample> raw_seeds;                 // FLD round-1 upload
    std::vector<MixedSample> mixed_seeds;          // MixFLD / Mix2FLD round-1 upload

    void reset_accumulators() {
        const std::size_t n = data.n_labels;
        output_sum.assign(n, std::vector<double>(n, 0.0));
        output_count.assign(n, 0);
    }
};

struct ServerState {
    ModelParams global_model;
    std::vector<OutputVector> global_outputs;      // per label, empty before first aggregation
    std::vector<double> prev_model_agg;            // previous aggregated weights
    std::vector<OutputVector> prev_outputs_agg;    // previous aggregated outputs
    std::vector<Sample> conversion_seeds;          // seed set for output-to-model conversion
    std::size_t rounds_done = 0;
    double clock_s = 0.0;                          // simulated time
};

struct RoundLog {
    std::size_t round = 0;
    bool skipped = false;     // no device uploaded successfully
    bool converged = false;
    std::vector<int> participants;                 // D^p
    std::vector<TransmissionResult> uplink;        // per device
    std::vector<TransmissionResult> downlink;      // per device (empty when skipped)
    std::uint64_t up_payload_bits = 0;             // per-device payload this round
    std::uint64_t dn_payload_bits = 0;
    std::vector<double> accuracy;                  // per device, after download
    double conv_metric = std::numeric_limits<double>::infinity();
    double comm_time_s = 0.0;
    double compute_time_s = 0.0;
    double cum_time_s = 0.0;
    std::size_t seed_shortfall = 0;
    bool conversion_fallback = false;
    std::size_t uniform_fallback_labels = 0;       // empty-accumulator fallbacks among uploads
};

// Deterministic per-iteration cost stand-in for device and server compute.
struct ComputeModel {
    double local_iter_s = 2e-5;
    double conv_iter_s = 2e-5;
};

struct RoundContext {
    Scheme scheme = Scheme::FL;
    HyperParams hyper;
    LinkConfig uplink;
    LinkConfig downlink;
    PayloadSpec payload;        // round index is filled per call
    double lambda = 0.1;
    std::size_t n_seed = 10;    // N_s
    std::size_t n_inverse = 20; // N_I
    KdSign kd_sign = KdSign::Attract;
    bool clip_inverse = false;
    ComputeModel compute;
    std::uint64_t master_seed = 1;
    const Dataset* test_set = nullptr;  // normalized; accuracy skipped when null
};

// All parties start from one seeded init so aggregation averages models
// from a common origin.
inline std::vector<DeviceState> make_devices(const ArchSpec& arch, std::vector<Dataset> local_data,
                                             std::uint64_t master_seed) {
    RngStream init = RngStream::derive(master_seed, "init/model");
    ModelParams shared = init_model(arch, init);
    std::vector<DeviceState> devices;
    devices.reserve(local_data.size());
    for (std::size_t d = 0; d < local_data.size(); ++d) {
        DeviceState dev;
        dev.id = static_cast<int>(d);
        dev.model = shared;
        dev.data = std::move(local_data[d]);
        dev.reset_accumulators();
        devices.push_back(std::move(dev));
    }
    return devices;
}

inline ServerState make_server(const ArchSpec& arch, std::uint64_t master_seed) {
    RngStream init = RngStream::derive(master_seed, "init/model");
    ServerState s;
    s.global_model = init_model(arch, init);
    return s;
}

// K single-sample SGD iterations over uniform local draws, plain-FL
// style. When accumulate is set the per-label output averages are
// updated alongside, as the FD-family uplink requires.
inline void local_update_fl(DeviceState& dev, const HyperParams& hp, bool accumulate,
                            RngStream& rng) {
    dev.reset_accumulators();
    for (std::size_t k = 0; k < hp.local_iters; ++k) {
        const Sample& s = dev.data.samples[rng.uniform_index(dev.data.size())];
        if (accumulate) {
            OutputVector out = forward(dev.model, s.features);
            const std::size_t n = argmax(s.label);
            for (std::size_t m = 0; m < out.size(); ++m) dev.output_sum[n][m] += out[m];
            ++dev.output_count[n];
        }
        dev.model = sgd_step(dev.model, s, hp.eta);
    }
}

// FD local update: KD-regularized SGD against the adopted teacher, with
// output accumulation. Without a teacher (first round, stale downlink)
// beta falls back to zero, which matches the plain step bit for bit.
inline void local_update_fd(DeviceState& dev, const HyperParams& hp, KdSign sign, RngStream& rng) {
    dev.reset_accumulators();
    const bool teach = dev.has_teacher;
    const OutputVector uniform(dev.data.n_labels, 1.0 / static_cast<double>(dev.data.n_labels));
    for (std::size_t k = 0; k < hp.local_iters; ++k) {
        const Sample& s = dev.data.samples[rng.uniform_index(dev.data.size())];
        OutputVector out = forward(dev.model, s.features);
        const std::size_t n = argmax(s.label);
        for (std::size_t m = 0; m < out.size(); ++m) dev.output_sum[n][m] += out[m];
        ++dev.output_count[n];
        const OutputVector& teacher = teach ? dev.teacher[n] : uniform;
        dev.model = sgd_kd_step(dev.model, s, teacher, hp.eta, teach ? hp.beta : 0.0, sign);
    }
}

// Per-label average outputs for the round; labels never drawn fall back
// to the uniform distribution.
inline std::vector<OutputVector> finalize_local_outputs(const DeviceState& dev) {
    const std::size_t n_labels = dev.data.n_labels;
    std::vector<OutputVector> out(n_labels);
    for (std::size_t n = 0; n < n_labels; ++n) {
        if (dev.output_count[n] == 0) {
            out[n].assign(n_labels, 1.0 / static_cast<double>(n_labels));
            continue;
        }
        out[n].resize(n_labels);
        const double inv = 1.0 / static_cast<double>(dev.output_count[n]);
        for (std::size_t m = 0; m < n_labels; ++m) out[n][m] = dev.output_sum[n][m] * inv;
    }
    return out;
}

struct WeightedUpload {
    const ModelParams* params = nullptr;
    double weight = 0.0;  // |S_d|
};

// Sample-count weighted average of uploaded weight vectors. A single
// upload is returned unchanged.
inline ModelParams aggregate_weights(std::span<const WeightedUpload> uploads) {
    if (uploads.empty()) throw NoParticipantsError();
    if (uploads.size() == 1) return *uploads[0].params;
    for (const auto& u : uploads)
        if (!(u.params->arch == uploads[0].params->arch))
            throw ConfigError("aggregate_weights: mismatched architectures");

    double total = 0.0;
    for (const auto& u : uploads) total += u.weight;
    ModelParams out = *uploads[0].params;
    std::fill(out.w.begin(), out.w.end(), 0.0);
    for (const auto& u : uploads) {
        const double f = u.weight / total;
        for (std::size_t i = 0; i < out.w.size(); ++i) out.w[i] += f * u.params->w[i];
    }
    return out;
}

// Unweighted per-label mean of the uploaded average output vectors.
inline std::vector<OutputVector> aggregate_outputs(
    std::span<const std::vector<OutputVector>* const> uploads) {
    if (uploads.empty()) throw NoParticipantsError();
    const std::size_t n_labels = uploads[0]->size();
    std::vector<OutputVector> out(n_labels);
    const double inv = 1.0 / static_cast<double>(uploads.size());
    for (std::size_t n = 0; n < n_labels; ++n) {
        out[n].assign((*uploads[0])[n].size(), 0.0);
        for (const auto* u : uploads)
            for (std::size_t m = 0; m < out[n].size(); ++m) out[n][m] += (*u)[n][m];
        for (double& v : out[n]) v *= inv;
    }
    return out;
}

// Output-to-model conversion: K_s iterations of SGD with KD on uniform
// seed draws, teacher picked by each seed's (arg-max) ground-truth label.
inline ModelParams output_to_model(const ModelParams& start, std::span<const Sample> seeds,
                                   const std::vector<OutputVector>& global_outputs,
                                   const HyperParams& hp, KdSign sign, RngStream& rng) {
    if (hp.conv_iters == 0) return start;
    if (seeds.empty()) throw ConversionError("output_to_model: empty seed set");
    ModelParams w = start;
    for (std::size_t k = 0; k < hp.conv_iters; ++k) {
        const Sample& s = seeds[rng.uniform_index(seeds.size())];
        const OutputVector& teacher = global_outputs[argmax(s.label)];
        w = sgd_kd_step(w, s, teacher, hp.eta, hp.beta, sign);
    }
    return w;
}

// ||cur - prev||_2 / ||prev||_2; infinite when prev has zero norm.
inline double relative_change(std::span<const double> prev, std::span<const double> cur) {
    double denom = 0.0, num = 0.0;
    for (std::size_t i = 0; i < cur.size(); ++i) {
        denom += prev[i] * prev[i];
        const double d = cur[i] - prev[i];
        num += d * d;
    }
    if (denom == 0.0) return std::numeric_limits<double>::infinity();
    return std::sqrt(num / denom);
}

inline bool check_convergence(std::span<const double> prev, std::span<const double> cur,
                              double epsilon) {
    return relative_change(prev, cur) < epsilon;
}

inline double evaluate_accuracy(const ModelParams& model, const Dataset& test) {
    if (test.empty()) return 0.0;
    std::size_t hits = 0;
    for (const Sample& s : test.samples)
        if (argmax(forward(model, s.features)) == argmax(s.label)) ++hits;
    return static_cast<double>(hits) / static_cast<double>(test.size());
}

namespace detail {

inline std::string stream_label(const char* base, int device, std::size_t round) {
    return std::string(base) + "/d" + std::to_string(device) + "/r" + std::to_string(round);
}

// Round-1 seed preparation per scheme. Mixed seeds are built from pairs
// with distinct labels; provenance records the device and source indices.
inline void prepare_seeds(const RoundContext& ctx, DeviceState& dev) {
    if (ctx.scheme == Scheme::FLD) {
        RngStream rng = RngStream::derive(ctx.master_seed, "rawseed/d" + std::to_string(dev.id));
        dev.raw_seeds.clear();
        for (std::size_t i = 0; i < ctx.n_seed; ++i)
            dev.raw_seeds.push_back(dev.data.samples[rng.uniform_index(dev.data.size())]);
        return;
    }
    RngStream rng = RngStream::derive(ctx.master_seed, "seed/d" + std::to_string(dev.id));
    dev.mixed_seeds.clear();
    for (SeedPair& p : select_seed_raw(dev.data, ctx.n_seed, rng)) {
        MixedSample m = mixup_pair(p.first, p.second, ctx.lambda);
        m.device = dev.id;
        m.source_i = {dev.id, p.index_first};
        m.source_j = {dev.id, p.index_second};
        dev.mixed_seeds.push_back(std::move(m));
    }
}

inline void clip_features(std::vector<double>& f, double lo, double hi) {
    for (double& v : f) v = std::min(hi, std::max(lo, v));
}

}  // namespace detail

// One global update: seed generation (round 1, FLD family), local
// updates, uplink, aggregation, inverse-Mixup and output-to-model
// conversion where the scheme calls for them, downlink, bookkeeping.
inline RoundLog run_round(const RoundContext& ctx, std::vector<DeviceState>& devices,
                          ServerState& server) {
    const std::size_t p = server.rounds_done + 1;
    const std::size_t n_labels = devices.empty() ? 0 : devices[0].data.n_labels;
    RoundLog log;
    log.round = p;

    // Device side: seed generation, then local updates.
    for (DeviceState& dev : devices) {
        if (p == 1 && is_fld_family(ctx.scheme) && ctx.n_seed > 0) detail::prepare_seeds(ctx, dev);
        RngStream rng = RngStream::derive(ctx.master_seed, detail::stream_label("local", dev.id, p));
        if (ctx.scheme == Scheme::FD)
            local_update_fd(dev, ctx.hyper, ctx.kd_sign, rng);
        else
            local_update_fl(dev, ctx.hyper, ctx.scheme != Scheme::FL, rng);
    }

    // Uplink, one FDMA channel per device.
    PayloadSpec payload = ctx.payload;
    payload.scheme = ctx.scheme;
    payload.round = p;
    log.up_payload_bits = payload_bits(payload, LinkDirection::Uplink);
    log.dn_payload_bits = payload_bits(payload, LinkDirection::Downlink);

    std::vector<std::size_t> participants;
    for (std::size_t d = 0; d < devices.size(); ++d) {
        RngStream rng =
            RngStream::derive(ctx.master_seed, detail::stream_label("chan/up", devices[d].id, p));
        TransmissionResult r = simulate_transmission(
            ctx.uplink, static_cast<double>(log.up_payload_bits), ctx.uplink.budget_slots(), rng);
        if (!r.outage) {
            participants.push_back(d);
            log.participants.push_back(devices[d].id);
        }
        log.uplink.push_back(r);
    }

    std::size_t up_phase = 0;
    for (const auto& r : log.uplink) up_phase = std::max(up_phase, r.slots);

    log.compute_time_s = static_cast<double>(ctx.hyper.local_iters) * ctx.compute.local_iter_s;

    if (participants.empty()) {
        // Global update skipped; devices continue from their local models.
        log.skipped = true;
        log.comm_time_s = ctx.uplink.slot_s * static_cast<double>(up_phase);
        server.clock_s += log.comm_time_s + log.compute_time_s;
        log.cum_time_s = server.clock_s;
        if (ctx.test_set)
            for (const DeviceState& dev : devices)
                log.accuracy.push_back(evaluate_accuracy(dev.model, *ctx.test_set));
        server.rounds_done = p;
        return log;
    }

    // Server side: aggregation.
    if (ctx.scheme == Scheme::FL) {
        std::vector<WeightedUpload> uploads;
        for (std::size_t d : participants)
            uploads.push_back({&devices[d].model, static_cast<double>(devices[d].data.size())});
        ModelParams agg = aggregate_weights(uploads);
        log.conv_metric = server.prev_model_agg.empty()
                              ? std::numeric_limits<double>::infinity()
                              : relative_change(server.prev_model_agg, agg.w);
        server.prev_model_agg = agg.w;
        server.global_model = std::move(agg);
    } else {
        std::vector<std::vector<OutputVector>> finals;
        finals.reserve(participants.size());
        for (std::size_t d : participants) {
            finals.push_back(finalize_local_outputs(devices[d]));
            for (std::size_t n = 0; n < n_labels; ++n)
                if (devices[d].output_count[n] == 0) ++log.uniform_fallback_labels;
        }
        std::vector<const std::vector<OutputVector>*> ptrs;
        for (const auto& f : finals) ptrs.push_back(&f);
        std::vector<OutputVector> agg = aggregate_outputs(ptrs);

        double metric = std::numeric_limits<double>::infinity();
        if (!server.prev_outputs_agg.empty()) {
            metric = 0.0;
            for (std::size_t n = 0; n < n_labels; ++n)
                metric = std::max(metric, relative_change(server.prev_outputs_agg[n], agg[n]));
        }
        log.conv_metric = metric;
        server.prev_outputs_agg = agg;
        server.global_outputs = std::move(agg);

        // Round-1 seed collection from successful uploaders only.
        if (p == 1 && is_fld_family(ctx.scheme)) {
            if (ctx.scheme == Scheme::FLD) {
                for (std::size_t d : participants)
                    for (const Sample& s : devices[d].raw_seeds) server.conversion_seeds.push_back(s);
            } else {
                std::vector<MixedSample> pool;
                for (std::size_t d : participants)
                    for (const MixedSample& m : devices[d].mixed_seeds) pool.push_back(m);
                if (ctx.scheme == Scheme::MixFLD) {
                    for (const MixedSample& m : pool)
                        server.conversion_seeds.push_back({m.features, m.soft_label});
                } else {
                    RngStream rng = RngStream::derive(ctx.master_seed, "invmix");
                    InverseSet inv = generate_inverse_set(pool, ctx.n_inverse, rng);
                    log.seed_shortfall = inv.shortfall;
                    for (InverseMixedSample& s : inv.samples) {
                        if (ctx.clip_inverse) detail::clip_features(s.features, 0.0, 1.0);
                        server.conversion_seeds.push_back(
                            {std::move(s.features), one_hot(s.hard_label, n_labels)});
                    }
                }
            }
        }

        // Output-to-model conversion for the FLD family.
        if (is_fld_family(ctx.scheme)) {
            RngStream rng = RngStream::derive(ctx.master_seed, "conv/r" + std::to_string(p));
            try {
                server.global_model = output_to_model(server.global_model, server.conversion_seeds,
                                                      server.global_outputs, ctx.hyper, ctx.kd_sign,
                                                      rng);
                log.compute_time_s +=
                    static_cast<double>(ctx.hyper.conv_iters) * ctx.compute.conv_iter_s;
            } catch (const ConversionError&) {
                log.conversion_fallback = true;  // keep the previous global model
            }
        }
    }

    // Downlink multicast; every device decodes independently.
    std::size_t dn_phase = 0;
    for (DeviceState& dev : devices) {
        RngStream rng =
            RngStream::derive(ctx.master_seed, detail::stream_label("chan/dn", dev.id, p));
        TransmissionResult r = simulate_transmission(
            ctx.downlink, static_cast<double>(log.dn_payload_bits), ctx.downlink.budget_slots(), rng);
        dn_phase = std::max(dn_phase, r.slots);
        if (!r.outage) {
            if (ctx.scheme == Scheme::FD) {
                dev.teacher = server.global_outputs;
                dev.has_teacher = true;
            } else {
                dev.model = server.global_model;
            }
        }
        log.downlink.push_back(r);
    }

    log.comm_time_s = ctx.uplink.slot_s * static_cast<double>(up_phase) +
                      ctx.downlink.slot_s * static_cast<double>(dn_phase);
    server.clock_s += log.comm_time_s + log.compute_time_s;
    log.cum_time_s = server.clock_s;

    if (ctx.test_set)
        for (const DeviceState& dev : devices)
            log.accuracy.push_back(evaluate_accuracy(dev.model, *ctx.test_set));

    server.rounds_done = p;
    return log;
}

// Repeats run_round until the relative change of the scheme's global
// vector drops below epsilon or the round cap is hit.
inline std::vector<RoundLog> run_until_converged(const RoundContext& ctx,
                                                 std::vector<DeviceState>& devices,
                                                 ServerState& server, std::size_t max_rounds) {
    std::vector<RoundLog> logs;
    for (std::size_t p = 0; p < max_rounds; ++p) {
        RoundLog log = run_round(ctx, devices, server);
        log.converged = log.conv_metric < ctx.hyper.epsilon;
        const bool stop = log.converged;
        logs.push_back(std::move(log));
        if (stop) break;
    }
    return logs;
}

}  // namespace mix2fld
