#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mix2fld/errors.hpp"
#include "mix2fld/linalg.hpp"
#include "mix2fld/rng.hpp"
#include "mix2fld/sample.hpp"

namespace mix2fld {

// Reference to a raw sample inside a device dataset.
struct SampleRef {
    int device = -1;
    std::size_t index = 0;
};

// Superposition of two raw samples with distinct one-hot labels. The soft
// label carries lambda at label_i and 1-lambda at label_j.
struct MixedSample {
    std::vector<double> features;
    std::vector<double> soft_label;
    int device = -1;
    double lambda = 0.0;
    std::size_t label_i = 0;  // weighted by lambda
    std::size_t label_j = 0;  // weighted by 1-lambda
    SampleRef source_i, source_j;
};

// Cross-device recombination of mixed samples whose label is hard again.
struct InverseMixedSample {
    std::vector<double> features;
    std::vector<double> label;  // reconstructed, one-hot within 1e-9
    std::size_t hard_label = 0;
    std::vector<int> devices;            // contributing devices, pairwise distinct
    std::vector<std::size_t> pool_indices;   // contributing mixed samples
    std::vector<SampleRef> raw_sources;  // all raws behind the contributors
};

// features = lambda * X_i + (1-lambda) * X_j, same for labels.
inline MixedSample mixup_pair(const Sample& s_i, const Sample& s_j, double lambda) {
    if (!(lambda > 0.0 && lambda < 0.5))
        throw ParameterError("mixup: lambda must lie strictly inside (0, 0.5), got " +
                             std::to_string(lambda));
    if (s_i.features.size() != s_j.features.size() || s_i.label.size() != s_j.label.size())
        throw InputError("mixup: sample dimensions differ");
    if (!is_one_hot(s_i.label) || !is_one_hot(s_j.label))
        throw InputError("mixup: raw samples must carry one-hot labels");
    const std::size_t n = argmax(s_i.label), m = argmax(s_j.label);
    if (n == m) throw InputError("mixup: the two samples must have different labels");

    MixedSample out;
    out.lambda = lambda;
    out.label_i = n;
    out.label_j = m;
    out.features.resize(s_i.features.size());
    for (std::size_t k = 0; k < out.features.size(); ++k)
        out.features[k] = lambda * s_i.features[k] + (1.0 - lambda) * s_j.features[k];
    out.soft_label.assign(s_i.label.size(), 0.0);
    out.soft_label[n] = lambda;
    out.soft_label[m] = 1.0 - lambda;
    return out;
}

// Inverse mixing ratios for N samples mixed with ratios lambda_vec
// (sum 1). Row r of the cyclic-shift matrix starts at lambda_r; the
// returned matrix is its inverse, so row n holds the coefficients that
// recover the n-th hard label.
struct InverseRatioMatrix {
    Matrix coeff;  // N x N
    double operator()(std::size_t target, std::size_t k) const { return coeff(target, k); }
    std::size_t size() const { return coeff.n; }
};

inline Matrix cyclic_shift_matrix(std::span<const double> lambda_vec) {
    const std::size_t n = lambda_vec.size();
    Matrix m(n);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < n; ++c) m(r, c) = lambda_vec[(r + c) % n];
    return m;
}

inline InverseRatioMatrix inverse_ratios(std::span<const double> lambda_vec) {
    if (lambda_vec.size() < 2) throw ParameterError("inverse_ratios: need at least two ratios");
    double sum = 0.0;
    for (double l : lambda_vec) {
        if (!(l > 0.0)) throw ParameterError("inverse_ratios: ratios must be positive");
        sum += l;
    }
    if (std::fabs(sum - 1.0) > 1e-9)
        throw ParameterError("inverse_ratios: ratios must sum to 1, got " + std::to_string(sum));
    try {
        return InverseRatioMatrix{invert(cyclic_shift_matrix(lambda_vec))};
    } catch (const SingularMatrixError& e) {
        throw SingularRatioError(std::string("inverse_ratios: ") + e.what());
    }
}

namespace detail {

inline bool symmetric_pair(const MixedSample& a, const MixedSample& b, double tol = 1e-9) {
    return a.label_i == b.label_j && a.label_j == b.label_i &&
           std::fabs(a.lambda - b.lambda) <= tol;
}

}  // namespace detail

// Combines two symmetric mixed samples from different devices into one
// sample carrying the requested hard label. target_label must be one of
// the pair's two label indices.
inline InverseMixedSample inverse_mixup(std::span<const MixedSample> mixed,
                                        std::size_t target_label) {
    if (mixed.size() != 2)
        throw PairingError("inverse_mixup: the protocol path combines exactly two mixed samples");
    const MixedSample& a = mixed[0];
    const MixedSample& b = mixed[1];
    if (a.device == b.device)
        throw PrivacyConstraintError("inverse_mixup: contributing samples share device " +
                                     std::to_string(a.device));
    if (!detail::symmetric_pair(a, b))
        throw PairingError("inverse_mixup: pair is not label-symmetric at a common ratio");
    if (a.features.size() != b.features.size())
        throw InputError("inverse_mixup: feature dimensions differ");

    std::size_t row;
    if (target_label == a.label_i)
        row = 0;
    else if (target_label == a.label_j)
        row = 1;
    else
        throw PairingError("inverse_mixup: target label " + std::to_string(target_label) +
                           " is not covered by the pair");

    const double lv[2] = {a.lambda, 1.0 - a.lambda};
    InverseRatioMatrix inv = inverse_ratios(lv);
    const double c0 = inv(row, 0), c1 = inv(row, 1);

    InverseMixedSample out;
    out.hard_label = target_label;
    out.devices = {a.device, b.device};
    out.features.resize(a.features.size());
    for (std::size_t k = 0; k < out.features.size(); ++k)
        out.features[k] = c0 * a.features[k] + c1 * b.features[k];
    out.label.resize(a.soft_label.size());
    for (std::size_t k = 0; k < out.label.size(); ++k)
        out.label[k] = c0 * a.soft_label[k] + c1 * b.soft_label[k];
    out.raw_sources = {a.source_i, a.source_j, b.source_i, b.source_j};

    if (std::fabs(out.label[target_label] - 1.0) > 1e-9)
        throw NumericalError("inverse_mixup: reconstructed label misses one-hot by " +
                             std::to_string(std::fabs(out.label[target_label] - 1.0)));
    return out;
}

// Pairs samples with symmetric soft labels across different devices:
// (n: lambda) matches (n: 1-lambda) on the same unordered label pair.
// Maximum matching per bucket via augmenting paths; candidate order, and
// therefore the result, follows pool order.
inline std::vector<std::pair<std::size_t, std::size_t>> pair_symmetric(
    std::span<const MixedSample> pool) {
    std::map<std::pair<std::size_t, std::size_t>, std::pair<std::vector<std::size_t>, std::vector<std::size_t>>>
        buckets;
    for (std::size_t i = 0; i < pool.size(); ++i) {
        const auto& s = pool[i];
        auto key = std::minmax(s.label_i, s.label_j);
        auto& [low_side, high_side] = buckets[{key.first, key.second}];
        (s.label_i == key.first ? low_side : high_side).push_back(i);
    }

    std::vector<std::pair<std::size_t, std::size_t>> result;
    for (auto& [key, sides] : buckets) {
        auto& [left, right] = sides;
        std::vector<std::size_t> match_of_right(right.size(), SIZE_MAX);
        std::vector<std::size_t> match_of_left(left.size(), SIZE_MAX);

        // Kuhn's augmenting-path search, deterministic in pool order.
        std::vector<char> visited;
        std::function<bool(std::size_t)> try_augment = [&](std::size_t li) -> bool {
            for (std::size_t ri = 0; ri < right.size(); ++ri) {
                if (visited[ri]) continue;
                const MixedSample& a = pool[left[li]];
                const MixedSample& b = pool[right[ri]];
                if (a.device == b.device || !detail::symmetric_pair(a, b)) continue;
                visited[ri] = 1;
                if (match_of_right[ri] == SIZE_MAX || try_augment(match_of_right[ri])) {
                    match_of_right[ri] = li;
                    match_of_left[li] = ri;
                    return true;
                }
            }
            return false;
        };
        for (std::size_t li = 0; li < left.size(); ++li) {
            visited.assign(right.size(), 0);
            try_augment(li);
        }
        for (std::size_t li = 0; li < left.size(); ++li)
            if (match_of_left[li] != SIZE_MAX)
                result.emplace_back(left[li], right[match_of_left[li]]);
    }
    std::sort(result.begin(), result.end());
    return result;
}

struct InverseSet {
    std::vector<InverseMixedSample> samples;
    std::size_t shortfall = 0;  // requested minus produced
    std::size_t reused = 0;     // samples produced from re-pairings
};

// Produces n_inverse inverse-mixed samples: each matched pair yields its
// two target labels in turn; once exhausted, the pool is re-paired from a
// fresh random shuffle and reused.
inline InverseSet generate_inverse_set(std::span<const MixedSample> pool, std::size_t n_inverse,
                                       RngStream& rng) {
    InverseSet out;
    if (n_inverse == 0) return out;

    auto emit_pass = [&](const std::vector<std::pair<std::size_t, std::size_t>>& pairs,
                         std::size_t first_pass_total) {
        for (const auto& [ia, ib] : pairs) {
            for (std::size_t target : {pool[ia].label_i, pool[ia].label_j}) {
                if (out.samples.size() >= n_inverse) return;
                const MixedSample two[2] = {pool[ia], pool[ib]};
                InverseMixedSample s = inverse_mixup(two, target);
                s.pool_indices = {ia, ib};
                if (out.samples.size() >= first_pass_total) ++out.reused;
                out.samples.push_back(std::move(s));
            }
        }
    };

    auto pairs = pair_symmetric(pool);
    if (pairs.empty()) {
        out.shortfall = n_inverse;
        return out;
    }
    const std::size_t first_pass_total = 2 * pairs.size();
    emit_pass(pairs, first_pass_total);

    std::vector<std::size_t> order(pool.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    while (out.samples.size() < n_inverse) {
        rng.shuffle(order);
        std::vector<MixedSample> reordered;
        reordered.reserve(pool.size());
        for (std::size_t i : order) reordered.push_back(pool[i]);
        auto repairs = pair_symmetric(reordered);
        if (repairs.empty()) break;  // cannot happen once pairs existed, kept as a guard
        for (auto& [x, y] : repairs) {
            x = order[x];
            y = order[y];
        }
        emit_pass(repairs, first_pass_total);
    }
    out.shortfall = n_inverse - out.samples.size();
    return out;
}

using RawLookup = std::function<const Sample&(const SampleRef&)>;

namespace detail {

constexpr double kDistanceFloor = 1e-12;

inline double min_source_distance(const std::vector<double>& released,
                                  std::span<const SampleRef> sources, const RawLookup& raw) {
    double best = std::numeric_limits<double>::infinity();
    for (const SampleRef& ref : sources)
        best = std::min(best, l2_distance(released, raw(ref).features));
    return std::max(best, kDistanceFloor);
}

}  // namespace detail

// Sample privacy: ln of the minimum Euclidean distance between any
// released sample and its raw sources, on the raw feature scale.
inline double sample_privacy(std::span<const MixedSample> mixed, const RawLookup& raw) {
    if (mixed.empty()) throw UndefinedMetricError("sample_privacy: empty mixed set");
    double best = std::numeric_limits<double>::infinity();
    for (const MixedSample& s : mixed) {
        const SampleRef refs[2] = {s.source_i, s.source_j};
        best = std::min(best, detail::min_source_distance(s.features, refs, raw));
    }
    return std::log(best);
}

// Mix2up variant: distances are taken against all contributing raw
// sources of each inverse-mixed sample.
inline double sample_privacy(std::span<const InverseMixedSample> inverse, const RawLookup& raw) {
    if (inverse.empty()) throw UndefinedMetricError("sample_privacy: empty inverse-mixed set");
    double best = std::numeric_limits<double>::infinity();
    for (const InverseMixedSample& s : inverse)
        best = std::min(best, detail::min_source_distance(s.features, s.raw_sources, raw));
    return std::log(best);
}

}  // namespace mix2fld
