#include <catch2/catch.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <vector>

#include "mix2fld/mixup.hpp"
#include "mix2fld/rng.hpp"

using namespace mix2fld;

namespace {

Sample make_sample(std::vector<double> features, std::size_t label, std::size_t n_labels) {
    return Sample{std::move(features), one_hot(label, n_labels)};
}

MixedSample tagged_mix(const Sample& a, const Sample& b, double lambda, int device,
                       std::size_t ia = 0, std::size_t ib = 1) {
    MixedSample m = mixup_pair(a, b, lambda);
    m.device = device;
    m.source_i = {device, ia};
    m.source_j = {device, ib};
    return m;
}

std::vector<double> random_features(RngStream& rng, std::size_t dim) {
    std::vector<double> f(dim);
    for (double& v : f) v = rng.uniform(-2.0, 2.0);
    return f;
}

// Exhaustive maximum matching, bucketed by unordered label pair so the
// exponential search stays tiny. Tries every way of pairing lows with
// highs under the cross-device + symmetry constraint.
std::size_t brute_force_max_pairs(const std::vector<MixedSample>& pool) {
    std::map<std::pair<std::size_t, std::size_t>, std::pair<std::vector<std::size_t>, std::vector<std::size_t>>>
        buckets;
    for (std::size_t i = 0; i < pool.size(); ++i) {
        auto key = std::minmax(pool[i].label_i, pool[i].label_j);
        auto& [low, high] = buckets[{key.first, key.second}];
        (pool[i].label_i == key.first ? low : high).push_back(i);
    }
    std::size_t total = 0;
    for (auto& [key, sides] : buckets) {
        auto& [low, high] = sides;
        std::vector<bool> used(high.size(), false);
        std::function<std::size_t(std::size_t)> best = [&](std::size_t li) -> std::size_t {
            if (li == low.size()) return 0;
            std::size_t result = best(li + 1);  // leave low[li] unmatched
            for (std::size_t h = 0; h < high.size(); ++h) {
                if (used[h]) continue;
                const MixedSample& a = pool[low[li]];
                const MixedSample& b = pool[high[h]];
                if (a.device == b.device) continue;
                if (std::fabs(a.lambda - b.lambda) > 1e-9) continue;
                used[h] = true;
                result = std::max(result, 1 + best(li + 1));
                used[h] = false;
            }
            return result;
        };
        total += best(0);
    }
    return total;
}

}  // namespace

TEST_CASE("mixup combines features and labels linearly") {
    Sample a = make_sample({1.0, 0.0}, 0, 3);
    Sample b = make_sample({0.0, 1.0}, 1, 3);
    MixedSample m = mixup_pair(a, b, 0.3);
    REQUIRE(m.features[0] == Approx(0.3));
    REQUIRE(m.features[1] == Approx(0.7));
    REQUIRE(m.soft_label[0] == Approx(0.3));
    REQUIRE(m.soft_label[1] == Approx(0.7));
    REQUIRE(m.soft_label[2] == 0.0);
    REQUIRE(m.label_i == 0);
    REQUIRE(m.label_j == 1);
}

TEST_CASE("mixup at lambda=0.4 yields the {0.4, 0.6} soft label") {
    Sample a = make_sample({5.0}, 0, 2);
    Sample b = make_sample({-5.0}, 1, 2);
    MixedSample m = mixup_pair(a, b, 0.4);
    REQUIRE(m.soft_label[0] == Approx(0.4));
    REQUIRE(m.soft_label[1] == Approx(0.6));
}

TEST_CASE("identical features still mix; the label stays soft") {
    Sample a = make_sample({2.0, 3.0}, 0, 2);
    Sample b = make_sample({2.0, 3.0}, 1, 2);
    MixedSample m = mixup_pair(a, b, 0.25);
    REQUIRE(m.features[0] == Approx(2.0));
    REQUIRE(m.features[1] == Approx(3.0));
    REQUIRE(m.soft_label[0] == Approx(0.25));
}

TEST_CASE("mixup validates lambda range and label distinctness") {
    Sample a = make_sample({1.0}, 0, 2);
    Sample b = make_sample({2.0}, 1, 2);
    Sample b_same = make_sample({2.0}, 0, 2);
    REQUIRE_THROWS_AS(mixup_pair(a, b, 0.5), ParameterError);
    REQUIRE_THROWS_AS(mixup_pair(a, b, 0.0), ParameterError);
    REQUIRE_THROWS_AS(mixup_pair(a, b, -0.1), ParameterError);
    REQUIRE_THROWS_AS(mixup_pair(a, b_same, 0.3), InputError);
}

TEST_CASE("inverse ratios at lambda=0.4 are [[-2,3],[3,-2]]") {
    const double lv[2] = {0.4, 0.6};
    InverseRatioMatrix inv = inverse_ratios(lv);
    REQUIRE(inv(0, 0) == Approx(-2.0).margin(1e-12));
    REQUIRE(inv(0, 1) == Approx(3.0).margin(1e-12));
    REQUIRE(inv(1, 0) == Approx(3.0).margin(1e-12));
    REQUIRE(inv(1, 1) == Approx(-2.0).margin(1e-12));
}

TEST_CASE("inverse ratio follows the closed form lambda/(2 lambda - 1)") {
    for (double lambda : {0.1, 0.2, 0.3, 0.4, 0.45}) {
        const double lv[2] = {lambda, 1.0 - lambda};
        InverseRatioMatrix inv = inverse_ratios(lv);
        REQUIRE(inv(0, 0) == Approx(lambda / (2.0 * lambda - 1.0)).margin(1e-12));
    }
    // lambda = 0.1 -> -0.125 exactly.
    const double lv[2] = {0.1, 0.9};
    REQUIRE(inverse_ratios(lv)(0, 0) == Approx(-0.125).margin(1e-12));
}

TEST_CASE("equal ratios are singular") {
    const double lv[2] = {0.5, 0.5};
    REQUIRE_THROWS_AS(inverse_ratios(lv), SingularRatioError);
}

TEST_CASE("ratio vector must be a positive distribution") {
    const double bad_sum[2] = {0.4, 0.5};
    REQUIRE_THROWS_AS(inverse_ratios(bad_sum), ParameterError);
    const double bad_sign[3] = {0.5, 0.7, -0.2};
    REQUIRE_THROWS_AS(inverse_ratios(bad_sign), ParameterError);
}

TEST_CASE("inverse ratios times the shift matrix is the identity") {
    RngStream rng(77);
    for (std::size_t n = 2; n <= 5; ++n) {
        std::vector<double> lv(n);
        double sum = 0.0;
        for (double& v : lv) {
            v = rng.uniform(0.1, 1.0);
            sum += v;
        }
        for (double& v : lv) v /= sum;
        Matrix prod;
        try {
            prod = multiply(inverse_ratios(lv).coeff, cyclic_shift_matrix(lv));
        } catch (const SingularRatioError&) {
            continue;
        }
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                REQUIRE(prod(i, j) == Approx(i == j ? 1.0 : 0.0).margin(1e-9));
    }
}

TEST_CASE("inverse mixup restores both hard labels of a symmetric pair") {
    const double lambda = 0.4;
    Sample a1 = make_sample({1.0, 0.0, 0.0, 0.0}, 0, 2);
    Sample a2 = make_sample({0.0, 1.0, 0.0, 0.0}, 1, 2);
    Sample b1 = make_sample({0.0, 0.0, 1.0, 0.0}, 1, 2);
    Sample b2 = make_sample({0.0, 0.0, 0.0, 1.0}, 0, 2);
    MixedSample ma = tagged_mix(a1, a2, lambda, 0);            // label 0 at lambda
    MixedSample mb = tagged_mix(b2, b1, lambda, 1);            // label 0 at lambda, other device
    // Symmetric partner must weight label 1 by lambda: swap roles.
    MixedSample mb_sym = tagged_mix(b1, b2, lambda, 1);        // label 1 at lambda

    const MixedSample pair[2] = {ma, mb_sym};
    InverseMixedSample s0 = inverse_mixup(pair, 0);
    REQUIRE(s0.label[0] == Approx(1.0).margin(1e-9));
    REQUIRE(s0.label[1] == Approx(0.0).margin(1e-9));
    InverseMixedSample s1 = inverse_mixup(pair, 1);
    REQUIRE(s1.label[1] == Approx(1.0).margin(1e-9));
    REQUIRE(s1.label[0] == Approx(0.0).margin(1e-9));

    // Features match the hand-expanded coefficients -2 and 3 (target 0).
    // -2 * (0.4 a1 + 0.6 a2) + 3 * (0.4 b1 + 0.6 b2)
    REQUIRE(s0.features[0] == Approx(-0.8).margin(1e-12));
    REQUIRE(s0.features[1] == Approx(-1.2).margin(1e-12));
    REQUIRE(s0.features[2] == Approx(1.2).margin(1e-12));
    REQUIRE(s0.features[3] == Approx(1.8).margin(1e-12));

    const MixedSample non_sym[2] = {ma, mb};
    REQUIRE_THROWS_AS(inverse_mixup(non_sym, 0), PairingError);
}

TEST_CASE("inverse mixup features match a symbolic expansion on random vectors") {
    RngStream rng(88);
    for (int trial = 0; trial < 20; ++trial) {
        const double lambda = rng.uniform(0.05, 0.45);
        Sample xi{random_features(rng, 6), one_hot(2, 5)};
        Sample xj{random_features(rng, 6), one_hot(4, 5)};
        Sample xi2{random_features(rng, 6), one_hot(4, 5)};
        Sample xj2{random_features(rng, 6), one_hot(2, 5)};
        MixedSample ma = tagged_mix(xi, xj, lambda, 0);
        MixedSample mb = tagged_mix(xi2, xj2, lambda, 1);
        const MixedSample pair[2] = {ma, mb};
        InverseMixedSample s = inverse_mixup(pair, 2);

        const double lh = lambda / (2.0 * lambda - 1.0);  // \hat{lambda}
        for (std::size_t k = 0; k < 6; ++k) {
            double expanded = lh * (lambda * xi.features[k] + (1 - lambda) * xj.features[k]) +
                              (1 - lh) * (lambda * xi2.features[k] + (1 - lambda) * xj2.features[k]);
            REQUIRE(s.features[k] == Approx(expanded).margin(1e-9));
        }
        REQUIRE(is_one_hot(s.label, 1e-9));
        // The released sample never coincides with a contributing raw.
        for (const Sample* raw : {&xi, &xj, &xi2, &xj2})
            REQUIRE(l2_distance(s.features, raw->features) > 1e-9);
    }
}

TEST_CASE("same-device pairs violate the privacy constraint") {
    Sample a = make_sample({1.0}, 0, 2);
    Sample b = make_sample({2.0}, 1, 2);
    MixedSample m1 = tagged_mix(a, b, 0.3, 7);
    MixedSample m2 = tagged_mix(b, a, 0.3, 7);
    const MixedSample pair[2] = {m1, m2};
    REQUIRE_THROWS_AS(inverse_mixup(pair, 0), PrivacyConstraintError);
}

TEST_CASE("two symmetric uploads form exactly one pair") {
    Sample a = make_sample({1.0}, 0, 2);
    Sample b = make_sample({2.0}, 1, 2);
    std::vector<MixedSample> pool{tagged_mix(a, b, 0.4, 0), tagged_mix(b, a, 0.4, 1)};
    auto pairs = pair_symmetric(pool);
    REQUIRE(pairs.size() == 1);
}

TEST_CASE("samples from a single device never pair") {
    Sample a = make_sample({1.0}, 0, 2);
    Sample b = make_sample({2.0}, 1, 2);
    std::vector<MixedSample> pool{tagged_mix(a, b, 0.4, 3), tagged_mix(b, a, 0.4, 3),
                                  tagged_mix(a, b, 0.4, 3)};
    REQUIRE(pair_symmetric(pool).empty());
}

TEST_CASE("pair_symmetric matches the brute-force maximum on random pools") {
    RngStream rng(99);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<MixedSample> pool;
        const std::size_t n_labels = 3;
        for (int dev = 0; dev < 2; ++dev) {
            for (int s = 0; s < 10; ++s) {
                std::size_t la = rng.uniform_index(n_labels);
                std::size_t lb = (la + 1 + rng.uniform_index(n_labels - 1)) % n_labels;
                Sample sa{random_features(rng, 2), one_hot(la, n_labels)};
                Sample sb{random_features(rng, 2), one_hot(lb, n_labels)};
                pool.push_back(tagged_mix(sa, sb, 0.3, dev));
            }
        }
        REQUIRE(pair_symmetric(pool).size() == brute_force_max_pairs(pool));
    }
}

TEST_CASE("generate_inverse_set yields both labels per pair and honors N_I") {
    Sample a = make_sample({1.0, 2.0}, 0, 2);
    Sample b = make_sample({3.0, -1.0}, 1, 2);
    std::vector<MixedSample> pool{tagged_mix(a, b, 0.2, 0), tagged_mix(b, a, 0.2, 1)};
    RngStream rng(41);
    InverseSet set = generate_inverse_set(pool, 2, rng);
    REQUIRE(set.samples.size() == 2);
    REQUIRE(set.shortfall == 0);
    REQUIRE(set.samples[0].hard_label != set.samples[1].hard_label);
    for (const auto& s : set.samples) {
        REQUIRE(is_one_hot(s.label, 1e-9));
        REQUIRE(s.devices[0] != s.devices[1]);
    }
}

TEST_CASE("N_I beyond one pass reuses pairs via fresh re-pairings") {
    RngStream data_rng(42);
    std::vector<MixedSample> pool;
    for (int dev = 0; dev < 2; ++dev)
        for (int i = 0; i < 5; ++i) {
            Sample sa{random_features(data_rng, 3), one_hot(dev == 0 ? 0 : 1, 2)};
            Sample sb{random_features(data_rng, 3), one_hot(dev == 0 ? 1 : 0, 2)};
            pool.push_back(tagged_mix(sa, sb, 0.25, dev));
        }
    RngStream rng(43);
    InverseSet set = generate_inverse_set(pool, 20, rng);  // 5 pairs -> 10 fresh + 10 reused
    REQUIRE(set.samples.size() == 20);
    REQUIRE(set.reused == 10);
    REQUIRE(set.shortfall == 0);
    for (const auto& s : set.samples) REQUIRE(is_one_hot(s.label, 1e-9));
}

TEST_CASE("empty pairing yields an empty set with a full shortfall") {
    Sample a = make_sample({1.0}, 0, 2);
    Sample b = make_sample({2.0}, 1, 2);
    std::vector<MixedSample> pool{tagged_mix(a, b, 0.4, 0)};
    RngStream rng(44);
    InverseSet set = generate_inverse_set(pool, 6, rng);
    REQUIRE(set.samples.empty());
    REQUIRE(set.shortfall == 6);

    InverseSet zero = generate_inverse_set(pool, 0, rng);
    REQUIRE(zero.samples.empty());
    REQUIRE(zero.shortfall == 0);
}

TEST_CASE("sample privacy of one pair is exactly ln(lambda * distance)") {
    RngStream rng(45);
    for (double lambda : {0.1, 0.25, 0.4}) {
        Sample a{random_features(rng, 8), one_hot(0, 2)};
        Sample b{random_features(rng, 8), one_hot(1, 2)};
        std::vector<MixedSample> mixed{tagged_mix(a, b, lambda, 0)};
        std::vector<Sample> raws{a, b};
        RawLookup lookup = [&raws](const SampleRef& r) -> const Sample& { return raws[r.index]; };
        double expect = std::log(lambda * l2_distance(a.features, b.features));
        REQUIRE(sample_privacy(mixed, lookup) == Approx(expect).margin(1e-12));
    }
}

TEST_CASE("privacy deltas equal log-ratios of lambda on fixed pairings") {
    RngStream rng(46);
    std::vector<Sample> raws;
    for (int i = 0; i < 8; ++i)
        raws.push_back({random_features(rng, 5), one_hot(std::size_t(i % 2), 2)});
    RawLookup lookup = [&raws](const SampleRef& r) -> const Sample& { return raws[r.index]; };
    auto privacy_at = [&](double lambda) {
        std::vector<MixedSample> mixed;
        for (std::size_t i = 0; i + 1 < raws.size(); i += 2) {
            MixedSample m = mixup_pair(raws[i], raws[i + 1], lambda);
            m.device = 0;
            m.source_i = {0, i};
            m.source_j = {0, i + 1};
            mixed.push_back(std::move(m));
        }
        return sample_privacy(mixed, lookup);
    };
    REQUIRE(privacy_at(0.4) - privacy_at(0.1) == Approx(std::log(4.0)).margin(1e-9));
    // Strictly increasing in lambda on a fixed pairing.
    double prev = privacy_at(0.05);
    for (double lambda : {0.1, 0.2, 0.3, 0.4, 0.49}) {
        double cur = privacy_at(lambda);
        REQUIRE(cur > prev);
        prev = cur;
    }
}

TEST_CASE("degenerate zero-distance released samples are clamped") {
    Sample a = make_sample({1.0, 1.0}, 0, 2);
    Sample b = make_sample({1.0, 1.0}, 1, 2);  // same features, different label
    std::vector<MixedSample> mixed{tagged_mix(a, b, 0.3, 0)};
    std::vector<Sample> raws{a, b};
    RawLookup lookup = [&raws](const SampleRef& r) -> const Sample& { return raws[r.index]; };
    REQUIRE(sample_privacy(mixed, lookup) == Approx(std::log(1e-12)));
}

TEST_CASE("privacy of an empty set is undefined") {
    std::vector<MixedSample> empty;
    RawLookup lookup = [](const SampleRef&) -> const Sample& { throw std::logic_error("unused"); };
    REQUIRE_THROWS_AS(sample_privacy(empty, lookup), UndefinedMetricError);
}

TEST_CASE("general-N cyclic round trip recovers every hard label") {
    RngStream rng(47);
    for (std::size_t n = 2; n <= 5; ++n) {
        for (int trial = 0; trial < 10; ++trial) {
            std::vector<double> lv(n);
            double sum = 0.0;
            for (double& v : lv) {
                v = rng.uniform(0.05, 1.0);
                sum += v;
            }
            for (double& v : lv) v /= sum;

            std::vector<Sample> raws;
            for (std::size_t i = 0; i < n; ++i) raws.push_back({random_features(rng, 4), one_hot(i, n)});

            // Mix via cyclic shifts of the ratio vector (test-local oracle).
            Matrix shift = cyclic_shift_matrix(lv);
            std::vector<std::vector<double>> mixed_feat(n, std::vector<double>(4, 0.0));
            std::vector<std::vector<double>> mixed_label(n, std::vector<double>(n, 0.0));
            for (std::size_t r = 0; r < n; ++r)
                for (std::size_t c = 0; c < n; ++c) {
                    for (std::size_t k = 0; k < 4; ++k)
                        mixed_feat[r][k] += shift(r, c) * raws[c].features[k];
                    for (std::size_t k = 0; k < n; ++k)
                        mixed_label[r][k] += shift(r, c) * raws[c].label[k];
                }

            InverseRatioMatrix inv;
            try {
                inv = inverse_ratios(lv);
            } catch (const SingularRatioError&) {
                continue;
            }
            for (std::size_t target = 0; target < n; ++target) {
                std::vector<double> feat(4, 0.0), label(n, 0.0);
                for (std::size_t c = 0; c < n; ++c) {
                    for (std::size_t k = 0; k < 4; ++k) feat[k] += inv(target, c) * mixed_feat[c][k];
                    for (std::size_t k = 0; k < n; ++k) label[k] += inv(target, c) * mixed_label[c][k];
                }
                for (std::size_t k = 0; k < 4; ++k)
                    REQUIRE(feat[k] == Approx(raws[target].features[k]).margin(1e-6));
                for (std::size_t k = 0; k < n; ++k)
                    REQUIRE(label[k] == Approx(raws[target].label[k]).margin(1e-6));
            }
        }
    }
}
