#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "mix2fld/errors.hpp"
#include "mix2fld/rng.hpp"
#include "mix2fld/sample.hpp"

namespace mix2fld {

struct Dataset {
    std::vector<Sample> samples;
    std::size_t n_labels = 0;
    std::size_t feature_dim = 0;
    double feature_scale = 1.0;  // full-scale feature intensity (255 for IDX pixels)

    bool empty() const { return samples.empty(); }
    std::size_t size() const { return samples.size(); }

    // Training view: features divided by the full-scale intensity.
    Dataset normalized() const {
        Dataset out = *this;
        if (feature_scale != 1.0) {
            for (Sample& s : out.samples)
                for (double& f : s.features) f /= feature_scale;
        }
        out.feature_scale = 1.0;
        return out;
    }

    std::vector<std::size_t> label_histogram() const {
        std::vector<std::size_t> h(n_labels, 0);
        for (const Sample& s : samples) ++h[argmax(s.label)];
        return h;
    }
};

enum class PartitionMode { IID, NonIID };

struct PartitionSpec {
    std::size_t devices = 1;
    std::size_t per_device = 0;  // |S_d|
    PartitionMode mode = PartitionMode::IID;
    // Non-IID recipe: `scarce_labels` labels get `scarce_count` samples each,
    // every other label gets `abundant_count`.
    std::size_t scarce_labels = 2;
    std::size_t scarce_count = 2;
    std::size_t abundant_count = 62;
};

namespace detail {

inline std::uint32_t read_be32(std::istream& in, const std::string& path) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw InputError("truncated IDX header in " + path);
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) | (std::uint32_t(b[2]) << 8) |
           std::uint32_t(b[3]);
}

}  // namespace detail

// Loads an IDX image/label file pair (big-endian magic 0x803 / 0x801,
// unsigned byte payloads). Features keep the raw 0-255 intensity scale;
// call Dataset::normalized() for the training view.
inline Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream img(images_path, std::ios::binary);
    if (!img) throw InputError("cannot open IDX image file " + images_path);
    std::ifstream lab(labels_path, std::ios::binary);
    if (!lab) throw InputError("cannot open IDX label file " + labels_path);

    if (detail::read_be32(img, images_path) != 0x00000803u)
        throw InputError("bad IDX magic in " + images_path + " (expected 0x00000803)");
    if (detail::read_be32(lab, labels_path) != 0x00000801u)
        throw InputError("bad IDX magic in " + labels_path + " (expected 0x00000801)");

    const std::uint32_t n_images = detail::read_be32(img, images_path);
    const std::uint32_t rows = detail::read_be32(img, images_path);
    const std::uint32_t cols = detail::read_be32(img, images_path);
    const std::uint32_t n_labels_rec = detail::read_be32(lab, labels_path);
    if (n_images != n_labels_rec)
        throw InputError("IDX count mismatch: " + images_path + " has " + std::to_string(n_images) +
                         " images but " + labels_path + " has " + std::to_string(n_labels_rec) +
                         " labels");

    const std::size_t dim = std::size_t(rows) * cols;
    std::vector<unsigned char> pixels(dim);
    std::vector<unsigned char> raw_labels(n_images);
    lab.read(reinterpret_cast<char*>(raw_labels.data()), n_images);
    if (!lab) throw InputError("truncated IDX label payload in " + labels_path);

    unsigned max_label = 0;
    for (unsigned char l : raw_labels) max_label = std::max(max_label, unsigned(l));
    const std::size_t n_classes = std::max<std::size_t>(max_label + 1, 2);

    Dataset ds;
    ds.n_labels = n_classes;
    ds.feature_dim = dim;
    ds.feature_scale = 255.0;
    ds.samples.reserve(n_images);
    for (std::uint32_t i = 0; i < n_images; ++i) {
        img.read(reinterpret_cast<char*>(pixels.data()), std::streamsize(dim));
        if (!img) throw InputError("truncated IDX image payload in " + images_path);
        Sample s;
        s.features.resize(dim);
        for (std::size_t j = 0; j < dim; ++j) s.features[j] = double(pixels[j]);
        s.label = one_hot(raw_labels[i], n_classes);
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

// Per-class isotropic Gaussian clusters with seeded means in [0,1]^dim.
// Deterministic under the stream; feature scale is 1.
inline Dataset synth_gaussian(std::size_t classes, std::size_t dim, std::size_t per_class,
                              double spread, RngStream& rng) {
    if (classes < 2) throw ConfigError("synth_gaussian: need at least 2 classes");
    if (dim == 0 || per_class == 0) throw ConfigError("synth_gaussian: empty dimensions");

    std::vector<std::vector<double>> means(classes, std::vector<double>(dim));
    for (auto& m : means)
        for (double& v : m) v = rng.next_double();

    Dataset ds;
    ds.n_labels = classes;
    ds.feature_dim = dim;
    ds.samples.reserve(classes * per_class);
    for (std::size_t c = 0; c < classes; ++c)
        for (std::size_t i = 0; i < per_class; ++i) {
            Sample s;
            s.features.resize(dim);
            for (std::size_t j = 0; j < dim; ++j) s.features[j] = means[c][j] + rng.normal(0.0, spread);
            s.label = one_hot(c, classes);
            ds.samples.push_back(std::move(s));
        }
    return ds;
}

// Splits the source across devices without replacement (partitions are
// disjoint). IID hands every device per_device/n_labels samples per label;
// non-IID follows the scarce/abundant recipe with per-device random scarce
// label sets.
inline std::vector<Dataset> partition(const Dataset& source, const PartitionSpec& spec,
                                      RngStream& rng) {
    if (source.empty()) throw InputError("partition: empty source dataset");
    if (spec.devices == 0 || spec.per_device == 0)
        throw ConfigError("partition: devices and per-device size must be positive");

    const std::size_t n_labels = source.n_labels;
    std::vector<std::vector<std::size_t>> pool(n_labels);
    for (std::size_t i = 0; i < source.size(); ++i) pool[argmax(source.samples[i].label)].push_back(i);
    for (auto& p : pool) rng.shuffle(p);

    // Per-device per-label demand.
    std::vector<std::vector<std::size_t>> want(spec.devices, std::vector<std::size_t>(n_labels, 0));
    if (spec.mode == PartitionMode::IID) {
        if (spec.per_device % n_labels != 0)
            throw ConfigError("partition: IID requires per-device size divisible by label count");
        for (auto& w : want) std::fill(w.begin(), w.end(), spec.per_device / n_labels);
    } else {
        if (spec.scarce_labels > n_labels)
            throw ConfigError("partition: more scarce labels than labels");
        const std::size_t expected = spec.scarce_labels * spec.scarce_count +
                                     (n_labels - spec.scarce_labels) * spec.abundant_count;
        if (expected != spec.per_device)
            throw ConfigError("partition: non-IID recipe sums to " + std::to_string(expected) +
                              " samples, not " + std::to_string(spec.per_device));
        std::vector<std::size_t> labels(n_labels);
        std::iota(labels.begin(), labels.end(), 0);
        for (auto& w : want) {
            rng.shuffle(labels);
            for (std::size_t i = 0; i < n_labels; ++i)
                w[labels[i]] = i < spec.scarce_labels ? spec.scarce_count : spec.abundant_count;
        }
    }

    std::vector<Dataset> out(spec.devices);
    for (std::size_t d = 0; d < spec.devices; ++d) {
        Dataset& ds = out[d];
        ds.n_labels = n_labels;
        ds.feature_dim = source.feature_dim;
        ds.feature_scale = source.feature_scale;
        ds.samples.reserve(spec.per_device);
        for (std::size_t l = 0; l < n_labels; ++l) {
            if (pool[l].size() < want[d][l])
                throw InputError("partition: insufficient samples of label " + std::to_string(l) +
                                 " for device " + std::to_string(d));
            for (std::size_t k = 0; k < want[d][l]; ++k) {
                ds.samples.push_back(source.samples[pool[l].back()]);
                pool[l].pop_back();
            }
        }
    }
    return out;
}

// A selected raw pair with its source indices into the device dataset.
struct SeedPair {
    Sample first, second;
    std::size_t index_first = 0, index_second = 0;
};

// Draws n_seed raw pairs with distinct intra-pair ground-truth labels.
// Ordered label pairs are cycled round-robin from a seeded shuffle, so
// each pair's frequency deviates from uniform by at most one; samples are
// drawn uniformly within labels.
inline std::vector<SeedPair> select_seed_raw(const Dataset& ds, std::size_t n_seed, RngStream& rng) {
    std::vector<std::vector<std::size_t>> by_label(ds.n_labels);
    for (std::size_t i = 0; i < ds.size(); ++i) by_label[argmax(ds.samples[i].label)].push_back(i);

    std::vector<std::size_t> present;
    for (std::size_t l = 0; l < ds.n_labels; ++l)
        if (!by_label[l].empty()) present.push_back(l);
    if (present.size() < 2)
        throw InputError("select_seed_raw: dataset holds fewer than two distinct labels");

    std::vector<std::pair<std::size_t, std::size_t>> ordered_pairs;
    for (std::size_t a : present)
        for (std::size_t b : present)
            if (a != b) ordered_pairs.emplace_back(a, b);
    rng.shuffle(ordered_pairs);

    std::vector<SeedPair> out;
    out.reserve(n_seed);
    for (std::size_t t = 0; t < n_seed; ++t) {
        auto [n, m] = ordered_pairs[t % ordered_pairs.size()];
        SeedPair p;
        p.index_first = by_label[n][rng.uniform_index(by_label[n].size())];
        p.index_second = by_label[m][rng.uniform_index(by_label[m].size())];
        p.first = ds.samples[p.index_first];
        p.second = ds.samples[p.index_second];
        out.push_back(std::move(p));
    }
    return out;
}

}  // namespace mix2fld
