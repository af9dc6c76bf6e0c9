#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace mix2fld {

// One labeled sample: a feature vector and a label vector on the
// probability simplex. Raw dataset samples carry one-hot labels; mixed
// and converted samples carry soft labels.
struct Sample {
    std::vector<double> features;
    std::vector<double> label;
};

inline std::vector<double> one_hot(std::size_t index, std::size_t n_labels) {
    std::vector<double> v(n_labels, 0.0);
    v[index] = 1.0;
    return v;
}

// Ties resolve to the lower index.
inline std::size_t argmax(const std::vector<double>& v) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] > v[best]) best = i;
    return best;
}

inline bool is_simplex(const std::vector<double>& v, double tol = 1e-9) {
    double sum = 0.0;
    for (double x : v) {
        if (!(x >= -tol)) return false;
        sum += x;
    }
    return std::fabs(sum - 1.0) <= tol;
}

inline bool is_one_hot(const std::vector<double>& v, double tol = 1e-9) {
    if (!is_simplex(v, tol)) return false;
    std::size_t near_one = 0;
    for (double x : v)
        if (std::fabs(x - 1.0) <= tol) ++near_one;
    return near_one == 1;
}

inline double l2_distance(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

inline double l2_norm(const std::vector<double>& a) {
    double s = 0.0;
    for (double x : a) s += x * x;
    return std::sqrt(s);
}

}  // namespace mix2fld
