#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "mix2fld/errors.hpp"
#include "mix2fld/rng.hpp"
#include "mix2fld/sample.hpp"

namespace mix2fld {

// Prediction distribution over the N_L labels (softmax of final logits).
using OutputVector = std::vector<double>;

// Sign convention for the distillation regularizer. Attract pulls the
// student toward the teacher (standard cross-entropy form); Repel
// negates it.
enum class KdSign { Attract, Repel };

enum class Activation { Tanh, Relu };

inline const char* to_string(Activation a) { return a == Activation::Tanh ? "tanh" : "relu"; }

// Dense multilayer perceptron layout: input -> hidden... -> output,
// softmax on the output layer. Parameters are stored flat, per layer:
// weights row-major [out x in], then biases [out].
struct ArchSpec {
    std::size_t input_dim = 0;
    std::vector<std::size_t> hidden;
    std::size_t output_dim = 0;  // N_L
    Activation activation = Activation::Tanh;

    std::vector<std::size_t> layer_dims() const {
        std::vector<std::size_t> dims;
        dims.push_back(input_dim);
        for (std::size_t h : hidden) dims.push_back(h);
        dims.push_back(output_dim);
        return dims;
    }

    std::size_t param_count() const {
        auto dims = layer_dims();
        std::size_t n = 0;
        for (std::size_t l = 0; l + 1 < dims.size(); ++l) n += (dims[l] + 1) * dims[l + 1];
        return n;
    }

    void validate() const {
        if (input_dim == 0) throw ConfigError("arch: input dim must be positive");
        if (output_dim < 2) throw ConfigError("arch: output dim must be >= 2");
        for (std::size_t h : hidden)
            if (h == 0) throw ConfigError("arch: hidden width must be positive");
    }
};

inline bool operator==(const ArchSpec& a, const ArchSpec& b) {
    return a.input_dim == b.input_dim && a.hidden == b.hidden && a.output_dim == b.output_dim &&
           a.activation == b.activation;
}

struct ModelParams {
    ArchSpec arch;
    std::vector<double> w;  // length arch.param_count()
};

struct HyperParams {
    double eta = 0.01;           // learning rate
    double beta = 0.01;          // distillation weight
    std::size_t local_iters = 500;   // K
    std::size_t conv_iters = 500;    // K_s
    double epsilon = 0.05;       // convergence threshold
};

// Glorot-uniform init per layer, drawn from the given stream.
inline ModelParams init_model(const ArchSpec& arch, RngStream& rng) {
    arch.validate();
    ModelParams m{arch, std::vector<double>(arch.param_count(), 0.0)};
    auto dims = arch.layer_dims();
    std::size_t off = 0;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        std::size_t fan_in = dims[l], fan_out = dims[l + 1];
        double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        for (std::size_t i = 0; i < fan_in * fan_out; ++i) m.w[off++] = rng.uniform(-bound, bound);
        off += fan_out;  // biases stay zero
    }
    return m;
}

namespace detail {

constexpr double kProbFloor = 1e-12;  // log clamp

inline double activate(double z, Activation a) {
    return a == Activation::Tanh ? std::tanh(z) : (z > 0.0 ? z : 0.0);
}

inline double activate_grad(double z, Activation a) {
    if (a == Activation::Tanh) {
        double t = std::tanh(z);
        return 1.0 - t * t;
    }
    return z > 0.0 ? 1.0 : 0.0;
}

inline void softmax_inplace(std::vector<double>& z) {
    double zmax = z[0];
    for (double v : z) zmax = std::max(zmax, v);
    double sum = 0.0;
    for (double& v : z) {
        v = std::exp(v - zmax);
        sum += v;
    }
    for (double& v : z) v /= sum;
}

// Forward pass keeping pre-activations and activations per layer.
struct ForwardTrace {
    std::vector<std::vector<double>> pre;   // z per non-input layer
    std::vector<std::vector<double>> act;   // a per layer, act[0] = input
    OutputVector output;                    // softmax probabilities
};

inline ForwardTrace forward_trace(const ModelParams& m, std::span<const double> features) {
    const auto dims = m.arch.layer_dims();
    if (features.size() != dims.front())
        throw ConfigError("forward: feature dim " + std::to_string(features.size()) +
                          " does not match arch input dim " + std::to_string(dims.front()));
    if (m.w.size() != m.arch.param_count())
        throw ConfigError("forward: parameter vector length does not match arch");

    ForwardTrace t;
    t.act.emplace_back(features.begin(), features.end());
    std::size_t off = 0;
    const std::size_t n_layers = dims.size() - 1;
    for (std::size_t l = 0; l < n_layers; ++l) {
        const std::size_t in = dims[l], out = dims[l + 1];
        const double* w = m.w.data() + off;
        const double* b = m.w.data() + off + in * out;
        const std::vector<double>& prev = t.act.back();

        std::vector<double> z(out);
        for (std::size_t o = 0; o < out; ++o) {
            double s = b[o];
            const double* row = w + o * in;
            for (std::size_t i = 0; i < in; ++i) s += row[i] * prev[i];
            z[o] = s;
        }
        t.pre.push_back(z);
        if (l + 1 == n_layers) {
            softmax_inplace(z);
            t.output = z;
        } else {
            for (double& v : z) v = activate(v, m.arch.activation);
            t.act.push_back(std::move(z));
        }
        off += (in + 1) * out;
    }
    return t;
}

// Gradient of loss(c) = -sum_m c_m log(clamp(F_m)) with respect to the
// flat parameter vector. For outputs above the clamp floor the logit
// gradient is (sum c) * F - c.
inline std::vector<double> loss_gradient(const ModelParams& m, std::span<const double> features,
                                         std::span<const double> coeff) {
    const auto dims = m.arch.layer_dims();
    if (coeff.size() != dims.back()) throw ConfigError("loss gradient: coefficient length mismatch");

    ForwardTrace t = forward_trace(m, features);
    double csum = 0.0;
    for (double c : coeff) csum += c;

    std::vector<double> grad(m.w.size(), 0.0);
    const std::size_t n_layers = dims.size() - 1;

    std::vector<double> delta(dims.back());
    for (std::size_t k = 0; k < dims.back(); ++k) delta[k] = csum * t.output[k] - coeff[k];

    // Layer offsets into the flat vector.
    std::vector<std::size_t> offsets(n_layers);
    std::size_t off = 0;
    for (std::size_t l = 0; l < n_layers; ++l) {
        offsets[l] = off;
        off += (dims[l] + 1) * dims[l + 1];
    }

    for (std::size_t l = n_layers; l-- > 0;) {
        const std::size_t in = dims[l], out = dims[l + 1];
        const std::vector<double>& prev = t.act[l];
        double* gw = grad.data() + offsets[l];
        double* gb = gw + in * out;
        for (std::size_t o = 0; o < out; ++o) {
            double d = delta[o];
            double* row = gw + o * in;
            for (std::size_t i = 0; i < in; ++i) row[i] = d * prev[i];
            gb[o] = d;
        }
        if (l == 0) break;
        const double* w = m.w.data() + offsets[l];
        std::vector<double> next_delta(in, 0.0);
        for (std::size_t o = 0; o < out; ++o) {
            double d = delta[o];
            const double* row = w + o * in;
            for (std::size_t i = 0; i < in; ++i) next_delta[i] += row[i] * d;
        }
        for (std::size_t i = 0; i < in; ++i)
            next_delta[i] *= activate_grad(t.pre[l - 1][i], m.arch.activation);
        delta = std::move(next_delta);
    }
    return grad;
}

inline double clamped_log(double p) { return std::log(std::min(1.0, std::max(p, kProbFloor))); }

}  // namespace detail

// Softmax prediction distribution of the model on the given features.
inline OutputVector forward(const ModelParams& m, std::span<const double> features) {
    return detail::forward_trace(m, features).output;
}

// Cross-entropy -sum_m l_m log F_m, probabilities clamped to [1e-12, 1].
inline double ce_loss(const OutputVector& output, const std::vector<double>& label) {
    if (output.size() != label.size()) throw ConfigError("ce_loss: length mismatch");
    double s = 0.0;
    for (std::size_t m = 0; m < output.size(); ++m)
        if (label[m] != 0.0) s -= label[m] * detail::clamped_log(output[m]);
    return s;
}

// Distillation regularizer. Attract: -sum_m G_m log F_m (the standard KD
// cross-entropy). Repel: +sum_m G_m log F_m.
inline double kd_loss(const OutputVector& output, const OutputVector& teacher,
                      KdSign sign = KdSign::Attract) {
    if (output.size() != teacher.size()) throw ConfigError("kd_loss: length mismatch");
    double s = 0.0;
    for (std::size_t m = 0; m < output.size(); ++m)
        if (teacher[m] != 0.0) s -= teacher[m] * detail::clamped_log(output[m]);
    return sign == KdSign::Attract ? s : -s;
}

namespace detail {

inline ModelParams apply_step(const ModelParams& m, const std::vector<double>& grad, double eta,
                              const char* op) {
    ModelParams out = m;
    for (std::size_t i = 0; i < out.w.size(); ++i) {
        out.w[i] -= eta * grad[i];
        if (!std::isfinite(out.w[i]))
            throw NumericalError(std::string(op) + ": non-finite parameter at index " +
                                 std::to_string(i) + " (gradient " + std::to_string(grad[i]) + ")");
    }
    return out;
}

}  // namespace detail

// One plain SGD step on the cross-entropy loss. The input model is left
// untouched from the caller's view.
inline ModelParams sgd_step(const ModelParams& m, const Sample& sample, double eta) {
    auto grad = detail::loss_gradient(m, sample.features, sample.label);
    return detail::apply_step(m, grad, eta, "sgd_step");
}

// One SGD step on phi + beta * psi. The teacher vector is the global
// average output for the sample's ground-truth label. With beta = 0 this
// is bit-identical to sgd_step.
inline ModelParams sgd_kd_step(const ModelParams& m, const Sample& sample,
                               const OutputVector& teacher, double eta, double beta,
                               KdSign sign = KdSign::Attract) {
    if (teacher.size() != sample.label.size()) throw ConfigError("sgd_kd_step: teacher length mismatch");
    double s = (sign == KdSign::Attract) ? beta : -beta;
    std::vector<double> coeff(sample.label);
    for (std::size_t i = 0; i < coeff.size(); ++i) coeff[i] += s * teacher[i];
    auto grad = detail::loss_gradient(m, sample.features, coeff);
    return detail::apply_step(m, grad, eta, "sgd_kd_step");
}

}  // namespace mix2fld
