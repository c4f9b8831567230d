// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "gammcl/error.hpp"
#include "gammcl/numcore/rng.hpp"
#include "gammcl/numcore/tensor.hpp"

namespace gammcl {

enum class ActivationKind { ReLU, LeakyReLU, Identity };

struct Activation {
    ActivationKind kind = ActivationKind::ReLU;
    double slope = 0.2; // used by LeakyReLU only

    static Activation relu() { return {ActivationKind::ReLU, 0.0}; }
    static Activation leaky_relu(double slope = 0.2) { return {ActivationKind::LeakyReLU, slope}; }
    static Activation identity() { return {ActivationKind::Identity, 0.0}; }

    // Slope used on the non-positive side; identity is handled separately.
    [[nodiscard]] double negative_slope() const noexcept {
        return kind == ActivationKind::LeakyReLU ? slope : 0.0;
    }

    friend bool operator==(const Activation&, const Activation&) = default;
};

inline std::string to_string(ActivationKind kind) {
    switch (kind) {
    case ActivationKind::ReLU: return "relu";
    case ActivationKind::LeakyReLU: return "leaky_relu";
    case ActivationKind::Identity: return "identity";
    }
    return "unknown";
}

// Fully-connected network. The activation is applied after every hidden
// layer; the last layer is linear (logits / critic score / chunk values).
//
// Canonical parameter layout, layer by layer: the weight matrix
// (out x in, row-major) followed by the bias vector (out) when present.
struct MlpSpec {
    std::vector<std::size_t> layer_widths;
    Activation activation;
    std::vector<bool> has_bias; // one flag per layer; empty means "all true"

    MlpSpec() = default;
    MlpSpec(std::vector<std::size_t> widths, Activation act = Activation::relu(), std::vector<bool> bias = {})
        : layer_widths(std::move(widths)), activation(act), has_bias(std::move(bias)) {
        validate();
    }

    void validate() const {
        if (layer_widths.size() < 2) throw ShapeError("MlpSpec needs at least input and output widths");
        for (std::size_t w : layer_widths) {
            if (w == 0) throw ShapeError("MlpSpec widths must be >= 1");
        }
        if (!has_bias.empty() && has_bias.size() != num_layers()) {
            throw ShapeError("MlpSpec has_bias has " + std::to_string(has_bias.size()) + " flags for " +
                             std::to_string(num_layers()) + " layers");
        }
    }

    [[nodiscard]] std::size_t num_layers() const noexcept { return layer_widths.size() - 1; }
    [[nodiscard]] std::size_t input_dim() const noexcept { return layer_widths.front(); }
    [[nodiscard]] std::size_t output_dim() const noexcept { return layer_widths.back(); }
    [[nodiscard]] bool bias(std::size_t layer) const noexcept { return has_bias.empty() || has_bias[layer]; }

    [[nodiscard]] std::size_t param_count() const noexcept {
        std::size_t n = 0;
        for (std::size_t l = 0; l < num_layers(); ++l) {
            n += layer_widths[l + 1] * layer_widths[l] + (bias(l) ? layer_widths[l + 1] : 0);
        }
        return n;
    }

    friend bool operator==(const MlpSpec& a, const MlpSpec& b) {
        return a.layer_widths == b.layer_widths && a.activation == b.activation &&
               a.param_count() == b.param_count() && [&] {
                   for (std::size_t l = 0; l < a.num_layers(); ++l) {
                       if (a.bias(l) != b.bias(l)) return false;
                   }
                   return true;
               }();
    }
};

// Offsets of one layer inside the flat parameter vector.
struct LayerSlice {
    std::size_t weight_offset;
    std::size_t bias_offset; // meaningful only when has_bias
    std::size_t in;
    std::size_t out;
    bool has_bias;
};

inline std::vector<LayerSlice> layer_slices(const MlpSpec& spec) {
    std::vector<LayerSlice> slices;
    std::size_t offset = 0;
    for (std::size_t l = 0; l < spec.num_layers(); ++l) {
        LayerSlice s{offset, 0, spec.layer_widths[l], spec.layer_widths[l + 1], spec.bias(l)};
        offset += s.in * s.out;
        if (s.has_bias) {
            s.bias_offset = offset;
            offset += s.out;
        }
        slices.push_back(s);
    }
    return slices;
}

inline void check_params(const MlpSpec& spec, std::span<const double> params) {
    if (params.size() != spec.param_count()) {
        throw ShapeError("parameter vector has " + std::to_string(params.size()) + " entries, spec " +
                         shape_string(spec.layer_widths) + " needs " + std::to_string(spec.param_count()));
    }
}

inline void apply_activation(Matrix& z, const Activation& act) {
    if (act.kind == ActivationKind::Identity) return;
    const double slope = act.negative_slope();
    z = z.unaryExpr([slope](double v) { return v > 0.0 ? v : slope * v; });
}

namespace detail {

inline Matrix affine(const LayerSlice& s, std::span<const double> params, const Matrix& x) {
    Eigen::Map<const RowMatrix> w(params.data() + s.weight_offset, static_cast<Eigen::Index>(s.out),
                                  static_cast<Eigen::Index>(s.in));
    Matrix z = x * w.transpose();
    if (s.has_bias) {
        Eigen::Map<const Eigen::RowVectorXd> b(params.data() + s.bias_offset, static_cast<Eigen::Index>(s.out));
        z.rowwise() += b;
    }
    return z;
}

} // namespace detail

// Batch forward pass: x is (batch x input_dim). When stop_after_layer is
// given, returns the activations after that hidden layer instead of logits.
inline Matrix forward_matrix(const MlpSpec& spec, std::span<const double> params, const Matrix& x,
                             std::size_t stop_after_layer = std::numeric_limits<std::size_t>::max()) {
    check_params(spec, params);
    if (static_cast<std::size_t>(x.cols()) != spec.input_dim()) {
        throw ShapeError("input has " + std::to_string(x.cols()) + " features, spec " +
                         shape_string(spec.layer_widths) + " expects " + std::to_string(spec.input_dim()));
    }
    const auto slices = layer_slices(spec);
    Matrix h = x;
    for (std::size_t l = 0; l < slices.size(); ++l) {
        h = detail::affine(slices[l], params, h);
        if (l + 1 < slices.size()) apply_activation(h, spec.activation);
        if (l == stop_after_layer) break;
    }
    return h;
}

// Logits for a rank-1 (single example) or rank-2 (batch) input.
inline Tensor forward(const MlpSpec& spec, std::span<const double> params, const Tensor& input) {
    if (input.rank() == 0 || input.last_dim() != spec.input_dim()) {
        throw ShapeError("input shape " + shape_string(input.shape()) + " does not end in spec input width " +
                         std::to_string(spec.input_dim()));
    }
    const Matrix out = forward_matrix(spec, params, input.to_matrix());
    std::vector<std::size_t> shape = input.shape();
    shape.back() = spec.output_dim();
    Tensor result(std::move(shape));
    Eigen::Map<RowMatrix>(result.data().data(), out.rows(), out.cols()) = out;
    return result;
}

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases.
inline ParamVector init_params(const MlpSpec& spec, Rng& rng) {
    ParamVector params(spec.param_count());
    for (const auto& s : layer_slices(spec)) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(s.in));
        for (std::size_t i = 0; i < s.in * s.out; ++i) {
            params[s.weight_offset + i] = bound * (2.0 * rng.uniform01() - 1.0);
        }
        if (s.has_bias) {
            for (std::size_t i = 0; i < s.out; ++i) params[s.bias_offset + i] = bound * (2.0 * rng.uniform01() - 1.0);
        }
    }
    return params;
}

// Row-wise softmax.
inline Matrix softmax_rows(const Matrix& logits) {
    Matrix p(logits.rows(), logits.cols());
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
        const double mx = logits.row(r).maxCoeff();
        p.row(r) = (logits.row(r).array() - mx).exp().matrix();
        p.row(r) /= p.row(r).sum();
    }
    return p;
}

// H = -sum p ln p of softmax(logits), computed from log-probabilities so that
// vanishing probabilities contribute exactly 0.
inline double softmax_entropy(std::span<const double> logits) {
    if (logits.empty()) return 0.0;
    const double mx = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (double v : logits) z += std::exp(v - mx);
    const double log_z = std::log(z) + mx;
    double h = 0.0;
    for (double v : logits) {
        const double log_p = v - log_z;
        const double p = std::exp(log_p);
        if (p > 0.0) h -= p * log_p;
    }
    return std::max(h, 0.0);
}

inline double softmax_entropy(const Tensor& logits) { return softmax_entropy(logits.data()); }

// Entropy of each row of a logits batch.
inline Eigen::VectorXd row_entropies(const Matrix& logits) {
    Eigen::VectorXd h(logits.rows());
    std::vector<double> row(static_cast<std::size_t>(logits.cols()));
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
        for (Eigen::Index c = 0; c < logits.cols(); ++c) row[static_cast<std::size_t>(c)] = logits(r, c);
        h(r) = softmax_entropy(row);
    }
    return h;
}

// Index of the largest entry per row; ties go to the lowest index.
inline std::vector<int> argmax_rows(const Matrix& m) {
    std::vector<int> out(static_cast<std::size_t>(m.rows()));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        Eigen::Index best = 0;
        for (Eigen::Index c = 1; c < m.cols(); ++c) {
            if (m(r, c) > m(r, best)) best = c;
        }
        out[static_cast<std::size_t>(r)] = static_cast<int>(best);
    }
    return out;
}

inline double accuracy(const MlpSpec& spec, std::span<const double> params, const Matrix& x,
                       std::span<const int> labels) {
    if (labels.empty()) return 0.0;
    const auto pred = argmax_rows(forward_matrix(spec, params, x));
    std::size_t hits = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) hits += pred[i] == labels[i] ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(labels.size());
}

} // namespace gammcl
