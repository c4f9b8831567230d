// SPDX-License-Identifier: Apache-2.0
#pragma once

// Reverse-mode differentiation over dense matrices.
//
// A Tape records every operation together with a closure that pushes the
// output gradient back to the inputs. Only the primitives needed by the
// library are provided: affine maps, activations, softmax cross-entropy,
// row L2 norms, reductions and elementwise arithmetic.
//
// Second-order terms (the critic gradient penalty) are obtained without a
// higher-order engine: mlp_input_gradient() writes the MLP backward pass
// itself onto the tape out of the same primitives, so differentiating the
// resulting norm with ordinary reverse mode is exact. Activation derivatives
// are piecewise constant and enter as constant masks.

#include <cmath>
#include <cstddef>
#include <deque>
#include <functional>
#include <initializer_list>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gammcl/error.hpp"
#include "gammcl/numcore/mlp.hpp"
#include "gammcl/numcore/tensor.hpp"

namespace gammcl::ad {

class Tape;

class Var {
public:
    Var() = default;

    [[nodiscard]] const Matrix& value() const;
    [[nodiscard]] Eigen::Index rows() const { return value().rows(); }
    [[nodiscard]] Eigen::Index cols() const { return value().cols(); }
    [[nodiscard]] double scalar() const { return value()(0, 0); }
    [[nodiscard]] std::size_t id() const noexcept { return id_; }
    [[nodiscard]] Tape* tape() const noexcept { return tape_; }
    [[nodiscard]] bool valid() const noexcept { return tape_ != nullptr; }

private:
    friend class Tape;
    Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

    Tape* tape_ = nullptr;
    std::size_t id_ = 0;
};

class Tape {
public:
    using BackwardFn = std::function<void(Tape&, const Matrix& out_grad)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var constant(Matrix value) { return push("constant", std::move(value), false, {}); }
    Var variable(Matrix value) { return push("variable", std::move(value), true, {}); }

    // Records an op. The backward closure is kept only when some input needs
    // a gradient.
    Var record(std::string_view op, Matrix value, std::initializer_list<Var> inputs, BackwardFn fn) {
        bool needs = false;
        for (const Var& v : inputs) needs = needs || nodes_[v.id()].needs_grad;
        return push(op, std::move(value), needs, needs ? std::move(fn) : BackwardFn{});
    }

    [[nodiscard]] const Matrix& value(Var v) const { return nodes_[v.id()].value; }
    [[nodiscard]] bool needs_grad(Var v) const { return nodes_[v.id()].needs_grad; }

    // Gradient accumulated by backward(); zeros when the node was not reached.
    [[nodiscard]] Matrix grad(Var v) const {
        const Node& n = nodes_[v.id()];
        if (n.grad.size() == 0) return Matrix::Zero(n.value.rows(), n.value.cols());
        return n.grad;
    }

    void accumulate(Var v, const Matrix& g) {
        Node& n = nodes_[v.id()];
        if (!n.needs_grad) return;
        if (n.grad.size() == 0) {
            n.grad = g;
        } else {
            n.grad += g;
        }
    }

    // Adds g into the rows x cols row-major block starting at `offset` of a
    // flat column-vector node.
    void accumulate_flat_block(Var flat, std::size_t offset, Eigen::Index rows, Eigen::Index cols, const Matrix& g) {
        Node& n = nodes_[flat.id()];
        if (!n.needs_grad) return;
        if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
        Eigen::Map<RowMatrix>(n.grad.data() + offset, rows, cols) += g;
    }

    // Adds g into columns [start, start + g.cols()) of a node's gradient.
    void accumulate_cols(Var v, Eigen::Index start, const Matrix& g) {
        Node& n = nodes_[v.id()];
        if (!n.needs_grad) return;
        if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
        n.grad.middleCols(start, g.cols()) += g;
    }

    void backward(Var loss) {
        const Node& root = nodes_[loss.id()];
        if (root.value.rows() != 1 || root.value.cols() != 1) {
            throw ShapeError("backward() needs a scalar, got " + std::to_string(root.value.rows()) + "x" +
                             std::to_string(root.value.cols()));
        }
        for (auto& n : nodes_) n.grad.resize(0, 0);
        nodes_[loss.id()].grad = Matrix::Ones(1, 1);
        for (std::size_t i = loss.id() + 1; i-- > 0;) {
            Node& n = nodes_[i];
            if (n.backward && n.grad.size() != 0) n.backward(*this, n.grad);
        }
    }

    // Name of the first recorded op whose value is not finite.
    [[nodiscard]] std::optional<std::string_view> first_non_finite() const {
        for (const auto& n : nodes_) {
            if (!n.value.allFinite()) return n.op;
        }
        return std::nullopt;
    }

    [[nodiscard]] std::size_t size() const noexcept { return nodes_.size(); }

private:
    struct Node {
        std::string_view op;
        Matrix value;
        Matrix grad;
        BackwardFn backward;
        bool needs_grad = false;
    };

    Var push(std::string_view op, Matrix value, bool needs, BackwardFn fn) {
        nodes_.push_back(Node{op, std::move(value), Matrix(), std::move(fn), needs});
        return Var(this, nodes_.size() - 1);
    }

    std::deque<Node> nodes_;
};

inline const Matrix& Var::value() const { return tape_->value(*this); }

namespace detail {

inline void require_same_shape(std::string_view op, const Var& a, const Var& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw ShapeError(std::string(op) + ": shape " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                         " vs " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
    }
}

} // namespace detail

inline Var matmul(Var a, Var b) {
    if (a.cols() != b.rows()) throw ShapeError("matmul: inner dimensions differ");
    return a.tape()->record("matmul", a.value() * b.value(), {a, b}, [a, b](Tape& t, const Matrix& g) {
        if (t.needs_grad(a)) t.accumulate(a, g * b.value().transpose());
        if (t.needs_grad(b)) t.accumulate(b, a.value().transpose() * g);
    });
}

// a * b^T
inline Var matmul_nt(Var a, Var b) {
    if (a.cols() != b.cols()) throw ShapeError("matmul_nt: inner dimensions differ");
    return a.tape()->record("matmul_nt", a.value() * b.value().transpose(), {a, b},
                            [a, b](Tape& t, const Matrix& g) {
                                if (t.needs_grad(a)) t.accumulate(a, g * b.value());
                                if (t.needs_grad(b)) t.accumulate(b, g.transpose() * a.value());
                            });
}

// Adds a 1 x n row to every row of a.
inline Var add_row(Var a, Var row) {
    if (row.rows() != 1 || row.cols() != a.cols()) throw ShapeError("add_row: row must be 1 x cols(a)");
    Matrix v = a.value();
    v.rowwise() += row.value().row(0);
    return a.tape()->record("add_row", std::move(v), {a, row}, [a, row](Tape& t, const Matrix& g) {
        t.accumulate(a, g);
        if (t.needs_grad(row)) t.accumulate(row, g.colwise().sum());
    });
}

inline Var add(Var a, Var b) {
    detail::require_same_shape("add", a, b);
    return a.tape()->record("add", a.value() + b.value(), {a, b}, [a, b](Tape& t, const Matrix& g) {
        t.accumulate(a, g);
        t.accumulate(b, g);
    });
}

inline Var sub(Var a, Var b) {
    detail::require_same_shape("sub", a, b);
    return a.tape()->record("sub", a.value() - b.value(), {a, b}, [a, b](Tape& t, const Matrix& g) {
        t.accumulate(a, g);
        if (t.needs_grad(b)) t.accumulate(b, -g);
    });
}

inline Var mul(Var a, Var b) {
    detail::require_same_shape("mul", a, b);
    return a.tape()->record("mul", a.value().cwiseProduct(b.value()), {a, b}, [a, b](Tape& t, const Matrix& g) {
        if (t.needs_grad(a)) t.accumulate(a, g.cwiseProduct(b.value()));
        if (t.needs_grad(b)) t.accumulate(b, g.cwiseProduct(a.value()));
    });
}

inline Var scale(Var a, double s) {
    return a.tape()->record("scale", a.value() * s, {a}, [a, s](Tape& t, const Matrix& g) { t.accumulate(a, g * s); });
}

inline Var add_scalar(Var a, double s) {
    Matrix v = a.value().array() + s;
    return a.tape()->record("add_scalar", std::move(v), {a}, [a](Tape& t, const Matrix& g) { t.accumulate(a, g); });
}

// Elementwise product with a constant (non-differentiated) mask.
inline Var mask_mul(Var a, Matrix mask) {
    if (mask.rows() != a.rows() || mask.cols() != a.cols()) throw ShapeError("mask_mul: mask shape mismatch");
    Matrix v = a.value().cwiseProduct(mask);
    return a.tape()->record("mask_mul", std::move(v), {a},
                            [a, m = std::move(mask)](Tape& t, const Matrix& g) { t.accumulate(a, g.cwiseProduct(m)); });
}

// Derivative of the activation at pre-activation values z.
inline Matrix activation_derivative(const Matrix& z, const Activation& act) {
    if (act.kind == ActivationKind::Identity) return Matrix::Ones(z.rows(), z.cols());
    const double slope = act.negative_slope();
    return z.unaryExpr([slope](double v) { return v > 0.0 ? 1.0 : slope; });
}

inline Var activate(Var a, const Activation& act) {
    if (act.kind == ActivationKind::Identity) return a;
    Matrix v = a.value();
    apply_activation(v, act);
    return a.tape()->record("activation", std::move(v), {a}, [a, act](Tape& t, const Matrix& g) {
        t.accumulate(a, g.cwiseProduct(activation_derivative(a.value(), act)));
    });
}

inline Var square(Var a) {
    return a.tape()->record("square", a.value().cwiseAbs2(), {a},
                            [a](Tape& t, const Matrix& g) { t.accumulate(a, 2.0 * g.cwiseProduct(a.value())); });
}

// Euclidean norm of each row (rows x 1). A zero row has norm 0 and passes no
// gradient.
inline Var row_norm(Var a) {
    Matrix v = a.value().rowwise().norm();
    return a.tape()->record("row_norm", std::move(v), {a}, [a](Tape& t, const Matrix& g) {
        const Matrix& x = a.value();
        Matrix out(x.rows(), x.cols());
        for (Eigen::Index r = 0; r < x.rows(); ++r) {
            const double n = x.row(r).norm();
            if (n > 0.0) {
                out.row(r) = x.row(r) * (g(r, 0) / n);
            } else {
                out.row(r).setZero();
            }
        }
        t.accumulate(a, out);
    });
}

inline Var sum(Var a) {
    Matrix v(1, 1);
    v(0, 0) = a.value().sum();
    return a.tape()->record("sum", std::move(v), {a}, [a](Tape& t, const Matrix& g) {
        t.accumulate(a, Matrix::Constant(a.rows(), a.cols(), g(0, 0)));
    });
}

inline Var mean(Var a) {
    const auto n = static_cast<double>(a.value().size());
    if (n == 0) throw ShapeError("mean of an empty matrix");
    Matrix v(1, 1);
    v(0, 0) = a.value().sum() / n;
    return a.tape()->record("mean", std::move(v), {a}, [a, n](Tape& t, const Matrix& g) {
        t.accumulate(a, Matrix::Constant(a.rows(), a.cols(), g(0, 0) / n));
    });
}

// Mean over rows of -log softmax(logits)[label].
inline Var softmax_cross_entropy(Var logits, std::span<const int> labels) {
    const Matrix& z = logits.value();
    if (static_cast<std::size_t>(z.rows()) != labels.size()) {
        throw ShapeError("softmax_cross_entropy: " + std::to_string(z.rows()) + " rows vs " +
                         std::to_string(labels.size()) + " labels");
    }
    Matrix p = softmax_rows(z);
    double loss = 0.0;
    for (Eigen::Index r = 0; r < z.rows(); ++r) {
        const int y = labels[static_cast<std::size_t>(r)];
        if (y < 0 || y >= z.cols()) throw DataError("label " + std::to_string(y) + " out of range");
        const double mx = z.row(r).maxCoeff();
        const double lse = mx + std::log((z.row(r).array() - mx).exp().sum());
        loss += lse - z(r, y);
    }
    const auto n = static_cast<double>(z.rows());
    Matrix v(1, 1);
    v(0, 0) = loss / n;
    std::vector<int> ys(labels.begin(), labels.end());
    return logits.tape()->record("softmax_cross_entropy", std::move(v), {logits},
                                 [logits, p = std::move(p), ys = std::move(ys), n](Tape& t, const Matrix& g) {
                                     Matrix d = p;
                                     for (std::size_t r = 0; r < ys.size(); ++r) {
                                         d(static_cast<Eigen::Index>(r), ys[r]) -= 1.0;
                                     }
                                     t.accumulate(logits, d * (g(0, 0) / n));
                                 });
}

inline Var slice_cols(Var a, Eigen::Index start, Eigen::Index count) {
    if (start < 0 || count < 0 || start + count > a.cols()) throw ShapeError("slice_cols: range out of bounds");
    Matrix v = a.value().middleCols(start, count);
    return a.tape()->record("slice_cols", std::move(v), {a},
                            [a, start](Tape& t, const Matrix& g) { t.accumulate_cols(a, start, g); });
}

inline Var concat_cols(Var a, Var b) {
    if (a.rows() != b.rows()) throw ShapeError("concat_cols: row counts differ");
    Matrix v(a.rows(), a.cols() + b.cols());
    v << a.value(), b.value();
    return a.tape()->record("concat_cols", std::move(v), {a, b}, [a, b](Tape& t, const Matrix& g) {
        t.accumulate_cols(a, 0, g.leftCols(a.cols()));
        t.accumulate_cols(b, 0, g.rightCols(b.cols()));
    });
}

inline Var gather_rows(Var a, std::vector<Eigen::Index> rows) {
    Matrix v(static_cast<Eigen::Index>(rows.size()), a.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) v.row(static_cast<Eigen::Index>(i)) = a.value().row(rows[i]);
    return a.tape()->record("gather_rows", std::move(v), {a}, [a, rows = std::move(rows)](Tape& t, const Matrix& g) {
        Matrix full = Matrix::Zero(a.rows(), a.cols());
        for (std::size_t i = 0; i < rows.size(); ++i) full.row(rows[i]) += g.row(static_cast<Eigen::Index>(i));
        t.accumulate(a, full);
    });
}

// Views `rows x cols` entries of a flat column vector (row-major) as a matrix.
inline Var reshape_slice(Var flat, std::size_t offset, Eigen::Index rows, Eigen::Index cols) {
    if (flat.cols() != 1 || static_cast<Eigen::Index>(offset) + rows * cols > flat.rows()) {
        throw ShapeError("reshape_slice: slice exceeds the flat vector");
    }
    Matrix v = Eigen::Map<const RowMatrix>(flat.value().data() + offset, rows, cols);
    return flat.tape()->record("reshape_slice", std::move(v), {flat},
                               [flat, offset, rows, cols](Tape& t, const Matrix& g) {
                                   t.accumulate_flat_block(flat, offset, rows, cols, g);
                               });
}

// ---------------------------------------------------------------------------
// MLPs on the tape

struct MlpBinding {
    std::vector<Var> weights;               // out x in
    std::vector<std::optional<Var>> biases; // 1 x out
};

inline MlpBinding bind_mlp(const MlpSpec& spec, Var flat) {
    if (static_cast<std::size_t>(flat.rows()) != spec.param_count() || flat.cols() != 1) {
        throw ShapeError("bind_mlp: flat parameter vector has " + std::to_string(flat.rows()) + " entries, spec " +
                         shape_string(spec.layer_widths) + " needs " + std::to_string(spec.param_count()));
    }
    MlpBinding b;
    for (const auto& s : layer_slices(spec)) {
        const auto out = static_cast<Eigen::Index>(s.out);
        b.weights.push_back(reshape_slice(flat, s.weight_offset, out, static_cast<Eigen::Index>(s.in)));
        if (s.has_bias) {
            b.biases.emplace_back(reshape_slice(flat, s.bias_offset, 1, out));
        } else {
            b.biases.emplace_back(std::nullopt);
        }
    }
    return b;
}

struct MlpTrace {
    Var output;
    std::vector<Matrix> pre_activations; // one per layer
};

inline MlpTrace mlp_forward(const MlpSpec& spec, const MlpBinding& b, Var input) {
    if (static_cast<std::size_t>(input.cols()) != spec.input_dim()) {
        throw ShapeError("mlp_forward: input has " + std::to_string(input.cols()) + " columns, expected " +
                         std::to_string(spec.input_dim()));
    }
    MlpTrace trace;
    Var h = input;
    for (std::size_t l = 0; l < b.weights.size(); ++l) {
        Var z = matmul_nt(h, b.weights[l]);
        if (b.biases[l]) z = add_row(z, *b.biases[l]);
        trace.pre_activations.push_back(z.value());
        h = (l + 1 < b.weights.size()) ? activate(z, spec.activation) : z;
    }
    trace.output = h;
    return trace;
}

// Gradient of sum(output) with respect to the network input, recorded on the
// tape as a function of the weights. For a scalar-output network this is the
// per-row input gradient.
inline Var mlp_input_gradient(const MlpSpec& spec, const MlpBinding& b, const MlpTrace& trace) {
    Tape& tape = *trace.output.tape();
    Var delta = tape.constant(Matrix::Ones(trace.output.rows(), trace.output.cols()));
    for (std::size_t l = b.weights.size(); l-- > 0;) {
        if (l + 1 < b.weights.size()) {
            delta = mask_mul(delta, activation_derivative(trace.pre_activations[l], spec.activation));
        }
        delta = matmul(delta, b.weights[l]);
    }
    return delta;
}

// mean over rows of (||grad_x D(x)[:, :norm_cols]|| - 1)^2. norm_cols == 0
// means all input columns.
inline Var gradient_penalty(const MlpSpec& spec, const MlpBinding& b, Var points, std::size_t norm_cols = 0) {
    const MlpTrace trace = mlp_forward(spec, b, points);
    Var g = mlp_input_gradient(spec, b, trace);
    if (norm_cols != 0 && static_cast<Eigen::Index>(norm_cols) != g.cols()) {
        g = slice_cols(g, 0, static_cast<Eigen::Index>(norm_cols));
    }
    return mean(square(add_scalar(row_norm(g), -1.0)));
}

inline Matrix column(std::span<const double> v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline ParamVector to_params(const Matrix& m) { return ParamVector(m.data(), m.data() + m.size()); }

} // namespace gammcl::ad

namespace gammcl {

struct ValueAndGradient {
    double value = 0.0;
    ParamVector gradient;
};

using LossFn = std::function<ad::Var(ad::Tape&, ad::Var params)>;

// Value and gradient of a scalar loss built on the tape from `params`
// (presented to loss_fn as a P x 1 variable).
inline ValueAndGradient gradient(const LossFn& loss_fn, std::span<const double> params) {
    ad::Tape tape;
    ad::Var p = tape.variable(ad::column(params));
    ad::Var loss = loss_fn(tape, p);
    if (loss.rows() != 1 || loss.cols() != 1) throw ShapeError("loss function must return a 1x1 value");
    if (!std::isfinite(loss.scalar())) {
        const auto op = tape.first_non_finite();
        throw NumericError("non-finite loss produced by op '" + std::string(op.value_or("unknown")) + "'");
    }
    tape.backward(loss);
    return {loss.scalar(), ad::to_params(tape.grad(p))};
}

// Gradient-penalty scalar mean_rows (||grad_x D(x)|| - 1)^2 and its derivative
// with respect to the critic parameters. `norm_cols` restricts the norm to the
// leading input columns (0 = all).
inline ValueAndGradient grad_of_input_gradient_norm(const MlpSpec& spec, std::span<const double> d_params,
                                                    const Tensor& point, std::size_t norm_cols = 0) {
    check_params(spec, d_params);
    if (point.last_dim() != spec.input_dim()) {
        throw ShapeError("penalty point shape " + shape_string(point.shape()) + " does not match critic input " +
                         std::to_string(spec.input_dim()));
    }
    const Matrix x = point.to_matrix();
    return gradient(
        [&](ad::Tape& tape, ad::Var p) {
            const auto binding = ad::bind_mlp(spec, p);
            return ad::gradient_penalty(spec, binding, tape.constant(x), norm_cols);
        },
        d_params);
}

} // namespace gammcl
