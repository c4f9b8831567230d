// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "gammcl/error.hpp"

namespace gammcl {

// Flat model weights in canonical layout (see MlpSpec).
using ParamVector = std::vector<double>;

// Column-major dense matrix used inside the numerical core.
using Matrix = Eigen::MatrixXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline std::string shape_string(std::span<const std::size_t> shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i != 0) os << ',';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

// Row-major n-d array of doubles. Rank 1 and rank 2 are what the library
// actually produces; higher ranks are accepted and treated as
// (prod(leading dims)) x last_dim batches.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0)
        : shape_(std::move(shape)), data_(element_count(shape_), fill) {}

    Tensor(std::vector<std::size_t> shape, std::vector<double> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (element_count(shape_) != data_.size()) {
            throw ShapeError("tensor shape " + shape_string(shape_) + " implies " +
                             std::to_string(element_count(shape_)) + " elements, got " +
                             std::to_string(data_.size()));
        }
    }

    static Tensor from_matrix(const Matrix& m) {
        Tensor t({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())});
        Eigen::Map<RowMatrix>(t.data_.data(), m.rows(), m.cols()) = m;
        return t;
    }

    [[nodiscard]] const std::vector<std::size_t>& shape() const noexcept { return shape_; }
    [[nodiscard]] std::size_t rank() const noexcept { return shape_.size(); }
    [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }
    [[nodiscard]] std::span<const double> data() const noexcept { return data_; }
    [[nodiscard]] std::span<double> data() noexcept { return data_; }
    [[nodiscard]] const std::vector<double>& values() const noexcept { return data_; }

    [[nodiscard]] std::size_t last_dim() const noexcept { return shape_.empty() ? 1 : shape_.back(); }
    [[nodiscard]] std::size_t rows() const noexcept {
        const std::size_t last = last_dim();
        return last == 0 ? 0 : data_.size() / last;
    }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    double& at(std::size_t r, std::size_t c) { return data_[r * last_dim() + c]; }
    [[nodiscard]] double at(std::size_t r, std::size_t c) const { return data_[r * last_dim() + c]; }

    // Batch view: rows() x last_dim().
    [[nodiscard]] Matrix to_matrix() const {
        return Eigen::Map<const RowMatrix>(data_.data(), static_cast<Eigen::Index>(rows()),
                                           static_cast<Eigen::Index>(last_dim()));
    }

    [[nodiscard]] bool all_finite() const noexcept {
        for (double v : data_) {
            if (!std::isfinite(v)) return false;
        }
        return true;
    }

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    static std::size_t element_count(const std::vector<std::size_t>& shape) {
        return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
    }

    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

} // namespace gammcl
