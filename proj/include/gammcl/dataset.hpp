// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "gammcl/error.hpp"
#include "gammcl/numcore/tensor.hpp"

namespace gammcl {

// Labeled examples, one row of `x` per example.
struct LabeledData {
    Matrix x;
    std::vector<int> y;
    int num_classes = 0;

    [[nodiscard]] std::size_t size() const noexcept { return y.size(); }
    [[nodiscard]] std::size_t dim() const noexcept { return static_cast<std::size_t>(x.cols()); }

    void validate() const {
        if (static_cast<std::size_t>(x.rows()) != y.size()) {
            throw DataError("dataset has " + std::to_string(x.rows()) + " rows but " + std::to_string(y.size()) +
                            " labels");
        }
        for (int label : y) {
            if (label < 0 || label >= num_classes) {
                throw DataError("label " + std::to_string(label) + " outside [0, " + std::to_string(num_classes) + ")");
            }
        }
    }

    [[nodiscard]] LabeledData rows(const std::vector<std::size_t>& idx) const {
        LabeledData out;
        out.num_classes = num_classes;
        out.x.resize(static_cast<Eigen::Index>(idx.size()), x.cols());
        out.y.reserve(idx.size());
        for (std::size_t i = 0; i < idx.size(); ++i) {
            out.x.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(idx[i]));
            out.y.push_back(y[idx[i]]);
        }
        return out;
    }
};

} // namespace gammcl
