// SPDX-License-Identifier: Apache-2.0
#pragma once

// Representation complexity of grouped point sets.
//
//   volume       V = sum_c prod_{i<=d} sqrt(lambda_i^c), lambda^c the top-d
//                eigenvalues of group c's covariance
//   separability S = Var[E(x|c)] / Var(x), with Var taken as the trace of the
//                covariance and group means weighted by group size
//
// Covariances are population (1/n) covariances so that
// total = between + within holds exactly.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "gammcl/error.hpp"
#include "gammcl/numcore/tensor.hpp"

namespace gammcl::complexity {

struct GroupedPoints {
    Matrix points; // N x D
    std::vector<int> labels;
    int groups = 0;

    void validate() const {
        if (points.cols() < 1) throw ShapeError("grouped points need D >= 1");
        if (static_cast<std::size_t>(points.rows()) != labels.size()) {
            throw ShapeError("grouped points: " + std::to_string(points.rows()) + " rows vs " +
                             std::to_string(labels.size()) + " labels");
        }
        if (groups < 1) throw ShapeError("grouped points need at least one group");
        std::vector<std::size_t> counts(static_cast<std::size_t>(groups), 0);
        for (int l : labels) {
            if (l < 0 || l >= groups) throw DataError("group label " + std::to_string(l) + " outside [0, " + std::to_string(groups) + ")");
            ++counts[static_cast<std::size_t>(l)];
        }
        for (std::size_t c = 0; c < counts.size(); ++c) {
            if (counts[c] == 0) throw DataError("group " + std::to_string(c) + " is empty");
        }
    }

    [[nodiscard]] std::vector<std::vector<Eigen::Index>> members() const {
        std::vector<std::vector<Eigen::Index>> m(static_cast<std::size_t>(groups));
        for (std::size_t i = 0; i < labels.size(); ++i) m[static_cast<std::size_t>(labels[i])].push_back(static_cast<Eigen::Index>(i));
        return m;
    }
};

struct Eigenpairs {
    Eigen::VectorXd values;  // descending
    Matrix vectors;          // D x k, unit columns (empty when not requested)
};

namespace detail {

inline Matrix gather(const Matrix& x, const std::vector<Eigen::Index>& rows) {
    Matrix out(static_cast<Eigen::Index>(rows.size()), x.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(rows[i]);
    return out;
}

inline Matrix centered(const Matrix& x) {
    const Eigen::RowVectorXd mu = x.colwise().mean();
    return x.rowwise() - mu;
}

// Leading sign convention: the largest-magnitude coordinate is positive.
inline void fix_sign(Eigen::Ref<Eigen::VectorXd> v) {
    Eigen::Index idx = 0;
    v.cwiseAbs().maxCoeff(&idx);
    if (v(idx) < 0.0) v = -v;
}

} // namespace detail

// Top-k eigenpairs of the population covariance of x (rows are points).
// Uses the D x D covariance, or the N x N Gram matrix when N < D.
inline Eigenpairs top_covariance_eigenpairs(const Matrix& x, std::size_t k, bool want_vectors) {
    const Eigen::Index n = x.rows();
    const Eigen::Index d = x.cols();
    if (n < 1) throw DataError("covariance of an empty point set");
    const Matrix xc = detail::centered(x);
    const auto kk = static_cast<Eigen::Index>(k);
    Eigenpairs out;
    out.values = Eigen::VectorXd::Zero(kk);
    if (want_vectors) out.vectors = Matrix::Zero(d, kk);

    const bool dual = n < d;
    const Eigen::Index m = dual ? n : d;
    Matrix s = Matrix::Zero(m, m);
    if (dual) {
        s.selfadjointView<Eigen::Lower>().rankUpdate(xc, 1.0 / static_cast<double>(n));
    } else {
        s.selfadjointView<Eigen::Lower>().rankUpdate(xc.transpose(), 1.0 / static_cast<double>(n));
    }
    s.triangularView<Eigen::StrictlyUpper>() = s.transpose();
    Eigen::SelfAdjointEigenSolver<Matrix> solver(s, want_vectors ? Eigen::ComputeEigenvectors : Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) throw NumericError("symmetric eigen-solver did not converge");
    const Eigen::VectorXd& ev = solver.eigenvalues(); // ascending
    const double scale = std::max(1.0, std::abs(ev(m - 1)));
    for (Eigen::Index i = 0; i < std::min(kk, m); ++i) {
        const Eigen::Index src = m - 1 - i;
        double lambda = ev(src);
        if (lambda < -1e-9 * scale) {
            throw NumericError("covariance eigenvalue " + std::to_string(lambda) + " is negative beyond round-off");
        }
        lambda = std::max(lambda, 0.0);
        out.values(i) = lambda;
        if (want_vectors && lambda > 1e-12 * scale) {
            Eigen::VectorXd v;
            if (dual) {
                v = xc.transpose() * solver.eigenvectors().col(src);
                v.normalize();
            } else {
                v = solver.eigenvectors().col(src);
            }
            detail::fix_sign(v);
            out.vectors.col(i) = v;
        }
    }
    return out;
}

struct VolumeResult {
    double volume = 0.0;
    double log_volume = -std::numeric_limits<double>::infinity();
    std::vector<std::vector<double>> eigenvalues; // groups x d
};

inline VolumeResult volume(const GroupedPoints& data, std::size_t d) {
    data.validate();
    if (d < 1 || d > static_cast<std::size_t>(data.points.cols())) {
        throw ConfigError("volume: d must lie in [1, " + std::to_string(data.points.cols()) + "]");
    }
    VolumeResult res;
    std::vector<double> group_logs;
    const auto members = data.members();
    for (std::size_t c = 0; c < members.size(); ++c) {
        if (members[c].size() < 2) throw DataError("volume: group " + std::to_string(c) + " has fewer than 2 points");
        const auto pairs = top_covariance_eigenpairs(detail::gather(data.points, members[c]), d, false);
        double log_c = 0.0;
        std::vector<double> lambdas(pairs.values.data(), pairs.values.data() + pairs.values.size());
        for (double l : lambdas) log_c += l > 0.0 ? 0.5 * std::log(l) : -std::numeric_limits<double>::infinity();
        res.eigenvalues.push_back(std::move(lambdas));
        group_logs.push_back(log_c);
    }
    const double mx = *std::max_element(group_logs.begin(), group_logs.end());
    if (std::isfinite(mx)) {
        double acc = 0.0;
        for (double l : group_logs) acc += std::exp(l - mx);
        res.log_volume = mx + std::log(acc);
        res.volume = std::exp(res.log_volume);
    }
    return res;
}

struct VarianceDecomposition {
    double total = 0.0;
    double between = 0.0;
    double within = 0.0;
};

inline VarianceDecomposition decompose_variance(const GroupedPoints& data) {
    data.validate();
    const auto n = static_cast<double>(data.points.rows());
    const Eigen::RowVectorXd mu = data.points.colwise().mean();
    VarianceDecomposition v;
    v.total = (data.points.rowwise() - mu).rowwise().squaredNorm().sum() / n;
    for (const auto& rows : data.members()) {
        const Matrix g = detail::gather(data.points, rows);
        const Eigen::RowVectorXd mu_c = g.colwise().mean();
        const double w = static_cast<double>(rows.size()) / n;
        v.between += w * (mu_c - mu).squaredNorm();
        v.within += (g.rowwise() - mu_c).rowwise().squaredNorm().sum() / n;
    }
    return v;
}

inline double separability(const GroupedPoints& data) {
    if (data.groups < 2) throw ConfigError("separability needs at least 2 groups");
    const auto v = decompose_variance(data);
    if (!(v.total > 0.0)) throw DataError("separability: total variance is zero (degenerate data)");
    return std::clamp(v.between / v.total, 0.0, 1.0);
}

struct Reduction {
    Matrix projected;   // N x d
    Matrix components;  // D x d
    Eigen::VectorXd explained; // eigenvalue per component
    std::vector<std::string> warnings;
};

// Projection of the centered points onto their top-d principal components.
inline Reduction reduce_dim(const Matrix& points, std::size_t d) {
    if (d < 1 || d > static_cast<std::size_t>(points.cols())) {
        throw ConfigError("reduce_dim: d must lie in [1, " + std::to_string(points.cols()) + "]");
    }
    const auto pairs = top_covariance_eigenpairs(points, d, true);
    Reduction r;
    r.components = pairs.vectors;
    r.explained = pairs.values;
    r.projected = detail::centered(points) * r.components;
    std::size_t zero = 0;
    for (Eigen::Index i = 0; i < r.components.cols(); ++i) zero += r.components.col(i).isZero(0.0) ? 1 : 0;
    if (zero > 0) {
        r.warnings.push_back("d = " + std::to_string(d) + " exceeds the data rank; " + std::to_string(zero) +
                             " component(s) zero-padded");
    }
    return r;
}

struct ComplexityReport {
    double separability = 0.0;
    double volume = 0.0;
    double log_volume = 0.0;
    std::size_t d = 0;
    std::size_t dim = 0;
    std::size_t points = 0;
    std::vector<std::vector<double>> group_eigenvalues;
    std::vector<std::string> warnings;
};

// S on the raw points; V on the points reduced to d principal components, so
// that representations of different dimensionality are compared in the same
// d-dimensional space.
inline ComplexityReport analyze(const GroupedPoints& data, std::size_t d) {
    data.validate();
    ComplexityReport rep;
    rep.d = d;
    rep.dim = static_cast<std::size_t>(data.points.cols());
    rep.points = static_cast<std::size_t>(data.points.rows());
    rep.separability = separability(data);
    const Reduction red = reduce_dim(data.points, d);
    rep.warnings = red.warnings;
    const auto vol = volume(GroupedPoints{red.projected, data.labels, data.groups}, d);
    rep.volume = vol.volume;
    rep.log_volume = vol.log_volume;
    rep.group_eigenvalues = vol.eigenvalues;
    return rep;
}

struct RepresentationReports {
    ComplexityReport inputs;
    ComplexityReport features;
    ComplexityReport params;
};

inline RepresentationReports analyze_representations(const GroupedPoints& inputs, const GroupedPoints& features,
                                                     const GroupedPoints& param_chunks, std::size_t d) {
    return {analyze(inputs, d), analyze(features, d), analyze(param_chunks, d)};
}

} // namespace gammcl::complexity
