// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "gammcl/dataset.hpp"
#include "gammcl/error.hpp"
#include "gammcl/numcore/rng.hpp"

namespace gammcl::bench {

enum class ScenarioKind { SyntheticGaussian, SplitDataset, PermutedDataset };

inline std::string to_string(ScenarioKind k) {
    switch (k) {
    case ScenarioKind::SyntheticGaussian: return "synthetic";
    case ScenarioKind::SplitDataset: return "split";
    case ScenarioKind::PermutedDataset: return "permuted";
    }
    return "?";
}

struct Task {
    LabeledData train;
    LabeledData test;
    int num_classes = 0;
};

struct Scenario {
    std::vector<Task> tasks;
    std::string name;
    std::uint64_t seed = 0;
    ScenarioKind kind = ScenarioKind::SyntheticGaussian;

    [[nodiscard]] std::size_t input_dim() const { return tasks.empty() ? 0 : tasks.front().train.dim(); }

    void validate() const {
        if (tasks.empty()) throw ConfigError("scenario '" + name + "' has no tasks");
        const std::size_t d = input_dim();
        for (std::size_t t = 0; t < tasks.size(); ++t) {
            const auto& task = tasks[t];
            const std::string where = "scenario '" + name + "' task " + std::to_string(t);
            if (task.train.dim() != d || task.test.dim() != d) throw DataError(where + ": input dimensionality differs");
            if (task.train.size() == 0 || task.test.size() == 0) throw DataError(where + ": empty train or test split");
            if (task.train.num_classes != task.num_classes || task.test.num_classes != task.num_classes) {
                throw DataError(where + ": class count disagrees between splits");
            }
            task.train.validate();
            task.test.validate();
        }
    }
};

struct SyntheticSpec {
    std::size_t tasks = 3;
    std::size_t dim = 16;
    std::size_t train_per_task = 1000;
    std::size_t test_per_task = 500;
    double separation = 4.0; // distance between the two class means
    double noise = 1.0;      // per-coordinate standard deviation

    void validate() const {
        if (tasks < 1) throw ConfigError("synthetic.tasks must be >= 1");
        if (dim < 2 || dim > 16) throw ConfigError("synthetic.dim must be in [2, 16]");
        if (train_per_task < 2 || test_per_task < 2) throw ConfigError("synthetic split sizes must be >= 2");
        if (!(separation >= 0.0)) throw ConfigError("synthetic.separation must be >= 0");
        if (!(noise > 0.0)) throw ConfigError("synthetic.noise must be > 0");
    }
};

// Task t separates its two classes along axis t mod dim: class 1 is centred at
// +separation/2 on that axis, class 0 at -separation/2. Labels alternate.
inline LabeledData synthetic_split(const SyntheticSpec& spec, std::size_t task, std::size_t n, Rng& rng) {
    LabeledData d;
    d.num_classes = 2;
    d.x.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(spec.dim));
    d.y.resize(n);
    const auto axis = static_cast<Eigen::Index>(task % spec.dim);
    for (std::size_t i = 0; i < n; ++i) {
        const int label = static_cast<int>(i % 2);
        const auto r = static_cast<Eigen::Index>(i);
        for (Eigen::Index j = 0; j < d.x.cols(); ++j) d.x(r, j) = spec.noise * rng.normal();
        d.x(r, axis) += (label == 1 ? 0.5 : -0.5) * spec.separation;
        d.y[i] = label;
    }
    return d;
}

inline Scenario make_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
    spec.validate();
    Scenario s;
    s.name = "synthetic";
    s.seed = seed;
    s.kind = ScenarioKind::SyntheticGaussian;
    Rng rng(seed);
    for (std::size_t t = 0; t < spec.tasks; ++t) {
        Task task;
        task.num_classes = 2;
        task.train = synthetic_split(spec, t, spec.train_per_task, rng);
        task.test = synthetic_split(spec, t, spec.test_per_task, rng);
        s.tasks.push_back(std::move(task));
    }
    return s;
}

namespace detail {
inline std::vector<std::size_t> take_first(std::vector<std::size_t> idx, std::size_t cap) {
    if (cap > 0 && idx.size() > cap) idx.resize(cap);
    return idx;
}
} // namespace detail

// Consecutive blocks of `classes_per_task` classes form the tasks; labels are
// remapped to [0, classes_per_task) within each task. `train_cap` limits the
// training rows per task (0 keeps all).
inline Scenario make_split(const LabeledData& train, const LabeledData& test, int classes_per_task,
                           std::size_t train_cap, std::uint64_t seed, std::string name = "split") {
    train.validate();
    test.validate();
    if (classes_per_task < 1) throw ConfigError("scenario.classes_per_task must be >= 1");
    if (train.num_classes % classes_per_task != 0) {
        throw ConfigError("scenario.classes_per_task (" + std::to_string(classes_per_task) + ") does not divide " +
                          std::to_string(train.num_classes) + " classes");
    }
    if (train.dim() != test.dim()) throw DataError("train and test dimensionality differ");
    Scenario s;
    s.name = std::move(name);
    s.seed = seed;
    s.kind = ScenarioKind::SplitDataset;
    const int tasks = train.num_classes / classes_per_task;
    auto subset = [&](const LabeledData& src, int t, std::size_t cap) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < src.size(); ++i) {
            if (src.y[i] / classes_per_task == t) idx.push_back(i);
        }
        LabeledData out = src.rows(detail::take_first(std::move(idx), cap));
        for (int& y : out.y) y %= classes_per_task;
        out.num_classes = classes_per_task;
        return out;
    };
    for (int t = 0; t < tasks; ++t) {
        Task task;
        task.num_classes = classes_per_task;
        task.train = subset(train, t, train_cap);
        task.test = subset(test, t, 0);
        s.tasks.push_back(std::move(task));
    }
    s.validate();
    return s;
}

// Task 0 sees the original inputs; task t > 0 applies its own fixed random
// permutation of the input coordinates.
inline Scenario make_permuted(const LabeledData& train, const LabeledData& test, std::size_t tasks,
                              std::size_t train_cap, std::uint64_t seed, std::string name = "permuted") {
    train.validate();
    test.validate();
    if (tasks < 1) throw ConfigError("scenario.tasks must be >= 1");
    if (train.dim() != test.dim()) throw DataError("train and test dimensionality differ");
    Scenario s;
    s.name = std::move(name);
    s.seed = seed;
    s.kind = ScenarioKind::PermutedDataset;
    Rng rng(seed);
    std::vector<std::size_t> all(train.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    const auto train_rows = detail::take_first(all, train_cap);
    for (std::size_t t = 0; t < tasks; ++t) {
        std::vector<Eigen::Index> perm(train.dim());
        std::iota(perm.begin(), perm.end(), Eigen::Index{0});
        if (t > 0) rng.shuffle(std::span<Eigen::Index>(perm));
        auto permute = [&perm](const LabeledData& src) {
            LabeledData out = src;
            for (std::size_t j = 0; j < perm.size(); ++j) out.x.col(static_cast<Eigen::Index>(j)) = src.x.col(perm[j]);
            return out;
        };
        Task task;
        task.num_classes = train.num_classes;
        task.train = permute(train.rows(train_rows));
        task.test = permute(test);
        s.tasks.push_back(std::move(task));
    }
    s.validate();
    return s;
}

} // namespace gammcl::bench
