// SPDX-License-Identifier: Apache-2.0
#pragma once

// Flat parameter vectors <-> equal-sized chunks tagged with global chunk ids.
// Chunk (task, position) has id task * m + position (0-based).

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "gammcl/error.hpp"
#include "gammcl/numcore/tensor.hpp"

namespace gammcl::chunkstore {

struct ChunkGeometry {
    std::size_t chunk_size = 0;
    std::size_t param_count = 0;
    std::size_t m = 0;   // chunks per task
    std::size_t pad = 0; // zeros appended to the last chunk

    static ChunkGeometry make(std::size_t param_count, std::size_t chunk_size) {
        if (chunk_size == 0) throw ConfigError("chunk_size must be >= 1");
        if (param_count == 0) throw ConfigError("param_count must be >= 1");
        ChunkGeometry g;
        g.chunk_size = chunk_size;
        g.param_count = param_count;
        g.m = (param_count + chunk_size - 1) / chunk_size;
        g.pad = g.m * chunk_size - param_count;
        return g;
    }

    [[nodiscard]] std::size_t global_id(int task_id, std::size_t position) const noexcept {
        return static_cast<std::size_t>(task_id) * m + position;
    }
    [[nodiscard]] int task_of(std::size_t global_id) const noexcept { return static_cast<int>(global_id / m); }
    [[nodiscard]] std::size_t position_of(std::size_t global_id) const noexcept { return global_id % m; }

    friend bool operator==(const ChunkGeometry&, const ChunkGeometry&) = default;
};

struct Chunk {
    std::vector<double> values;
    std::size_t global_id = 0;
    int task_id = 0;
    std::size_t position = 0;
};

using ChunkSet = std::vector<Chunk>;

inline ChunkSet split(std::span<const double> params, const ChunkGeometry& geom, int task_id) {
    if (params.size() != geom.param_count) {
        throw ShapeError("split: parameter vector has " + std::to_string(params.size()) + " entries, geometry expects " +
                         std::to_string(geom.param_count));
    }
    ChunkSet chunks;
    chunks.reserve(geom.m);
    for (std::size_t pos = 0; pos < geom.m; ++pos) {
        Chunk c;
        c.values.assign(geom.chunk_size, 0.0);
        const std::size_t begin = pos * geom.chunk_size;
        const std::size_t end = std::min(begin + geom.chunk_size, params.size());
        std::copy(params.begin() + static_cast<std::ptrdiff_t>(begin), params.begin() + static_cast<std::ptrdiff_t>(end),
                  c.values.begin());
        c.task_id = task_id;
        c.position = pos;
        c.global_id = geom.global_id(task_id, pos);
        chunks.push_back(std::move(c));
    }
    return chunks;
}

// Concatenates chunks by position and drops the padding. Input order does not
// matter; every position 0..m-1 must appear exactly once for a single task.
inline ParamVector assemble(const ChunkSet& chunks, const ChunkGeometry& geom) {
    std::vector<const Chunk*> by_pos(geom.m, nullptr);
    std::vector<std::size_t> duplicates;
    std::vector<std::size_t> out_of_range;
    for (const auto& c : chunks) {
        if (c.position >= geom.m) {
            out_of_range.push_back(c.position);
            continue;
        }
        if (c.values.size() != geom.chunk_size) {
            throw ShapeError("assemble: chunk at position " + std::to_string(c.position) + " has " +
                             std::to_string(c.values.size()) + " values, expected " + std::to_string(geom.chunk_size));
        }
        if (by_pos[c.position] != nullptr) {
            duplicates.push_back(c.position);
        } else {
            by_pos[c.position] = &c;
        }
    }
    std::vector<std::size_t> missing;
    for (std::size_t p = 0; p < geom.m; ++p) {
        if (by_pos[p] == nullptr) missing.push_back(p);
    }
    if (!missing.empty() || !duplicates.empty() || !out_of_range.empty()) {
        auto list = [](const std::vector<std::size_t>& v) {
            std::string s = "[";
            for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
            return s + "]";
        };
        throw ShapeError("assemble: missing positions " + list(missing) + ", duplicate positions " + list(duplicates) +
                         ", out-of-range positions " + list(out_of_range));
    }
    const int task = by_pos.front()->task_id;
    for (const Chunk* c : by_pos) {
        if (c->task_id != task) throw ShapeError("assemble: chunks belong to more than one task");
    }
    ParamVector params;
    params.reserve(geom.m * geom.chunk_size);
    for (const Chunk* c : by_pos) params.insert(params.end(), c->values.begin(), c->values.end());
    params.resize(geom.param_count);
    return params;
}

// All global ids of the given tasks, contiguous per task, in the given order.
inline std::vector<std::size_t> chunk_ids_for_tasks(std::span<const int> tasks, const ChunkGeometry& geom) {
    if (tasks.empty()) throw ConfigError("chunk_ids_for_tasks: empty task list");
    std::vector<std::size_t> ids;
    ids.reserve(tasks.size() * geom.m);
    for (int t : tasks) {
        if (t < 0) throw ConfigError("chunk_ids_for_tasks: negative task id");
        for (std::size_t p = 0; p < geom.m; ++p) ids.push_back(geom.global_id(t, p));
    }
    return ids;
}

// Chunk values stacked as rows (m x chunk_size), in position order.
inline Matrix to_rows(const ChunkSet& chunks) {
    if (chunks.empty()) return {};
    Matrix m(static_cast<Eigen::Index>(chunks.size()), static_cast<Eigen::Index>(chunks.front().values.size()));
    for (std::size_t i = 0; i < chunks.size(); ++i) {
        for (std::size_t j = 0; j < chunks[i].values.size(); ++j) {
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = chunks[i].values[j];
        }
    }
    return m;
}

} // namespace gammcl::chunkstore
