// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <string>
#include <string_view>
#include <vector>

#include "gammcl/error.hpp"

namespace gammcl::bench {

// R[i][j]: accuracy on task j after learning task i, defined for j <= i.
class EvalMatrix {
public:
    EvalMatrix() = default;
    explicit EvalMatrix(std::size_t tasks) : t_(tasks), r_(tasks * tasks, 0.0), set_(tasks * tasks, false) {}

    [[nodiscard]] std::size_t tasks() const noexcept { return t_; }

    void set(std::size_t i, std::size_t j, double value) {
        if (i >= t_ || j > i) throw ConfigError("R[" + std::to_string(i) + "][" + std::to_string(j) + "] is outside the lower triangle");
        if (!(value >= 0.0 && value <= 1.0)) throw NumericError("accuracy " + std::to_string(value) + " outside [0, 1]");
        r_[i * t_ + j] = value;
        set_[i * t_ + j] = true;
    }

    [[nodiscard]] bool has(std::size_t i, std::size_t j) const noexcept { return i < t_ && j < t_ && set_[i * t_ + j]; }

    [[nodiscard]] double at(std::size_t i, std::size_t j) const {
        if (!has(i, j)) throw ConfigError("R[" + std::to_string(i) + "][" + std::to_string(j) + "] is not set");
        return r_[i * t_ + j];
    }

    [[nodiscard]] bool lower_triangle_complete() const noexcept {
        for (std::size_t i = 0; i < t_; ++i) {
            for (std::size_t j = 0; j <= i; ++j) {
                if (!set_[i * t_ + j]) return false;
            }
        }
        return true;
    }

    // One line per row; unset entries are empty fields.
    [[nodiscard]] std::string to_csv() const {
        std::string out;
        char buf[32];
        for (std::size_t i = 0; i < t_; ++i) {
            for (std::size_t j = 0; j < t_; ++j) {
                if (j) out += ',';
                if (set_[i * t_ + j]) {
                    std::snprintf(buf, sizeof buf, "%.17g", r_[i * t_ + j]);
                    out += buf;
                }
            }
            out += '\n';
        }
        return out;
    }

    // Inverse of to_csv: T lines of T comma-separated fields, empty when unset.
    static EvalMatrix from_csv(std::string_view text, const std::string& origin = "<R>") {
        std::vector<std::vector<std::string_view>> rows;
        while (!text.empty()) {
            const auto nl = text.find('\n');
            std::string_view line = text.substr(0, nl);
            text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
            if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
            if (line.empty()) continue;
            std::vector<std::string_view> cells;
            while (true) {
                const auto comma = line.find(',');
                cells.push_back(line.substr(0, comma));
                if (comma == std::string_view::npos) break;
                line.remove_prefix(comma + 1);
            }
            rows.push_back(std::move(cells));
        }
        EvalMatrix r(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (rows[i].size() != rows.size()) {
                throw DataError(origin + ": row " + std::to_string(i) + " has " + std::to_string(rows[i].size()) +
                                " fields, expected " + std::to_string(rows.size()));
            }
            for (std::size_t j = 0; j < rows.size(); ++j) {
                const auto cell = rows[i][j];
                if (cell.empty()) continue;
                double v = 0.0;
                const auto [p, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
                if (ec != std::errc{} || p != cell.data() + cell.size()) {
                    throw DataError(origin + ": bad value '" + std::string(cell) + "' at R[" + std::to_string(i) + "][" +
                                    std::to_string(j) + "]");
                }
                try {
                    r.set(i, j, v);
                } catch (const Error& e) {
                    throw DataError(origin + ": " + e.what());
                }
            }
        }
        return r;
    }

    friend bool operator==(const EvalMatrix&, const EvalMatrix&) = default;

private:
    std::size_t t_ = 0;
    std::vector<double> r_;
    std::vector<bool> set_;
};

namespace detail {
inline void require_complete(const EvalMatrix& r) {
    if (r.tasks() == 0) throw ConfigError("empty R matrix");
    if (!r.lower_triangle_complete()) throw ConfigError("R matrix lower triangle is incomplete");
}
} // namespace detail

// Final average accuracy.
inline double acc(const EvalMatrix& r) {
    detail::require_complete(r);
    const std::size_t t = r.tasks();
    double s = 0.0;
    for (std::size_t i = 0; i < t; ++i) s += r.at(t - 1, i);
    return s / static_cast<double>(t);
}

// Backward transfer; negative values mean forgetting.
inline double bwt(const EvalMatrix& r) {
    detail::require_complete(r);
    const std::size_t t = r.tasks();
    if (t < 2) throw ConfigError("BWT is undefined for a single task");
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < t; ++i) s += r.at(t - 1, i) - r.at(i, i);
    return s / static_cast<double>(t - 1);
}

// Learning accuracy: mean of the diagonal.
inline double la(const EvalMatrix& r) {
    detail::require_complete(r);
    double s = 0.0;
    for (std::size_t i = 0; i < r.tasks(); ++i) s += r.at(i, i);
    return s / static_cast<double>(r.tasks());
}

struct MemoryComponent {
    std::string name;
    std::size_t params = 0;
    std::size_t pixels = 0;
    std::size_t values = 0;
};

struct MemoryEntry {
    std::string name;
    double parameter_equivalents = 0.0;
};

struct MemoryLedger {
    std::vector<MemoryEntry> entries;
    double total = 0.0;
};

// A stored 8-bit pixel counts as a quarter of a 32-bit parameter.
inline constexpr double kPixelParameterEquivalent = 0.25;

inline MemoryLedger memory_usage(const std::vector<MemoryComponent>& components) {
    MemoryLedger ledger;
    for (const auto& c : components) {
        const double eq = static_cast<double>(c.params) + static_cast<double>(c.values) +
                          kPixelParameterEquivalent * static_cast<double>(c.pixels);
        ledger.entries.push_back({c.name, eq});
        ledger.total += eq;
    }
    return ledger;
}

} // namespace gammcl::bench
