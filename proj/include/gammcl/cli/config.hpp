// SPDX-License-Identifier: Apache-2.0
#pragma once

// Run configuration: a strict plain-text format of `[section]` headers and
// `key = value` lines. Keys may also be written fully dotted
// (`gamm.lambda_gp = 10`). Unknown or repeated keys are errors.

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "gammcl/acquisition.hpp"
#include "gammcl/bench/runner.hpp"
#include "gammcl/bench/scenario.hpp"
#include "gammcl/chunkstore.hpp"
#include "gammcl/error.hpp"
#include "gammcl/gamm.hpp"
#include "gammcl/io/binary.hpp"

namespace gammcl::cli {

struct ScenarioSection {
    std::string kind = "synthetic"; // synthetic | split | permuted
    std::size_t seed = 0;
    // synthetic
    std::size_t tasks = 3;
    std::size_t dim = 16;
    std::size_t train_per_task = 1000;
    std::size_t test_per_task = 500;
    double separation = 4.0;
    double noise = 1.0;
    // split / permuted
    std::string format = "idx"; // idx | csv
    std::string train_images, train_labels, test_images, test_labels;
    std::string train_csv, test_csv;
    std::size_t classes_per_task = 2;
    std::size_t train_cap = 0;
    // evaluation
    std::size_t direct_samples = 10;
    std::size_t fidelity_probes = 20;
};

struct AcquisitionSection {
    std::vector<std::size_t> architecture; // original widths, input to output
    std::string activation = "relu";
    double compression = 1.0;
    acquisition::AcquisitionConfig config;
};

struct ComplexitySection {
    bool enabled = false; // set when the section appears
    std::size_t d = 0;
    std::size_t samples = 200;
    std::size_t chunks = 10;
    bool dumps = true;
};

struct OutputSection {
    std::string dir = "out";
    bool traces = false;
};

struct RunConfig {
    AcquisitionSection acquisition;
    gamm::GammConfig gamm;
    ScenarioSection scenario;
    ComplexitySection complexity;
    OutputSection output;
    std::string origin = "<config>";
};

namespace detail {

using Slot = std::variant<int*, std::size_t*, double*, bool*, std::string*, std::vector<std::size_t>*>;

struct Field {
    std::string key;
    Slot slot;
    bool required = false;
};

// The bound field table, in echo order.
inline std::vector<Field> fields(RunConfig& c) {
    auto& a = c.acquisition;
    auto& g = c.gamm;
    auto& s = c.scenario;
    return {
        {"acquisition.architecture", &a.architecture, true},
        {"acquisition.activation", &a.activation},
        {"acquisition.compression", &a.compression},
        {"acquisition.epochs", &a.config.epochs},
        {"acquisition.moment_start", &a.config.moment_start},
        {"acquisition.lr", &a.config.learning_rate},
        {"acquisition.momentum", &a.config.momentum},
        {"acquisition.batch_size", &a.config.batch_size},
        {"acquisition.lr_decay_every", &a.config.lr_decay_every},
        {"acquisition.lr_decay_factor", &a.config.lr_decay_factor},
        {"gamm.latent_dim", &g.latent_dim},
        {"gamm.gen_hidden", &g.gen_hidden},
        {"gamm.disc_hidden", &g.disc_hidden},
        {"gamm.chunk_size", &g.chunk_size},
        {"gamm.max_chunk_ids", &g.max_chunk_ids},
        {"gamm.lambda_gp", &g.lambda_gp},
        {"gamm.lambda_ra", &g.lambda_ra},
        {"gamm.lr", &g.lr},
        {"gamm.adam_beta1", &g.adam_beta1},
        {"gamm.adam_beta2", &g.adam_beta2},
        {"gamm.n_critic", &g.n_critic},
        {"gamm.batch_size", &g.batch_size},
        {"gamm.iterations", &g.iterations},
        {"gamm.leaky_slope", &g.leaky_slope},
        {"gamm.trace_every", &g.trace_every},
        {"scenario.kind", &s.kind, true},
        {"scenario.seed", &s.seed},
        {"scenario.tasks", &s.tasks},
        {"scenario.dim", &s.dim},
        {"scenario.train_per_task", &s.train_per_task},
        {"scenario.test_per_task", &s.test_per_task},
        {"scenario.separation", &s.separation},
        {"scenario.noise", &s.noise},
        {"scenario.format", &s.format},
        {"scenario.train_images", &s.train_images},
        {"scenario.train_labels", &s.train_labels},
        {"scenario.test_images", &s.test_images},
        {"scenario.test_labels", &s.test_labels},
        {"scenario.train_csv", &s.train_csv},
        {"scenario.test_csv", &s.test_csv},
        {"scenario.classes_per_task", &s.classes_per_task},
        {"scenario.train_cap", &s.train_cap},
        {"scenario.direct_samples", &s.direct_samples},
        {"scenario.fidelity_probes", &s.fidelity_probes},
        {"complexity.d", &c.complexity.d},
        {"complexity.samples", &c.complexity.samples},
        {"complexity.chunks", &c.complexity.chunks},
        {"complexity.dumps", &c.complexity.dumps},
        {"output.dir", &c.output.dir},
        {"output.traces", &c.output.traces},
    };
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

template <class T>
bool parse_integer(std::string_view v, T& out) {
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    return ec == std::errc{} && p == v.data() + v.size();
}

inline std::string unquote(std::string_view v) {
    if (v.size() >= 2 && v.front() == '"' && v.back() == '"') return std::string(v.substr(1, v.size() - 2));
    return std::string(v);
}

inline void assign(const Field& f, std::string_view raw, const std::string& where) {
    auto mismatch = [&](const char* what) {
        return ConfigError(where + ": " + f.key + " expects " + what + ", got '" + std::string(raw) + "'");
    };
    std::visit(
        [&](auto* p) {
            using T = std::remove_pointer_t<decltype(p)>;
            if constexpr (std::is_same_v<T, std::string>) {
                *p = unquote(raw);
            } else if constexpr (std::is_same_v<T, bool>) {
                if (raw == "true") *p = true;
                else if (raw == "false") *p = false;
                else throw mismatch("true or false");
            } else if constexpr (std::is_same_v<T, double>) {
                double v = 0.0;
                const auto [q, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), v);
                if (ec != std::errc{} || q != raw.data() + raw.size()) throw mismatch("a number");
                *p = v;
            } else if constexpr (std::is_same_v<T, std::vector<std::size_t>>) {
                std::string_view list = raw;
                if (list.size() >= 2 && list.front() == '[' && list.back() == ']') list = list.substr(1, list.size() - 2);
                std::vector<std::size_t> out;
                while (true) {
                    const auto comma = list.find(',');
                    const auto tok = trim(list.substr(0, comma));
                    std::size_t v = 0;
                    if (tok.empty() && comma == std::string_view::npos && out.empty()) break;
                    if (!parse_integer(tok, v)) throw mismatch("a comma-separated list of non-negative integers");
                    out.push_back(v);
                    if (comma == std::string_view::npos) break;
                    list.remove_prefix(comma + 1);
                }
                *p = std::move(out);
            } else {
                T v{};
                if (!parse_integer(raw, v)) throw mismatch(std::is_signed_v<T> ? "an integer" : "a non-negative integer");
                *p = v;
            }
        },
        f.slot);
}

inline nlohmann::ordered_json value_json(const Field& f) {
    return std::visit([](auto* p) { return nlohmann::ordered_json(*p); }, f.slot);
}

inline void require_file(const std::string& key, const std::string& path) {
    if (path.empty()) throw ConfigError(key + " is required for this scenario kind");
    if (!std::filesystem::is_regular_file(path)) throw ConfigError(key + ": file not found: " + path);
}

} // namespace detail

inline Activation parse_activation(const std::string& name) {
    if (name == "relu") return Activation::relu();
    if (name == "leaky_relu") return Activation::leaky_relu();
    if (name == "identity") return Activation::identity();
    throw ConfigError("acquisition.activation must be relu, leaky_relu or identity, got '" + name + "'");
}

// Derives the lightweight task spec and the chunk-id capacity, then checks
// every range. Idempotent.
inline void finalize(RunConfig& c) {
    auto& a = c.acquisition;
    if (a.architecture.size() < 2) throw ConfigError("acquisition.architecture needs at least input and output widths");
    MlpSpec original(a.architecture, parse_activation(a.activation));
    original.validate();
    a.config.spec = acquisition::make_lightweight_spec(original, a.compression);
    a.config.validate();

    // max_chunk_ids = 0 means "all tasks of the scenario"; see resolve_capacity.
    const auto geom = chunkstore::ChunkGeometry::make(a.config.spec.param_count(), c.gamm.chunk_size);
    if (c.gamm.max_chunk_ids != 0 && c.gamm.max_chunk_ids < geom.m) {
        throw ConfigError("gamm.max_chunk_ids (" + std::to_string(c.gamm.max_chunk_ids) + ") is smaller than the " +
                          std::to_string(geom.m) + " chunks per task");
    }
    auto probe = c.gamm;
    if (probe.max_chunk_ids == 0) probe.max_chunk_ids = geom.m;
    probe.validate();

    const auto& s = c.scenario;
    if (s.kind == "synthetic") {
        bench::SyntheticSpec{s.tasks, s.dim, s.train_per_task, s.test_per_task, s.separation, s.noise}.validate();
    } else if (s.kind == "split" || s.kind == "permuted") {
        if (s.format == "idx") {
            detail::require_file("scenario.train_images", s.train_images);
            detail::require_file("scenario.train_labels", s.train_labels);
            detail::require_file("scenario.test_images", s.test_images);
            detail::require_file("scenario.test_labels", s.test_labels);
        } else if (s.format == "csv") {
            detail::require_file("scenario.train_csv", s.train_csv);
            detail::require_file("scenario.test_csv", s.test_csv);
        } else {
            throw ConfigError("scenario.format must be idx or csv, got '" + s.format + "'");
        }
        if (s.kind == "split" && s.classes_per_task < 1) throw ConfigError("scenario.classes_per_task must be >= 1");
        if (s.kind == "permuted" && s.tasks < 1) throw ConfigError("scenario.tasks must be >= 1");
    } else {
        throw ConfigError("scenario.kind must be synthetic, split or permuted, got '" + s.kind + "'");
    }

    if (c.complexity.enabled) {
        if (c.complexity.d < 1) throw ConfigError("complexity.d is required and must be >= 1");
        if (c.complexity.samples < 2) throw ConfigError("complexity.samples must be >= 2");
        if (c.complexity.chunks < 2) throw ConfigError("complexity.chunks must be >= 2");
    }
    if (c.output.dir.empty()) throw ConfigError("output.dir must not be empty");
}

// Sizes the chunk-id one-hot for `tasks` tasks when left at 0.
inline void resolve_capacity(RunConfig& c, std::size_t tasks) {
    const auto geom = chunkstore::ChunkGeometry::make(c.acquisition.config.spec.param_count(), c.gamm.chunk_size);
    if (c.gamm.max_chunk_ids == 0) c.gamm.max_chunk_ids = geom.m * tasks;
}

// Relative dataset paths are resolved against `base_dir` when it is given.
inline RunConfig parse_config_text(std::string_view text, const std::string& origin = "<config>",
                                   const std::filesystem::path& base_dir = {}) {
    RunConfig c;
    c.origin = origin;
    auto table = detail::fields(c);
    std::set<std::string> seen;
    std::string section;
    std::size_t line_no = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        const std::string where = origin + ":" + std::to_string(line_no);
        // Comments start at '#' at line start or after whitespace.
        for (std::size_t i = 0; i < line.size(); ++i) {
            if (line[i] == '#' && (i == 0 || line[i - 1] == ' ' || line[i - 1] == '\t')) {
                line = line.substr(0, i);
                break;
            }
        }
        line = detail::trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError(where + ": malformed section header");
            section = std::string(detail::trim(line.substr(1, line.size() - 2)));
            if (section != "acquisition" && section != "gamm" && section != "scenario" && section != "complexity" &&
                section != "output") {
                throw ConfigError(where + ": unknown section [" + section + "]");
            }
            if (section == "complexity") c.complexity.enabled = true;
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw ConfigError(where + ": expected key = value");
        const std::string key_part(detail::trim(line.substr(0, eq)));
        const auto value = detail::trim(line.substr(eq + 1));
        if (key_part.empty()) throw ConfigError(where + ": empty key");
        const std::string key = section.empty() ? key_part : section + "." + key_part;
        const auto it = std::find_if(table.begin(), table.end(), [&](const detail::Field& f) { return f.key == key; });
        if (it == table.end()) throw ConfigError(where + ": unknown key '" + key + "'");
        if (!seen.insert(key).second) throw ConfigError(where + ": duplicate key '" + key + "'");
        if (key.rfind("complexity.", 0) == 0) c.complexity.enabled = true;
        detail::assign(*it, value, where);
    }
    for (const auto& f : table) {
        if (f.required && !seen.count(f.key)) throw ConfigError(origin + ": missing required key '" + f.key + "'");
    }
    if (!base_dir.empty()) {
        auto& s = c.scenario;
        for (std::string* p : {&s.train_images, &s.train_labels, &s.test_images, &s.test_labels, &s.train_csv, &s.test_csv}) {
            if (!p->empty() && std::filesystem::path(*p).is_relative()) *p = (base_dir / *p).lexically_normal().string();
        }
    }
    finalize(c);
    return c;
}

inline RunConfig parse_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str(), path, std::filesystem::path(path).parent_path());
}

// Effective configuration, defaults included, grouped by section. The
// [output] section only says where files go and is left out.
inline nlohmann::ordered_json config_json(RunConfig c) {
    nlohmann::ordered_json out = nlohmann::ordered_json::object();
    for (const auto& f : detail::fields(c)) {
        const auto dot = f.key.find('.');
        const auto section = f.key.substr(0, dot);
        if (section == "output") continue;
        out[section][f.key.substr(dot + 1)] = detail::value_json(f);
    }
    out["complexity"]["enabled"] = c.complexity.enabled;
    return out;
}

inline std::uint64_t config_digest(const RunConfig& c) { return io::fnv1a(config_json(c).dump()); }

inline bench::RunOptions run_options(const RunConfig& c) {
    bench::RunOptions o;
    o.direct_samples = c.scenario.direct_samples;
    o.fidelity_probes = c.scenario.fidelity_probes;
    return o;
}

} // namespace gammcl::cli
