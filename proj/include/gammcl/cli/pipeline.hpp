// SPDX-License-Identifier: Apache-2.0
#pragma once

// Glue between a RunConfig and the library: scenario construction and the
// JSON/CSV artifacts written by the command-line tool.

#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gammcl/bench/metrics.hpp"
#include "gammcl/bench/runner.hpp"
#include "gammcl/bench/scenario.hpp"
#include "gammcl/cli/config.hpp"
#include "gammcl/complexity.hpp"
#include "gammcl/io/binary.hpp"
#include "gammcl/io/datasets.hpp"

namespace gammcl::cli {

using Json = nlohmann::ordered_json;

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016" PRIx64, v);
    return buf;
}

inline bench::Scenario build_scenario(const RunConfig& c) {
    const auto& s = c.scenario;
    if (s.kind == "synthetic") {
        const bench::SyntheticSpec spec{s.tasks, s.dim, s.train_per_task, s.test_per_task, s.separation, s.noise};
        return bench::make_synthetic(spec, s.seed);
    }
    io::DatasetHandle train, test;
    if (s.format == "idx") {
        train = io::load_idx(s.train_images, s.train_labels);
        test = io::load_idx(s.test_images, s.test_labels);
    } else {
        train = io::load_csv(s.train_csv);
        test = io::load_csv(s.test_csv);
    }
    const int classes = std::max(train.data.num_classes, test.data.num_classes);
    train.data.num_classes = test.data.num_classes = classes;
    if (s.kind == "split") {
        return bench::make_split(train.data, test.data, static_cast<int>(s.classes_per_task), s.train_cap, s.seed);
    }
    return bench::make_permuted(train.data, test.data, s.tasks, s.train_cap, s.seed);
}

inline Json metrics_json(const bench::EvalMatrix& r) {
    Json j;
    j["acc"] = bench::acc(r);
    j["bwt"] = r.tasks() >= 2 ? Json(bench::bwt(r)) : Json(nullptr);
    j["la"] = bench::la(r);
    std::vector<double> last;
    for (std::size_t i = 0; i < r.tasks(); ++i) last.push_back(r.at(r.tasks() - 1, i));
    j["final_row"] = last;
    return j;
}

inline Json complexity_json(const complexity::ComplexityReport& rep) {
    Json j;
    j["S"] = rep.separability;
    j["V"] = rep.volume;
    j["logV"] = rep.log_volume;
    j["d"] = rep.d;
    j["dim"] = rep.dim;
    j["points"] = rep.points;
    Json groups = Json::array();
    for (std::size_t g = 0; g < rep.group_eigenvalues.size(); ++g) {
        const auto& ev = rep.group_eigenvalues[g];
        double log_sqrt_prod = 0.0;
        for (double v : ev) log_sqrt_prod += 0.5 * std::log(v);
        groups.push_back({{"group", g}, {"eigenvalues", ev}, {"log_sqrt_product", log_sqrt_prod}});
    }
    j["groups"] = groups;
    j["warnings"] = rep.warnings;
    return j;
}

inline Json representation_json(const complexity::RepresentationReports& r) {
    Json j;
    j["inputs"] = complexity_json(r.inputs);
    j["features"] = complexity_json(r.features);
    j["params"] = complexity_json(r.params);
    j["ordering"] = {
        {"S_params_gt_S_features", r.params.separability > r.features.separability},
        {"S_features_gt_S_inputs", r.features.separability > r.inputs.separability},
        {"V_inputs_gt_V_params", r.inputs.log_volume > r.params.log_volume},
    };
    return j;
}

inline std::string traces_csv(const bench::ScenarioResult& r) {
    std::string out = "task,iteration,d_loss,g_loss,wasserstein,penalty,alignment\n";
    char buf[256];
    for (const auto& t : r.tasks) {
        for (const auto& p : t.consolidation.points) {
            std::snprintf(buf, sizeof buf, "%d,%d,%.17g,%.17g,%.17g,%.17g,%.17g\n", p.task, p.iteration, p.d_loss,
                          p.g_loss, p.wasserstein, p.penalty, p.alignment);
            out += buf;
        }
    }
    return out;
}

inline std::string epoch_loss_csv(const bench::ScenarioResult& r) {
    std::string out = "task,epoch,loss\n";
    char buf[96];
    for (const auto& t : r.tasks) {
        for (std::size_t e = 0; e < t.epoch_loss.size(); ++e) {
            std::snprintf(buf, sizeof buf, "%d,%zu,%.17g\n", t.task, e + 1, t.epoch_loss[e]);
            out += buf;
        }
    }
    return out;
}

// Everything here is a function of the configuration and seed; no clock or
// host information enters the summary.
inline Json summary_json(const RunConfig& c, const bench::Scenario& scenario, const bench::ScenarioResult& r) {
    Json j;
    j["scenario"] = {{"name", scenario.name}, {"kind", bench::to_string(scenario.kind)}, {"tasks", scenario.tasks.size()}};
    j["seeds"] = {{"run", r.seed}, {"scenario", scenario.seed}};
    j["config_digest"] = hex64(config_digest(c));
    j["gamm_config_digest"] = hex64(r.model.config.digest());
    j["task_aware"] = metrics_json(r.aware);
    j["task_agnostic"] = metrics_json(r.agnostic);
    Json tasks = Json::array();
    for (std::size_t t = 0; t < r.tasks.size(); ++t) {
        const auto& a = r.tasks[t];
        Json tj;
        tj["task"] = a.task;
        tj["posterior_mean_accuracy"] = a.posterior_mean_accuracy;
        tj["direct_sample_accuracy"] = a.direct_sample_accuracy;
        tj["recalled_accuracy_when_learned"] = r.aware.at(t, t);
        tj["recalled_accuracy_final"] = r.aware.at(r.aware.tasks() - 1, t);
        tj["alignment_distance"] = a.alignment_distance ? Json(*a.alignment_distance) : Json(nullptr);
        tj["fidelity_mse"] = t < r.fidelity_mse.size() ? Json(r.fidelity_mse[t]) : Json(nullptr);
        tj["retained"] = a.retained;
        tasks.push_back(tj);
    }
    j["per_task"] = tasks;
    Json entries = Json::array();
    for (const auto& e : r.ledger.entries) entries.push_back({{"name", e.name}, {"parameter_equivalents", e.parameter_equivalents}});
    j["memory"] = {{"entries", entries}, {"total", r.ledger.total}};
    j["r_digest"] = hex64(io::fnv1a(r.aware.to_csv() + r.agnostic.to_csv()));
    j["config"] = config_json(c);
    return j;
}

inline void write_json(const std::string& path, const Json& j) { io::write_text(path, j.dump(2) + "\n"); }

} // namespace gammcl::cli
