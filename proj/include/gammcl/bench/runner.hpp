// SPDX-License-Identifier: Apache-2.0
#pragma once

// Full continual-learning pipeline: for each task acquire a SWAG posterior,
// consolidate it into the GAMM, drop the posterior, then recall every learned
// task and fill one row of the task-aware and task-agnostic R matrices.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gammcl/acquisition.hpp"
#include "gammcl/bench/metrics.hpp"
#include "gammcl/bench/scenario.hpp"
#include "gammcl/chunkstore.hpp"
#include "gammcl/complexity.hpp"
#include "gammcl/error.hpp"
#include "gammcl/gamm.hpp"
#include "gammcl/recall.hpp"

namespace gammcl::bench {

struct RunOptions {
    std::size_t direct_samples = 10;  // posterior samples scored per task
    std::size_t fidelity_probes = 20; // posterior samples kept for the chunk MSE check
    std::size_t alignment_samples = 256;
    // Called with each fresh posterior before it is consolidated and dropped.
    std::function<void(int task, const acquisition::SwagPosterior&, const Task&)> on_posterior;
};

struct TaskArtifacts {
    int task = 0;
    std::vector<double> epoch_loss;
    gamm::ConsolidationTrace consolidation;
    double posterior_mean_accuracy = 0.0;
    double direct_sample_accuracy = 0.0; // mean over RunOptions::direct_samples draws
    std::optional<double> alignment_distance; // new vs previous generator on earlier tasks
    std::vector<std::string> retained;        // what the learner holds after this task
};

struct ScenarioResult {
    EvalMatrix aware;
    EvalMatrix agnostic;
    MemoryLedger ledger;
    std::vector<TaskArtifacts> tasks;
    std::vector<double> fidelity_mse; // per task, measured with the final GAMM
    gamm::GammModel model;
    std::uint64_t seed = 0;
};

template <class Fn>
auto with_stage(const std::string& stage, Fn&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const ConfigError& e) {
        throw ConfigError(stage + ": " + e.what());
    } catch (const DataError& e) {
        throw DataError(stage + ": " + e.what());
    } catch (const NumericError& e) {
        throw NumericError(stage + ": " + e.what());
    } catch (const ShapeError& e) {
        throw ShapeError(stage + ": " + e.what());
    }
}

// Mean over chunks of the squared error between two parameter vectors,
// restricted to real (non-padding) entries.
inline double chunk_mse(std::span<const double> a, std::span<const double> b, const chunkstore::ChunkGeometry& g) {
    if (a.size() != g.param_count || b.size() != g.param_count) throw ShapeError("chunk_mse: size mismatch");
    double total = 0.0;
    for (std::size_t p = 0; p < g.m; ++p) {
        const std::size_t lo = p * g.chunk_size;
        const std::size_t hi = std::min(lo + g.chunk_size, g.param_count);
        double s = 0.0;
        for (std::size_t i = lo; i < hi; ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
        total += s / static_cast<double>(hi - lo);
    }
    return total / static_cast<double>(g.m);
}

inline ScenarioResult run_scenario(const Scenario& scenario, const acquisition::AcquisitionConfig& acq_cfg,
                                   const gamm::GammConfig& gamm_cfg, std::uint64_t seed,
                                   const RunOptions& options = {}) {
    with_stage("scenario", [&] {
        scenario.validate();
        acq_cfg.validate();
    });
    if (scenario.input_dim() != acq_cfg.spec.input_dim()) {
        throw ConfigError("scenario inputs have " + std::to_string(scenario.input_dim()) +
                          " features but the task spec expects " + std::to_string(acq_cfg.spec.input_dim()));
    }
    for (const auto& task : scenario.tasks) {
        if (static_cast<std::size_t>(task.num_classes) > acq_cfg.spec.output_dim()) {
            throw ConfigError("task with " + std::to_string(task.num_classes) + " classes exceeds the spec's " +
                              std::to_string(acq_cfg.spec.output_dim()) + " outputs");
        }
    }

    const std::size_t T = scenario.tasks.size();
    gamm::GammConfig gcfg = gamm_cfg;
    if (gcfg.max_chunk_ids == 0) {
        gcfg.max_chunk_ids = T * chunkstore::ChunkGeometry::make(acq_cfg.spec.param_count(), gcfg.chunk_size).m;
    }
    ScenarioResult result;
    result.seed = seed;
    result.aware = EvalMatrix(T);
    result.agnostic = EvalMatrix(T);

    Rng root(seed);
    std::optional<gamm::GammModel> model;
    std::vector<std::vector<ParamVector>> probes(T);

    for (std::size_t t = 0; t < T; ++t) {
        const int task_id = static_cast<int>(t);
        const std::string prefix = "task " + std::to_string(t);
        const auto& task = scenario.tasks[t];
        Rng acq_rng(root.next_u64());
        Rng sample_rng(root.next_u64());
        Rng gamm_rng(root.next_u64());
        Rng eval_rng(root.next_u64());

        TaskArtifacts art;
        art.task = task_id;

        // Working memory: lives only until consolidation finishes.
        std::optional<acquisition::SwagPosterior> posterior;
        acquisition::AcquisitionTrace acq_trace;
        posterior = with_stage(prefix + " acquisition",
                               [&] { return acquisition::train_swag(task.train, acq_cfg, acq_rng, task_id, &acq_trace); });
        art.epoch_loss = std::move(acq_trace.epoch_loss);
        art.posterior_mean_accuracy = accuracy(posterior->spec, posterior->mean, task.test.x, task.test.y);
        if (options.direct_samples > 0) {
            double s = 0.0;
            for (std::size_t k = 0; k < options.direct_samples; ++k) {
                const auto theta = acquisition::sample_model(*posterior, sample_rng);
                s += accuracy(posterior->spec, theta, task.test.x, task.test.y);
            }
            art.direct_sample_accuracy = s / static_cast<double>(options.direct_samples);
        }
        if (options.on_posterior) options.on_posterior(task_id, *posterior, task);
        for (std::size_t k = 0; k < options.fidelity_probes; ++k) {
            probes[t].push_back(acquisition::sample_model(*posterior, sample_rng));
        }

        with_stage(prefix + " consolidation", [&] {
            if (!model) {
                model = gamm::train_first_task(*posterior, gcfg, gamm_rng, &art.consolidation);
            } else {
                const ParamVector previous = model->gen_params;
                model = gamm::train_incremental(*model, *posterior, gamm_rng, &art.consolidation);
                art.alignment_distance =
                    gamm::alignment_distance(*model, previous, task_id, eval_rng, options.alignment_samples);
            }
        });
        posterior.reset();
        model->discard_discriminator();

        if (posterior) art.retained.push_back("posterior.task" + std::to_string(t));
        if (!model->gen_params.empty()) art.retained.push_back("gamm.generator");
        if (!model->disc_params.empty()) art.retained.push_back("gamm.discriminator");

        with_stage(prefix + " recall", [&] {
            Rng recall_seeds(eval_rng.next_u64());
            std::vector<recall::RecalledModel> recalled;
            for (int j = 0; j <= task_id; ++j) recalled.push_back(recall::recall_model(*model, j, recall_seeds.next_u64()));
            for (std::size_t j = 0; j <= t; ++j) {
                const auto& test = scenario.tasks[j].test;
                result.aware.set(t, j, recall::task_aware_accuracy(recalled[j], test));
                result.agnostic.set(t, j, recall::task_agnostic_accuracy(recalled, test));
            }
        });
        result.tasks.push_back(std::move(art));
    }

    Rng fidelity_rng(root.next_u64());
    for (std::size_t t = 0; t < T; ++t) {
        if (probes[t].empty()) continue;
        double s = 0.0;
        for (const auto& probe : probes[t]) {
            const auto generated =
                chunkstore::assemble(gamm::generate_chunks(*model, static_cast<int>(t), fidelity_rng), model->geometry);
            s += chunk_mse(generated, probe, model->geometry);
        }
        result.fidelity_mse.push_back(s / static_cast<double>(probes[t].size()));
    }

    result.ledger = memory_usage({{"gamm.generator", model->gen_params.size(), 0, 0}});
    result.model = std::move(*model);
    return result;
}

// Point sets for the three representation levels of one trained task model:
// inputs and last-hidden-layer features grouped by class, and posterior
// samples cut into `chunks` equal chunks grouped by chunk position.
struct Representations {
    complexity::GroupedPoints inputs;
    complexity::GroupedPoints features;
    complexity::GroupedPoints params;
};

inline Representations representation_sets(const LabeledData& data, const acquisition::SwagPosterior& posterior,
                                           std::size_t samples, std::size_t chunks, Rng& rng) {
    posterior.validate();
    if (posterior.spec.num_layers() < 2) throw ConfigError("feature representation needs a hidden layer");
    if (samples < 2) throw ConfigError("need at least 2 posterior samples per chunk group");
    if (chunks < 2 || chunks > posterior.mean.size()) throw ConfigError("chunk count must be in [2, param count]");
    Representations r;
    r.inputs = {data.x, data.y, data.num_classes};
    r.features = {forward_matrix(posterior.spec, posterior.mean, data.x, posterior.spec.num_layers() - 2), data.y,
                  data.num_classes};

    const std::size_t chunk_size = (posterior.mean.size() + chunks - 1) / chunks;
    const auto geom = chunkstore::ChunkGeometry::make(posterior.mean.size(), chunk_size);
    r.params.groups = static_cast<int>(geom.m);
    r.params.points.resize(static_cast<Eigen::Index>(samples * geom.m), static_cast<Eigen::Index>(chunk_size));
    r.params.labels.reserve(samples * geom.m);
    Eigen::Index row = 0;
    for (std::size_t s = 0; s < samples; ++s) {
        const auto theta = acquisition::sample_model(posterior, rng);
        for (const auto& c : chunkstore::split(theta, geom, posterior.task_id)) {
            r.params.points.row(row++) = Eigen::Map<const Eigen::RowVectorXd>(c.values.data(), static_cast<Eigen::Index>(c.values.size()));
            r.params.labels.push_back(static_cast<int>(c.position));
        }
    }
    return r;
}

} // namespace gammcl::bench
