// SPDX-License-Identifier: Apache-2.0
#pragma once

// Knowledge recall: generate a task's chunks, assemble them into a classifier,
// and predict with or without the task identity.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gammcl/acquisition.hpp"
#include "gammcl/chunkstore.hpp"
#include "gammcl/error.hpp"
#include "gammcl/gamm.hpp"
#include "gammcl/numcore/mlp.hpp"
#include "gammcl/numcore/rng.hpp"

namespace gammcl::recall {

struct RecalledModel {
    ParamVector params;
    MlpSpec spec;
    int task_id = 0;
    std::uint64_t source_seed = 0;
};

inline RecalledModel recall_model(const gamm::GammModel& gamm, int task_id, std::uint64_t seed) {
    Rng rng(seed);
    const auto chunks = gamm::generate_chunks(gamm, task_id, rng);
    RecalledModel model;
    model.params = chunkstore::assemble(chunks, gamm.geometry);
    model.spec = gamm.task_spec;
    model.task_id = task_id;
    model.source_seed = seed;
    return model;
}

// One model per learned task, each with its own stream derived from `seed`.
inline std::vector<RecalledModel> recall_all(const gamm::GammModel& gamm, std::uint64_t seed) {
    Rng seeds(seed);
    std::vector<RecalledModel> models;
    for (int t = 0; t < gamm.tasks_learned; ++t) models.push_back(recall_model(gamm, t, seeds.next_u64()));
    return models;
}

// k independently recalled models for one task (k = 1 is plain recall).
inline std::vector<RecalledModel> recall_ensemble(const gamm::GammModel& gamm, int task_id, std::uint64_t seed,
                                                  std::size_t k) {
    if (k == 0) throw ConfigError("ensemble size must be >= 1");
    Rng seeds(seed);
    std::vector<RecalledModel> models;
    for (std::size_t i = 0; i < k; ++i) models.push_back(recall_model(gamm, task_id, i == 0 ? seed : seeds.next_u64()));
    return models;
}

// Mean logits over an ensemble of recalled models of the same task.
inline Matrix ensemble_logits(std::span<const RecalledModel> models, const Matrix& x) {
    if (models.empty()) throw ConfigError("ensemble_logits: empty ensemble");
    Matrix sum = forward_matrix(models[0].spec, models[0].params, x);
    for (std::size_t i = 1; i < models.size(); ++i) sum += forward_matrix(models[i].spec, models[i].params, x);
    return sum / static_cast<double>(models.size());
}

// Per-class probabilities, one row per input row.
inline Matrix predict_task_aware(const RecalledModel& model, const Matrix& x) {
    return softmax_rows(forward_matrix(model.spec, model.params, x));
}

inline Tensor predict_task_aware(const RecalledModel& model, const Tensor& x) {
    const Tensor logits = forward(model.spec, model.params, x);
    Tensor probs(logits.shape());
    const Matrix p = softmax_rows(logits.to_matrix());
    Eigen::Map<RowMatrix>(probs.data().data(), p.rows(), p.cols()) = p;
    return probs;
}

// Prediction for one input row without a task identity.
struct AgnosticPrediction {
    int chosen_task = 0;
    std::vector<double> probs;
    std::vector<double> entropies; // one per candidate model
};

// Minimum-entropy model selection for every row of x (ties -> lowest task id).
inline std::vector<AgnosticPrediction> predict_task_agnostic(std::span<const RecalledModel> models, const Matrix& x) {
    if (models.empty()) throw ConfigError("predict_task_agnostic: no models to choose from");
    std::vector<Matrix> logits;
    logits.reserve(models.size());
    for (const auto& m : models) logits.push_back(forward_matrix(m.spec, m.params, x));
    std::vector<Eigen::VectorXd> entropies;
    for (const auto& l : logits) entropies.push_back(row_entropies(l));

    std::vector<AgnosticPrediction> out(static_cast<std::size_t>(x.rows()));
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        auto& pred = out[static_cast<std::size_t>(r)];
        std::size_t best = 0;
        for (std::size_t k = 0; k < models.size(); ++k) {
            pred.entropies.push_back(entropies[k](r));
            const double e = entropies[k](r);
            const double b = entropies[best](r);
            if (e < b || (e == b && models[k].task_id < models[best].task_id)) best = k;
        }
        pred.chosen_task = models[best].task_id;
        const Matrix p = softmax_rows(logits[best].row(r));
        pred.probs.assign(p.data(), p.data() + p.size());
    }
    return out;
}

inline AgnosticPrediction predict_task_agnostic(std::span<const RecalledModel> models, const Tensor& x) {
    if (x.rank() != 1) throw ShapeError("single-example agnostic prediction expects a rank-1 input");
    return predict_task_agnostic(models, x.to_matrix()).front();
}

inline double task_aware_accuracy(const RecalledModel& model, const LabeledData& data) {
    return accuracy(model.spec, model.params, data.x, data.y);
}

// Argmax of the selected model's distribution vs. the labels.
inline double task_agnostic_accuracy(std::span<const RecalledModel> models, const LabeledData& data) {
    if (data.size() == 0) return 0.0;
    const auto preds = predict_task_agnostic(models, data.x);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const auto& p = preds[i].probs;
        std::size_t best = 0;
        for (std::size_t c = 1; c < p.size(); ++c) {
            if (p[c] > p[best]) best = c;
        }
        hits += static_cast<int>(best) == data.y[i] ? 1 : 0;
    }
    return static_cast<double>(hits) / static_cast<double>(data.size());
}

// Posterior-format snapshot with zero variance.
inline void save_recalled(const RecalledModel& model, const std::string& path) {
    acquisition::SwagPosterior snap;
    snap.mean = model.params;
    snap.variance.assign(model.params.size(), 0.0);
    snap.spec = model.spec;
    snap.task_id = model.task_id;
    acquisition::save_posterior(snap, path);
}

inline RecalledModel load_recalled(const std::string& path) {
    const auto snap = acquisition::load_posterior(path);
    return RecalledModel{snap.mean, snap.spec, snap.task_id, 0};
}

} // namespace gammcl::recall
