// SPDX-License-Identifier: Apache-2.0
#pragma once

// Generative adversarial meta-model: a conditional WGAN-GP whose samples are
// parameter chunks. The generator maps [z, one_hot(chunk id)] to chunk values;
// the critic scores [chunk values, one_hot(chunk id)].
//
// Task 0 is learned from chunks of fresh posterior samples. Task t > 0 starts
// from freshly initialised networks and learns from a replay mixture: rows
// whose id belongs to task t carry sampled chunks, rows whose id belongs to an
// earlier task carry chunks generated by the frozen previous generator. The
// generator loss adds the replay-alignment distance to that frozen generator.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gammcl/acquisition.hpp"
#include "gammcl/chunkstore.hpp"
#include "gammcl/error.hpp"
#include "gammcl/io/binary.hpp"
#include "gammcl/io/snapshot.hpp"
#include "gammcl/numcore/autodiff.hpp"
#include "gammcl/numcore/mlp.hpp"
#include "gammcl/numcore/optim.hpp"
#include "gammcl/numcore/rng.hpp"

namespace gammcl::gamm {

using acquisition::SwagPosterior;
using chunkstore::ChunkGeometry;
using chunkstore::ChunkSet;

struct GammConfig {
    std::size_t latent_dim = 100;
    std::vector<std::size_t> gen_hidden{200, 200};
    std::vector<std::size_t> disc_hidden{256};
    std::size_t chunk_size = 2000;
    std::size_t max_chunk_ids = 0; // one-hot capacity, >= chunks per task
    double lambda_gp = 10.0;
    double lambda_ra = 0.0;
    double lr = 2e-4;
    double adam_beta1 = 0.0;
    double adam_beta2 = 0.9;
    int n_critic = 5;
    std::size_t batch_size = 64;
    int iterations = 20000;
    double leaky_slope = 0.2;
    int trace_every = 100; // loss trace sampling period (0 disables)

    void validate() const {
        if (latent_dim < 1) throw ConfigError("gamm.latent_dim must be >= 1");
        if (chunk_size < 1) throw ConfigError("gamm.chunk_size must be >= 1");
        if (max_chunk_ids < 1) throw ConfigError("gamm.max_chunk_ids must be >= 1");
        if (!(lambda_gp >= 0.0)) throw ConfigError("gamm.lambda_gp must be >= 0");
        if (!(lambda_ra >= 0.0)) throw ConfigError("gamm.lambda_ra must be >= 0");
        if (!(lr > 0.0)) throw ConfigError("gamm.lr must be > 0");
        if (n_critic < 1) throw ConfigError("gamm.n_critic must be >= 1");
        if (batch_size < 1) throw ConfigError("gamm.batch_size must be >= 1");
        if (iterations < 0) throw ConfigError("gamm.iterations must be >= 0");
        for (std::size_t w : gen_hidden) {
            if (w < 1) throw ConfigError("gamm.gen_hidden widths must be >= 1");
        }
        for (std::size_t w : disc_hidden) {
            if (w < 1) throw ConfigError("gamm.disc_hidden widths must be >= 1");
        }
    }

    [[nodiscard]] MlpSpec generator_spec() const {
        std::vector<std::size_t> widths{latent_dim + max_chunk_ids};
        widths.insert(widths.end(), gen_hidden.begin(), gen_hidden.end());
        widths.push_back(chunk_size);
        return MlpSpec(std::move(widths), Activation::leaky_relu(leaky_slope));
    }

    [[nodiscard]] MlpSpec discriminator_spec() const {
        std::vector<std::size_t> widths{chunk_size + max_chunk_ids};
        widths.insert(widths.end(), disc_hidden.begin(), disc_hidden.end());
        widths.push_back(1);
        return MlpSpec(std::move(widths), Activation::leaky_relu(leaky_slope));
    }

    // Stable text form; the digest of this string identifies a configuration.
    [[nodiscard]] std::string canonical() const {
        auto list = [](const std::vector<std::size_t>& v) {
            std::string s;
            for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
            return s;
        };
        auto num = [](double v) {
            char buf[64];
            std::snprintf(buf, sizeof buf, "%.17g", v);
            return std::string(buf);
        };
        return "latent_dim=" + std::to_string(latent_dim) + ";gen_hidden=" + list(gen_hidden) +
               ";disc_hidden=" + list(disc_hidden) + ";chunk_size=" + std::to_string(chunk_size) +
               ";max_chunk_ids=" + std::to_string(max_chunk_ids) + ";lambda_gp=" + num(lambda_gp) +
               ";lambda_ra=" + num(lambda_ra) + ";lr=" + num(lr) + ";beta1=" + num(adam_beta1) +
               ";beta2=" + num(adam_beta2) + ";n_critic=" + std::to_string(n_critic) +
               ";batch_size=" + std::to_string(batch_size) + ";iterations=" + std::to_string(iterations) +
               ";leaky_slope=" + num(leaky_slope);
    }

    [[nodiscard]] std::uint64_t digest() const { return io::fnv1a(canonical()); }
};

struct GammModel {
    ParamVector gen_params;
    ParamVector disc_params; // empty once discarded at rest
    GammConfig config;
    int tasks_learned = 0;
    ChunkGeometry geometry;
    MlpSpec task_spec; // architecture of the recalled task models

    [[nodiscard]] MlpSpec generator_spec() const { return config.generator_spec(); }
    [[nodiscard]] MlpSpec discriminator_spec() const { return config.discriminator_spec(); }

    void validate() const {
        config.validate();
        if (geometry.chunk_size != config.chunk_size) throw ConfigError("GAMM geometry chunk size disagrees with config");
        if (config.max_chunk_ids < geometry.m) {
            throw ConfigError("gamm.max_chunk_ids (" + std::to_string(config.max_chunk_ids) +
                              ") is smaller than the chunks per task (" + std::to_string(geometry.m) + ")");
        }
        if (geometry.param_count != task_spec.param_count()) throw ConfigError("GAMM geometry disagrees with task spec");
        check_params(generator_spec(), gen_params);
        if (!disc_params.empty()) check_params(discriminator_spec(), disc_params);
    }

    // The critic is only needed while a task is being consolidated.
    void discard_discriminator() {
        disc_params.clear();
        disc_params.shrink_to_fit();
    }
};

// One critic training batch. Rows of real/fake/interpolates are critic inputs
// [chunk values | one-hot id]; both halves share the ids.
struct ReplayBatch {
    Matrix real;
    Matrix fake;
    Matrix interpolates;
    Eigen::VectorXd eps;
    std::vector<std::size_t> ids;
};

inline Matrix one_hot(std::span<const std::size_t> ids, std::size_t capacity) {
    Matrix m = Matrix::Zero(static_cast<Eigen::Index>(ids.size()), static_cast<Eigen::Index>(capacity));
    for (std::size_t r = 0; r < ids.size(); ++r) {
        if (ids[r] >= capacity) {
            throw ConfigError("chunk id " + std::to_string(ids[r]) + " exceeds one-hot capacity " + std::to_string(capacity));
        }
        m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(ids[r])) = 1.0;
    }
    return m;
}

inline Matrix hstack(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows(), a.cols() + b.cols());
    out << a, b;
    return out;
}

// Generator output (rows x chunk_size) for latent rows z and chunk ids.
inline Matrix generate(const GammConfig& config, std::span<const double> gen_params, const Matrix& z,
                       std::span<const std::size_t> ids) {
    return forward_matrix(config.generator_spec(), gen_params, hstack(z, one_hot(ids, config.max_chunk_ids)));
}

// eps * real + (1 - eps) * fake with one eps per row.
inline Matrix interpolate(const Matrix& real, const Matrix& fake, const Eigen::VectorXd& eps) {
    if (real.rows() != fake.rows() || real.cols() != fake.cols() || eps.size() != real.rows()) {
        throw ShapeError("interpolate: real/fake/eps shapes disagree");
    }
    Matrix out(real.rows(), real.cols());
    for (Eigen::Index r = 0; r < real.rows(); ++r) out.row(r) = eps(r) * real.row(r) + (1.0 - eps(r)) * fake.row(r);
    return out;
}

// L_D = -mean D(real) + mean D(fake) + lambda_gp * mean (||grad_x D(x_hat)|| - 1)^2,
// the norm taken over the chunk-value columns of x_hat.
inline ad::Var discriminator_objective(const GammConfig& config, ad::Var d_params, const ReplayBatch& batch,
                                       ad::Var* penalty_out = nullptr) {
    ad::Tape& tape = *d_params.tape();
    const MlpSpec spec = config.discriminator_spec();
    const auto b = ad::bind_mlp(spec, d_params);
    ad::Var real = ad::mlp_forward(spec, b, tape.constant(batch.real)).output;
    ad::Var fake = ad::mlp_forward(spec, b, tape.constant(batch.fake)).output;
    ad::Var loss = ad::sub(ad::mean(fake), ad::mean(real));
    if (config.lambda_gp > 0.0 || penalty_out) {
        ad::Var pen = ad::gradient_penalty(spec, b, tape.constant(batch.interpolates), config.chunk_size);
        if (penalty_out) *penalty_out = pen;
        if (config.lambda_gp > 0.0) loss = ad::add(loss, ad::scale(pen, config.lambda_gp));
    }
    return loss;
}

inline double discriminator_loss(const GammModel& model, const ReplayBatch& batch) {
    if (model.disc_params.empty()) throw ConfigError("the discriminator has been discarded");
    ad::Tape tape;
    ad::Var loss = discriminator_objective(model.config, tape.variable(ad::column(model.disc_params)), batch);
    if (!std::isfinite(loss.scalar())) throw NumericError("discriminator loss is not finite");
    return loss.scalar();
}

struct GeneratorTerms {
    ad::Var loss;
    ad::Var adversarial;
    std::optional<ad::Var> alignment;
};

// L_G = -mean D(G(z, c)) + lambda_ra * mean_{rows with previous-task ids} ||G(z, c) - G_prev(z, c)||^2.
// `first_current_id` is the first global id of the task being learned; ids
// below it belong to earlier tasks.
inline GeneratorTerms generator_objective(const GammConfig& config, ad::Var gen_params,
                                          std::span<const double> disc_params,
                                          std::optional<std::span<const double>> prev_gen, const Matrix& z,
                                          std::span<const std::size_t> ids, std::size_t first_current_id) {
    ad::Tape& tape = *gen_params.tape();
    const MlpSpec gspec = config.generator_spec();
    const MlpSpec dspec = config.discriminator_spec();
    const Matrix cond = one_hot(ids, config.max_chunk_ids);
    const Matrix g_input = hstack(z, cond);

    const auto gb = ad::bind_mlp(gspec, gen_params);
    ad::Var chunks = ad::mlp_forward(gspec, gb, tape.constant(g_input)).output;
    const auto db = ad::bind_mlp(dspec, tape.constant(ad::column(disc_params)));
    ad::Var score = ad::mlp_forward(dspec, db, ad::concat_cols(chunks, tape.constant(cond))).output;

    GeneratorTerms terms;
    terms.adversarial = ad::scale(ad::mean(score), -1.0);
    terms.loss = terms.adversarial;
    if (prev_gen) {
        std::vector<Eigen::Index> rows;
        for (std::size_t r = 0; r < ids.size(); ++r) {
            if (ids[r] < first_current_id) rows.push_back(static_cast<Eigen::Index>(r));
        }
        if (!rows.empty()) {
            const double n = static_cast<double>(rows.size());
            const Matrix prev = forward_matrix(gspec, *prev_gen, g_input);
            ad::Var diff = ad::gather_rows(ad::sub(chunks, tape.constant(prev)), std::move(rows));
            terms.alignment = ad::scale(ad::sum(ad::square(diff)), 1.0 / n);
            if (config.lambda_ra > 0.0) terms.loss = ad::add(terms.loss, ad::scale(*terms.alignment, config.lambda_ra));
        }
    }
    return terms;
}

// The alignment term is present only while learning a task after the first
// (`model.tasks_learned` >= 1 and prev_gen given).
inline double generator_loss(const GammModel& model, std::optional<std::span<const double>> prev_gen, const Matrix& z,
                             std::span<const std::size_t> ids) {
    if (model.tasks_learned >= 1 && !prev_gen) {
        throw ConfigError("generator_loss: a previous generator is required once a task has been consolidated");
    }
    if (model.disc_params.empty()) throw ConfigError("the discriminator has been discarded");
    ad::Tape tape;
    const std::size_t first_current = model.geometry.global_id(model.tasks_learned, 0);
    auto terms = generator_objective(model.config, tape.variable(ad::column(model.gen_params)), model.disc_params,
                                     model.tasks_learned >= 1 ? prev_gen : std::nullopt, z, ids, first_current);
    return terms.loss.scalar();
}

struct TracePoint {
    int task = 0;
    int iteration = 0;
    double d_loss = 0.0;
    double g_loss = 0.0;
    double wasserstein = 0.0; // mean D(real) - mean D(fake)
    double penalty = 0.0;
    double alignment = 0.0;
};

struct ConsolidationTrace {
    std::vector<TracePoint> points;
};

// Trains one task into freshly initialised GAMM networks. The fixed inputs
// (posterior, frozen previous generator) are borrowed for the session's
// lifetime.
class ConsolidationSession {
public:
    ConsolidationSession(const GammConfig& config, const ChunkGeometry& geometry, const SwagPosterior& posterior,
                         std::optional<std::span<const double>> prev_gen, Rng& rng)
        : config_(config),
          geometry_(geometry),
          posterior_(posterior),
          prev_gen_(prev_gen),
          rng_(rng),
          gen_spec_(config.generator_spec()),
          disc_spec_(config.discriminator_spec()),
          gen_params_(init_params(gen_spec_, rng)),
          disc_params_(init_params(disc_spec_, rng)),
          gen_opt_(gen_params_.size(), config.lr, config.adam_beta1, config.adam_beta2),
          disc_opt_(disc_params_.size(), config.lr, config.adam_beta1, config.adam_beta2) {
        config_.validate();
        posterior_.validate();
        if (posterior_.mean.size() != geometry_.param_count) {
            throw ShapeError("posterior has " + std::to_string(posterior_.mean.size()) +
                             " parameters, chunk geometry expects " + std::to_string(geometry_.param_count));
        }
        const auto tasks_total = static_cast<std::size_t>(posterior_.task_id) + 1;
        if (tasks_total * geometry_.m > config_.max_chunk_ids) {
            throw ConfigError("gamm.max_chunk_ids (" + std::to_string(config_.max_chunk_ids) + ") cannot hold " +
                              std::to_string(tasks_total) + " tasks of " + std::to_string(geometry_.m) + " chunks");
        }
        if (posterior_.task_id > 0 && !prev_gen_) {
            throw ConfigError("consolidating task " + std::to_string(posterior_.task_id) + " needs the previous generator");
        }
        if (prev_gen_) check_params(gen_spec_, *prev_gen_);
    }

    [[nodiscard]] const ParamVector& gen_params() const noexcept { return gen_params_; }
    [[nodiscard]] const ParamVector& disc_params() const noexcept { return disc_params_; }
    ParamVector take_gen_params() { return std::move(gen_params_); }
    ParamVector take_disc_params() { return std::move(disc_params_); }

    [[nodiscard]] std::size_t first_current_id() const noexcept {
        return geometry_.global_id(posterior_.task_id, 0);
    }
    [[nodiscard]] std::size_t id_range() const noexcept {
        return static_cast<std::size_t>(posterior_.task_id + 1) * geometry_.m;
    }

    // Ids drawn uniformly over every chunk id learned so far, so the expected
    // share of current-task rows is 1 / (tasks so far).
    std::vector<std::size_t> draw_ids(std::size_t n) {
        std::vector<std::size_t> ids(n);
        for (auto& id : ids) id = static_cast<std::size_t>(rng_.uniform_index(id_range()));
        return ids;
    }

    // Real rows: current-task ids get the matching chunk of a fresh posterior
    // sample (the diagonal Gaussian factorises, so drawing that chunk alone
    // is a draw of the chunked full sample); earlier ids get chunks from the
    // frozen previous generator.
    ReplayBatch make_batch() {
        ReplayBatch batch;
        batch.ids = draw_ids(config_.batch_size);
        const auto n = static_cast<Eigen::Index>(batch.ids.size());
        const auto cs = static_cast<Eigen::Index>(config_.chunk_size);
        const std::size_t first = first_current_id();

        Matrix real_values = Matrix::Zero(n, cs);
        std::vector<std::size_t> replay_ids;
        std::vector<Eigen::Index> replay_rows;
        for (Eigen::Index r = 0; r < n; ++r) {
            const std::size_t id = batch.ids[static_cast<std::size_t>(r)];
            if (id >= first) {
                const std::size_t begin = geometry_.position_of(id) * config_.chunk_size;
                for (Eigen::Index j = 0; j < cs; ++j) {
                    const std::size_t k = begin + static_cast<std::size_t>(j);
                    if (k < geometry_.param_count) {
                        real_values(r, j) = posterior_.mean[k] + std::sqrt(posterior_.variance[k]) * rng_.normal();
                    }
                }
            } else {
                replay_ids.push_back(id);
                replay_rows.push_back(r);
            }
        }
        if (!replay_ids.empty()) {
            const Matrix z = normal_matrix(rng_, static_cast<Eigen::Index>(replay_ids.size()),
                                           static_cast<Eigen::Index>(config_.latent_dim));
            const Matrix replay = generate(config_, *prev_gen_, z, replay_ids);
            for (std::size_t i = 0; i < replay_rows.size(); ++i) real_values.row(replay_rows[i]) = replay.row(static_cast<Eigen::Index>(i));
        }
        const Matrix z = normal_matrix(rng_, n, static_cast<Eigen::Index>(config_.latent_dim));
        const Matrix fake_values = generate(config_, gen_params_, z, batch.ids);
        const Matrix cond = one_hot(batch.ids, config_.max_chunk_ids);
        batch.real = hstack(real_values, cond);
        batch.fake = hstack(fake_values, cond);
        batch.eps.resize(n);
        for (Eigen::Index r = 0; r < n; ++r) batch.eps(r) = rng_.uniform01();
        batch.interpolates = interpolate(batch.real, batch.fake, batch.eps);
        return batch;
    }

    struct CriticStats {
        double loss = 0.0;
        double wasserstein = 0.0;
        double penalty = 0.0;
    };

    CriticStats critic_step() {
        const ReplayBatch batch = make_batch();
        ad::Tape tape;
        ad::Var p = tape.variable(ad::column(disc_params_));
        ad::Var pen;
        ad::Var loss = discriminator_objective(config_, p, batch, &pen);
        if (!std::isfinite(loss.scalar())) {
            throw NumericError("critic loss not finite (op '" +
                               std::string(tape.first_non_finite().value_or("unknown")) + "')");
        }
        tape.backward(loss);
        const ParamVector grad = ad::to_params(tape.grad(p));
        disc_opt_.step(disc_params_, grad);
        CriticStats s;
        s.loss = loss.scalar();
        s.penalty = pen.scalar();
        s.wasserstein = -(loss.scalar() - config_.lambda_gp * s.penalty);
        return s;
    }

    struct GeneratorStats {
        double loss = 0.0;
        double alignment = 0.0;
    };

    GeneratorStats generator_step() {
        const std::vector<std::size_t> ids = draw_ids(config_.batch_size);
        const Matrix z = normal_matrix(rng_, static_cast<Eigen::Index>(ids.size()),
                                       static_cast<Eigen::Index>(config_.latent_dim));
        ad::Tape tape;
        ad::Var p = tape.variable(ad::column(gen_params_));
        auto terms = generator_objective(config_, p, disc_params_, prev_gen_, z, ids, first_current_id());
        if (!std::isfinite(terms.loss.scalar())) {
            throw NumericError("generator loss not finite (op '" +
                               std::string(tape.first_non_finite().value_or("unknown")) + "')");
        }
        tape.backward(terms.loss);
        const ParamVector grad = ad::to_params(tape.grad(p));
        gen_opt_.step(gen_params_, grad);
        return {terms.loss.scalar(), terms.alignment ? terms.alignment->scalar() : 0.0};
    }

    void run(int iterations, ConsolidationTrace* trace) {
        for (int it = 0; it < iterations; ++it) {
            CriticStats cs;
            GeneratorStats gs;
            try {
                for (int k = 0; k < config_.n_critic; ++k) cs = critic_step();
                gs = generator_step();
            } catch (const NumericError& e) {
                throw NumericError("GAMM training diverged at iteration " + std::to_string(it) + " of task " +
                                   std::to_string(posterior_.task_id) + ": " + e.what());
            }
            const bool sample = trace && config_.trace_every > 0 &&
                                (it % config_.trace_every == 0 || it + 1 == iterations);
            if (sample) {
                trace->points.push_back(
                    {posterior_.task_id, it, cs.loss, gs.loss, cs.wasserstein, cs.penalty, gs.alignment});
            }
        }
    }

private:
    GammConfig config_;
    ChunkGeometry geometry_;
    const SwagPosterior& posterior_;
    std::optional<std::span<const double>> prev_gen_;
    Rng& rng_;
    MlpSpec gen_spec_;
    MlpSpec disc_spec_;
    ParamVector gen_params_;
    ParamVector disc_params_;
    Adam gen_opt_;
    Adam disc_opt_;
};

inline GammModel train_first_task(const SwagPosterior& posterior, GammConfig config, Rng& rng,
                                  ConsolidationTrace* trace = nullptr) {
    if (posterior.task_id != 0) {
        throw ConfigError("train_first_task expects task 0, got task " + std::to_string(posterior.task_id));
    }
    const ChunkGeometry geometry = ChunkGeometry::make(posterior.spec.param_count(), config.chunk_size);
    if (config.max_chunk_ids == 0) config.max_chunk_ids = geometry.m;
    ConsolidationSession session(config, geometry, posterior, std::nullopt, rng);
    session.run(config.iterations, trace);
    GammModel model;
    model.config = config;
    model.geometry = geometry;
    model.task_spec = posterior.spec;
    model.tasks_learned = 1;
    model.disc_params = session.take_disc_params();
    model.gen_params = session.take_gen_params();
    return model;
}

// Consolidates task `model.tasks_learned` with replay from the current
// generator; the returned model keeps only the new networks.
inline GammModel train_incremental(const GammModel& model, const SwagPosterior& posterior, Rng& rng,
                                   ConsolidationTrace* trace = nullptr) {
    model.validate();
    if (posterior.task_id != model.tasks_learned) {
        throw ConfigError("train_incremental expects task " + std::to_string(model.tasks_learned) + ", got task " +
                          std::to_string(posterior.task_id));
    }
    if (!(posterior.spec == model.task_spec)) throw ConfigError("posterior architecture differs from the GAMM task spec");
    const ParamVector frozen = model.gen_params;
    ConsolidationSession session(model.config, model.geometry, posterior, std::span<const double>(frozen), rng);
    session.run(model.config.iterations, trace);
    GammModel next = model;
    next.tasks_learned = model.tasks_learned + 1;
    next.gen_params = session.take_gen_params();
    next.disc_params = session.take_disc_params();
    return next;
}

// One chunk per position, each from its own z and the one-hot of its id.
inline ChunkSet generate_chunks(const GammModel& model, int task_id, Rng& rng) {
    if (task_id < 0 || task_id >= model.tasks_learned) {
        throw ConfigError("unknown task " + std::to_string(task_id) + " (tasks learned: " +
                          std::to_string(model.tasks_learned) + ")");
    }
    const ChunkGeometry& g = model.geometry;
    std::vector<std::size_t> ids(g.m);
    for (std::size_t p = 0; p < g.m; ++p) ids[p] = g.global_id(task_id, p);
    const Matrix z = normal_matrix(rng, static_cast<Eigen::Index>(g.m), static_cast<Eigen::Index>(model.config.latent_dim));
    const Matrix values = generate(model.config, model.gen_params, z, ids);
    ChunkSet chunks(g.m);
    for (std::size_t p = 0; p < g.m; ++p) {
        auto& c = chunks[p];
        c.values.resize(g.chunk_size);
        for (std::size_t j = 0; j < g.chunk_size; ++j) c.values[j] = values(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(j));
        c.global_id = ids[p];
        c.task_id = task_id;
        c.position = p;
    }
    return chunks;
}

// Mean over `samples` rows with ids of tasks [0, tasks) of
// ||G(z, c) - G_prev(z, c)||^2, with shared z per row.
inline double alignment_distance(const GammModel& model, std::span<const double> prev_gen, int tasks, Rng& rng,
                                 std::size_t samples = 256) {
    if (tasks <= 0) return 0.0;
    std::vector<std::size_t> ids(samples);
    const auto range = static_cast<std::uint64_t>(tasks) * model.geometry.m;
    for (auto& id : ids) id = rng.uniform_index(range);
    const Matrix z = normal_matrix(rng, static_cast<Eigen::Index>(samples), static_cast<Eigen::Index>(model.config.latent_dim));
    const Matrix a = generate(model.config, model.gen_params, z, ids);
    const Matrix b = generate(model.config, prev_gen, z, ids);
    return (a - b).rowwise().squaredNorm().mean();
}

// ---------------------------------------------------------------------------
// Snapshot: "GAMM", u32 version, u32 kind (2), u32 tasks_learned,
// u64 chunk_size, u64 param_count, u64 config digest, config body, task spec,
// u64 + generator params, u64 + discriminator params (little-endian f64).

inline io::BinaryWriter encode_gamm(const GammModel& model) {
    model.validate();
    const GammConfig& c = model.config;
    io::BinaryWriter w;
    w.bytes("GAMM");
    w.u32(io::kSnapshotVersion);
    w.u32(io::kKindGamm);
    w.u32(static_cast<std::uint32_t>(model.tasks_learned));
    w.u64(model.geometry.chunk_size);
    w.u64(model.geometry.param_count);
    w.u64(c.digest());
    w.u64(c.latent_dim);
    w.u32(static_cast<std::uint32_t>(c.gen_hidden.size()));
    for (auto v : c.gen_hidden) w.u64(v);
    w.u32(static_cast<std::uint32_t>(c.disc_hidden.size()));
    for (auto v : c.disc_hidden) w.u64(v);
    w.u64(c.max_chunk_ids);
    w.f64(c.lambda_gp);
    w.f64(c.lambda_ra);
    w.f64(c.lr);
    w.f64(c.adam_beta1);
    w.f64(c.adam_beta2);
    w.u32(static_cast<std::uint32_t>(c.n_critic));
    w.u64(c.batch_size);
    w.u32(static_cast<std::uint32_t>(c.iterations));
    w.f64(c.leaky_slope);
    w.u32(static_cast<std::uint32_t>(c.trace_every));
    io::write_spec(w, model.task_spec);
    w.u64(model.gen_params.size());
    w.f64s(model.gen_params);
    w.u64(model.disc_params.size());
    w.f64s(model.disc_params);
    return w;
}

inline void save_gamm(const GammModel& model, const std::string& path) { encode_gamm(model).save(path); }

inline GammModel decode_gamm(io::BinaryReader& r) {
    io::expect_header(r, io::kKindGamm);
    GammModel model;
    model.tasks_learned = static_cast<int>(r.u32());
    const std::uint64_t chunk_size = r.u64();
    const std::uint64_t param_count = r.u64();
    const std::uint64_t digest = r.u64();
    GammConfig& c = model.config;
    c.latent_dim = r.u64();
    auto read_widths = [&r]() {
        const std::uint32_t n = r.u32();
        if (n > 4096) throw DataError(r.name() + ": implausible hidden layer count");
        std::vector<std::size_t> v(n);
        for (auto& x : v) x = r.u64();
        return v;
    };
    c.gen_hidden = read_widths();
    c.disc_hidden = read_widths();
    c.chunk_size = chunk_size;
    c.max_chunk_ids = r.u64();
    c.lambda_gp = r.f64();
    c.lambda_ra = r.f64();
    c.lr = r.f64();
    c.adam_beta1 = r.f64();
    c.adam_beta2 = r.f64();
    c.n_critic = static_cast<int>(r.u32());
    c.batch_size = r.u64();
    c.iterations = static_cast<int>(r.u32());
    c.leaky_slope = r.f64();
    c.trace_every = static_cast<int>(r.u32());
    if (c.digest() != digest) throw DataError(r.name() + ": config digest mismatch");
    model.task_spec = io::read_spec(r);
    try {
        model.geometry = ChunkGeometry::make(param_count, chunk_size);
    } catch (const Error& e) {
        throw DataError(r.name() + ": " + e.what());
    }
    model.gen_params = r.f64s(r.u64());
    model.disc_params = r.f64s(r.u64());
    if (!r.at_end()) throw DataError(r.name() + ": trailing bytes");
    try {
        model.validate();
    } catch (const Error& e) {
        throw DataError(r.name() + ": " + e.what());
    }
    return model;
}

inline GammModel load_gamm(const std::string& path) {
    auto r = io::BinaryReader::from_file(path);
    return decode_gamm(r);
}

} // namespace gammcl::gamm
