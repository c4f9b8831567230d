// SPDX-License-Identifier: Apache-2.0
#pragma once

// Knowledge acquisition: a task-specific classifier trained with SGD+momentum
// whose per-epoch iterates are summarised as a diagonal Gaussian (SWAG).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "gammcl/dataset.hpp"
#include "gammcl/error.hpp"
#include "gammcl/io/binary.hpp"
#include "gammcl/io/snapshot.hpp"
#include "gammcl/numcore/autodiff.hpp"
#include "gammcl/numcore/mlp.hpp"
#include "gammcl/numcore/optim.hpp"
#include "gammcl/numcore/rng.hpp"

namespace gammcl::acquisition {

struct AcquisitionConfig {
    int epochs = 5;
    int moment_start = 1; // 1-based epoch from which snapshots are averaged
    double learning_rate = 0.01;
    double momentum = 0.9;
    std::size_t batch_size = 32;
    MlpSpec spec;
    // Optional step decay: lr *= lr_decay_factor every lr_decay_every epochs
    // (0 disables it).
    int lr_decay_every = 0;
    double lr_decay_factor = 1.0;

    void validate() const {
        spec.validate();
        if (epochs < 1) throw ConfigError("acquisition.epochs must be >= 1");
        if (moment_start < 1 || moment_start > epochs) {
            throw ConfigError("acquisition.moment_start must lie in [1, epochs]");
        }
        if (!(learning_rate >= 0.0)) throw ConfigError("acquisition.lr must be >= 0");
        if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("acquisition.momentum must lie in [0, 1)");
        if (batch_size == 0) throw ConfigError("acquisition.batch_size must be >= 1");
        if (lr_decay_every < 0 || !(lr_decay_factor > 0.0)) throw ConfigError("acquisition lr decay is invalid");
    }
};

// Running first and second moments of the epoch iterates.
struct SwagState {
    ParamVector mean;
    ParamVector second_moment;
    std::uint64_t count = 0;
};

struct SwagPosterior {
    ParamVector mean;
    ParamVector variance; // diagonal, >= 0
    MlpSpec spec;
    int task_id = 0;

    void validate() const {
        if (mean.size() != variance.size() || mean.size() != spec.param_count()) {
            throw ShapeError("posterior mean/variance sizes do not match the spec parameter count");
        }
        for (double v : variance) {
            if (!(v >= 0.0)) throw NumericError("posterior variance must be non-negative and finite");
        }
    }
};

inline SwagState update_moments(SwagState state, std::span<const double> epoch_params) {
    if (state.count == 0 && state.mean.empty()) {
        state.mean.assign(epoch_params.size(), 0.0);
        state.second_moment.assign(epoch_params.size(), 0.0);
    }
    if (state.mean.size() != epoch_params.size() || state.second_moment.size() != epoch_params.size()) {
        throw ShapeError("update_moments: snapshot length does not match the running moments");
    }
    // Incremental form: constant iterates leave both moments exactly unchanged.
    const double n1 = static_cast<double>(state.count) + 1.0;
    for (std::size_t i = 0; i < epoch_params.size(); ++i) {
        const double p = epoch_params[i];
        state.mean[i] += (p - state.mean[i]) / n1;
        state.second_moment[i] += (p * p - state.second_moment[i]) / n1;
    }
    ++state.count;
    return state;
}

// mu = mean, Sigma = second_moment - mean^2 with round-off negatives clamped.
inline SwagPosterior to_posterior(const SwagState& state, const MlpSpec& spec, int task_id) {
    SwagPosterior post;
    post.mean = state.mean;
    post.variance.resize(state.mean.size());
    for (std::size_t i = 0; i < state.mean.size(); ++i) {
        post.variance[i] = std::max(0.0, state.second_moment[i] - state.mean[i] * state.mean[i]);
    }
    post.spec = spec;
    post.task_id = task_id;
    return post;
}

// Per-epoch record of a training run.
struct AcquisitionTrace {
    bool keep_snapshots = false; // record every accumulated epoch iterate
    std::vector<double> epoch_loss;
    std::vector<ParamVector> snapshots;
    ParamVector initial_params;
    ParamVector final_params;
};

inline double cross_entropy_step(const MlpSpec& spec, ParamVector& params, const Matrix& x,
                                 std::span<const int> y, SgdMomentum& opt) {
    auto vg = gradient(
        [&](ad::Tape& tape, ad::Var p) {
            const auto binding = ad::bind_mlp(spec, p);
            const auto trace = ad::mlp_forward(spec, binding, tape.constant(x));
            return ad::softmax_cross_entropy(trace.output, y);
        },
        params);
    opt.step(params, vg.gradient);
    return vg.value;
}

// Alg: initialise, run `epochs` epochs of minibatch SGD+momentum on the
// cross-entropy, and from epoch `moment_start` on fold each end-of-epoch
// iterate into the running moments.
inline SwagPosterior train_swag(const LabeledData& data, const AcquisitionConfig& config, Rng& rng, int task_id = 0,
                                AcquisitionTrace* trace = nullptr) {
    config.validate();
    data.validate();
    if (data.size() == 0) throw DataError("train_swag: empty dataset");
    if (data.dim() != config.spec.input_dim()) {
        throw ShapeError("train_swag: data has " + std::to_string(data.dim()) + " features, spec expects " +
                         std::to_string(config.spec.input_dim()));
    }
    if (static_cast<std::size_t>(data.num_classes) > config.spec.output_dim()) {
        throw ShapeError("train_swag: more classes than output units");
    }

    const MlpSpec& spec = config.spec;
    ParamVector params = init_params(spec, rng);
    if (trace) trace->initial_params = params;

    SgdMomentum opt(params.size(), config.learning_rate, config.momentum);
    SwagState state;
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        if (config.lr_decay_every > 0 && epoch > 1 && (epoch - 1) % config.lr_decay_every == 0) {
            opt.set_learning_rate(opt.learning_rate() * config.lr_decay_factor);
        }
        rng.shuffle(std::span<std::size_t>(order));
        double loss_sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t end = std::min(order.size(), start + config.batch_size);
            const LabeledData batch = data.rows(std::vector<std::size_t>(order.begin() + static_cast<std::ptrdiff_t>(start),
                                                                         order.begin() + static_cast<std::ptrdiff_t>(end)));
            double loss = 0.0;
            try {
                loss = cross_entropy_step(spec, params, batch.x, batch.y, opt);
            } catch (const NumericError& e) {
                throw NumericError("acquisition diverged in epoch " + std::to_string(epoch) + ": " + e.what());
            }
            if (!std::isfinite(loss)) {
                throw NumericError("acquisition diverged in epoch " + std::to_string(epoch));
            }
            loss_sum += loss;
            ++batches;
        }
        for (double p : params) {
            if (!std::isfinite(p)) throw NumericError("acquisition diverged in epoch " + std::to_string(epoch));
        }
        if (trace) trace->epoch_loss.push_back(loss_sum / static_cast<double>(batches));
        if (epoch >= config.moment_start) {
            state = update_moments(std::move(state), params);
            if (trace && trace->keep_snapshots) trace->snapshots.push_back(params);
        }
    }
    if (trace) trace->final_params = params;
    return to_posterior(state, spec, task_id);
}

// theta = mu + sqrt(Sigma) * eps, eps ~ N(0, I).
inline ParamVector sample_model(const SwagPosterior& posterior, Rng& rng) {
    ParamVector theta(posterior.mean.size());
    for (std::size_t i = 0; i < theta.size(); ++i) {
        theta[i] = posterior.mean[i] + std::sqrt(posterior.variance[i]) * rng.normal();
    }
    return theta;
}

// Scales hidden widths by `compression_rate` (rounded up, at least 1).
inline MlpSpec make_lightweight_spec(const MlpSpec& original, double compression_rate) {
    if (!(compression_rate > 0.0 && compression_rate <= 1.0)) {
        throw ConfigError("compression rate must lie in (0, 1]");
    }
    MlpSpec out = original;
    for (std::size_t i = 1; i + 1 < out.layer_widths.size(); ++i) {
        // The epsilon absorbs products such as 100 * 0.15 = 15.000000000000002.
        const double scaled = static_cast<double>(original.layer_widths[i]) * compression_rate;
        out.layer_widths[i] = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(scaled - 1e-9)));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Snapshot files: "GAMM", u32 version, u32 kind (1 = model posterior),
// u32 task_id, u64 param_count, spec, then mu and Sigma_diag as
// little-endian f64. A recalled model uses the same layout with Sigma = 0.

inline io::BinaryWriter encode_posterior(const SwagPosterior& post) {
    post.validate();
    io::BinaryWriter w;
    w.bytes("GAMM");
    w.u32(io::kSnapshotVersion);
    w.u32(io::kKindPosterior);
    w.u32(static_cast<std::uint32_t>(post.task_id));
    w.u64(post.mean.size());
    io::write_spec(w, post.spec);
    w.f64s(post.mean);
    w.f64s(post.variance);
    return w;
}

inline void save_posterior(const SwagPosterior& post, const std::string& path) { encode_posterior(post).save(path); }

inline SwagPosterior decode_posterior(io::BinaryReader& r) {
    io::expect_header(r, io::kKindPosterior);
    SwagPosterior post;
    post.task_id = static_cast<int>(r.u32());
    const std::uint64_t n = r.u64();
    post.spec = io::read_spec(r);
    if (n != post.spec.param_count()) throw DataError(r.name() + ": param_count disagrees with the stored spec");
    post.mean = r.f64s(n);
    post.variance = r.f64s(n);
    if (!r.at_end()) throw DataError(r.name() + ": trailing bytes");
    try {
        post.validate();
    } catch (const Error& e) {
        throw DataError(r.name() + ": " + e.what());
    }
    return post;
}

inline SwagPosterior load_posterior(const std::string& path) {
    auto r = io::BinaryReader::from_file(path);
    return decode_posterior(r);
}

} // namespace gammcl::acquisition
