// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>

#include <gtest/gtest.h>

#include "gammcl/acquisition.hpp"
#include "gammcl/bench/scenario.hpp"
#include "oracles.hpp"

using namespace gammcl;
using namespace gammcl::acquisition;

namespace {

SwagState accumulate(const std::vector<ParamVector>& snaps) {
    SwagState s;
    for (const auto& v : snaps) s = update_moments(std::move(s), v);
    return s;
}

AcquisitionConfig small_config() {
    AcquisitionConfig c;
    c.epochs = 8;
    c.moment_start = 4;
    c.learning_rate = 0.05;
    c.spec = MlpSpec({4, 6, 2});
    return c;
}

LabeledData small_data(std::uint64_t seed) {
    bench::SyntheticSpec s;
    s.dim = 4;
    s.train_per_task = 120;
    s.test_per_task = 60;
    return bench::make_synthetic(s, seed).tasks[0].train;
}

} // namespace

TEST(UpdateMoments, FirstSampleIsTakenExactly) {
    const auto s = update_moments({}, ParamVector{1.5, -2.0});
    EXPECT_EQ(s.count, 1u);
    EXPECT_EQ(s.mean, (ParamVector{1.5, -2.0}));
    EXPECT_EQ(s.second_moment, (ParamVector{2.25, 4.0}));
}

TEST(UpdateMoments, IdenticalVectorsGiveZeroVariance) {
    const auto s = accumulate({{0.3, 7.0}, {0.3, 7.0}, {0.3, 7.0}, {0.3, 7.0}});
    const auto post = to_posterior(s, MlpSpec({1, 1}), 0);
    EXPECT_NEAR(post.mean[0], 0.3, 1e-15);
    EXPECT_EQ(post.variance, (ParamVector{0.0, 0.0}));
}

TEST(UpdateMoments, TwoScriptedIterates) {
    const auto s = accumulate({{1.0}, {3.0}});
    EXPECT_DOUBLE_EQ(s.mean[0], 2.0);
    EXPECT_DOUBLE_EQ(s.second_moment[0], 5.0);
    const auto post = to_posterior(s, MlpSpec({1, 1}, Activation::identity(), {false}), 0);
    EXPECT_DOUBLE_EQ(post.variance[0], 1.0);
}

TEST(UpdateMoments, ThreeScriptedIterates) {
    const auto s = accumulate({{2.0}, {4.0}, {6.0}});
    EXPECT_NEAR(s.mean[0], 4.0, 1e-12);
    EXPECT_NEAR(s.second_moment[0], 56.0 / 3.0, 1e-12);
    const auto post = to_posterior(s, MlpSpec({1, 1}, Activation::identity(), {false}), 0);
    EXPECT_NEAR(post.variance[0], 8.0 / 3.0, 1e-10);
}

TEST(UpdateMoments, LengthMismatchIsRejected) {
    const auto s = update_moments({}, ParamVector{1.0, 2.0});
    EXPECT_THROW((void)update_moments(s, ParamVector{1.0}), ShapeError);
}

TEST(UpdateMoments, MatchesStoredSnapshotOracle) {
    Rng rng(4);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<ParamVector> snaps(1 + rng.uniform_index(20), ParamVector(5));
        for (auto& v : snaps) {
            for (double& x : v) x = rng.normal() * 3.0 + 1.0;
        }
        const auto post = to_posterior(accumulate(snaps), MlpSpec({4, 1}), 0);
        const auto [mean, var] = oracle::snapshot_moments(snaps);
        for (std::size_t i = 0; i < 5; ++i) {
            EXPECT_NEAR(post.mean[i], mean[i], 1e-10);
            EXPECT_NEAR(post.variance[i], var[i], 1e-10);
        }
    }
}

TEST(UpdateMoments, PermutationChangesOnlyRounding) {
    Rng rng(5);
    std::vector<ParamVector> snaps(12, ParamVector(8));
    for (auto& v : snaps) {
        for (double& x : v) x = rng.normal();
    }
    const auto a = to_posterior(accumulate(snaps), MlpSpec({7, 1}), 0);
    rng.shuffle(std::span<ParamVector>(snaps));
    const auto b = to_posterior(accumulate(snaps), MlpSpec({7, 1}), 0);
    for (std::size_t i = 0; i < 8; ++i) {
        EXPECT_NEAR(a.mean[i], b.mean[i], 1e-9);
        EXPECT_NEAR(a.variance[i], b.variance[i], 1e-9);
    }
}

TEST(UpdateMoments, NegativeRoundOffIsFlooredAtZero) {
    SwagState s;
    s.mean = {1.0};
    s.second_moment = {1.0 - 1e-15};
    s.count = 3;
    EXPECT_EQ(to_posterior(s, MlpSpec({1, 1}, Activation::identity(), {false}), 0).variance[0], 0.0);
}

TEST(TrainSwag, PosteriorEqualsMomentsOfEpochIterates) {
    const auto data = small_data(1);
    Rng rng(2);
    AcquisitionTrace trace;
    trace.keep_snapshots = true;
    const auto post = train_swag(data, small_config(), rng, 0, &trace);
    ASSERT_EQ(trace.snapshots.size(), 5u);
    const auto [mean, var] = oracle::snapshot_moments(trace.snapshots);
    for (std::size_t i = 0; i < mean.size(); ++i) {
        EXPECT_NEAR(post.mean[i], mean[i], 1e-10);
        EXPECT_NEAR(post.variance[i], var[i], 1e-10);
    }
}

TEST(TrainSwag, MomentStartAtLastEpochGivesFinalParameters) {
    auto cfg = small_config();
    cfg.moment_start = cfg.epochs;
    Rng rng(3);
    AcquisitionTrace trace;
    const auto post = train_swag(small_data(1), cfg, rng, 0, &trace);
    EXPECT_EQ(post.mean, trace.final_params);
    for (double v : post.variance) EXPECT_EQ(v, 0.0);
}

TEST(TrainSwag, FrozenParametersStayAtInitialisation) {
    auto cfg = small_config();
    cfg.learning_rate = 0.0;
    Rng rng(3);
    AcquisitionTrace trace;
    const auto post = train_swag(small_data(1), cfg, rng, 0, &trace);
    EXPECT_EQ(post.mean, trace.initial_params);
    for (double v : post.variance) EXPECT_EQ(v, 0.0);
}

TEST(TrainSwag, BitReproducible) {
    const auto data = small_data(9);
    Rng a(77), b(77);
    const auto pa = train_swag(data, small_config(), a);
    const auto pb = train_swag(data, small_config(), b);
    EXPECT_EQ(pa.mean, pb.mean);
    EXPECT_EQ(pa.variance, pb.variance);
}

TEST(TrainSwag, MeanModelBeatsInitialisation) {
    const auto data = small_data(10);
    Rng rng(11);
    AcquisitionTrace trace;
    const auto post = train_swag(data, small_config(), rng, 0, &trace);
    const double init_acc = accuracy(post.spec, trace.initial_params, data.x, data.y);
    const double mean_acc = accuracy(post.spec, post.mean, data.x, data.y);
    EXPECT_GE(mean_acc, init_acc);
    EXPECT_GT(mean_acc, 0.9);
}

TEST(TrainSwag, DivergenceNamesTheEpoch) {
    auto data = small_data(12);
    data.x *= 1e200;
    auto cfg = small_config();
    cfg.learning_rate = 1e10;
    Rng rng(1);
    try {
        (void)train_swag(data, cfg, rng);
        FAIL() << "expected divergence";
    } catch (const NumericError& e) {
        EXPECT_NE(std::string(e.what()).find("epoch"), std::string::npos) << e.what();
    }
}

TEST(TrainSwag, RejectsBadInputs) {
    Rng rng(1);
    auto cfg = small_config();
    cfg.moment_start = 0;
    EXPECT_THROW((void)train_swag(small_data(1), cfg, rng), ConfigError);
    cfg = small_config();
    cfg.moment_start = cfg.epochs + 1;
    EXPECT_THROW((void)train_swag(small_data(1), cfg, rng), ConfigError);
    LabeledData empty;
    empty.x.resize(0, 4);
    empty.num_classes = 2;
    EXPECT_THROW((void)train_swag(empty, small_config(), rng), DataError);
    auto bad = small_data(1);
    bad.y[0] = 5;
    EXPECT_THROW((void)train_swag(bad, small_config(), rng), DataError);
}

TEST(SampleModel, ZeroVarianceReturnsMean) {
    SwagPosterior p{{1.0, -2.0, 0.5}, {0.0, 0.0, 0.0}, MlpSpec({2, 1}), 0};
    Rng rng(1);
    EXPECT_EQ(sample_model(p, rng), p.mean);
}

TEST(SampleModel, Moments) {
    SwagPosterior p{{1.0}, {4.0}, MlpSpec({1, 1}, Activation::identity(), {false}), 0};
    Rng rng(2);
    double s = 0.0, s2 = 0.0;
    for (int i = 0; i < 10000; ++i) {
        const double v = sample_model(p, rng)[0];
        s += v;
        s2 += v * v;
    }
    const double mean = s / 1e4;
    EXPECT_NEAR(mean, 1.0, 0.1);
    EXPECT_NEAR(s2 / 1e4 - mean * mean, 4.0, 0.2);
}

TEST(SampleModel, DifferentSeedsDiffer) {
    SwagPosterior p{{0.0, 0.0}, {1.0, 1.0}, MlpSpec({1, 1}), 0};
    Rng a(1), b(2);
    EXPECT_NE(sample_model(p, a), sample_model(p, b));
}

TEST(LightweightSpec, Examples) {
    const MlpSpec orig({784, 100, 100, 10});
    EXPECT_EQ(make_lightweight_spec(orig, 1.0), orig);
    EXPECT_EQ(make_lightweight_spec(orig, 0.5).layer_widths, (std::vector<std::size_t>{784, 50, 50, 10}));
    EXPECT_EQ(make_lightweight_spec(MlpSpec({784, 100, 10}), 0.06).layer_widths, (std::vector<std::size_t>{784, 6, 10}));
    EXPECT_EQ(make_lightweight_spec(MlpSpec({784, 100, 10}), 0.15).layer_widths, (std::vector<std::size_t>{784, 15, 10}));
    EXPECT_EQ(make_lightweight_spec(MlpSpec({8, 3, 2}), 0.01).layer_widths, (std::vector<std::size_t>{8, 1, 2}));
    EXPECT_THROW((void)make_lightweight_spec(orig, 0.0), ConfigError);
    EXPECT_THROW((void)make_lightweight_spec(orig, 1.5), ConfigError);
}

TEST(PosteriorSnapshot, RoundTrip) {
    Rng rng(3);
    SwagPosterior p;
    p.spec = MlpSpec({3, 4, 2}, Activation::leaky_relu(0.1), {true, false});
    p.task_id = 7;
    p.mean.resize(p.spec.param_count());
    p.variance.resize(p.spec.param_count());
    for (auto& v : p.mean) v = rng.normal();
    for (auto& v : p.variance) v = rng.uniform01();
    const auto path = (std::filesystem::temp_directory_path() / "gammcl_post_roundtrip.bin").string();
    save_posterior(p, path);
    const auto q = load_posterior(path);
    EXPECT_EQ(q.mean, p.mean);
    EXPECT_EQ(q.variance, p.variance);
    EXPECT_EQ(q.spec, p.spec);
    EXPECT_EQ(q.task_id, 7);
    std::filesystem::remove(path);
}

TEST(PosteriorSnapshot, LayoutAndCorruption) {
    SwagPosterior p{{1.0, 2.0}, {0.5, 0.25}, MlpSpec({1, 1}), 3};
    const auto bytes = encode_posterior(p).buffer();
    ASSERT_GE(bytes.size(), 4u);
    EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "GAMM");
    // Trailer is mu then Sigma as little-endian f64.
    double last = 0.0;
    std::memcpy(&last, bytes.data() + bytes.size() - 8, 8);
    EXPECT_EQ(last, 0.25);

    auto truncated = bytes;
    truncated.resize(truncated.size() - 3);
    io::BinaryReader r1(truncated);
    EXPECT_THROW((void)decode_posterior(r1), DataError);
    auto bad_magic = bytes;
    bad_magic[0] = 'X';
    io::BinaryReader r2(bad_magic);
    EXPECT_THROW((void)decode_posterior(r2), DataError);
    auto trailing = bytes;
    trailing.push_back(0);
    io::BinaryReader r3(trailing);
    EXPECT_THROW((void)decode_posterior(r3), DataError);
}
