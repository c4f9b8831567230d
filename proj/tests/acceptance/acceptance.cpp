// SPDX-License-Identifier: Apache-2.0
// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "gammcl/acquisition.hpp"
#include "gammcl/bench/metrics.hpp"
#include "gammcl/bench/runner.hpp"
#include "gammcl/bench/scenario.hpp"
#include "gammcl/chunkstore.hpp"
#include "gammcl/complexity.hpp"
#include "gammcl/gamm.hpp"
#include "gammcl/io/datasets.hpp"
#include "gammcl/platform.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace gammcl;

namespace {

struct Verdict {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

MlpSpec random_spec(Rng& rng, Activation act) {
    std::vector<std::size_t> widths;
    const std::size_t layers = 2 + rng.uniform_index(2);
    for (std::size_t l = 0; l <= layers; ++l) widths.push_back(2 + rng.uniform_index(4));
    return MlpSpec(widths, act);
}

gamm::GammConfig tiny_gamm(Rng& rng) {
    gamm::GammConfig c;
    c.latent_dim = 2 + rng.uniform_index(3);
    c.gen_hidden = {3 + rng.uniform_index(4)};
    c.disc_hidden = {2 + rng.uniform_index(4)};
    c.chunk_size = 2 + rng.uniform_index(4);
    c.max_chunk_ids = 3 + rng.uniform_index(4);
    c.batch_size = 5 + rng.uniform_index(4);
    return c;
}

gamm::ReplayBatch random_batch(const gamm::GammConfig& c, Rng& rng) {
    gamm::ReplayBatch b;
    const auto n = static_cast<Eigen::Index>(c.batch_size);
    b.ids.resize(c.batch_size);
    for (auto& id : b.ids) id = rng.uniform_index(c.max_chunk_ids);
    const Matrix cond = gamm::one_hot(b.ids, c.max_chunk_ids);
    b.real = gamm::hstack(normal_matrix(rng, n, static_cast<Eigen::Index>(c.chunk_size)), cond);
    b.fake = gamm::hstack(normal_matrix(rng, n, static_cast<Eigen::Index>(c.chunk_size)), cond);
    b.eps.resize(n);
    for (Eigen::Index r = 0; r < n; ++r) b.eps(r) = rng.uniform01();
    b.interpolates = gamm::interpolate(b.real, b.fake, b.eps);
    return b;
}

double scalar_of(const std::function<ad::Var(ad::Tape&, ad::Var)>& f, const std::vector<double>& q) {
    ad::Tape tape;
    return f(tape, tape.variable(ad::column(q))).scalar();
}

double fd_error(const std::function<ad::Var(ad::Tape&, ad::Var)>& f, const ParamVector& p) {
    const auto vg = gradient(f, p);
    const auto fd = oracle::central_difference([&](const std::vector<double>& q) { return scalar_of(f, q); }, p);
    return oracle::relative_error(vg.gradient, fd);
}

Verdict gradient_correctness() {
    constexpr int kTrials = 20;
    double worst_ce = 0.0, worst_d = 0.0, worst_gp = 0.0, worst_g = 0.0;
    Rng rng(101);
    for (int trial = 0; trial < kTrials; ++trial) {
        const auto act = trial % 2 ? Activation::leaky_relu(0.2) : Activation::relu();
        const MlpSpec spec = random_spec(rng, act);
        const ParamVector p = init_params(spec, rng);
        const Matrix x = normal_matrix(rng, 6, static_cast<Eigen::Index>(spec.input_dim()));
        std::vector<int> y(6);
        for (auto& v : y) v = static_cast<int>(rng.uniform_index(spec.output_dim()));
        worst_ce = std::max(worst_ce, fd_error(
                                          [&](ad::Tape& t, ad::Var w) {
                                              return ad::softmax_cross_entropy(
                                                  ad::mlp_forward(spec, ad::bind_mlp(spec, w), t.constant(x)).output, y);
                                          },
                                          p));

        auto c = tiny_gamm(rng);
        const auto batch = random_batch(c, rng);
        const ParamVector d = init_params(c.discriminator_spec(), rng);
        c.lambda_gp = 0.0;
        const auto plain = c;
        worst_d = std::max(worst_d, fd_error([&](ad::Tape&, ad::Var v) { return gamm::discriminator_objective(plain, v, batch); }, d));
        c.lambda_gp = 10.0;
        worst_gp = std::max(worst_gp, fd_error([&](ad::Tape&, ad::Var v) { return gamm::discriminator_objective(c, v, batch); }, d));

        c.lambda_ra = 5.0;
        const ParamVector g = init_params(c.generator_spec(), rng);
        const ParamVector prev = init_params(c.generator_spec(), rng);
        const Matrix z = normal_matrix(rng, 6, static_cast<Eigen::Index>(c.latent_dim));
        std::vector<std::size_t> ids(6);
        for (auto& id : ids) id = rng.uniform_index(c.max_chunk_ids);
        const std::size_t current_lo = c.max_chunk_ids / 2;
        worst_g = std::max(worst_g, fd_error(
                                        [&](ad::Tape&, ad::Var v) {
                                            return gamm::generator_objective(c, v, d, std::span<const double>(prev), z, ids,
                                                                             current_lo)
                                                .loss;
                                        },
                                        g));
    }
    const bool pass = worst_ce < 1e-4 && worst_d < 1e-4 && worst_g < 1e-4 && worst_gp < 1e-3;
    return {pass, fmt("%d nets; worst rel err CE %.2e, L_D %.2e, L_D+gp %.2e, L_G %.2e", kTrials, worst_ce, worst_d,
                      worst_gp, worst_g)};
}

Verdict swag_oracle() {
    auto accumulate = [](const std::vector<ParamVector>& snaps) {
        acquisition::SwagState s;
        for (const auto& v : snaps) s = acquisition::update_moments(std::move(s), v);
        return acquisition::to_posterior(s, MlpSpec({static_cast<std::size_t>(snaps[0].size() - 1), 1}), 0);
    };
    double worst = 0.0;
    Rng rng(202);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<ParamVector> snaps(1 + rng.uniform_index(30), ParamVector(2 + rng.uniform_index(8)));
        for (auto& v : snaps) {
            for (double& x : v) x = rng.normal() * 3.0 + 1.0;
        }
        const auto post = accumulate(snaps);
        const auto [mean, var] = oracle::snapshot_moments(snaps);
        for (std::size_t i = 0; i < mean.size(); ++i) {
            worst = std::max({worst, std::abs(post.mean[i] - mean[i]), std::abs(post.variance[i] - var[i])});
        }
    }
    // Epoch iterates recorded by real training.
    bench::SyntheticSpec ss;
    ss.dim = 4;
    ss.train_per_task = 120;
    const auto data = bench::make_synthetic(ss, 3).tasks[0].train;
    acquisition::AcquisitionConfig cfg;
    cfg.spec = MlpSpec({4, 6, 2});
    cfg.epochs = 8;
    cfg.moment_start = 4;
    acquisition::AcquisitionTrace trace;
    trace.keep_snapshots = true;
    Rng train_rng(4);
    const auto trained = acquisition::train_swag(data, cfg, train_rng, 0, &trace);
    const auto [tm, tv] = oracle::snapshot_moments(trace.snapshots);
    for (std::size_t i = 0; i < tm.size(); ++i) {
        worst = std::max({worst, std::abs(trained.mean[i] - tm[i]), std::abs(trained.variance[i] - tv[i])});
    }

    const auto hand = accumulate({{2.0, 0.0}, {4.0, 0.0}, {6.0, 0.0}});
    const double hand_err = std::max(std::abs(hand.mean[0] - 4.0), std::abs(hand.variance[0] - 8.0 / 3.0));
    const bool pass = worst < 1e-10 && hand_err < 1e-10;
    return {pass, fmt("200 scripted + 1 trained sequence, worst |diff| %.2e; [2],[4],[6] -> mean %.6f var %.6f", worst,
                      hand.mean[0], hand.variance[0])};
}

Verdict chunk_round_trip() {
    Rng rng(303);
    std::size_t failures = 0, padded = 0;
    constexpr int kTrials = 10000;
    for (int trial = 0; trial < kTrials; ++trial) {
        const std::size_t n = 1 + rng.uniform_index(500);
        const auto g = chunkstore::ChunkGeometry::make(n, 1 + rng.uniform_index(80));
        ParamVector p(n);
        for (auto& v : p) v = rng.normal();
        auto chunks = chunkstore::split(p, g, static_cast<int>(rng.uniform_index(6)));
        rng.shuffle(std::span<chunkstore::Chunk>(chunks));
        if (chunkstore::assemble(chunks, g) != p) ++failures;
        padded += g.pad > 0;
    }
    return {failures == 0 && padded > 0, fmt("%d trials (%zu with padding), %zu failures", kTrials, padded, failures)};
}

Verdict metric_formulas() {
    Rng rng(404);
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t t = 1 + rng.uniform_index(8);
        std::vector<std::vector<double>> rows(t);
        bench::EvalMatrix r(t);
        for (std::size_t i = 0; i < t; ++i) {
            for (std::size_t j = 0; j <= i; ++j) {
                rows[i].push_back(rng.uniform01());
                r.set(i, j, rows[i][j]);
            }
        }
        worst = std::max({worst, std::abs(bench::acc(r) - oracle::acc(rows)), std::abs(bench::la(r) - oracle::la(rows))});
        if (t > 1) worst = std::max(worst, std::abs(bench::bwt(r) - oracle::bwt(rows)));
    }
    bench::EvalMatrix hand(2);
    hand.set(0, 0, 0.9);
    hand.set(1, 0, 0.8);
    hand.set(1, 1, 0.85);
    const double a = bench::acc(hand), b = bench::bwt(hand), l = bench::la(hand);
    const bool hand_ok = std::abs(a - 0.825) < 1e-12 && std::abs(b + 0.1) < 1e-12 && std::abs(l - 0.875) < 1e-12;
    return {worst < 1e-12 && hand_ok,
            fmt("1000 random R, worst |diff| %.2e; hand case (%.4f, %.4f, %.4f)", worst, a, b, l)};
}

// Shared 3-task synthetic study behind the fidelity, forgetting and
// task-agnostic criteria.
struct SyntheticStudy {
    std::vector<std::uint64_t> seeds{1, 2, 3};
    std::vector<bench::ScenarioResult> runs;
    std::size_t param_count = 0;
    double seconds = 0.0;
};

const SyntheticStudy& synthetic_study() {
    static const SyntheticStudy study = [] {
        SyntheticStudy s;
        bench::SyntheticSpec spec;
        spec.tasks = 3;
        spec.dim = 16;
        spec.train_per_task = 1000;
        spec.test_per_task = 500;
        spec.separation = 6.0;
        acquisition::AcquisitionConfig acq;
        acq.spec = MlpSpec({16, 25, 2});
        acq.epochs = 20;
        acq.moment_start = 11;
        acq.learning_rate = 0.01;
        gamm::GammConfig g;
        g.chunk_size = 50;
        g.lr = 1e-3;
        g.lambda_gp = 10.0;
        g.lambda_ra = 50.0;
        g.iterations = 1500;
        s.param_count = acq.spec.param_count();
        const auto t0 = std::chrono::steady_clock::now();
        for (auto seed : s.seeds) s.runs.push_back(bench::run_scenario(bench::make_synthetic(spec, seed), acq, g, seed));
        s.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return s;
    }();
    return study;
}

Verdict fidelity() {
    const auto& s = synthetic_study();
    bool pass = s.seconds / static_cast<double>(s.runs.size()) < 15 * 60;
    std::string detail = fmt("%zu-param net, task-0 chunk MSE after final task:", s.param_count);
    for (std::size_t k = 0; k < s.runs.size(); ++k) {
        const double mse = s.runs[k].fidelity_mse.at(0);
        pass = pass && mse < 0.01;
        detail += fmt(" seed %llu %.2e", static_cast<unsigned long long>(s.seeds[k]), mse);
    }
    return {pass, detail + fmt(" (%.0f s/run)", s.seconds / static_cast<double>(s.runs.size()))};
}

Verdict forgetting() {
    const auto& s = synthetic_study();
    bool pass = true;
    std::string detail;
    for (std::size_t k = 0; k < s.runs.size(); ++k) {
        const auto& r = s.runs[k];
        double direct = 0.0;
        for (const auto& t : r.tasks) direct += t.direct_sample_accuracy;
        direct /= static_cast<double>(r.tasks.size());
        const double a = bench::acc(r.aware), b = bench::bwt(r.aware);
        pass = pass && b >= -0.02 && std::abs(a - direct) <= 0.02;
        detail += fmt("%sseed %llu ACC %.4f BWT %+.4f direct %.4f", k ? "; " : "",
                      static_cast<unsigned long long>(s.seeds[k]), a, b, direct);
    }
    return {pass, detail};
}

Verdict task_agnostic() {
    const auto& s = synthetic_study();
    bool pass = true;
    std::string detail;
    for (std::size_t k = 0; k < s.runs.size(); ++k) {
        const auto& r = s.runs[k];
        const double aware = bench::acc(r.aware), agnostic = bench::acc(r.agnostic);
        const double floor = aware / static_cast<double>(r.aware.tasks());
        pass = pass && aware - agnostic <= 0.10 && agnostic > floor;
        detail += fmt("%sseed %llu aware %.4f agnostic %.4f floor %.4f", k ? "; " : "",
                      static_cast<unsigned long long>(s.seeds[k]), aware, agnostic, floor);
    }
    return {pass, detail};
}

Verdict complexity_ordering() {
    const std::string dir = std::string(GAMMCL_TEST_DATA) + "/mnist2k/";
    const auto train = io::load_idx(dir + "train-images-idx3-ubyte", dir + "train-labels-idx1-ubyte").data;
    acquisition::AcquisitionConfig acq;
    acq.spec = MlpSpec({784, 32, 10});
    acq.epochs = 10;
    acq.moment_start = 6;
    acq.learning_rate = 0.01;
    Rng rng(808);
    const auto post = acquisition::train_swag(train, acq, rng);
    const auto reps = bench::representation_sets(train, post, 200, 10, rng);
    const auto rep = complexity::analyze_representations(reps.inputs, reps.features, reps.params, 10);
    const bool s_order = rep.params.separability > rep.features.separability &&
                         rep.features.separability > rep.inputs.separability;
    const bool v_order = rep.inputs.log_volume > rep.params.log_volume;
    return {s_order && v_order,
            fmt("S params %.4f > features %.4f > inputs %.4f; log V inputs %.3f > params %.3f",
                rep.params.separability, rep.features.separability, rep.inputs.separability, rep.inputs.log_volume,
                rep.params.log_volume)};
}

Verdict memory_accounting() {
    const auto ledger = bench::memory_usage({{"model", 10000, 0, 0}, {"images", 0, 100 * 28 * 28, 0}});
    return {ledger.total == 29600.0, fmt("ledger total %.1f parameter-equivalents", ledger.total)};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Verdict determinism() {
    const fs::path dir = fs::temp_directory_path() / "gammcl_acceptance_determinism";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const fs::path cfg = dir / "run.conf";
    std::ofstream(cfg) << "[scenario]\nkind = synthetic\nseed = 11\ntasks = 3\ndim = 8\ntrain_per_task = 300\n"
                          "test_per_task = 200\nseparation = 6\n[acquisition]\narchitecture = 8, 12, 2\nepochs = 8\n"
                          "moment_start = 5\n[gamm]\nchunk_size = 20\niterations = 100\nlambda_ra = 50\n";
    bool ok = true;
    for (const char* out : {"a", "b"}) {
        const std::string cmd = std::string(GAMMCL_CLI_PATH) + " run --config " + cfg.string() + " --out " +
                                (dir / out).string() + " > " + (dir / (std::string(out) + ".log")).string() + " 2>&1";
        ok = ok && std::system(cmd.c_str()) == 0;
    }
    if (!ok) return {false, "run command failed: " + slurp(dir / "a.log") + slurp(dir / "b.log")};
    std::size_t identical = 0;
    const std::vector<std::string> files{"R_aware.csv", "R_agnostic.csv", "summary.json"};
    for (const auto& f : files) {
        const auto a = slurp(dir / "a" / f);
        identical += !a.empty() && a == slurp(dir / "b" / f);
    }
    fs::remove_all(dir);
    return {identical == files.size(), fmt("%zu/%zu artifacts byte-identical across two runs", identical, files.size())};
}

} // namespace

int main() {
    tune_allocator();
    const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
        {"gradient correctness", gradient_correctness},
        {"SWAG moment oracle", swag_oracle},
        {"chunk round-trip", chunk_round_trip},
        {"metric formulas", metric_formulas},
        {"generated chunk fidelity", fidelity},
        {"near-zero forgetting", forgetting},
        {"task-agnostic selection", task_agnostic},
        {"complexity ordering", complexity_ordering},
        {"memory accounting", memory_accounting},
        {"run determinism", determinism},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = criteria[i].second();
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        failed += !v.pass;
        std::printf("%s  %2zu %-26s %s [%.1f s]\n", v.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                    v.detail.c_str(), secs);
        std::fflush(stdout);
    }
    std::printf("%zu/%zu criteria passed\n", criteria.size() - static_cast<std::size_t>(failed), criteria.size());
    return failed == 0 ? 0 : 1;
}
