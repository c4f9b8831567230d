// SPDX-License-Identifier: Apache-2.0
// gammcl: command-line driver for acquisition, consolidation, recall,
// evaluation, complexity analysis and full benchmark runs.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "gammcl/acquisition.hpp"
#include "gammcl/bench/runner.hpp"
#include "gammcl/cli/config.hpp"
#include "gammcl/cli/pipeline.hpp"
#include "gammcl/complexity.hpp"
#include "gammcl/error.hpp"
#include "gammcl/gamm.hpp"
#include "gammcl/io/datasets.hpp"
#include "gammcl/platform.hpp"
#include "gammcl/recall.hpp"

namespace fs = std::filesystem;
using namespace gammcl;
using cli::Json;

namespace {

void print(const Json& j) { std::cout << j.dump(2) << "\n"; }

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw DataError("cannot create directory " + dir + ": " + ec.message());
}

const bench::Task& pick_task(const bench::Scenario& s, int task) {
    if (task < 0 || static_cast<std::size_t>(task) >= s.tasks.size()) {
        throw ConfigError("unknown task " + std::to_string(task) + " (scenario has " + std::to_string(s.tasks.size()) +
                          " tasks)");
    }
    return s.tasks[static_cast<std::size_t>(task)];
}

complexity::GroupedPoints load_points(const std::string& path) {
    const auto h = io::load_csv(path);
    return {h.data.x, h.data.y, h.data.num_classes};
}

struct GenSyntheticArgs {
    std::string out;
    bench::SyntheticSpec spec;
    std::uint64_t seed = 0;
};

int cmd_gen_synthetic(const GenSyntheticArgs& a) {
    ensure_dir(a.out);
    const auto s = bench::make_synthetic(a.spec, a.seed);
    Json files = Json::array();
    for (std::size_t t = 0; t < s.tasks.size(); ++t) {
        const std::string base = a.out + "/task" + std::to_string(t);
        io::save_csv(s.tasks[t].train, base + "_train.csv");
        io::save_csv(s.tasks[t].test, base + "_test.csv");
        files.push_back(base + "_train.csv");
        files.push_back(base + "_test.csv");
    }
    print({{"tasks", s.tasks.size()}, {"dim", a.spec.dim}, {"seed", a.seed}, {"files", files}});
    return 0;
}

struct AcquireArgs {
    std::string config, out;
    int task = 0;
    std::optional<std::uint64_t> seed;
};

int cmd_acquire(const AcquireArgs& a) {
    const auto cfg = cli::parse_config(a.config);
    const auto scenario = cli::build_scenario(cfg);
    const auto& task = pick_task(scenario, a.task);
    Rng rng(a.seed.value_or(cfg.scenario.seed));
    acquisition::AcquisitionTrace trace;
    const auto post = acquisition::train_swag(task.train, cfg.acquisition.config, rng, a.task, &trace);
    acquisition::save_posterior(post, a.out);
    double mean_var = 0.0;
    for (double v : post.variance) mean_var += v;
    mean_var /= static_cast<double>(post.variance.size());
    print({{"task", a.task},
           {"params", post.mean.size()},
           {"spec", post.spec.layer_widths},
           {"posterior_mean_accuracy", accuracy(post.spec, post.mean, task.test.x, task.test.y)},
           {"mean_variance", mean_var},
           {"epoch_loss", trace.epoch_loss},
           {"snapshot", a.out}});
    return 0;
}

struct ConsolidateArgs {
    std::string config, posterior, previous, out, trace;
    std::optional<std::uint64_t> seed;
};

int cmd_consolidate(const ConsolidateArgs& a) {
    auto cfg = cli::parse_config(a.config);
    cli::resolve_capacity(cfg, cli::build_scenario(cfg).tasks.size());
    const auto post = acquisition::load_posterior(a.posterior);
    Rng rng(a.seed.value_or(cfg.scenario.seed));
    gamm::ConsolidationTrace trace;
    gamm::GammModel model;
    if (a.previous.empty()) {
        model = gamm::train_first_task(post, cfg.gamm, rng, &trace);
    } else {
        const auto prev = gamm::load_gamm(a.previous);
        if (prev.config.digest() != cfg.gamm.digest()) {
            throw ConfigError("the [gamm] section differs from the configuration stored in " + a.previous);
        }
        model = gamm::train_incremental(prev, post, rng, &trace);
    }
    gamm::save_gamm(model, a.out);
    if (!a.trace.empty()) {
        bench::ScenarioResult r;
        r.tasks.push_back({});
        r.tasks.back().consolidation = trace;
        io::write_text(a.trace, cli::traces_csv(r));
    }
    print({{"tasks_learned", model.tasks_learned},
           {"chunks_per_task", model.geometry.m},
           {"chunk_size", model.geometry.chunk_size},
           {"generator_params", model.gen_params.size()},
           {"config_digest", cli::hex64(model.config.digest())},
           {"snapshot", a.out}});
    return 0;
}

struct RecallArgs {
    std::string gamm, config, out;
    int task = 0;
    std::uint64_t seed = 0;
    std::size_t ensemble = 1;
};

int cmd_recall(const RecallArgs& a) {
    const auto model = gamm::load_gamm(a.gamm);
    const auto recalled = recall::recall_model(model, a.task, a.seed);
    if (!a.out.empty()) recall::save_recalled(recalled, a.out);
    Json j{{"task", a.task}, {"seed", a.seed}, {"params", recalled.params.size()}, {"spec", recalled.spec.layer_widths}};
    if (!a.config.empty()) {
        const auto scenario = cli::build_scenario(cli::parse_config(a.config));
        const auto& test = pick_task(scenario, a.task).test;
        j["test_accuracy"] = recall::task_aware_accuracy(recalled, test);
        if (a.ensemble > 1) {
            const auto members = recall::recall_ensemble(model, a.task, a.seed, a.ensemble);
            const auto pred = argmax_rows(recall::ensemble_logits(members, test.x));
            std::size_t hits = 0;
            for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == test.y[i] ? 1 : 0;
            j["ensemble"] = a.ensemble;
            j["ensemble_accuracy"] = static_cast<double>(hits) / static_cast<double>(pred.size());
        }
    } else if (a.ensemble > 1) {
        throw ConfigError("--ensemble needs --config to evaluate against");
    }
    if (!a.out.empty()) j["snapshot"] = a.out;
    print(j);
    return 0;
}

struct EvalArgs {
    std::string matrix, config, gamm, out;
    std::uint64_t seed = 0;
};

int cmd_eval(const EvalArgs& a) {
    if (!a.matrix.empty()) {
        const auto bytes = io::read_file(a.matrix);
        const auto r = bench::EvalMatrix::from_csv(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()), a.matrix);
        print(cli::metrics_json(r));
        return 0;
    }
    if (a.config.empty() || a.gamm.empty()) throw ConfigError("eval needs --matrix, or --config together with --gamm");
    const auto scenario = cli::build_scenario(cli::parse_config(a.config));
    const auto model = gamm::load_gamm(a.gamm);
    if (static_cast<std::size_t>(model.tasks_learned) > scenario.tasks.size()) {
        throw ConfigError("GAMM has learned more tasks than the scenario defines");
    }
    const auto recalled = recall::recall_all(model, a.seed);
    std::vector<double> aware, agnostic;
    for (std::size_t j = 0; j < recalled.size(); ++j) {
        aware.push_back(recall::task_aware_accuracy(recalled[j], scenario.tasks[j].test));
        agnostic.push_back(recall::task_agnostic_accuracy(recalled, scenario.tasks[j].test));
    }
    if (!a.out.empty()) {
        std::string csv;
        char buf[32];
        for (std::size_t j = 0; j < aware.size(); ++j) {
            std::snprintf(buf, sizeof buf, "%s%.17g", j ? "," : "", aware[j]);
            csv += buf;
        }
        io::write_text(a.out, csv + "\n");
    }
    print({{"row", model.tasks_learned - 1}, {"seed", a.seed}, {"task_aware", aware}, {"task_agnostic", agnostic}});
    return 0;
}

struct ComplexityArgs {
    std::string points, inputs, features, params, out;
    std::size_t d = 0;
};

int cmd_complexity(const ComplexityArgs& a) {
    if (a.d < 1) throw ConfigError("--d is required and must be >= 1");
    Json j;
    if (!a.points.empty()) {
        j = cli::complexity_json(complexity::analyze(load_points(a.points), a.d));
    } else if (!a.inputs.empty() && !a.features.empty() && !a.params.empty()) {
        j = cli::representation_json(complexity::analyze_representations(load_points(a.inputs), load_points(a.features),
                                                                         load_points(a.params), a.d));
    } else {
        throw ConfigError("complexity needs --points, or all of --inputs, --features and --params");
    }
    if (!a.out.empty()) cli::write_json(a.out, j);
    print(j);
    return 0;
}

struct RunArgs {
    std::string config, out;
    std::optional<std::uint64_t> seed;
};

int cmd_run(const RunArgs& a) {
    auto cfg = cli::parse_config(a.config);
    if (!a.out.empty()) cfg.output.dir = a.out;
    const std::uint64_t seed = a.seed.value_or(cfg.scenario.seed);
    const auto scenario = cli::build_scenario(cfg);
    cli::resolve_capacity(cfg, scenario.tasks.size());
    const std::string dir = cfg.output.dir;
    ensure_dir(dir);

    auto options = cli::run_options(cfg);
    std::optional<Json> complexity_report;
    if (cfg.complexity.enabled) {
        options.on_posterior = [&](int task, const acquisition::SwagPosterior& post, const bench::Task& t) {
            if (task != 0) return;
            Rng rng(Rng(seed).fork().next_u64() ^ 0x636f6d706c6578ULL);
            const auto reps = bench::representation_sets(t.train, post, cfg.complexity.samples, cfg.complexity.chunks, rng);
            if (cfg.complexity.dumps) {
                io::write_text(dir + "/rep_inputs.csv", io::to_csv(reps.inputs.points, reps.inputs.labels));
                io::write_text(dir + "/rep_features.csv", io::to_csv(reps.features.points, reps.features.labels));
                io::write_text(dir + "/rep_params.csv", io::to_csv(reps.params.points, reps.params.labels));
            }
            complexity_report = cli::representation_json(
                complexity::analyze_representations(reps.inputs, reps.features, reps.params, cfg.complexity.d));
        };
    }

    const auto result = bench::run_scenario(scenario, cfg.acquisition.config, cfg.gamm, seed, options);
    io::write_text(dir + "/R_aware.csv", result.aware.to_csv());
    io::write_text(dir + "/R_agnostic.csv", result.agnostic.to_csv());
    auto summary = cli::summary_json(cfg, scenario, result);
    if (complexity_report) {
        cli::write_json(dir + "/complexity.json", *complexity_report);
        summary["complexity"] = (*complexity_report)["ordering"];
    }
    cli::write_json(dir + "/summary.json", summary);
    if (cfg.output.traces) {
        io::write_text(dir + "/trace_gamm.csv", cli::traces_csv(result));
        io::write_text(dir + "/trace_acquisition.csv", cli::epoch_loss_csv(result));
    }
    Json brief{{"summary", dir + "/summary.json"},
               {"task_aware", summary["task_aware"]},
               {"task_agnostic", summary["task_agnostic"]},
               {"memory_total", result.ledger.total}};
    print(brief);
    return 0;
}

int report(const char* category, const std::string& message, int code) {
    std::cerr << Json{{"error", category}, {"message", message}, {"exit_code", code}}.dump() << "\n";
    return code;
}

} // namespace

int main(int argc, char** argv) {
    tune_allocator();
    CLI::App app{"gammcl: continual learning with a generative meta-model over parameter chunks"};
    app.require_subcommand(1);

    GenSyntheticArgs gen;
    auto* c_gen = app.add_subcommand("gen-synthetic", "Write a synthetic Gaussian scenario as CSV files");
    c_gen->add_option("--out", gen.out, "Output directory")->required();
    c_gen->add_option("--tasks", gen.spec.tasks, "Number of tasks")->capture_default_str();
    c_gen->add_option("--dim", gen.spec.dim, "Input dimension (2-16)")->capture_default_str();
    c_gen->add_option("--train", gen.spec.train_per_task, "Training rows per task")->capture_default_str();
    c_gen->add_option("--test", gen.spec.test_per_task, "Test rows per task")->capture_default_str();
    c_gen->add_option("--separation", gen.spec.separation, "Distance between class means")->capture_default_str();
    c_gen->add_option("--noise", gen.spec.noise, "Per-coordinate noise std")->capture_default_str();
    c_gen->add_option("--seed", gen.seed, "Seed")->capture_default_str();

    AcquireArgs acq;
    auto* c_acq = app.add_subcommand("acquire", "Train a SWAG posterior for one task");
    c_acq->add_option("--config", acq.config)->required();
    c_acq->add_option("--task", acq.task)->capture_default_str();
    c_acq->add_option("--seed", acq.seed);
    c_acq->add_option("--out", acq.out, "Posterior snapshot path")->required();

    ConsolidateArgs con;
    auto* c_con = app.add_subcommand("consolidate", "Consolidate a posterior into a GAMM");
    c_con->add_option("--config", con.config)->required();
    c_con->add_option("--posterior", con.posterior)->required();
    c_con->add_option("--gamm", con.previous, "Previous GAMM snapshot (omit for the first task)");
    c_con->add_option("--seed", con.seed);
    c_con->add_option("--trace", con.trace, "Loss trace CSV path");
    c_con->add_option("--out", con.out, "GAMM snapshot path")->required();

    RecallArgs rec;
    auto* c_rec = app.add_subcommand("recall", "Generate a task model from a GAMM");
    c_rec->add_option("--gamm", rec.gamm)->required();
    c_rec->add_option("--task", rec.task)->required();
    c_rec->add_option("--seed", rec.seed)->capture_default_str();
    c_rec->add_option("--config", rec.config, "Report test accuracy on this scenario");
    c_rec->add_option("--out", rec.out, "Model snapshot path");
    c_rec->add_option("--ensemble", rec.ensemble, "Also report the accuracy of K averaged-logit recalls")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);

    EvalArgs ev;
    auto* c_ev = app.add_subcommand("eval", "Metrics of an R matrix, or one R row from a GAMM");
    c_ev->add_option("--matrix", ev.matrix, "R matrix CSV");
    c_ev->add_option("--config", ev.config);
    c_ev->add_option("--gamm", ev.gamm);
    c_ev->add_option("--seed", ev.seed)->capture_default_str();
    c_ev->add_option("--out", ev.out, "Row CSV path");

    ComplexityArgs cx;
    auto* c_cx = app.add_subcommand("complexity", "Separability and volume of grouped point sets");
    c_cx->add_option("--d", cx.d, "Reduced dimension")->required();
    c_cx->add_option("--points", cx.points, "Single CSV point set");
    c_cx->add_option("--inputs", cx.inputs);
    c_cx->add_option("--features", cx.features);
    c_cx->add_option("--params", cx.params);
    c_cx->add_option("--out", cx.out, "JSON report path");

    RunArgs run;
    auto* c_run = app.add_subcommand("run", "Full benchmark pipeline");
    c_run->add_option("--config", run.config)->required();
    c_run->add_option("--seed", run.seed);
    c_run->add_option("--out", run.out, "Output directory (overrides output.dir)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return report("config", e.what(), 2);
    }

    try {
        if (*c_gen) return cmd_gen_synthetic(gen);
        if (*c_acq) return cmd_acquire(acq);
        if (*c_con) return cmd_consolidate(con);
        if (*c_rec) return cmd_recall(rec);
        if (*c_ev) return cmd_eval(ev);
        if (*c_cx) return cmd_complexity(cx);
        if (*c_run) return cmd_run(run);
    } catch (const ConfigError& e) {
        return report("config", e.what(), 2);
    } catch (const DataError& e) {
        return report("data", e.what(), 3);
    } catch (const ShapeError& e) {
        return report("data", e.what(), 3);
    } catch (const NumericError& e) {
        return report("numeric", e.what(), 4);
    } catch (const std::exception& e) {
        return report("internal", e.what(), 1);
    }
    return 0;
}
