// hitl: command-line driver for data generation, training, loop runs,
// ablations, reports and the annotation service.

#include "hitl/core/error.hpp"
#include "hitl/core/io.hpp"
#include "hitl/loop/ablation.hpp"
#include "hitl/loop/calibration.hpp"
#include "hitl/loop/config.hpp"
#include "hitl/loop/loop.hpp"
#include "hitl/loop/report.hpp"
#include "hitl/seg/model_io.hpp"
#include "hitl/service/service.hpp"
#include "hitl/synth/dataset_io.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <csignal>
#include <iostream>
#include <optional>

using namespace hitl;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitRuntime = 3;

int exit_code_for(ErrorCode code) {
    switch (code) {
    case ErrorCode::configuration: return kExitUsage;
    case ErrorCode::rejected_input:
    case ErrorCode::malformed_stream:
    case ErrorCode::generation:
    case ErrorCode::not_found: return kExitData;
    default: return kExitRuntime;
    }
}

struct Globals {
    std::optional<std::uint64_t> seed_override;
    std::vector<std::string> sets;
};

/// Config file (or defaults) with --set overrides and the seed override.
loop::RunConfig build_config(const Globals& g, const std::string& config_path) {
    json j;
    fs::path base;
    if (!config_path.empty()) {
        if (!fs::exists(config_path)) throw Error(ErrorCode::not_found, "config file " + config_path + " not found");
        j = json::parse(io::read_text(config_path), nullptr, false);
        if (j.is_discarded()) throw Error(ErrorCode::configuration, "config " + config_path + " is not valid JSON");
        base = fs::path(config_path).parent_path();
    } else {
        j = loop::to_json(loop::RunConfig::defaults(), false);
    }
    for (const auto& s : g.sets) loop::apply_override(j, s);
    if (g.seed_override) {
        j["rng_seed"] = *g.seed_override;
        if (j.contains("data") && j["data"].contains("generate")) j["data"]["generate"]["seed"] = *g.seed_override;
    }
    return loop::run_config_from_json(j, base);
}

std::vector<std::string> split(const std::string& text) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto comma = text.find(',', start);
        const auto part = text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
        if (!part.empty()) out.push_back(part);
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

service::Service* g_service = nullptr;

void on_signal(int) {
    if (g_service) g_service->stop();
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Human-in-the-loop segmentation transfer: igniter, annotation rounds, sustainer."};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--seed-override", g.seed_override, "Replace every RNG seed (run and generated data)");
    app.add_option("--set", g.sets, "Config override as dotted.key=value (repeatable)");

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "Generate seed, target and test datasets");
    std::string gen_out, preset_name = "default";
    std::uint64_t gen_seed = 0;
    synth::Counts counts;
    gen->add_option("--out", gen_out, "Output directory")->required();
    gen->add_option("--seed", gen_seed, "Master seed");
    gen->add_option("--seed-count", counts.seed_n, "Seed (labelled) cases");
    gen->add_option("--target-count", counts.target_n, "Target (unlabelled) cases");
    gen->add_option("--test-count", counts.test_n, "Test cases");
    gen->add_option("--shift-preset", preset_name, "default | mild | severe")
        ->check(CLI::IsMember({"default", "standard", "mild", "severe"}));

    // train-igniter
    auto* ti = app.add_subcommand("train-igniter", "Train the igniter on the seed set");
    std::string ti_data, ti_config, ti_out;
    ti->add_option("--data", ti_data, "Dataset directory")->required();
    ti->add_option("--config", ti_config, "Run config JSON");
    ti->add_option("--out", ti_out, "Model JSON path")->required();

    // run
    auto* run = app.add_subcommand("run", "Run the annotation loop");
    std::string run_config, run_out, host = "127.0.0.1";
    bool interactive = false;
    int port = 8080;
    run->add_option("--config", run_config, "Run config JSON");
    run->add_option("--out", run_out, "Run directory")->required();
    run->add_flag("--interactive", interactive, "Wait for human annotations through the service");
    run->add_option("--port", port, "Service port for --interactive (0 picks one)");
    run->add_option("--host", host, "Service host for --interactive");

    // ablate
    auto* abl = app.add_subcommand("ablate", "Easy-first vs hard-first under time budgets");
    std::string abl_config, abl_out, budgets_text = "60,120,180", policies_text = "easy,hard";
    std::size_t n_seeds = 5;
    abl->add_option("--config", abl_config, "Run config JSON");
    abl->add_option("--budgets", budgets_text, "Comma-separated minutes per interaction");
    abl->add_option("--policies", policies_text, "Comma-separated policies (easy, hard, random)");
    abl->add_option("--seeds", n_seeds, "Number of seeds")->check(CLI::PositiveNumber);
    abl->add_option("--out", abl_out, "Output directory")->required();

    // report
    auto* rep = app.add_subcommand("report", "Print a run report");
    std::string rep_run, rep_format = "md";
    rep->add_option("--run", rep_run, "Run directory")->required();
    rep->add_option("--format", rep_format, "md | csv | json")->check(CLI::IsMember({"md", "csv", "json"}));

    // serve
    auto* srv = app.add_subcommand("serve", "Serve the annotation API");
    std::string srv_data, srv_config, srv_runs = "runs", srv_static, cors = "*";
    int srv_port = 8080;
    srv->add_option("--data", srv_data, "Dataset directory");
    srv->add_option("--config", srv_config, "Run config JSON");
    srv->add_option("--port", srv_port, "Port (0 picks one)");
    srv->add_option("--host", host, "Host");
    srv->add_option("--runs", srv_runs, "Directory for run outputs");
    srv->add_option("--static", srv_static, "Directory with a UI bundle to serve at /");
    srv->add_option("--cors-origin", cors, "Allowed CORS origin");

    // calibrate
    auto* cal = app.add_subcommand("calibrate", "Fit the annotation cost model to the 13.87 / 1.51 min targets");
    std::string cal_config, cal_out;
    std::size_t cal_seeds = 3;
    int cal_iters = 3;
    cal->add_option("--config", cal_config, "Run config JSON");
    cal->add_option("--seeds", cal_seeds, "Number of seeds")->check(CLI::PositiveNumber);
    cal->add_option("--iterations", cal_iters, "Fit iterations")->check(CLI::PositiveNumber);
    cal->add_option("--out", cal_out, "Write the fitted cost model JSON here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e, std::cerr, std::cerr);
        return kExitUsage;
    }

    try {
        if (*gen) {
            const std::uint64_t seed = g.seed_override.value_or(gen_seed);
            const auto bundle = synth::generate_default_datasets(counts, seed, synth::shift_preset_from_string(preset_name));
            synth::write_dataset_dir(gen_out, bundle);
            std::cout << fmt::format("wrote {} seed, {} target, {} test cases to {}\n", bundle.seed.samples.size(),
                                     bundle.target.samples.size(), bundle.test.samples.size(), gen_out);
        } else if (*ti) {
            loop::RunConfig cfg = build_config(g, ti_config);
            cfg.data_dir = ti_data;
            const auto data = loop::prepare(loop::load_data(cfg));
            const auto model = loop::train_igniter(cfg, data);
            seg::save_model(ti_out, model);
            const DiceScore d = loop::evaluate(model, data.test_features, data.bundle.test);
            std::cout << fmt::format("igniter saved to {}; test Dice {:.4f} / {:.4f} (mean {:.4f})\n", ti_out,
                                     d.per_class[0], d.per_class[1], d.mean());
        } else if (*run) {
            loop::RunConfig cfg = build_config(g, run_config);
            cfg.output_dir = run_out;
            if (!interactive) {
                const auto report = loop::run_loop(cfg);
                std::cout << loop::emit_report(report, loop::ReportFormat::md);
            } else {
                service::ServiceOptions opts;
                opts.config = cfg;
                opts.runs_root = fs::path(run_out).parent_path();
                service::Service svc(opts);
                g_service = &svc;
                std::signal(SIGINT, on_signal);
                std::signal(SIGTERM, on_signal);
                const int bound = svc.bind(host, port);
                svc.start_background();
                const json created = svc.create_run(json::object(), fs::path(run_out));
                const std::string id = created.at("run_id");
                std::cout << fmt::format("serving http://{}:{} ; run {} waiting for annotations\n", host, bound, id)
                          << std::flush;
                const auto report = svc.wait_finished(id);
                svc.stop();
                g_service = nullptr;
                if (!report) {
                    const auto st = svc.state(id);
                    std::cerr << "run failed: " << st.error.value_or("unknown error") << "\n";
                    return kExitRuntime;
                }
                std::cout << loop::emit_report(*report, loop::ReportFormat::md);
            }
        } else if (*abl) {
            loop::RunConfig cfg = build_config(g, abl_config);
            std::vector<double> budgets;
            for (const auto& b : split(budgets_text)) {
                try {
                    budgets.push_back(std::stod(b));
                } catch (const std::exception&) {
                    throw Error(ErrorCode::configuration, "bad budget '" + b + "'");
                }
            }
            std::vector<strategy::Policy> policies;
            for (const auto& p : split(policies_text)) policies.push_back(strategy::policy_from_string(p));
            std::vector<std::uint64_t> seeds;
            const std::uint64_t first = g.seed_override.value_or(0);
            for (std::size_t i = 0; i < n_seeds; ++i) seeds.push_back(first + i);
            const auto report = loop::ablate_strategy(cfg, budgets, policies, seeds,
                                                      [](const std::string& s) { std::cerr << s << "\n"; });
            fs::create_directories(abl_out);
            io::write_text(fs::path(abl_out) / "ablation.csv", loop::ablation_csv(report));
            const json summary = loop::ablation_summary(report);
            io::write_text(fs::path(abl_out) / "ablation_summary.json", summary.dump(2) + "\n");
            for (const auto& c : summary.at("cells")) {
                std::cout << fmt::format("budget {:>6.1f} {:<10} median n {:>5.1f}  median Dice {:.4f}\n",
                                         c.at("budget_min").get<double>(), c.at("policy").get<std::string>(),
                                         c.at("median_n_interaction1").get<double>(),
                                         c.at("median_dice_interaction1").get<double>());
            }
        } else if (*rep) {
            if (!fs::is_directory(rep_run)) throw Error(ErrorCode::not_found, "run directory " + rep_run + " not found");
            const auto report = loop::read_report(rep_run);
            std::cout << loop::emit_report(report, loop::report_format_from_string(rep_format));
        } else if (*srv) {
            loop::RunConfig cfg = build_config(g, srv_config);
            if (!srv_data.empty()) {
                cfg.data_dir = srv_data;
                cfg.generate.reset();
            }
            service::ServiceOptions opts;
            opts.config = cfg;
            opts.runs_root = srv_runs;
            opts.static_dir = srv_static;
            opts.cors_origin = cors;
            service::Service svc(opts);
            g_service = &svc;
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            const int bound = svc.bind(host, srv_port);
            std::cout << fmt::format("serving http://{}:{}\n", host, bound) << std::flush;
            svc.serve();
            g_service = nullptr;
        } else if (*cal) {
            loop::RunConfig cfg = build_config(g, cal_config);
            std::vector<std::uint64_t> seeds;
            const std::uint64_t first = g.seed_override.value_or(0);
            for (std::size_t i = 0; i < cal_seeds; ++i) seeds.push_back(first + i);
            const auto r = loop::calibrate(cfg, seeds, cal_iters, [](const std::string& s) { std::cerr << s << "\n"; });
            json out = loop::to_json(r.cost);
            out["round1_mean_min"] = r.round1_mean_min;
            out["final_mean_min"] = r.final_mean_min;
            std::cout << out.dump(2) << "\n";
            if (!cal_out.empty()) io::write_text(cal_out, out.dump(2) + "\n");
        }
    } catch (const Error& e) {
        std::cerr << "error (" << to_string(e.code()) << "): " << e.what() << "\n";
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitOk;
}
