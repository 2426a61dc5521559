// Copyright (c) 2026 lumitex contributors
// SPDX-License-Identifier: Apache-2.0
//
// lumitex <subcommand> --config <path> [--seed S] [--threads T] [--out DIR]
//
// Subcommands run the pipeline stages in order:
//   gen-dataset render-geo train-pbr train-lvsm infer select-views inpaint
//   bake relight eval
// Exit codes: 0 success, 2 config error, 3 stage-order error.
#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>

#include "lumitex/pipeline.hpp"

using namespace lumitex;

int main(int argc, char** argv) {
    CLI::App app{"geometry-conditioned PBR texture generation pipeline"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_override;
    int64_t seed_override = -1;
    int threads_override = 0;

    app.add_option("--config", config_path, "pipeline config JSON");
    app.add_option("--out", out_override, "output directory override");
    app.add_option("--seed", seed_override, "seed override");
    app.add_option("--threads", threads_override, "worker thread cap");

    const std::vector<std::string> stages = {"gen-dataset", "render-geo",   "train-pbr",
                                             "train-lvsm",  "infer",        "select-views",
                                             "inpaint",     "bake",         "relight",
                                             "eval"};
    for (const auto& s : stages) app.add_subcommand(s)->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        PipelineConfig cfg;
        if (!config_path.empty()) cfg = PipelineConfig::load(config_path);
        // environment overrides apply to the output directory and threads only
        if (const char* env_out = std::getenv("LUMITEX_OUT")) cfg.out_dir = env_out;
        if (const char* env_thr = std::getenv("LUMITEX_THREADS")) cfg.threads = std::atoi(env_thr);
        if (!out_override.empty()) cfg.out_dir = out_override;
        if (seed_override >= 0) {
            cfg.seed = uint64_t(seed_override);
            cfg.dataset.seed = uint64_t(seed_override);
        }
        if (threads_override > 0) cfg.threads = threads_override;
        cfg.validate();
        set_thread_count(cfg.threads);

        std::string stage = app.get_subcommands().front()->get_name();
        if (stage == "gen-dataset") {
            stage_gen_dataset(cfg);
        } else if (stage == "render-geo") {
            stage_render_geo(cfg);
        } else if (stage == "train-pbr") {
            stage_train_pbr(cfg);
        } else if (stage == "train-lvsm") {
            stage_train_lvsm(cfg);
        } else if (stage == "infer") {
            stage_infer(cfg);
        } else if (stage == "select-views") {
            stage_select_views(cfg);
        } else if (stage == "inpaint") {
            stage_inpaint(cfg);
        } else if (stage == "bake") {
            stage_bake(cfg);
        } else if (stage == "relight") {
            stage_relight(cfg);
        } else if (stage == "eval") {
            nlohmann::json j = stage_eval(cfg);
            std::cout << j.dump(2) << "\n";
        }
        std::cout << "lumitex: " << stage << " done (out: " << cfg.out_dir << ")\n";
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const StageOrderError& e) {
        std::cerr << "stage-order error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
