// eitopt command-line runner.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "eitopt/pipeline.hpp"

namespace {

std::string env_or(const char* name, const std::string& fallback) {
    const char* v = std::getenv(name);
    return v && *v ? std::string(v) : fallback;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Electrode placement optimization for 2D EIT"};
    app.require_subcommand(1, 1);

    std::string config_path;
    std::string out = env_or("EITOPT_OUT", "eitopt-out");
    std::optional<std::uint64_t> seed;
    std::size_t threads = 1;
    try {
        threads = std::stoul(env_or("EITOPT_THREADS", "1"));
    } catch (const std::exception&) {
        std::cerr << "error: EITOPT_THREADS must be a positive integer\n";
        return 2;
    }
    std::string layout_a, layout_b;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "pipeline config (JSON)")->required()->check(CLI::ExistingFile);
        cmd->add_option("--out", out, "output directory (default $EITOPT_OUT or ./eitopt-out)");
        cmd->add_option("--seed", seed, "master seed; overrides the config value");
        cmd->add_option("--threads", threads, "worker threads (default $EITOPT_THREADS or 1)")
            ->check(CLI::PositiveNumber);
    };

    auto* gen = app.add_subcommand("gen-data", "generate the training set");
    auto* trn = app.add_subcommand("train", "train the layout network");
    auto* opt = app.add_subcommand("optimize", "query the network for the optimized layout");
    auto* eva = app.add_subcommand("evaluate", "compare two layouts: modeling error, conditioning, distinguishability");
    auto* rec = app.add_subcommand("reconstruct", "reconstruction study for both layouts");
    auto* dis = app.add_subcommand("distinguish", "distinguishability of the optimized vs uniform layout");
    auto* full = app.add_subcommand("full-pipeline", "gen-data, train, optimize, evaluate and reconstruct");
    for (auto* cmd : {gen, trn, opt, eva, rec, dis, full}) add_common(cmd);
    eva->add_option("--layout-a", layout_a, "candidate layout CSV (default: optimized)")->check(CLI::ExistingFile);
    eva->add_option("--layout-b", layout_b, "baseline layout CSV (default: uniform)")->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        eitopt::PipelineConfig cfg = eitopt::load_config(config_path);
        if (seed) {
            cfg.seed = *seed;
            cfg.dataset_seed.reset();
            cfg.train_seed.reset();
            cfg.metrics_seed.reset();
            cfg.reconstruction.seed.reset();
        }
        const eitopt::Workspace ws(cfg, out, threads);
        std::cerr << "config hash " << ws.hash() << ", output in " << ws.out().string() << "\n";

        if (*gen) {
            const auto set = eitopt::run_gen_data(ws);
            const auto& s = set.manifest["summary"];
            std::cout << "columns " << s["columns"] << ", kappa in [" << s["kappa_min"] << ", " << s["kappa_max"]
                      << "] (" << s["kappa_decades"] << " decades), beta in [" << s["beta_min"] << ", " << s["beta_max"]
                      << "]\n";
        } else if (*trn) {
            const auto net = eitopt::run_train(ws);
            std::cout << "epochs " << net.record.epochs << ", stop reason: " << net.record.stop_reason
                      << ", test loss " << net.record.test_loss << "\n";
        } else if (*opt) {
            const auto r = eitopt::run_optimize(ws);
            std::cout << "max midpoint deviation from uniform " << r.max_deviation << "\n";
        } else if (*eva) {
            std::optional<std::filesystem::path> a, b;
            if (!layout_a.empty()) a = layout_a;
            if (!layout_b.empty()) b = layout_b;
            const auto r = eitopt::run_evaluate(ws, a, b);
            const auto& c = r.comparison;
            std::cout << "|mu|_1 ratio (b/a) " << c.mu_ratio << "\nkappa_H reduction " << 100.0 * c.kappa_H_reduction
                      << "%\nkappa_R reduction " << 100.0 * c.kappa_R_reduction << "%\ndelta win-rate fine "
                      << 100.0 * r.distinguish.win_rate_fine << "%, coarse " << 100.0 * r.distinguish.win_rate_coarse
                      << "%\n";
        } else if (*rec) {
            const auto study = eitopt::run_reconstruct(ws);
            for (const auto& c : study.cells)
                std::cout << c.target << " eta " << eitopt::percent_tag(c.eta) << "% " << c.layout << " RMSE " << c.rmse
                          << "%\n";
        } else if (*dis) {
            const auto r = eitopt::run_distinguish(ws);
            std::cout << "optimized wins " << 100.0 * r.win_rate_fine << "% (fine), " << 100.0 * r.win_rate_coarse
                      << "% (coarse)\n";
        } else if (*full) {
            const auto s = eitopt::run_full_pipeline(ws);
            std::cout << s.json.dump(2) << "\n";
        }
    } catch (const eitopt::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
