// eitopt - electrode placement optimization for 2D EIT
//
// Pipeline stages shared by the command-line tool and the acceptance runner.
// Every artifact is stamped with the config hash; a stage refuses to replace
// a file written under a different hash, and reuses matching prerequisites.

#ifndef EITOPT_PIPELINE_HPP
#define EITOPT_PIPELINE_HPP

#include <chrono>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "eitopt/config.hpp"
#include "eitopt/dataset.hpp"
#include "eitopt/metrics.hpp"
#include "eitopt/network.hpp"
#include "eitopt/reconstruct.hpp"
#include "eitopt/svg.hpp"

namespace eitopt {

namespace fs = std::filesystem;

class Workspace {
public:
    Workspace(PipelineConfig cfg, fs::path out, std::size_t threads = 1, std::ostream* log = &std::cerr)
        : cfg_(std::move(cfg)), hash_(config_hash(cfg_)), out_(std::move(out)), threads_(std::max<std::size_t>(1, threads)),
          log_(log) {}

    const PipelineConfig& config() const { return cfg_; }
    const std::string& hash() const { return hash_; }
    const fs::path& out() const { return out_; }
    std::size_t threads() const { return threads_; }
    fs::path path(const std::string& rel) const { return out_ / rel; }

    std::ostream& log() const { return log_ ? *log_ : null_; }

    std::string stamp_line() const { return "# config_hash: " + hash_ + "\n"; }

    // True when rel exists and was written under this config.
    bool cached(const std::string& rel) const {
        const fs::path p = path(rel);
        return fs::exists(p) && carries_hash(read_file(p));
    }

    void write_csv(const std::string& rel, const std::string& body) const { write(rel, stamp_line() + body); }

    void write_json(const std::string& rel, nlohmann::json j) const {
        j["config_hash"] = hash_;
        write(rel, j.dump(2) + "\n");
    }

    // SVG text must already contain the hash comment.
    void write_svg(const std::string& rel, const std::string& text) const { write(rel, text); }

private:
    bool carries_hash(const std::string& text) const {
        return text.find("config_hash: " + hash_) != std::string::npos ||
               text.find("\"config_hash\": \"" + hash_ + "\"") != std::string::npos;
    }

    void write(const std::string& rel, const std::string& text) const {
        const fs::path p = path(rel);
        if (fs::exists(p) && !carries_hash(read_file(p))) {
            throw EitError(p.string() + " was written under a different configuration; use a fresh --out directory");
        }
        write_file(p, text);
    }

    PipelineConfig cfg_;
    std::string hash_;
    fs::path out_;
    std::size_t threads_;
    std::ostream* log_;
    mutable std::ostream null_{nullptr};
};

namespace detail {

class StageTimer {
public:
    StageTimer(const Workspace& ws, std::string name) : ws_(ws), name_(std::move(name)), t0_(Clock::now()) {
        ws_.log() << "[" << name_ << "] start\n";
    }
    ~StageTimer() {
        ws_.log() << "[" << name_ << "] done in " << std::chrono::duration<double>(Clock::now() - t0_).count()
                  << " s\n";
    }

private:
    using Clock = std::chrono::steady_clock;
    const Workspace& ws_;
    std::string name_;
    Clock::time_point t0_;
};

inline std::pair<double, double> finite_range(const Eigen::VectorXd& v) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (Eigen::Index i = 0; i < v.size(); ++i)
        if (std::isfinite(v[i])) lo = std::min(lo, v[i]), hi = std::max(hi, v[i]);
    return {lo, hi};
}

inline std::string field_csv(const TriangularMesh& mesh, const NodalField& f) {
    std::ostringstream os;
    os << "node,x,y,sigma\n";
    for (std::size_t i = 0; i < mesh.node_count(); ++i) {
        os << i << ',' << format_double(mesh.nodes[i].x) << ',' << format_double(mesh.nodes[i].y) << ','
           << format_double(f[static_cast<Eigen::Index>(i)]) << '\n';
    }
    return os.str();
}

}  // namespace detail

// ---- gen-data -------------------------------------------------------------

inline TrainingSet run_gen_data(const Workspace& ws) {
    detail::StageTimer timer(ws, "gen-data");
    const auto spec = ws.config().dataset_spec();
    auto progress = [&](std::size_t done, std::size_t total) {
        if (done == total || done % std::max<std::size_t>(1, total / 10) == 0)
            ws.log() << "[gen-data] layouts " << done << "/" << total << "\n";
    };
    TrainingSet set = build_training_set(spec, ws.threads(), progress);
    const auto [klo, khi] = detail::finite_range(set.Theta_bar.row(0).transpose());
    const auto [blo, bhi] = detail::finite_range(set.Theta_bar.row(1).transpose());
    set.manifest["summary"] = {{"kappa_min", klo},
                               {"kappa_max", khi},
                               {"kappa_decades", std::log10(khi / klo)},
                               {"beta_min", blo},
                               {"beta_max", bhi},
                               {"columns", set.columns()}};
    ws.write_csv("dataset/E_bar.csv", matrix_to_csv(set.E_bar));
    ws.write_csv("dataset/Theta_bar.csv", matrix_to_csv(set.Theta_bar));
    ws.write_json("dataset/manifest.json", set.manifest);
    return set;
}

inline TrainingSet ensure_dataset(const Workspace& ws) {
    if (ws.cached("dataset/manifest.json") && ws.cached("dataset/E_bar.csv") && ws.cached("dataset/Theta_bar.csv")) {
        return load_training_set(ws.path("dataset"));
    }
    return run_gen_data(ws);
}

// ---- train ----------------------------------------------------------------

inline TrainedNetwork run_train(const Workspace& ws) {
    const TrainingSet set = ensure_dataset(ws);
    detail::StageTimer timer(ws, "train");
    const auto& cfg = ws.config();
    const std::size_t k = cfg.electrode_count();
    if (static_cast<std::size_t>(set.E_bar.rows()) != 2 * k) {
        throw EitError("dataset has " + std::to_string(set.E_bar.rows()) + " coordinate rows but the config has k = " +
                       std::to_string(k));
    }
    const TrainedNetwork net = train(set, cfg.architecture(), cfg.train_config());
    const auto& r = net.record;
    ws.log() << "[train] " << r.epochs << " epochs, stop: " << r.stop_reason << ", test loss " << r.test_loss << "\n";
    ws.write_json("network/network.json", network_to_json(net));
    std::ostringstream curve;
    curve << "epoch,loss,gradient_norm,validation_loss\n";
    for (std::size_t e = 0; e < r.loss.size(); ++e) {
        curve << e << ',' << format_double(r.loss[e]) << ',' << format_double(r.gradient[e]) << ','
              << format_double(r.validation[e]) << '\n';
    }
    ws.write_csv("network/training_curve.csv", curve.str());
    ws.write_svg("network/training_curve.svg",
                 training_curve_svg({{"loss", r.loss}, {"gradient", r.gradient}, {"validation", r.validation}}, ws.hash()));
    return net;
}

inline TrainedNetwork ensure_network(const Workspace& ws) {
    if (ws.cached("network/network.json")) return network_from_json(nlohmann::json::parse(read_file(ws.path("network/network.json"))));
    return run_train(ws);
}

// ---- optimize -------------------------------------------------------------

struct OptimizeResult {
    ElectrodeLayout optimized;
    ElectrodeLayout uniform;
    double max_deviation = 0.0;  // largest midpoint displacement from uniform
};

inline ElectrodeLayout config_uniform_layout(const PipelineConfig& cfg) {
    return uniform_layout(cfg.domain, cfg.per_side, cfg.width);
}

inline double max_midpoint_deviation(const ElectrodeLayout& a, const ElectrodeLayout& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.count(); ++i) d = std::max(d, distance(a.midpoint(i), b.midpoint(i)));
    return d;
}

inline OptimizeResult run_optimize(const Workspace& ws) {
    const TrainedNetwork net = ensure_network(ws);
    detail::StageTimer timer(ws, "optimize");
    const auto& cfg = ws.config();
    OptimizeResult r;
    r.optimized = optimize_layout(net, cfg.domain, cfg.per_side, cfg.width, cfg.min_gap);
    const std::string bad = layout_violation(cfg.domain, r.optimized, cfg.min_gap);
    if (!bad.empty()) throw EitError("optimized layout is invalid: " + bad);
    r.uniform = config_uniform_layout(cfg);
    r.max_deviation = max_midpoint_deviation(r.optimized, r.uniform);
    ws.log() << "[optimize] max midpoint deviation from uniform " << r.max_deviation << "\n";
    ws.write_csv("layouts/optimized.csv", layout_to_csv(r.optimized));
    ws.write_csv("layouts/uniform.csv", layout_to_csv(r.uniform));
    ws.write_svg("layouts/overlay.svg", layout_overlay_svg(cfg.domain, r.optimized, r.uniform, ws.hash()));
    return r;
}

inline OptimizeResult ensure_layouts(const Workspace& ws) {
    if (ws.cached("layouts/optimized.csv") && ws.cached("layouts/uniform.csv")) {
        OptimizeResult r;
        r.optimized = layout_from_csv(read_file(ws.path("layouts/optimized.csv")));
        r.uniform = layout_from_csv(read_file(ws.path("layouts/uniform.csv")));
        r.max_deviation = max_midpoint_deviation(r.optimized, r.uniform);
        return r;
    }
    return run_optimize(ws);
}

// ---- distinguish ----------------------------------------------------------

struct DistinguishResult {
    // Per pair: [a fine, a coarse, b fine, b coarse].
    std::vector<std::array<double, 4>> delta;
    double win_rate_fine = 0.0;
    double win_rate_coarse = 0.0;
    double min_a_over_max_b = 0.0;  // > 1 when every a value beats every b value
};

inline DistinguishResult compute_distinguishability(const Workspace& ws, const ElectrodeLayout& a,
                                                    const ElectrodeLayout& b) {
    const auto& cfg = ws.config();
    const auto& rc = cfg.reconstruction;
    const std::size_t k = a.count();
    const auto z = ContactImpedances::uniform(k, cfg.contact_impedance);
    const auto protocol = StimulationProtocol::against_first(k, cfg.amplitude);
    const auto pairs = draw_distinguishability_pairs(cfg.domain, rc.h_fine, cfg.prior, cfg.delta_pairs,
                                                     cfg.stage_seed("distinguish"));
    std::array<std::vector<double>, 4> values;
    std::size_t slot = 0;
    for (const ElectrodeLayout* layout : {&a, &b}) {
        for (double h : {rc.h_fine, rc.h_coarse}) {
            const TriangularMesh mesh = coarse_mesh(cfg.domain, *layout, h, cfg.mesh_seed);
            values[slot++] = distinguishability_values(mesh, pairs, z, protocol, ws.threads());
        }
    }
    DistinguishResult r;
    r.delta.resize(cfg.delta_pairs);
    double min_a = std::numeric_limits<double>::infinity(), max_b = 0.0;
    for (std::size_t i = 0; i < cfg.delta_pairs; ++i) {
        for (std::size_t s = 0; s < 4; ++s) r.delta[i][s] = values[s][i];
        min_a = std::min({min_a, values[0][i], values[1][i]});
        max_b = std::max({max_b, values[2][i], values[3][i]});
    }
    r.win_rate_fine = win_rate(values[0], values[2]);
    r.win_rate_coarse = win_rate(values[1], values[3]);
    r.min_a_over_max_b = min_a / max_b;
    return r;
}

inline nlohmann::json distinguish_to_json(const DistinguishResult& r, const std::string& a, const std::string& b) {
    return {{"layout_a", a},
            {"layout_b", b},
            {"pairs", r.delta.size()},
            {"win_rate_fine", r.win_rate_fine},
            {"win_rate_coarse", r.win_rate_coarse},
            {"min_a_over_max_b", r.min_a_over_max_b}};
}

inline void write_distinguish(const Workspace& ws, const std::string& dir, const DistinguishResult& r,
                              const std::string& a, const std::string& b) {
    std::ostringstream os;
    os << "pair," << a << "_fine," << a << "_coarse," << b << "_fine," << b << "_coarse\n";
    for (std::size_t i = 0; i < r.delta.size(); ++i) {
        os << i;
        for (double v : r.delta[i]) os << ',' << format_double(v);
        os << '\n';
    }
    ws.write_csv(dir + "/delta.csv", os.str());
    ws.write_json(dir + "/distinguish.json", distinguish_to_json(r, a, b));
}

inline DistinguishResult run_distinguish(const Workspace& ws) {
    const OptimizeResult layouts = ensure_layouts(ws);
    detail::StageTimer timer(ws, "distinguish");
    const auto r = compute_distinguishability(ws, layouts.optimized, layouts.uniform);
    ws.log() << "[distinguish] optimized wins " << 100.0 * r.win_rate_fine << "% (fine), " << 100.0 * r.win_rate_coarse
             << "% (coarse)\n";
    write_distinguish(ws, "distinguish", r, "optimized", "uniform");
    return r;
}

// ---- evaluate -------------------------------------------------------------

struct EvaluateResult {
    LayoutComparison comparison;
    DistinguishResult distinguish;
};

// Layout a is the candidate, b the baseline. Without explicit layouts the
// optimized layout is compared against the uniform one.
inline EvaluateResult run_evaluate(const Workspace& ws, const std::optional<fs::path>& layout_a = {},
                                   const std::optional<fs::path>& layout_b = {}) {
    const auto& cfg = ws.config();
    ElectrodeLayout a, b;
    std::string name_a = "optimized", name_b = "uniform", dir = "evaluate";
    if (layout_a || layout_b) {
        auto load = [&](const std::optional<fs::path>& p, const char* which) {
            if (!p) throw ConfigError(std::string("--layout-") + which + " is required when the other layout is given");
            ElectrodeLayout l = layout_from_csv(read_file(*p));
            if (l.count() != cfg.electrode_count()) {
                throw ConfigError(p->string() + ": layout has " + std::to_string(l.count()) + " electrodes, config has " +
                                  std::to_string(cfg.electrode_count()));
            }
            const std::string bad = layout_violation(cfg.domain, l);
            if (!bad.empty()) throw ConfigError(p->string() + ": " + bad);
            return l;
        };
        a = load(layout_a, "a");
        b = load(layout_b, "b");
        name_a = "a";
        name_b = "b";
        // Results depend on the layouts too, so they get their own directory.
        char buf[17];
        std::snprintf(buf, sizeof buf, "%016llx",
                      static_cast<unsigned long long>(fnv1a(layout_to_csv(a) + "|" + layout_to_csv(b))));
        dir = std::string("evaluate-") + buf;
    } else {
        const OptimizeResult layouts = ensure_layouts(ws);
        a = layouts.optimized;
        b = layouts.uniform;
    }
    detail::StageTimer timer(ws, "evaluate");
    const MetricsSpec spec = cfg.metrics_spec();
    const QualityInputs in = draw_quality_inputs(spec, ws.threads());
    EvaluateResult r;
    r.comparison = compare_layouts(evaluate_layout(spec, in, a, name_a, ws.threads()),
                                   evaluate_layout(spec, in, b, name_b, ws.threads()));
    r.distinguish = compute_distinguishability(ws, a, b);
    const auto& c = r.comparison;
    ws.log() << "[evaluate] |mu|_1 ratio " << c.mu_ratio << ", kappa_H reduction " << 100.0 * c.kappa_H_reduction
             << "%, kappa_R reduction " << 100.0 * c.kappa_R_reduction << "%, delta win-rate "
             << 100.0 * r.distinguish.win_rate_coarse << "%\n";

    nlohmann::json report = comparison_to_json(c);
    report["delta_win_rate_fine"] = r.distinguish.win_rate_fine;
    report["delta_win_rate_coarse"] = r.distinguish.win_rate_coarse;
    report["layout_a"] = name_a;
    report["layout_b"] = name_b;
    ws.write_json(dir + "/report.json", report);
    std::ostringstream mu;
    mu << "measurement," << name_a << ',' << name_b << '\n';
    for (Eigen::Index i = 0; i < c.optimized.mu.size(); ++i) {
        mu << i << ',' << format_double(c.optimized.mu[i]) << ',' << format_double(c.uniform.mu[i]) << '\n';
    }
    ws.write_csv(dir + "/mu.csv", mu.str());
    ws.write_svg(dir + "/mu_bars.svg",
                 measurement_bars_svg(c.optimized.mu, c.uniform.mu, name_a, name_b, "mean modeling error (V)", ws.hash()));
    write_distinguish(ws, dir, r.distinguish, name_a, name_b);
    return r;
}

// ---- reconstruct ----------------------------------------------------------

struct ReconstructionCell {
    std::string target;  // "blob" or "ellipse"
    std::string layout;  // "optimized" or "uniform"
    double eta = 0.0;
    double rmse = 0.0;
    ReconstructionResult result;
};

struct ReconstructionStudyResult {
    std::vector<ReconstructionCell> cells;

    const ReconstructionCell& at(const std::string& target, const std::string& layout, double eta) const {
        for (const auto& c : cells)
            if (c.target == target && c.layout == layout && std::abs(c.eta - eta) < 1e-12) return c;
        throw EitError("no reconstruction cell " + target + "/" + layout);
    }
};

inline std::string percent_tag(double eta) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%g", 100.0 * eta);
    return buf;
}

inline ReconstructionStudyResult run_reconstruct(const Workspace& ws) {
    const OptimizeResult layouts = ensure_layouts(ws);
    detail::StageTimer timer(ws, "reconstruct");
    const auto& cfg = ws.config();
    const auto& rc = cfg.reconstruction;
    const std::uint64_t seed = cfg.stage_seed("reconstruction");
    const std::size_t k = cfg.electrode_count();
    const auto z = ContactImpedances::uniform(k, cfg.contact_impedance);
    const auto protocol = StimulationProtocol::against_first(k, cfg.amplitude);

    // Targets live on an electrode-free reference mesh shared by both layouts.
    const TriangularMesh ref = reference_mesh(cfg.domain, rc.h_fine, cfg.mesh_seed);
    const NodalField blob = draw_samples(build_covariance(ref, cfg.prior), 1, derive_seed(seed, "blob"))[0].values;
    const auto& e = rc.ellipse;
    const NodalField ellipse = ellipsoid_target(ref, e.center, e.semi_axes, e.angle, e.background, e.inclusion).values;
    const std::vector<std::pair<std::string, const NodalField*>> targets{{"blob", &blob}, {"ellipse", &ellipse}};
    const std::vector<std::pair<std::string, const ElectrodeLayout*>> named{{"optimized", &layouts.optimized},
                                                                            {"uniform", &layouts.uniform}};

    struct LayoutMeshes {
        TriangularMesh fine, coarse;
        SmoothnessPrior prior;
    };
    std::vector<LayoutMeshes> meshes;
    for (const auto& [name, layout] : named) {
        TriangularMesh fine = coarse_mesh(cfg.domain, *layout, rc.h_fine, derive_seed(cfg.mesh_seed, "fine"));
        TriangularMesh coarse = coarse_mesh(cfg.domain, *layout, rc.h_coarse, derive_seed(cfg.mesh_seed, "coarse"));
        SmoothnessPrior prior = build_covariance(coarse, cfg.prior);
        ws.write_svg("reconstruct/mesh_fine_" + name + ".svg", mesh_svg(fine, "fine mesh, " + name, ws.hash()));
        ws.write_svg("reconstruct/mesh_coarse_" + name + ".svg", mesh_svg(coarse, "coarse mesh, " + name, ws.hash()));
        meshes.push_back({std::move(fine), std::move(coarse), std::move(prior)});
    }

    ReconstructionStudyResult study;
    std::vector<NodalField> truths;  // per (target, layout) on the fine mesh
    for (std::size_t t = 0; t < targets.size(); ++t) {
        for (std::size_t l = 0; l < named.size(); ++l) {
            truths.push_back(interpolate_field(*targets[t].second, ref, meshes[l].fine));
            for (std::size_t n = 0; n < rc.noise_levels.size(); ++n)
                study.cells.push_back({targets[t].first, named[l].first, rc.noise_levels[n], 0.0, {}});
        }
    }

    parallel_for(study.cells.size(), ws.threads(), [&](std::size_t c) {
        const std::size_t per_layout = rc.noise_levels.size();
        const std::size_t t = c / (named.size() * per_layout);
        const std::size_t l = (c / per_layout) % named.size();
        const std::size_t n = c % per_layout;
        const LayoutMeshes& m = meshes[l];
        const NodalField& truth = truths[t * named.size() + l];
        // Same noise stream for both layouts at a given target and level.
        const NoiseModel noise{rc.noise_levels[n], derive_seed(seed, t * 1000 + n)};
        const Eigen::VectorXd vs = add_noise(solve_forward(m.fine, truth, z, protocol).voltages, noise);
        ReconstructionOptions opts = rc.options;
        opts.data_mesh_id = m.fine.fingerprint();
        auto& cell = study.cells[c];
        cell.result = reconstruct(vs, m.coarse, m.prior, noise, z, protocol, opts);
        cell.rmse = rmse_percent(cell.result.sigma_hat, truth, m.fine, m.coarse);
    });

    std::ostringstream table;
    table << "target,noise_percent,layout,rmse_percent,iterations,sigma_hom,min_sigma\n";
    nlohmann::json cells = nlohmann::json::array();
    for (const auto& c : study.cells) {
        ws.log() << "[reconstruct] " << c.target << " eta " << percent_tag(c.eta) << "% " << c.layout << ": RMSE "
                 << c.rmse << "% in " << c.result.iterations << " iterations\n";
        table << c.target << ',' << percent_tag(c.eta) << ',' << c.layout << ',' << format_double(c.rmse) << ','
              << c.result.iterations << ',' << format_double(c.result.sigma_hom) << ','
              << format_double(c.result.sigma_hat.minCoeff()) << '\n';
        cells.push_back({{"target", c.target},
                         {"layout", c.layout},
                         {"noise", c.eta},
                         {"rmse_percent", c.rmse},
                         {"iterations", c.result.iterations},
                         {"sigma_hom", c.result.sigma_hom},
                         {"min_sigma", c.result.sigma_hat.minCoeff()},
                         {"stalled", c.result.stalled},
                         {"cost", c.result.cost},
                         {"psi", c.result.psi}});
    }
    ws.write_csv("reconstruct/rmse.csv", table.str());
    ws.write_json("reconstruct/study.json", {{"cells", cells},
                                             {"fine_nodes", {meshes[0].fine.node_count(), meshes[1].fine.node_count()}},
                                             {"coarse_nodes", {meshes[0].coarse.node_count(), meshes[1].coarse.node_count()}}});

    // Fields and plots; one colour scale per target.
    for (std::size_t t = 0; t < targets.size(); ++t) {
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (std::size_t l = 0; l < named.size(); ++l) {
            const auto& tr = truths[t * named.size() + l];
            lo = std::min(lo, tr.minCoeff());
            hi = std::max(hi, tr.maxCoeff());
        }
        for (const auto& c : study.cells) {
            if (c.target != targets[t].first) continue;
            lo = std::min(lo, c.result.sigma_hat.minCoeff());
            hi = std::max(hi, c.result.sigma_hat.maxCoeff());
        }
        const std::string& tn = targets[t].first;
        for (std::size_t l = 0; l < named.size(); ++l) {
            const auto& tr = truths[t * named.size() + l];
            const std::string stem = "reconstruct/truth_" + tn + "_" + named[l].first;
            ws.write_csv(stem + ".csv", detail::field_csv(meshes[l].fine, tr));
            ws.write_svg(stem + ".svg", field_svg(meshes[l].fine, tr, lo, hi, "true " + tn + ", " + named[l].first + " mesh",
                                                  ws.hash(), &cfg.domain, named[l].second));
        }
        for (const auto& c : study.cells) {
            if (c.target != tn) continue;
            const std::size_t l = c.layout == "optimized" ? 0 : 1;
            const std::string stem = "reconstruct/sigma_" + tn + "_" + c.layout + "_eta" + percent_tag(c.eta);
            ws.write_csv(stem + ".csv", detail::field_csv(meshes[l].coarse, c.result.sigma_hat));
            char title[128];
            std::snprintf(title, sizeof title, "%s, %s layout, eta = %s%%, RMSE %.2f%%", tn.c_str(), c.layout.c_str(),
                          percent_tag(c.eta).c_str(), c.rmse);
            ws.write_svg(stem + ".svg", field_svg(meshes[l].coarse, c.result.sigma_hat, lo, hi, title, ws.hash(),
                                                  &cfg.domain, named[l].second));
        }
    }
    return study;
}

// ---- full pipeline --------------------------------------------------------

struct PipelineSummary {
    OptimizeResult layouts;
    EvaluateResult evaluation;
    std::optional<ReconstructionStudyResult> reconstruction;
    nlohmann::json json;
};

inline PipelineSummary run_full_pipeline(const Workspace& ws) {
    PipelineSummary s;
    const TrainingSet set = run_gen_data(ws);
    const TrainedNetwork net = run_train(ws);
    s.layouts = run_optimize(ws);
    s.evaluation = run_evaluate(ws);
    if (ws.config().reconstruction.enabled) s.reconstruction = run_reconstruct(ws);

    const auto& c = s.evaluation.comparison;
    nlohmann::json j;
    j["geometry"] = ws.config().geometry_name;
    j["electrodes"] = ws.config().electrode_count();
    j["dataset"] = set.manifest.value("summary", nlohmann::json::object());
    j["training"] = {{"epochs", net.record.epochs},
                     {"best_epoch", net.record.best_epoch},
                     {"stop_reason", net.record.stop_reason},
                     {"test_loss", net.record.test_loss}};
    j["optimize"] = {{"max_midpoint_deviation", s.layouts.max_deviation}};
    j["evaluate"] = {{"mu_l1_optimized", c.optimized.mu_l1},
                     {"mu_l1_uniform", c.uniform.mu_l1},
                     {"mu_l1_ratio", c.mu_ratio},
                     {"kappa_H_optimized", c.optimized.kappa.kappa_H},
                     {"kappa_H_uniform", c.uniform.kappa.kappa_H},
                     {"kappa_H_reduction_percent", 100.0 * c.kappa_H_reduction},
                     {"kappa_R_optimized", c.optimized.kappa.kappa_R},
                     {"kappa_R_uniform", c.uniform.kappa.kappa_R},
                     {"kappa_R_reduction_percent", 100.0 * c.kappa_R_reduction},
                     {"delta_win_rate_fine", s.evaluation.distinguish.win_rate_fine},
                     {"delta_win_rate_coarse", s.evaluation.distinguish.win_rate_coarse}};
    if (s.reconstruction) {
        nlohmann::json table = nlohmann::json::array();
        for (const auto& cell : s.reconstruction->cells)
            table.push_back({{"target", cell.target}, {"layout", cell.layout}, {"noise", cell.eta}, {"rmse_percent", cell.rmse}});
        j["reconstruct"] = table;
    }
    ws.write_json("summary.json", j);
    s.json = j;
    return s;
}

// Summary of a finished run in ws, computing it only when absent.
inline nlohmann::json ensure_full_pipeline(const Workspace& ws) {
    if (ws.cached("summary.json")) return nlohmann::json::parse(read_file(ws.path("summary.json")));
    return run_full_pipeline(ws).json;
}

}  // namespace eitopt

#endif  // EITOPT_PIPELINE_HPP
