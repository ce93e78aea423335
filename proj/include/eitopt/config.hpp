// eitopt - electrode placement optimization for 2D EIT
//
// Pipeline configuration: JSON schema, validation with field paths, derived
// stage seeds and the config hash stamped on every output.

#ifndef EITOPT_CONFIG_HPP
#define EITOPT_CONFIG_HPP

#include <cmath>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "eitopt/core.hpp"
#include "eitopt/dataset.hpp"
#include "eitopt/geometry.hpp"
#include "eitopt/io.hpp"
#include "eitopt/metrics.hpp"
#include "eitopt/network.hpp"
#include "eitopt/reconstruct.hpp"
#include "eitopt/sampler.hpp"

namespace eitopt {

inline constexpr int kSchemaVersion = 1;

struct EllipseSpec {
    Point center{1.3, 0.45};
    Point semi_axes{0.3, 0.15};
    double angle = 0.4;
    double background = 1.0;
    double inclusion = 2.0;
};

struct ReconstructionStudy {
    bool enabled = true;
    double h_fine = 0.04;
    double h_coarse = 0.075;
    std::vector<double> noise_levels{0.01, 0.05, 0.1};
    EllipseSpec ellipse;
    ReconstructionOptions options;
    std::optional<std::uint64_t> seed;
};

struct PipelineConfig {
    std::string geometry_name;  // preset name or "custom"
    PolygonDomain domain;
    std::vector<std::size_t> per_side;
    double width = 0.075;
    double min_gap = 0.075;
    double h_max = 0.075;
    double h_min = 0.0375;
    double h_fine = 0.0375;
    std::uint64_t mesh_seed = 1;
    double contact_impedance = 1e-5;
    double amplitude = 1.0;
    PriorParams prior;
    std::size_t layouts = 200;
    std::size_t samples = 50;
    std::size_t max_resamples = 5;
    TrainConfig train;
    std::optional<std::size_t> hidden1, hidden2;  // Huang sizes unless given
    std::size_t mu_samples = 200;
    std::size_t kappa_samples = 200;
    std::size_t delta_pairs = 50;
    ReconstructionStudy reconstruction;

    std::uint64_t seed = 1;  // master seed; stage seeds derive from it unless set
    std::optional<std::uint64_t> dataset_seed, train_seed, metrics_seed;

    std::size_t electrode_count() const {
        std::size_t k = 0;
        for (auto n : per_side) k += n;
        return k;
    }

    std::uint64_t stage_seed(const char* stage) const {
        const std::string s(stage);
        if (s == "dataset" && dataset_seed) return *dataset_seed;
        if (s == "train" && train_seed) return *train_seed;
        if (s == "metrics" && metrics_seed) return *metrics_seed;
        if (s == "reconstruction" && reconstruction.seed) return *reconstruction.seed;
        return derive_seed(seed, stage);
    }

    DatasetSpec dataset_spec() const {
        DatasetSpec d;
        d.domain = domain;
        d.per_side = per_side;
        d.width = width;
        d.min_gap = min_gap;
        d.layouts = layouts;
        d.samples = samples;
        d.h_max = h_max;
        d.h_min = h_min;
        d.prior = prior;
        d.contact_impedance = contact_impedance;
        d.amplitude = amplitude;
        d.seed = stage_seed("dataset");
        d.max_resamples = max_resamples;
        return d;
    }

    TrainConfig train_config() const {
        TrainConfig t = train;
        t.seed = stage_seed("train");
        return t;
    }

    NetworkArchitecture architecture() const {
        const auto [l1, l2] = huang_layer_sizes(electrode_count(), layouts);
        return {2, hidden1.value_or(l1), hidden2.value_or(l2), 2 * electrode_count()};
    }

    MetricsSpec metrics_spec() const {
        MetricsSpec m;
        m.domain = domain;
        m.h_coarse = h_max;
        m.h_fine = h_fine;
        m.contact_impedance = contact_impedance;
        m.amplitude = amplitude;
        m.prior = prior;
        m.mu_samples = mu_samples;
        m.kappa_samples = kappa_samples;
        m.delta_pairs = delta_pairs;
        m.seed = stage_seed("metrics");
        m.mesh_seed = mesh_seed;
        return m;
    }
};

namespace detail {

// Walks a JSON object, reporting problems with their field path and
// rejecting keys nobody asked for.
class FieldReader {
public:
    FieldReader(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) fail(path_.empty() ? "config" : path_, "expected an object");
    }

    bool has(const std::string& key) {
        seen_.insert(key);
        return j_.contains(key) && !j_.at(key).is_null();
    }

    std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
    const nlohmann::json& raw(const std::string& key) {
        seen_.insert(key);
        return j_.at(key);
    }

    double number(const std::string& key, double fallback) {
        if (!has(key)) return fallback;
        const auto& v = j_.at(key);
        if (!v.is_number()) fail(at(key), "expected a number");
        const double d = v.get<double>();
        if (!std::isfinite(d)) fail(at(key), "expected a finite number");
        return d;
    }

    double positive(const std::string& key, double fallback) {
        const double d = number(key, fallback);
        if (!(d > 0.0)) fail(at(key), "must be positive");
        return d;
    }

    std::uint64_t unsigned_int(const std::string& key, std::uint64_t fallback) {
        if (!has(key)) return fallback;
        const auto& v = j_.at(key);
        if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
            fail(at(key), "expected a non-negative integer");
        }
        return v.get<std::uint64_t>();
    }

    std::size_t count(const std::string& key, std::size_t fallback) {
        const auto n = unsigned_int(key, fallback);
        if (n < 1) fail(at(key), "must be at least 1");
        return static_cast<std::size_t>(n);
    }

    bool boolean(const std::string& key, bool fallback) {
        if (!has(key)) return fallback;
        if (!j_.at(key).is_boolean()) fail(at(key), "expected true or false");
        return j_.at(key).get<bool>();
    }

    std::string string(const std::string& key, const std::string& fallback) {
        if (!has(key)) return fallback;
        if (!j_.at(key).is_string()) fail(at(key), "expected a string");
        return j_.at(key).get<std::string>();
    }

    FieldReader object(const std::string& key) {
        static const nlohmann::json empty = nlohmann::json::object();
        return FieldReader(has(key) ? j_.at(key) : empty, at(key));
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it) {
            if (!seen_.count(it.key())) fail(at(it.key()), "unknown field");
        }
    }

    [[noreturn]] static void fail(const std::string& path, const std::string& what) {
        throw ConfigError(path + ": " + what);
    }

private:
    const nlohmann::json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

inline Point read_point(const nlohmann::json& j, const std::string& path) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
        FieldReader::fail(path, "expected [x, y]");
    }
    return {j[0].get<double>(), j[1].get<double>()};
}

inline Polygon read_polygon(const nlohmann::json& j, const std::string& path) {
    if (!j.is_array() || j.size() < 3) FieldReader::fail(path, "expected at least three [x, y] vertices");
    Polygon p;
    for (std::size_t i = 0; i < j.size(); ++i) p.push_back(read_point(j[i], path + "[" + std::to_string(i) + "]"));
    return p;
}

}  // namespace detail

inline PolygonDomain geometry_preset(const std::string& name) {
    if (name == "square-1x1") return PolygonDomain::square();
    if (name == "rect-2x1") return PolygonDomain::rectangle();
    if (name == "right-triangle") return PolygonDomain::right_triangle();
    throw ConfigError("geometry.preset: unknown preset '" + name + "' (square-1x1, rect-2x1, right-triangle)");
}

inline std::vector<std::size_t> preset_per_side(const std::string& name) {
    if (name == "square-1x1") return {3, 3, 3, 3};
    if (name == "rect-2x1") return {4, 2, 4, 2};
    if (name == "right-triangle") return {4, 3, 3};
    return {};
}

inline PipelineConfig config_from_json(const nlohmann::json& j) {
    using detail::FieldReader;
    FieldReader root(j, "");
    PipelineConfig c;
    const auto version = root.unsigned_int("schema_version", 0);
    if (version != kSchemaVersion) {
        FieldReader::fail("schema_version", "expected " + std::to_string(kSchemaVersion) + ", got " +
                                                (root.has("schema_version") ? std::to_string(version) : "nothing"));
    }
    c.seed = root.unsigned_int("seed", 1);

    {
        auto g = root.object("geometry");
        if (g.has("preset")) {
            c.geometry_name = g.string("preset", "");
            try {
                c.domain = geometry_preset(c.geometry_name);
            } catch (const ConfigError&) {
                FieldReader::fail(g.at("preset"), "unknown preset '" + c.geometry_name +
                                                      "' (square-1x1, rect-2x1, right-triangle)");
            }
            if (g.has("outer")) FieldReader::fail(g.at("outer"), "give either a preset or an outer polygon");
        } else if (g.has("outer")) {
            c.geometry_name = g.string("name", "custom");
            const Polygon outer = detail::read_polygon(g.raw("outer"), g.at("outer"));
            std::vector<Polygon> holes;
            if (g.has("holes")) {
                const auto& h = g.raw("holes");
                if (!h.is_array()) FieldReader::fail(g.at("holes"), "expected a list of polygons");
                for (std::size_t i = 0; i < h.size(); ++i)
                    holes.push_back(detail::read_polygon(h[i], g.at("holes") + "[" + std::to_string(i) + "]"));
            }
            try {
                c.domain = PolygonDomain(outer, holes);
            } catch (const std::exception& e) {
                FieldReader::fail(g.at("outer"), e.what());
            }
        } else {
            FieldReader::fail("geometry", "needs a preset or an outer polygon");
        }
        g.string("name", "");
        g.finish();
    }

    if (root.has("per_side")) {
        const auto& ps = root.raw("per_side");
        if (!ps.is_array()) FieldReader::fail("per_side", "expected a list of counts");
        for (std::size_t i = 0; i < ps.size(); ++i) {
            if (!ps[i].is_number_integer() || ps[i].get<std::int64_t>() < 0) {
                FieldReader::fail("per_side[" + std::to_string(i) + "]", "expected a non-negative integer");
            }
            c.per_side.push_back(ps[i].get<std::size_t>());
        }
    } else {
        c.per_side = preset_per_side(c.geometry_name);
        if (c.per_side.empty()) FieldReader::fail("per_side", "required for custom geometries");
    }
    if (c.per_side.size() != c.domain.side_count()) {
        FieldReader::fail("per_side", "has " + std::to_string(c.per_side.size()) + " entries but the outer polygon has " +
                                          std::to_string(c.domain.side_count()) + " sides");
    }
    if (c.electrode_count() < 2) FieldReader::fail("per_side", "need at least two electrodes");

    {
        auto e = root.object("electrodes");
        c.width = e.positive("width", c.width);
        c.min_gap = e.number("min_gap", c.min_gap);
        if (c.min_gap < 0.0) FieldReader::fail(e.at("min_gap"), "must be non-negative");
        e.finish();
    }
    {
        auto m = root.object("mesh");
        c.h_max = m.positive("h_max", c.width);
        c.h_min = m.positive("h_min", 0.5 * c.h_max);
        c.h_fine = m.positive("h_fine", 0.5 * c.h_max);
        c.mesh_seed = m.unsigned_int("seed", c.mesh_seed);
        if (c.h_min > c.h_max) FieldReader::fail(m.at("h_min"), "must not exceed h_max");
        if (c.h_fine > c.h_max) FieldReader::fail(m.at("h_fine"), "must not exceed h_max");
        m.finish();
    }
    {
        auto p = root.object("protocol");
        c.contact_impedance = p.positive("contact_impedance", c.contact_impedance);
        c.amplitude = p.positive("amplitude", c.amplitude);
        const auto pattern = p.string("pattern", "adjacent-against-first");
        if (pattern != "adjacent-against-first") FieldReader::fail(p.at("pattern"), "only adjacent-against-first is supported");
        p.finish();
    }
    {
        auto p = root.object("prior");
        const PriorParams d = PriorParams::defaults_for(c.domain);
        c.prior.a = p.positive("a", d.a);
        c.prior.b = p.positive("b", d.b);
        c.prior.c = p.positive("c", 0.01 * c.prior.a);
        p.finish();
    }
    {
        auto d = root.object("dataset");
        c.layouts = d.count("layouts", c.layouts);
        c.samples = d.count("samples", c.samples);
        c.max_resamples = d.unsigned_int("max_resamples", c.max_resamples);
        if (d.has("seed")) c.dataset_seed = d.unsigned_int("seed", 0);
        d.finish();
    }
    {
        auto t = root.object("train");
        c.train.alpha = t.number("alpha", c.train.alpha);
        if (c.train.alpha < 0.0) FieldReader::fail(t.at("alpha"), "must be non-negative");
        c.train.tol = t.positive("tol", c.train.tol);
        c.train.max_epochs = t.count("max_epochs", c.train.max_epochs);
        c.train.patience = t.count("patience", c.train.patience);
        if (t.has("hidden1")) c.hidden1 = t.count("hidden1", 1);
        if (t.has("hidden2")) c.hidden2 = t.count("hidden2", 1);
        if (t.has("seed")) c.train_seed = t.unsigned_int("seed", 0);
        t.finish();
    }
    {
        auto m = root.object("metrics");
        c.mu_samples = m.count("mu_samples", c.mu_samples);
        c.kappa_samples = m.count("kappa_samples", c.kappa_samples);
        c.delta_pairs = m.count("delta_pairs", c.delta_pairs);
        if (m.has("seed")) c.metrics_seed = m.unsigned_int("seed", 0);
        m.finish();
    }
    {
        auto r = root.object("reconstruction");
        auto& s = c.reconstruction;
        s.enabled = r.boolean("enabled", s.enabled);
        s.h_fine = r.positive("h_fine", s.h_fine);
        s.h_coarse = r.positive("h_coarse", s.h_coarse);
        if (s.h_fine == s.h_coarse) FieldReader::fail(r.at("h_fine"), "must differ from h_coarse (inverse crime)");
        if (r.has("noise_levels")) {
            const auto& n = r.raw("noise_levels");
            if (!n.is_array() || n.empty()) FieldReader::fail(r.at("noise_levels"), "expected a non-empty list");
            s.noise_levels.clear();
            for (std::size_t i = 0; i < n.size(); ++i) {
                if (!n[i].is_number() || !(n[i].get<double>() > 0.0)) {
                    FieldReader::fail(r.at("noise_levels") + "[" + std::to_string(i) + "]", "must be positive");
                }
                s.noise_levels.push_back(n[i].get<double>());
            }
        }
        if (r.has("seed")) s.seed = r.unsigned_int("seed", 0);
        {
            auto e = r.object("ellipse");
            if (e.has("center")) s.ellipse.center = detail::read_point(e.raw("center"), e.at("center"));
            if (e.has("semi_axes")) s.ellipse.semi_axes = detail::read_point(e.raw("semi_axes"), e.at("semi_axes"));
            if (!(s.ellipse.semi_axes.x >= 0.0) || !(s.ellipse.semi_axes.y >= 0.0)) {
                FieldReader::fail(e.at("semi_axes"), "must be non-negative");
            }
            s.ellipse.angle = e.number("angle", s.ellipse.angle);
            s.ellipse.background = e.positive("background", s.ellipse.background);
            s.ellipse.inclusion = e.positive("inclusion", s.ellipse.inclusion);
            e.finish();
        }
        {
            auto o = r.object("solver");
            s.options.max_iterations = o.count("max_iterations", s.options.max_iterations);
            s.options.rel_tol = o.positive("rel_tol", s.options.rel_tol);
            s.options.barrier_cycles = o.count("barrier_cycles", s.options.barrier_cycles);
            s.options.barrier_initial = o.positive("barrier_initial", s.options.barrier_initial);
            s.options.barrier_decay = o.positive("barrier_decay", s.options.barrier_decay);
            if (!(s.options.barrier_decay > 1.0)) FieldReader::fail(o.at("barrier_decay"), "must exceed 1");
            o.finish();
        }
        r.finish();
    }
    root.finish();

    try {
        detail::check_feasible(c.domain, c.per_side, c.width, c.min_gap);
    } catch (const std::exception& e) {
        FieldReader::fail("per_side", std::string("electrodes do not fit: ") + e.what());
    }
    return c;
}

inline PipelineConfig load_config(const std::filesystem::path& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(path.string() + ": invalid JSON: " + e.what());
    } catch (const EitError& e) {
        throw ConfigError(e.what());
    }
    return config_from_json(j);
}

// Fully resolved configuration; defaults are written out so the hash covers them.
inline nlohmann::json config_to_json(const PipelineConfig& c) {
    nlohmann::json j;
    j["schema_version"] = kSchemaVersion;
    j["seed"] = c.seed;
    j["geometry"] = domain_to_json(c.domain);
    j["geometry"]["name"] = c.geometry_name;
    j["per_side"] = c.per_side;
    j["electrodes"] = {{"width", c.width}, {"min_gap", c.min_gap}};
    j["mesh"] = {{"h_max", c.h_max}, {"h_min", c.h_min}, {"h_fine", c.h_fine}, {"seed", c.mesh_seed}};
    j["protocol"] = {{"contact_impedance", c.contact_impedance},
                     {"amplitude", c.amplitude},
                     {"pattern", "adjacent-against-first"}};
    j["prior"] = {{"a", c.prior.a}, {"b", c.prior.b}, {"c", c.prior.c}};
    j["dataset"] = {{"layouts", c.layouts},
                    {"samples", c.samples},
                    {"max_resamples", c.max_resamples},
                    {"seed", c.stage_seed("dataset")}};
    const auto arch = c.architecture();
    j["train"] = {{"alpha", c.train.alpha},         {"tol", c.train.tol},
                  {"max_epochs", c.train.max_epochs}, {"patience", c.train.patience},
                  {"hidden1", arch.hidden1},          {"hidden2", arch.hidden2},
                  {"seed", c.stage_seed("train")}};
    j["metrics"] = {{"mu_samples", c.mu_samples},
                    {"kappa_samples", c.kappa_samples},
                    {"delta_pairs", c.delta_pairs},
                    {"seed", c.stage_seed("metrics")}};
    const auto& r = c.reconstruction;
    j["reconstruction"] = {
        {"enabled", r.enabled},
        {"h_fine", r.h_fine},
        {"h_coarse", r.h_coarse},
        {"noise_levels", r.noise_levels},
        {"seed", c.stage_seed("reconstruction")},
        {"ellipse",
         {{"center", {r.ellipse.center.x, r.ellipse.center.y}},
          {"semi_axes", {r.ellipse.semi_axes.x, r.ellipse.semi_axes.y}},
          {"angle", r.ellipse.angle},
          {"background", r.ellipse.background},
          {"inclusion", r.ellipse.inclusion}}},
        {"solver",
         {{"max_iterations", r.options.max_iterations},
          {"rel_tol", r.options.rel_tol},
          {"barrier_cycles", r.options.barrier_cycles},
          {"barrier_initial", r.options.barrier_initial},
          {"barrier_decay", r.options.barrier_decay}}}};
    return j;
}

inline std::string config_hash(const PipelineConfig& c) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(config_to_json(c).dump())));
    return buf;
}

}  // namespace eitopt

#endif  // EITOPT_CONFIG_HPP
