#include "phasemap/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "phasemap/errors.hpp"
#include "phasemap/output.hpp"

namespace phasemap {

using nlohmann::json;

namespace {

void only_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
    if (!obj.is_object()) throw InvalidConfig(where + " must be an object");
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [key, _] : obj.items())
        if (!ok.count(key)) throw InvalidConfig("unknown field '" + key + "' in " + where);
}

Rational rational_field(const json& v, const std::string& name) {
    try {
        if (v.is_string()) return Rational::parse(v.get<std::string>());
        if (v.is_number_integer()) return Rational(v.get<std::int64_t>());
        if (v.is_number()) return Rational::from_double(v.get<double>());
    } catch (const std::exception& e) {
        throw InvalidConfig(name + ": " + e.what());
    }
    throw InvalidConfig(name + " must be a number or a \"p/q\" string");
}

template <class T>
T typed(const json& v, const std::string& name) {
    try {
        return v.get<T>();
    } catch (const json::exception&) {
        throw InvalidConfig(name + " has the wrong type");
    }
}

PowerLaw parse_law(const json& v, const std::string& name) {
    if (v.is_number() || v.is_string()) {
        const Rational c = rational_field(v, name);
        if (c.sign() <= 0) throw InvalidConfig(name + " must be positive");
        return PowerLaw::constant(c * c);
    }
    only_keys(v, name, {"coef", "coef_sq", "exp", "offset", "text"});
    if (v.contains("coef") && v.contains("coef_sq"))
        throw InvalidConfig(name + " sets both coef and coef_sq");
    PowerLaw law;
    if (v.contains("coef")) {
        const Rational c = rational_field(v["coef"], name + ".coef");
        law.coef_sq = c * c;
    }
    if (v.contains("coef_sq")) law.coef_sq = rational_field(v["coef_sq"], name + ".coef_sq");
    if (v.contains("exp")) law.exponent = rational_field(v["exp"], name + ".exp");
    if (v.contains("offset")) law.offset = typed<std::int64_t>(v["offset"], name + ".offset");
    if (law.coef_sq.sign() <= 0) throw InvalidConfig(name + " must have a positive coefficient");
    return law;
}

ModelSpec parse_model(const json& v, const std::string& where) {
    only_keys(v, where, {"preset", "gamma2", "gamma3", "alpha_exp", "B", "laws", "label"});
    ModelSpec spec;
    if (v.contains("label")) spec.label = typed<std::string>(v["label"], where + ".label");
    const int forms = v.contains("preset") + (v.contains("gamma2") || v.contains("gamma3")) + v.contains("laws");
    if (forms != 1)
        throw InvalidConfig(where + " needs exactly one of preset, gamma2/gamma3, laws");
    if (v.contains("preset")) {
        if (v.contains("alpha_exp") || v.contains("B"))
            throw InvalidConfig(where + ": alpha_exp and B do not apply to a preset");
        try {
            spec.source = parse_preset(typed<std::string>(v["preset"], where + ".preset"));
        } catch (const InvalidConfig&) {
            throw;
        } catch (const std::exception& e) {
            throw InvalidConfig(e.what());
        }
    } else if (v.contains("laws")) {
        if (v.contains("alpha_exp")) throw InvalidConfig(where + ": alpha_exp does not apply to laws");
        const json& laws = v["laws"];
        only_keys(laws, where + ".laws", {"alpha", "beta1", "beta2", "beta3"});
        ExplicitLaws e;
        auto get = [&](const char* key) {
            return laws.contains(key) ? parse_law(laws[key], where + ".laws." + key) : PowerLaw{};
        };
        e.alpha = get("alpha");
        e.beta1 = get("beta1");
        e.beta2 = get("beta2");
        e.beta3 = get("beta3");
        if (v.contains("B")) e.B = rational_field(v["B"], where + ".B");
        spec.source = e;
    } else {
        if (!v.contains("gamma2") || !v.contains("gamma3"))
            throw InvalidConfig(where + " needs both gamma2 and gamma3");
        GammaPoint p;
        p.gamma2 = rational_field(v["gamma2"], where + ".gamma2");
        p.gamma3 = rational_field(v["gamma3"], where + ".gamma3");
        if (v.contains("alpha_exp")) p.alpha_exponent = rational_field(v["alpha_exp"], where + ".alpha_exp");
        if (v.contains("B")) p.B = rational_field(v["B"], where + ".B");
        if (p.B.sign() <= 0) throw InvalidConfig(where + ".B must be positive");
        spec.source = p;
    }
    return spec;
}

std::vector<double> parse_grid(const json& v, const std::string& name) {
    if (v.is_array()) {
        auto out = typed<std::vector<double>>(v, name);
        if (out.empty()) throw InvalidConfig(name + " is empty");
        return out;
    }
    only_keys(v, name, {"start", "stop", "step"});
    if (!v.contains("start") || !v.contains("stop") || !v.contains("step"))
        throw InvalidConfig(name + " range needs start, stop and step");
    const double start = typed<double>(v["start"], name + ".start");
    const double stop = typed<double>(v["stop"], name + ".stop");
    const double step = typed<double>(v["step"], name + ".step");
    if (!(step > 0) || stop < start) throw InvalidConfig(name + " range is empty");
    const auto n = static_cast<std::int64_t>(std::floor((stop - start) / step + 1e-9)) + 1;
    std::vector<double> out;
    // Computed from integer multiples and rounded to 12 decimals so that
    // 0.3*k prints as 0.9, not 0.89999999999999991.
    for (std::int64_t k = 0; k < n; ++k) out.push_back(std::round((start + k * step) * 1e12) / 1e12);
    return out;
}

std::vector<double> range(double start, double step, int n) {
    std::vector<double> out;
    for (int k = 0; k < n; ++k) out.push_back(std::round((start + k * step) * 1e12) / 1e12);
    return out;
}

std::filesystem::path resolve_path(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path path(p);
    if (path.is_relative() && !base.empty()) return base / path;
    return path;
}

json rational_json(const Rational& r) {
    if (r.den() == 1) return r.num();
    return r.str();
}

json model_json(const ModelSpec& spec) {
    json out = json::object();
    std::visit(
        [&](const auto& s) {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, Preset>) {
                out["preset"] = std::string(preset_name(s));
            } else if constexpr (std::is_same_v<T, GammaPoint>) {
                out["gamma2"] = rational_json(s.gamma2);
                out["gamma3"] = rational_json(s.gamma3);
                out["alpha_exp"] = rational_json(s.alpha_exponent);
                out["B"] = rational_json(s.B);
            } else {
                out["laws"] = {{"alpha", to_json(s.alpha)},
                               {"beta1", to_json(s.beta1)},
                               {"beta2", to_json(s.beta2)},
                               {"beta3", to_json(s.beta3)}};
                if (s.B) out["B"] = rational_json(*s.B);
            }
        },
        spec.source);
    if (!spec.label.empty()) out["label"] = spec.label;
    return out;
}

}  // namespace

HyperConfig ModelSpec::resolve(std::int64_t m, std::int64_t d, std::int64_t d_out, bool layer2_bias) const {
    HyperConfig config = std::visit(
        [&](const auto& s) -> HyperConfig {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, Preset>) {
                return preset(s, m, d, d_out);
            } else if constexpr (std::is_same_v<T, GammaPoint>) {
                return config_from_gammas(s, m, d, d_out);
            } else {
                HyperConfig c;
                c.alpha = s.alpha;
                c.beta1 = s.beta1;
                c.beta2 = s.beta2;
                c.beta3 = s.beta3;
                c.B = s.B;
                c.m = m;
                c.d = d;
                c.d_out = d_out;
                c.label = "alpha=" + s.alpha.str() + ",beta1=" + s.beta1.str() + ",beta2=" + s.beta2.str() +
                          ",beta3=" + s.beta3.str();
                return c;
            }
        },
        source);
    config.layer2_bias = layer2_bias;
    if (!label.empty()) config.label = label;
    try {
        config.validate();
    } catch (const InvalidConfig&) {
        throw;
    } catch (const std::exception& e) {
        throw InvalidConfig(e.what());
    }
    return config;
}

Dataset DataSpec::load() const {
    if (const auto* s = std::get_if<SyntheticSpec>(&source)) return synthetic_1d(*s);
    const auto& idx = std::get<IdxSource>(source);
    return load_idx(idx.images, idx.labels, idx.limit);
}

std::vector<std::int64_t> width_preset(const std::string& name) {
    if (name == "desk") return {100, 500, 1000, 2000, 5000};
    if (name == "large") return {100, 1000, 2000, 5000, 10000};
    if (name == "large2500") return {100, 1000, 2500, 5000, 10000};
    throw InvalidConfig("unknown width list '" + name + "' (expected desk, large or large2500)");
}

std::vector<double> default_gamma2_grid() { return range(0.0, 0.25, 7); }
std::vector<double> default_gamma3_grid() { return range(0.0, 0.3, 11); }

RunConfig parse_config(const json& doc, const std::filesystem::path& base_dir) {
    only_keys(doc, "config",
              {"model", "group", "layer2_bias", "data", "width", "widths", "seeds", "schedule", "grid"});
    RunConfig cfg;
    cfg.gamma2_grid = default_gamma2_grid();
    cfg.gamma3_grid = default_gamma3_grid();

    if (doc.contains("model")) cfg.model = parse_model(doc["model"], "model");
    if (doc.contains("group")) {
        const json& g = doc["group"];
        if (!g.is_array() || g.empty()) throw InvalidConfig("group must be a non-empty array");
        for (std::size_t i = 0; i < g.size(); ++i)
            cfg.group.push_back(parse_model(g[i], "group[" + std::to_string(i) + "]"));
    }
    if (doc.contains("layer2_bias")) cfg.layer2_bias = typed<bool>(doc["layer2_bias"], "layer2_bias");

    if (doc.contains("data")) {
        const json& d = doc["data"];
        only_keys(d, "data", {"synthetic", "idx"});
        if (d.contains("synthetic") == d.contains("idx"))
            throw InvalidConfig("data needs exactly one of synthetic, idx");
        if (d.contains("synthetic")) {
            const json& pts = d["synthetic"];
            SyntheticSpec spec;
            if (pts.is_string()) {
                if (pts.get<std::string>() != "default")
                    throw InvalidConfig("data.synthetic must be \"default\" or a list of [x, y]");
                spec = SyntheticSpec::defaults();
            } else {
                spec.points = typed<std::vector<std::pair<double, double>>>(pts, "data.synthetic");
            }
            try {
                spec.validate();
            } catch (const InvalidConfig&) {
                throw;
            } catch (const std::exception& e) {
                throw InvalidConfig(e.what());
            }
            cfg.data.source = spec;
        } else {
            const json& i = d["idx"];
            only_keys(i, "data.idx", {"images", "labels", "limit"});
            if (!i.contains("images") || !i.contains("labels"))
                throw InvalidConfig("data.idx needs images and labels");
            IdxSource src;
            src.images = resolve_path(base_dir, typed<std::string>(i["images"], "data.idx.images"));
            src.labels = resolve_path(base_dir, typed<std::string>(i["labels"], "data.idx.labels"));
            if (i.contains("limit")) src.limit = typed<std::int64_t>(i["limit"], "data.idx.limit");
            if (src.limit < 1) throw InvalidConfig("data.idx.limit must be at least 1");
            cfg.data.source = src;
        }
    }

    if (doc.contains("width")) {
        cfg.width = typed<std::int64_t>(doc["width"], "width");
        if (cfg.width < 1) throw InvalidConfig("width must be positive");
    }
    if (doc.contains("widths")) {
        const json& w = doc["widths"];
        cfg.widths = w.is_string() ? width_preset(w.get<std::string>())
                                   : typed<std::vector<std::int64_t>>(w, "widths");
        if (cfg.widths.size() < 2) throw InvalidConfig("widths needs at least two entries");
        for (std::size_t k = 0; k < cfg.widths.size(); ++k)
            if (cfg.widths[k] < 1 || (k > 0 && cfg.widths[k] <= cfg.widths[k - 1]))
                throw InvalidConfig("widths must be positive and strictly increasing");
    }
    if (doc.contains("seeds")) {
        const json& s = doc["seeds"];
        if (s.is_object()) {
            only_keys(s, "seeds", {"count", "first"});
            const auto count = typed<std::int64_t>(s.value("count", json(8)), "seeds.count");
            const auto first = typed<std::uint64_t>(s.value("first", json(0)), "seeds.first");
            if (count < 1) throw InvalidConfig("seeds.count must be positive");
            cfg.seeds.clear();
            for (std::int64_t k = 0; k < count; ++k) cfg.seeds.push_back(first + static_cast<std::uint64_t>(k));
        } else {
            cfg.seeds = typed<std::vector<std::uint64_t>>(s, "seeds");
            if (cfg.seeds.empty()) throw InvalidConfig("seeds is empty");
            if (std::set<std::uint64_t>(cfg.seeds.begin(), cfg.seeds.end()).size() != cfg.seeds.size())
                throw InvalidConfig("seeds contains duplicates");
        }
    }
    if (doc.contains("schedule")) {
        const json& s = doc["schedule"];
        only_keys(s, "schedule",
                  {"normalized_lr", "max_steps", "rel_loss_target", "divergence_cap", "backtracking", "lr_growth"});
        auto& out = cfg.schedule;
        if (s.contains("normalized_lr")) out.normalized_lr = typed<double>(s["normalized_lr"], "schedule.normalized_lr");
        if (s.contains("max_steps")) out.max_steps = typed<std::int64_t>(s["max_steps"], "schedule.max_steps");
        if (s.contains("rel_loss_target"))
            out.rel_loss_target = typed<double>(s["rel_loss_target"], "schedule.rel_loss_target");
        if (s.contains("divergence_cap"))
            out.divergence_cap = typed<double>(s["divergence_cap"], "schedule.divergence_cap");
        if (s.contains("backtracking")) out.backtracking = typed<bool>(s["backtracking"], "schedule.backtracking");
        if (s.contains("lr_growth")) out.lr_growth = typed<double>(s["lr_growth"], "schedule.lr_growth");
        if (!(out.normalized_lr > 0)) throw InvalidConfig("schedule.normalized_lr must be positive");
        if (out.max_steps < 0) throw InvalidConfig("schedule.max_steps must be non-negative");
        if (!(out.rel_loss_target >= 0)) throw InvalidConfig("schedule.rel_loss_target must be non-negative");
        if (!(out.divergence_cap > 1)) throw InvalidConfig("schedule.divergence_cap must exceed 1");
        if (!(out.lr_growth >= 1)) throw InvalidConfig("schedule.lr_growth must be at least 1");
    }
    if (doc.contains("grid")) {
        const json& g = doc["grid"];
        only_keys(g, "grid", {"gamma2", "gamma3"});
        if (g.contains("gamma2")) cfg.gamma2_grid = parse_grid(g["gamma2"], "grid.gamma2");
        if (g.contains("gamma3")) cfg.gamma3_grid = parse_grid(g["gamma3"], "grid.gamma3");
    }
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InvalidConfig("cannot open config file " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw InvalidConfig(path.string() + ": " + e.what());
    }
    return parse_config(doc, path.parent_path());
}

json to_json(const PowerLaw& law) {
    return {{"coef_sq", rational_json(law.coef_sq)},
            {"exp", rational_json(law.exponent)},
            {"offset", law.offset},
            {"text", law.str()}};
}

json to_json(const HyperConfig& c) {
    const ScalingSummary s = kappas(c);
    json out = {{"label", c.label},
                {"m", c.m},
                {"d", c.d},
                {"d_out", c.d_out},
                {"layer2_bias", c.layer2_bias},
                {"alpha", to_json(c.alpha)},
                {"beta1", to_json(c.beta1)},
                {"beta2", to_json(c.beta2)},
                {"beta3", to_json(c.beta3)},
                {"kappa1", s.kappa1_expr.str()},
                {"kappa2", s.kappa2_expr.str()},
                {"kappa3", s.kappa3_expr.str()},
                {"gamma2", s.gamma2.str()},
                {"gamma3", s.gamma3.str()},
                {"time_factor", s.time_factor}};
    if (c.B) out["B"] = c.B->str();
    return out;
}

json to_json(const ExperimentSchedule& s) {
    return {{"normalized_lr", s.normalized_lr},   {"max_steps", s.max_steps},
            {"rel_loss_target", s.rel_loss_target}, {"divergence_cap", s.divergence_cap},
            {"backtracking", s.backtracking},       {"lr_growth", s.lr_growth}};
}

json to_json(const RunConfig& c) {
    json out;
    out["model"] = model_json(c.model);
    if (!c.group.empty()) {
        out["group"] = json::array();
        for (const auto& g : c.group) out["group"].push_back(model_json(g));
    }
    out["layer2_bias"] = c.layer2_bias;
    if (const auto* s = std::get_if<SyntheticSpec>(&c.data.source)) {
        out["data"]["synthetic"] = s->points;
    } else {
        const auto& idx = std::get<IdxSource>(c.data.source);
        out["data"]["idx"] = {{"images", idx.images.string()}, {"labels", idx.labels.string()}, {"limit", idx.limit}};
    }
    out["width"] = c.width;
    out["widths"] = c.widths;
    out["seeds"] = c.seeds;
    out["schedule"] = to_json(c.schedule);
    out["grid"] = {{"gamma2", c.gamma2_grid}, {"gamma3", c.gamma3_grid}};
    return out;
}

std::string config_hash(const RunConfig& config) { return fnv1a_hex(to_json(config).dump()); }

}  // namespace phasemap
