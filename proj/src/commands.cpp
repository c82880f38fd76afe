#include "phasemap/commands.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"

#include "phasemap/config.hpp"
#include "phasemap/errors.hpp"
#include "phasemap/output.hpp"
#include "phasemap/svg.hpp"

namespace phasemap {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr char kCosineMagic[8] = {'P', 'H', 'M', 'A', 'P', 'C', 'M', '1'};

template <class T>
void put(std::ostream& os, T v) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
    os.write(reinterpret_cast<const char*>(b), sizeof(T));
}

template <class T>
T get(std::istream& is, const fs::path& path) {
    unsigned char b[sizeof(T)];
    if (!is.read(reinterpret_cast<char*>(b), sizeof(T))) throw FormatError(path.string() + " is truncated");
    if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
    T v;
    std::memcpy(&v, b, sizeof(T));
    return v;
}

int default_workers() {
    if (const char* env = std::getenv(kWorkersEnv)) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v > 0) return static_cast<int>(v);
        throw InvalidConfig(std::string(kWorkersEnv) + " must be a positive integer, got '" + env + "'");
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

std::string data_hash(const Dataset& data) {
    std::string bytes;
    for (const Matrix* m : {&data.x, &data.y}) {
        bytes += std::to_string(m->rows()) + "x" + std::to_string(m->cols()) + ";";
        for (Eigen::Index i = 0; i < m->rows(); ++i)
            for (Eigen::Index j = 0; j < m->cols(); ++j) bytes += format_double((*m)(i, j)) + ",";
    }
    return fnv1a_hex(bytes);
}

// Flags shared by the config-driven commands. Unset flags leave the file's
// value alone.
struct Overrides {
    std::string config_path;
    std::string out_dir;
    std::optional<std::int64_t> width;
    std::vector<std::int64_t> widths;
    std::vector<std::uint64_t> seeds;
    std::optional<std::int64_t> max_steps;
    std::optional<double> lr;
    std::optional<int> workers;
    bool fresh = false;

    void attach(CLI::App* cmd, bool sweeping) {
        cmd->add_option("config", config_path, "JSON config file")->required();
        cmd->add_option("-o,--out", out_dir, "output directory")->required();
        cmd->add_option("--max-steps", max_steps, "override schedule.max_steps");
        cmd->add_option("--lr", lr, "override schedule.normalized_lr");
        if (sweeping) {
            cmd->add_option("--widths", widths, "override the width list")->delimiter(',');
            cmd->add_option("--seeds", seeds, "override the seed list")->delimiter(',');
            cmd->add_option("-j,--workers", workers, std::string("worker threads (default $") + kWorkersEnv +
                                                         " or all cores)");
            cmd->add_flag("--fresh", fresh, "discard runs stored by an earlier, different config");
        } else {
            cmd->add_option("--width", width, "override width");
            cmd->add_option("--seed", seeds, "override the seed")->expected(1);
        }
    }

    RunConfig load() const {
        RunConfig cfg = load_config(config_path);
        if (width) cfg.width = *width;
        if (!widths.empty()) cfg.widths = widths;
        if (!seeds.empty()) cfg.seeds = seeds;
        if (max_steps) cfg.schedule.max_steps = *max_steps;
        if (lr) cfg.schedule.normalized_lr = *lr;
        // Re-validate through the parser so overrides obey the file rules.
        return parse_config(to_json(cfg));
    }

    int worker_count() const {
        if (workers) {
            if (*workers < 1) throw InvalidConfig("--workers must be positive");
            return *workers;
        }
        return default_workers();
    }
};

struct Manifest {
    std::string command;
    json config;
    std::vector<json> resolved;
    std::string hash;
};

Manifest make_manifest(const std::string& command, const RunConfig& cfg, const Dataset& data) {
    Manifest m;
    m.command = command;
    m.config = to_json(cfg);
    m.hash = fnv1a_hex(command + "\n" + m.config.dump() + "\n" + data_hash(data) + "\n" + kVersion);
    return m;
}

// Creates the output directory and writes manifest.json before any run
// starts. Stored runs from a different configuration are never reused.
void begin_output(const fs::path& dir, const Manifest& m, bool fresh) {
    fs::create_directories(dir);
    const fs::path manifest = dir / "manifest.json";
    const fs::path runs = dir / "runs.csv";
    if (fs::exists(runs)) {
        std::string previous;
        if (fs::exists(manifest)) {
            try {
                std::ifstream in(manifest);
                previous = json::parse(in).value("hash", "");
            } catch (const json::exception&) {
            }
        }
        if (previous != m.hash) {
            if (!fresh)
                throw InvalidConfig(dir.string() +
                                    " holds runs from a different configuration; pass --fresh to discard them");
            fs::remove(runs);
        }
    }
    json j = {{"software", "phasemap"},
              {"version", kVersion},
              {"command", m.command},
              {"hash", m.hash},
              {"output_dir", dir.string()},
              {"config", m.config},
              {"seeds", m.config["seeds"]},
              {"widths", m.config["widths"]},
              {"schedule", m.config["schedule"]}};
    if (!m.resolved.empty()) j["resolved"] = m.resolved;
    write_json(manifest, j);
}

void echo(std::ostream& out, const Manifest& m) {
    json j = {{"config", m.config}};
    if (!m.resolved.empty()) j["resolved"] = m.resolved;
    out << j.dump(2) << "\n";
}

void write_runs(const fs::path& path, std::vector<RunRow> rows) {
    std::sort(rows.begin(), rows.end(), [](const RunRow& a, const RunRow& b) { return key_of(a) < key_of(b); });
    CsvWriter csv(path);
    csv.row(run_csv_header());
    for (const auto& r : rows) csv.row(run_csv_cells(r));
}

json fit_json(const std::optional<SlopeFit>& f) {
    if (!f) return nullptr;
    return {{"slope", f->slope},
            {"intercept", f->intercept},
            {"r_squared", f->r_squared},
            {"n_points", f->n_points},
            {"n_excluded", f->n_excluded}};
}

std::string cell_or_nan(const std::optional<SlopeFit>& f, double SlopeFit::*field) {
    return format_double(f ? (*f).*field : std::nan(""));
}

HyperConfig resolve_model(const ModelSpec& spec, const RunConfig& cfg, std::int64_t m, const Dataset& data) {
    return spec.resolve(m, data.input_dim(), data.output_dim(), cfg.layer2_bias);
}

void write_scatter_csv(const fs::path& path, const Matrix& init, const Matrix& final) {
    CsvWriter csv(path);
    std::vector<std::string> header{"k"};
    for (Eigen::Index j = 0; j < init.cols(); ++j) header.push_back("c" + std::to_string(j));
    header.push_back("phase");
    csv.row(header);
    for (const auto& [w, phase] : {std::pair{&init, "init"}, std::pair{&final, "final"}})
        for (Eigen::Index i = 0; i < w->rows(); ++i) {
            std::vector<std::string> row{std::to_string(i)};
            for (Eigen::Index j = 0; j < w->cols(); ++j) row.push_back(format_double((*w)(i, j)));
            row.push_back(phase);
            csv.row(row);
        }
}

// ---------------------------------------------------------------- preset

int cmd_preset(const std::string& name, std::int64_t m, std::int64_t d, std::int64_t d_out, bool as_json,
               std::ostream& out) {
    const HyperConfig c = preset(name, m, d, d_out);
    const ScalingSummary s = kappas(c);
    if (as_json) {
        out << to_json(c).dump(2) << "\n";
        return exit_ok;
    }
    out << "preset  " << preset_name(parse_preset(name)) << "  (m=" << m << ", d=" << d << ", d_out=" << d_out
        << ")\n";
    out << "alpha   " << c.alpha.str() << "\n";
    out << "beta1   " << c.beta1.str() << "\n";
    out << "beta2   " << c.beta2.str() << "\n";
    out << "beta3   " << c.beta3.str() << "\n";
    out << "kappa1  " << s.kappa1_expr.str() << " = " << format_double(s.kappa1) << "\n";
    out << "kappa2  " << s.kappa2_expr.str() << " = " << format_double(s.kappa2) << "\n";
    out << "kappa3  " << s.kappa3_expr.str() << " = " << format_double(s.kappa3) << "\n";
    out << "gamma2  " << s.gamma2.str() << "\n";
    out << "gamma3  " << s.gamma3.str() << "\n";
    return exit_ok;
}

// ----------------------------------------------------------------- train

int cmd_train(const Overrides& o, std::ostream& out, std::ostream& err) {
    const RunConfig cfg = o.load();
    const std::uint64_t seed = cfg.seeds.front();
    const Dataset data = cfg.data.load();
    const HyperConfig hc = resolve_model(cfg.model, cfg, cfg.width, data);

    Manifest manifest = make_manifest("train", cfg, data);
    manifest.resolved.push_back(to_json(hc));
    const fs::path dir(o.out_dir);
    begin_output(dir, manifest, true);
    echo(out, manifest);

    const Schedule schedule = cfg.schedule.resolve(hc);
    const Network init = init_network(hc, seed);
    save_checkpoint(dir / "checkpoint_init.bin", init, {seed, manifest.hash});
    const TrainRecord rec = train(init, data, schedule);
    save_checkpoint(dir / "checkpoint_final.bin", rec.final, {seed, manifest.hash});

    const bool diverged = rec.stop_reason == StopReason::diverged;
    write_json(dir / "summary.json", {{"seed", seed},
                                      {"stop_reason", std::string(to_string(rec.stop_reason))},
                                      {"diverged", diverged},
                                      {"steps_taken", rec.steps_taken},
                                      {"initial_loss", rec.initial_loss},
                                      {"final_loss", rec.final_loss},
                                      {"initial_lr", rec.initial_lr},
                                      {"final_lr", rec.final_lr},
                                      {"rejected_steps", rec.rejected_steps},
                                      {"seconds", rec.seconds}});
    {
        CsvWriter csv(dir / "loss.csv");
        csv.row({"step", "loss"});
        for (const auto& p : rec.loss_curve) csv.row({std::to_string(p.step), format_double(p.loss)});
    }

    json metrics = {{"m", hc.m}};
    try {
        const RegimeMetrics rm = regime_metrics(rec);
        metrics["rd_w1"] = rm.rd_w1;
        metrics["rd_w2"] = rm.rd_w2;
        metrics["zeta"] = rm.zeta;
        metrics["zeta_init"] = rm.zeta_init;
        write_scatter_csv(dir / "scatter_w1.csv", rm.w1_init, rm.w1_final);
        if (rm.w1_init.cols() >= 2) {
            write_text(dir / "scatter_w1.svg",
                       svg::render_scatter("W1 rows, " + hc.label, rm.w1_init, rm.w1_final));
            if (rm.w1_init.cols() == 2) {
                metrics["circular_variance_init"] = circular_variance(rm.w1_init);
                metrics["circular_variance_final"] = circular_variance(rm.w1_final);
            }
        }
        if (hc.m >= 2) {
            const CosineMatrix cm = cosine_matrix(rec.final.w2);
            metrics["m_selected"] = cm.rows.size();
            save_cosine_matrix(dir / "cosine_w2.bin", cm);
            write_text(dir / "cosine_w2.svg", svg::render_matrix("cos(W2 rows), " + hc.label, cm.values));
        }
    } catch (const UndefinedMetric& e) {
        metrics["error"] = e.what();
        err << "warning: " << e.what() << "\n";
    }
    write_json(dir / "metrics.json", metrics);

    if (diverged) err << "warning: training diverged after " << rec.steps_taken << " steps\n";
    out << "stop_reason=" << to_string(rec.stop_reason) << " steps=" << rec.steps_taken
        << " final_loss=" << format_double(rec.final_loss);
    if (metrics.contains("rd_w1"))
        out << " rd_w1=" << format_double(metrics["rd_w1"].get<double>())
            << " rd_w2=" << format_double(metrics["rd_w2"].get<double>())
            << " zeta=" << format_double(metrics["zeta"].get<double>());
    out << "\n";
    return exit_ok;
}

// ----------------------------------------------------------------- sweep

int cmd_sweep(const Overrides& o, std::ostream& out, std::ostream& err) {
    const RunConfig cfg = o.load();
    const Dataset data = cfg.data.load();
    const HyperConfig base = resolve_model(cfg.model, cfg, cfg.widths.front(), data);
    Manifest manifest = make_manifest("sweep", cfg, data);
    manifest.resolved.push_back(to_json(base));
    const fs::path dir(o.out_dir);
    begin_output(dir, manifest, o.fresh);
    echo(out, manifest);

    SweepResult sweep;
    {
        RunStore store(dir / "runs.csv");
        try {
            sweep = width_sweep(base, cfg.widths, cfg.seeds, data, cfg.schedule, {o.worker_count(), &store});
        } catch (const SweepFailed&) {
            write_runs(dir / "runs.csv", store.rows());
            throw;
        }
    }
    write_runs(dir / "runs.csv", sweep.rows);
    const SlopeFit s1 = fit_layer(sweep.rows, Layer::W1);
    const SlopeFit s2 = fit_layer(sweep.rows, Layer::W2);
    const auto diverged = std::count_if(sweep.rows.begin(), sweep.rows.end(),
                                        [](const RunRow& r) { return !r.usable(); });
    write_json(dir / "fit.json", {{"gamma2", sweep.gamma2},
                                  {"gamma3", sweep.gamma3},
                                  {"s_w1", fit_json(s1)},
                                  {"s_w2", fit_json(s2)},
                                  {"unusable_runs", diverged}});
    if (diverged) err << "warning: " << diverged << " runs diverged and were left out of the fits\n";
    out << "S_W1=" << format_double(s1.slope) << " (r2=" << format_double(s1.r_squared) << ")  S_W2="
        << format_double(s2.slope) << " (r2=" << format_double(s2.r_squared) << ")\n";
    return exit_ok;
}

// ----------------------------------------------------------------- phase

svg::Heatmap heatmap(const PhaseScan& scan, const std::string& title,
                     const std::function<double(const PhaseCell&)>& value) {
    svg::Heatmap map;
    map.title = title;
    map.xs = scan.gamma2_grid;
    map.ys = scan.gamma3_grid;
    map.values.assign(map.xs.size(), std::vector<double>(map.ys.size()));
    for (std::size_t i2 = 0; i2 < map.xs.size(); ++i2)
        for (std::size_t i3 = 0; i3 < map.ys.size(); ++i3) map.values[i2][i3] = value(scan.cell(i2, i3));
    return map;
}

void add_stars(svg::Heatmap& map, const PhaseScan& scan, Layer layer) {
    for (const auto& s : scan.stars)
        if (s.layer == layer)
            map.stars.push_back(s.along == Axis::gamma3 ? svg::Marker{s.fixed, s.star}
                                                        : svg::Marker{s.star, s.fixed});
}

int cmd_phase(const Overrides& o, std::optional<double> alpha_exp, std::ostream& out, std::ostream& err) {
    const RunConfig cfg = o.load();
    const Dataset data = cfg.data.load();
    double a = 0.0;
    if (const auto* p = std::get_if<GammaPoint>(&cfg.model.source)) a = p->alpha_exponent.to_double();
    if (alpha_exp) a = *alpha_exp;

    Manifest manifest = make_manifest("phase", cfg, data);
    manifest.config["alpha_exp"] = a;
    manifest.hash = fnv1a_hex(manifest.hash + format_double(a));
    const fs::path dir(o.out_dir);
    begin_output(dir, manifest, o.fresh);
    echo(out, manifest);

    PhaseScan scan;
    {
        RunStore store(dir / "runs.csv");
        scan = phase_scan(cfg.gamma2_grid, cfg.gamma3_grid, cfg.widths, cfg.seeds, data, cfg.schedule,
                          {o.worker_count(), &store}, a);
    }
    write_runs(dir / "runs.csv", scan.runs);

    {
        CsvWriter csv(dir / "cells.csv");
        csv.row({"gamma2", "gamma3", "s_w1", "r2_w1", "s_w2", "r2_w2", "zeta_mean", "n_seeds", "error"});
        for (const auto& c : scan.cells)
            csv.row({format_double(c.gamma2), format_double(c.gamma3), cell_or_nan(c.s_w1, &SlopeFit::slope),
                     cell_or_nan(c.s_w1, &SlopeFit::r_squared), cell_or_nan(c.s_w2, &SlopeFit::slope),
                     cell_or_nan(c.s_w2, &SlopeFit::r_squared), format_double(c.zeta_mean),
                     std::to_string(c.n_seeds), c.error});
    }
    {
        CsvWriter csv(dir / "stars.csv");
        csv.row({"layer", "along", "fixed", "star"});
        for (const auto& s : scan.stars)
            csv.row({s.layer == Layer::W1 ? "W1" : "W2", s.along == Axis::gamma2 ? "gamma2" : "gamma3",
                     format_double(s.fixed), format_double(s.star)});
    }
    auto slope = [](const std::optional<SlopeFit>& f) { return f ? f->slope : std::nan(""); };
    svg::Heatmap h1 = heatmap(scan, "S_W1", [&](const PhaseCell& c) { return slope(c.s_w1); });
    add_stars(h1, scan, Layer::W1);
    svg::Heatmap h2 = heatmap(scan, "S_W2", [&](const PhaseCell& c) { return slope(c.s_w2); });
    add_stars(h2, scan, Layer::W2);
    svg::Heatmap hz = heatmap(scan, "zeta(W2) at the largest width", [](const PhaseCell& c) { return c.zeta_mean; });
    hz.scale = svg::ColorScale::sequential;
    write_text(dir / "s_w1.svg", svg::render_heatmap(h1));
    write_text(dir / "s_w2.svg", svg::render_heatmap(h2));
    write_text(dir / "zeta.svg", svg::render_heatmap(hz));

    const auto missing = std::count_if(scan.cells.begin(), scan.cells.end(),
                                       [](const PhaseCell& c) { return !c.s_w1 || !c.s_w2; });
    for (const auto& c : scan.cells)
        if (!c.error.empty())
            err << "cell (" << format_double(c.gamma2) << ", " << format_double(c.gamma3) << "): " << c.error << "\n";
    out << scan.cells.size() << " cells, " << scan.runs.size() << " runs, " << missing << " missing cells, "
        << scan.stars.size() << " boundary stars\n";
    if (static_cast<std::size_t>(missing) == scan.cells.size()) return exit_all_failed;
    return exit_ok;
}

// -------------------------------------------------------------- condense

int cmd_condense(const std::string& checkpoint, const std::string& out_dir, std::ostream& out) {
    CheckpointMeta meta;
    const Network net = load_checkpoint(checkpoint, &meta);
    if (net.width() < 2) throw PreconditionError("condensation needs width >= 2");
    const CosineMatrix cm = cosine_matrix(net.w2);
    const double zeta = condensation_index(net.w2);
    // W1 may hold all-zero rows (e.g. a hand-built network); report null then.
    std::optional<double> zeta_w1;
    try {
        zeta_w1 = condensation_index(net.w1);
    } catch (const UndefinedMetric&) {
    }
    const fs::path dir(out_dir);
    fs::create_directories(dir);
    save_cosine_matrix(dir / "cosine_w2.bin", cm);
    write_text(dir / "cosine_w2.svg", svg::render_matrix("cos(W2 rows), m=" + std::to_string(net.width()), cm.values));
    write_json(dir / "condense.json", {{"checkpoint", checkpoint},
                                       {"seed", meta.seed},
                                       {"config_hash", meta.config_hash},
                                       {"m", net.width()},
                                       {"m_selected", cm.rows.size()},
                                       {"zeta", zeta},
                                       {"zeta_w1", zeta_w1 ? json(*zeta_w1) : json()}});
    out << "zeta=" << format_double(zeta) << " zeta_w1=" << (zeta_w1 ? format_double(*zeta_w1) : "n/a") << " m=" << net.width()
        << " m_selected=" << cm.rows.size() << "\n";
    return exit_ok;
}

// ---------------------------------------------------------------- report

int cmd_report(const Overrides& o, std::ostream& out, std::ostream& err) {
    const RunConfig cfg = o.load();
    if (cfg.group.empty()) throw InvalidConfig("report needs a 'group' list of models");
    const Dataset data = cfg.data.load();
    std::vector<HyperConfig> configs;
    for (const auto& spec : cfg.group) configs.push_back(resolve_model(spec, cfg, cfg.widths.front(), data));
    for (std::size_t i = 0; i < configs.size(); ++i)
        for (std::size_t j = 0; j < i; ++j)
            if (configs[i].label == configs[j].label)
                throw InvalidConfig("group entries " + std::to_string(j) + " and " + std::to_string(i) +
                                    " share the label '" + configs[i].label + "'");

    Manifest manifest = make_manifest("report", cfg, data);
    for (const auto& c : configs) manifest.resolved.push_back(to_json(c));
    const fs::path dir(o.out_dir);
    begin_output(dir, manifest, o.fresh);
    echo(out, manifest);

    GroupReport report;
    {
        RunStore store(dir / "runs.csv");
        try {
            report = group_consistency(configs, cfg.widths, cfg.seeds, data, cfg.schedule, {o.worker_count(), &store});
        } catch (const SweepFailed&) {
            write_runs(dir / "runs.csv", store.rows());
            throw;
        }
    }
    std::vector<RunRow> all;
    for (const auto& e : report.entries) all.insert(all.end(), e.rows.begin(), e.rows.end());
    write_runs(dir / "runs.csv", all);

    json entries = json::array();
    {
        CsvWriter csv(dir / "group.csv");
        csv.row({"config", "s_w1", "r2_w1", "s_w2", "r2_w2"});
        for (const auto& e : report.entries) {
            csv.row({e.label, format_double(e.s_w1.slope), format_double(e.s_w1.r_squared),
                     format_double(e.s_w2.slope), format_double(e.s_w2.r_squared)});
            entries.push_back({{"config", e.label}, {"s_w1", fit_json(e.s_w1)}, {"s_w2", fit_json(e.s_w2)}});
        }
    }
    write_json(dir / "report.json", {{"gamma2", report.gamma2.str()},
                                     {"gamma3", report.gamma3.str()},
                                     {"entries", entries},
                                     {"spread_w1", report.spread_w1},
                                     {"spread_w2", report.spread_w2}});
    const auto diverged = std::count_if(all.begin(), all.end(), [](const RunRow& r) { return !r.usable(); });
    if (diverged) err << "warning: " << diverged << " runs diverged and were left out of the fits\n";
    out << "gamma2=" << report.gamma2 << " gamma3=" << report.gamma3 << "\n";
    for (const auto& e : report.entries)
        out << "  S_W1=" << format_double(e.s_w1.slope) << "  S_W2=" << format_double(e.s_w2.slope) << "  "
            << e.label << "\n";
    out << "spread S_W1=" << format_double(report.spread_w1) << "  S_W2=" << format_double(report.spread_w2)
        << "\n";
    return exit_ok;
}

}  // namespace

void save_cosine_matrix(const fs::path& path, const CosineMatrix& cm) {
    const auto k = static_cast<std::uint64_t>(cm.rows.size());
    if (cm.values.rows() != static_cast<Eigen::Index>(k) || cm.values.cols() != static_cast<Eigen::Index>(k))
        throw ShapeMismatch("cosine matrix does not match its row list");
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open " + path.string() + " for writing");
    os.write(kCosineMagic, sizeof kCosineMagic);
    put<std::uint64_t>(os, k);
    for (auto r : cm.rows) put<std::uint64_t>(os, static_cast<std::uint64_t>(r));
    for (Eigen::Index i = 0; i < cm.values.rows(); ++i)
        for (Eigen::Index j = 0; j < cm.values.cols(); ++j) put<double>(os, cm.values(i, j));
    if (!os) throw IoError("write failed for " + path.string());
}

CosineMatrix load_cosine_matrix(const fs::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path.string());
    char magic[sizeof kCosineMagic];
    if (!is.read(magic, sizeof magic) || std::memcmp(magic, kCosineMagic, sizeof magic) != 0)
        throw FormatError(path.string() + " is not a cosine matrix file");
    const auto k = get<std::uint64_t>(is, path);
    const auto size = fs::file_size(path);
    if (k > size / 8 || sizeof kCosineMagic + 8 + 8 * k + 8 * k * k != size)
        throw FormatError(path.string() + " has the wrong length for k=" + std::to_string(k));
    CosineMatrix cm;
    for (std::uint64_t i = 0; i < k; ++i) cm.rows.push_back(static_cast<Eigen::Index>(get<std::uint64_t>(is, path)));
    cm.values.resize(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
    for (Eigen::Index i = 0; i < cm.values.rows(); ++i)
        for (Eigen::Index j = 0; j < cm.values.cols(); ++j) cm.values(i, j) = get<double>(is, path);
    return cm;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Phase diagrams of three-layer ReLU networks under power-law initialization", "phasemap"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    std::string preset_name_arg;
    std::int64_t pm = 100, pd = 1, pdo = 1;
    bool pjson = false;
    auto* preset_cmd = app.add_subcommand("preset", "print the scaling exponents of a standard initialization");
    preset_cmd->add_option("name", preset_name_arg, "NTK, LeCun, He or Xavier")->required();
    preset_cmd->add_option("--m", pm, "width")->check(CLI::PositiveNumber);
    preset_cmd->add_option("--d", pd, "input dimension")->check(CLI::PositiveNumber);
    preset_cmd->add_option("--d-out", pdo, "output dimension")->check(CLI::PositiveNumber);
    preset_cmd->add_flag("--json", pjson, "print the resolved config as JSON");

    Overrides train_o, sweep_o, phase_o, report_o;
    auto* train_cmd = app.add_subcommand("train", "train one network and write its diagnostics");
    train_o.attach(train_cmd, false);
    auto* sweep_cmd = app.add_subcommand("sweep", "width sweep and slope fit for one configuration");
    sweep_o.attach(sweep_cmd, true);
    auto* phase_cmd = app.add_subcommand("phase", "scan the (gamma2, gamma3) grid");
    phase_o.attach(phase_cmd, true);
    std::optional<double> alpha_exp;
    phase_cmd->add_option("--alpha-exp", alpha_exp, "alpha = m^a for every cell");
    auto* report_cmd = app.add_subcommand("report", "compare slopes across a group sharing (gamma2, gamma3)");
    report_o.attach(report_cmd, true);

    std::string ckpt, condense_out;
    auto* condense_cmd = app.add_subcommand("condense", "condensation index of a saved network");
    condense_cmd->add_option("checkpoint", ckpt, "checkpoint file")->required();
    condense_cmd->add_option("-o,--out", condense_out, "output directory")->required();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err) == 0 ? exit_ok : exit_usage;
    }

    try {
        if (*preset_cmd) return cmd_preset(preset_name_arg, pm, pd, pdo, pjson, out);
        if (*train_cmd) return cmd_train(train_o, out, err);
        if (*sweep_cmd) return cmd_sweep(sweep_o, out, err);
        if (*phase_cmd) return cmd_phase(phase_o, alpha_exp, out, err);
        if (*condense_cmd) return cmd_condense(ckpt, condense_out, out);
        if (*report_cmd) return cmd_report(report_o, out, err);
    } catch (const SweepFailed& e) {
        err << "error: " << e.what() << "\n";
        return exit_all_failed;
    } catch (const IoError& e) {
        err << "error: " << e.what() << "\n";
        return exit_io;
    } catch (const FormatError& e) {
        err << "error: " << e.what() << "\n";
        return exit_io;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return exit_io;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return exit_usage;
    }
    return exit_usage;
}

int run_cli(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return run_cli(args, std::cout, std::cerr);
}

}  // namespace phasemap
