#include "phasemap/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <set>
#include <thread>

#include "phasemap/errors.hpp"
#include "phasemap/output.hpp"

namespace phasemap {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double parse_number(const std::string& s) {
    if (s == "nan") return kNaN;
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw FormatError("bad number '" + s + "'");
    return v;
}

void require_widths(std::span<const std::int64_t> widths) {
    if (widths.size() < 2) throw PreconditionError("a width sweep needs at least two widths");
    for (std::size_t i = 0; i < widths.size(); ++i) {
        if (widths[i] < 1) throw PreconditionError("widths must be positive");
        if (i > 0 && widths[i] <= widths[i - 1])
            throw PreconditionError("widths must be strictly increasing");
    }
}

double spread(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    return *hi - *lo;
}

}  // namespace

Schedule ExperimentSchedule::resolve(const HyperConfig& config) const {
    Schedule s;
    s.lr = effective_lr(config, normalized_lr);
    s.max_steps = max_steps;
    s.rel_loss_target = rel_loss_target;
    s.divergence_cap = divergence_cap;
    s.backtracking = backtracking;
    s.lr_growth = lr_growth;
    // Long runs only need a thinned loss curve.
    s.record_every = std::max<std::int64_t>(1, max_steps / 20000);
    return s;
}

bool RunRow::usable() const {
    return stop_reason != StopReason::diverged && std::isfinite(rd_w1) && std::isfinite(rd_w2);
}

RunOutcome train_and_measure(const HyperConfig& config, std::uint64_t seed, const Dataset& data,
                             const ExperimentSchedule& schedule) {
    data.validate();
    if (data.input_dim() != config.d || data.output_dim() != config.d_out)
        throw ShapeMismatch("dataset dimensions do not match the config");
    const ScalingSummary summary = kappas(config);
    RunOutcome out;
    out.record = train(init_network(config, seed), data, schedule.resolve(config));

    RunRow& row = out.row;
    row.gamma2 = summary.gamma2.to_double();
    row.gamma3 = summary.gamma3.to_double();
    row.m = config.m;
    row.seed = seed;
    row.final_loss = out.record.final_loss;
    row.steps = out.record.steps_taken;
    row.stop_reason = out.record.stop_reason;
    row.config = config.label;
    try {
        out.metrics = regime_metrics(out.record);
        row.rd_w1 = out.metrics.rd_w1;
        row.rd_w2 = out.metrics.rd_w2;
        row.zeta = out.metrics.zeta;
    } catch (const Error&) {
        row.rd_w1 = row.rd_w2 = row.zeta = kNaN;
    }
    return out;
}

RunRow run_one(const HyperConfig& config, std::uint64_t seed, const Dataset& data,
               const ExperimentSchedule& schedule) {
    return train_and_measure(config, seed, data, schedule).row;
}

void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& fn) {
    const auto n_threads = static_cast<std::size_t>(std::max(1, workers));
    if (n_threads == 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mu;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= count) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(failure_mu);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < std::min(n_threads, count); ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

RunKey key_of(const RunRow& row) { return {row.gamma2, row.gamma3, row.m, row.seed, row.config}; }

RunStore::RunStore(std::filesystem::path csv_path) : path_(std::move(csv_path)) {
    if (std::filesystem::exists(*path_)) {
        const CsvTable table = read_csv(*path_);
        for (const auto& cells : table.rows) {
            RunRow row = parse_run_cells(table.header, cells);
            rows_[key_of(row)] = row;
        }
        // Rewrite so a torn final line from an interrupted run cannot merge
        // with the next appended row.
        CsvWriter csv(*path_);
        csv.row(run_csv_header());
        for (const auto& [key, row] : rows_) csv.row(run_csv_cells(row));
    } else {
        CsvWriter(*path_).row(run_csv_header());
    }
}

std::optional<RunRow> RunStore::find(const RunKey& key) const {
    std::lock_guard lock(mu_);
    if (auto it = rows_.find(key); it != rows_.end()) return it->second;
    return std::nullopt;
}

void RunStore::record(const RunRow& row) {
    std::lock_guard lock(mu_);
    rows_[key_of(row)] = row;
    if (path_) {
        CsvWriter csv(*path_, /*append=*/true);
        csv.row(run_csv_cells(row));
    }
}

std::vector<RunRow> RunStore::rows() const {
    std::lock_guard lock(mu_);
    std::vector<RunRow> out;
    out.reserve(rows_.size());
    for (const auto& [key, row] : rows_) out.push_back(row);
    return out;
}

std::size_t RunStore::size() const {
    std::lock_guard lock(mu_);
    return rows_.size();
}

namespace {

struct RunTask {
    HyperConfig config;
    std::uint64_t seed;
};

// Runs every task (largest widths first for load balance), consulting and
// feeding the store. Results come back in task order.
std::vector<std::optional<RunRow>> run_tasks(const std::vector<RunTask>& tasks, const Dataset& data,
                                             const ExperimentSchedule& schedule,
                                             const ScanOptions& options,
                                             std::vector<std::string>* errors = nullptr) {
    std::vector<std::optional<RunRow>> results(tasks.size());
    std::vector<std::size_t> order(tasks.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return tasks[a].config.m > tasks[b].config.m;
    });
    if (errors) errors->assign(tasks.size(), {});
    parallel_for(order.size(), options.workers, [&](std::size_t k) {
        const std::size_t i = order[k];
        const RunTask& task = tasks[i];
        const ScalingSummary s = kappas(task.config);
        const RunKey key{s.gamma2.to_double(), s.gamma3.to_double(), task.config.m, task.seed,
                         task.config.label};
        if (options.store) {
            if (auto hit = options.store->find(key)) {
                results[i] = *hit;
                return;
            }
        }
        try {
            RunRow row = run_one(task.config, task.seed, data, schedule);
            if (options.store) options.store->record(row);
            results[i] = std::move(row);
        } catch (const Error& e) {
            if (!errors) throw;
            (*errors)[i] = e.what();
        }
    });
    return results;
}

}  // namespace

SweepResult width_sweep(const HyperConfig& base, std::span<const std::int64_t> widths,
                        std::span<const std::uint64_t> seeds, const Dataset& data,
                        const ExperimentSchedule& schedule, const ScanOptions& options) {
    require_widths(widths);
    if (seeds.empty()) throw PreconditionError("a width sweep needs at least one seed");
    const ScalingSummary s = kappas(base);
    std::vector<RunTask> tasks;
    for (auto m : widths)
        for (auto seed : seeds) tasks.push_back({base.at_width(m), seed});

    SweepResult out;
    out.gamma2 = s.gamma2.to_double();
    out.gamma3 = s.gamma3.to_double();
    for (auto& r : run_tasks(tasks, data, schedule, options)) out.rows.push_back(std::move(*r));
    if (std::none_of(out.rows.begin(), out.rows.end(), [](const RunRow& r) { return r.usable(); }))
        throw SweepFailed("every run diverged for " + base.label);
    return out;
}

SweepResult width_sweep(const GammaPoint& point, std::span<const std::int64_t> widths,
                        std::span<const std::uint64_t> seeds, const Dataset& data,
                        const ExperimentSchedule& schedule, const ScanOptions& options) {
    require_widths(widths);
    const HyperConfig base =
        config_from_gammas(point, widths.front(), data.input_dim(), data.output_dim());
    return width_sweep(base, widths, seeds, data, schedule, options);
}

SlopeFit fit_slope(std::span<const WidthPoint> points) {
    std::map<double, std::pair<double, int>> by_width;
    SlopeFit fit;
    for (const auto& p : points) {
        if (!(p.rd > 0.0) || !std::isfinite(p.rd) || !(p.m > 0.0)) {
            ++fit.n_excluded;
            continue;
        }
        auto& [sum, count] = by_width[p.m];
        sum += p.rd;
        ++count;
    }
    if (by_width.size() < 2)
        throw PreconditionError("slope fit needs at least two distinct widths with rd > 0");

    std::vector<double> xs, ys;
    for (const auto& [m, acc] : by_width) {
        xs.push_back(std::log(m));
        ys.push_back(std::log(acc.first / acc.second));
    }
    const double n = static_cast<double>(xs.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
        syy += (ys[i] - my) * (ys[i] - my);
    }
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double ss_res = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double r = ys[i] - (fit.intercept + fit.slope * xs[i]);
        ss_res += r * r;
    }
    fit.r_squared = syy > 0 ? std::clamp(1.0 - ss_res / syy, 0.0, 1.0) : 1.0;
    fit.n_points = static_cast<int>(xs.size());
    return fit;
}

SlopeFit fit_layer(std::span<const RunRow> rows, Layer layer) {
    std::vector<WidthPoint> points;
    int skipped = 0;
    for (const auto& r : rows) {
        if (!r.usable()) {
            ++skipped;
            continue;
        }
        points.push_back({static_cast<double>(r.m), layer == Layer::W1 ? r.rd_w1 : r.rd_w2});
    }
    SlopeFit fit = fit_slope(points);
    fit.n_excluded += skipped;
    return fit;
}

std::vector<double> zero_crossing(std::span<const std::pair<double, double>> series) {
    for (std::size_t i = 1; i < series.size(); ++i)
        if (series[i].first < series[i - 1].first)
            throw PreconditionError("zero_crossing series must be sorted by gamma");
    std::vector<double> roots;
    for (std::size_t i = 0; i < series.size(); ++i) {
        const auto [ga, sa] = series[i];
        if (sa == 0.0) {
            roots.push_back(ga);
            continue;
        }
        if (i + 1 == series.size()) break;
        const auto [gb, sb] = series[i + 1];
        if ((sa < 0.0 && sb > 0.0) || (sa > 0.0 && sb < 0.0))
            roots.push_back(ga - sa * (gb - ga) / (sb - sa));
    }
    return roots;
}

PhaseCell summarize_cell(double gamma2, double gamma3, std::span<const RunRow> rows) {
    PhaseCell cell;
    cell.gamma2 = gamma2;
    cell.gamma3 = gamma3;
    std::set<std::uint64_t> seeds;
    std::int64_t widest = 0;
    for (const auto& r : rows)
        if (r.usable()) {
            seeds.insert(r.seed);
            widest = std::max(widest, r.m);
        }
    cell.n_seeds = static_cast<int>(seeds.size());
    if (seeds.empty()) {
        cell.error = "no usable runs";
        cell.zeta_mean = kNaN;
        return cell;
    }
    double zsum = 0;
    int zcount = 0;
    for (const auto& r : rows)
        if (r.usable() && r.m == widest && std::isfinite(r.zeta)) {
            zsum += r.zeta;
            ++zcount;
        }
    cell.zeta_mean = zcount ? zsum / zcount : kNaN;
    try {
        cell.s_w1 = fit_layer(rows, Layer::W1);
        cell.s_w2 = fit_layer(rows, Layer::W2);
    } catch (const Error& e) {
        cell.error = e.what();
    }
    return cell;
}

std::vector<BoundaryStar> boundary_stars(const PhaseScan& scan) {
    std::vector<BoundaryStar> stars;
    const std::size_t n2 = scan.gamma2_grid.size();
    const std::size_t n3 = scan.gamma3_grid.size();
    for (Layer layer : {Layer::W1, Layer::W2}) {
        auto slope_of = [&](const PhaseCell& c) -> std::optional<double> {
            const auto& fit = layer == Layer::W1 ? c.s_w1 : c.s_w2;
            if (!fit) return std::nullopt;
            return fit->slope;
        };
        for (std::size_t i2 = 0; i2 < n2; ++i2) {
            std::vector<std::pair<double, double>> series;
            for (std::size_t i3 = 0; i3 < n3; ++i3)
                if (auto s = slope_of(scan.cell(i2, i3))) series.emplace_back(scan.gamma3_grid[i3], *s);
            for (double g : zero_crossing(series))
                stars.push_back({layer, Axis::gamma3, scan.gamma2_grid[i2], g});
        }
        for (std::size_t i3 = 0; i3 < n3; ++i3) {
            std::vector<std::pair<double, double>> series;
            for (std::size_t i2 = 0; i2 < n2; ++i2)
                if (auto s = slope_of(scan.cell(i2, i3))) series.emplace_back(scan.gamma2_grid[i2], *s);
            for (double g : zero_crossing(series))
                stars.push_back({layer, Axis::gamma2, scan.gamma3_grid[i3], g});
        }
    }
    return stars;
}

PhaseScan phase_scan(std::span<const double> gamma2_grid, std::span<const double> gamma3_grid,
                     std::span<const std::int64_t> widths, std::span<const std::uint64_t> seeds,
                     const Dataset& data, const ExperimentSchedule& schedule,
                     const ScanOptions& options, double alpha_exponent) {
    if (gamma2_grid.empty() || gamma3_grid.empty()) throw PreconditionError("empty phase grid");
    if (!std::is_sorted(gamma2_grid.begin(), gamma2_grid.end()) ||
        !std::is_sorted(gamma3_grid.begin(), gamma3_grid.end()))
        throw PreconditionError("phase grids must be sorted");
    require_widths(widths);
    if (seeds.empty()) throw PreconditionError("phase scan needs at least one seed");
    data.validate();

    PhaseScan scan;
    scan.gamma2_grid.assign(gamma2_grid.begin(), gamma2_grid.end());
    scan.gamma3_grid.assign(gamma3_grid.begin(), gamma3_grid.end());

    std::vector<RunTask> tasks;
    std::vector<std::size_t> cell_of;
    for (std::size_t i2 = 0; i2 < gamma2_grid.size(); ++i2)
        for (std::size_t i3 = 0; i3 < gamma3_grid.size(); ++i3) {
            const GammaPoint point{Rational::from_double(gamma2_grid[i2]),
                                   Rational::from_double(gamma3_grid[i3]),
                                   Rational::from_double(alpha_exponent), Rational(1)};
            const HyperConfig base =
                config_from_gammas(point, widths.front(), data.input_dim(), data.output_dim());
            for (auto m : widths)
                for (auto seed : seeds) {
                    tasks.push_back({base.at_width(m), seed});
                    cell_of.push_back(i2 * gamma3_grid.size() + i3);
                }
        }

    std::vector<std::string> errors;
    const auto results = run_tasks(tasks, data, schedule, options, &errors);

    const std::size_t n_cells = gamma2_grid.size() * gamma3_grid.size();
    std::vector<std::vector<RunRow>> per_cell(n_cells);
    std::vector<std::string> cell_errors(n_cells);
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        if (results[i]) {
            per_cell[cell_of[i]].push_back(*results[i]);
            scan.runs.push_back(*results[i]);
        } else if (cell_errors[cell_of[i]].empty()) {
            cell_errors[cell_of[i]] = errors[i];
        }
    }
    for (std::size_t i2 = 0; i2 < gamma2_grid.size(); ++i2)
        for (std::size_t i3 = 0; i3 < gamma3_grid.size(); ++i3) {
            const std::size_t c = i2 * gamma3_grid.size() + i3;
            PhaseCell cell = summarize_cell(gamma2_grid[i2], gamma3_grid[i3], per_cell[c]);
            if (!cell_errors[c].empty() && cell.error.empty()) cell.error = cell_errors[c];
            scan.cells.push_back(std::move(cell));
        }
    std::sort(scan.runs.begin(), scan.runs.end(),
              [](const RunRow& a, const RunRow& b) { return key_of(a) < key_of(b); });
    scan.stars = boundary_stars(scan);
    return scan;
}

GroupReport group_consistency(std::span<const HyperConfig> configs,
                              std::span<const std::int64_t> widths,
                              std::span<const std::uint64_t> seeds, const Dataset& data,
                              const ExperimentSchedule& schedule, const ScanOptions& options) {
    if (configs.empty()) throw PreconditionError("group needs at least one config");
    GroupReport report;
    const ScalingSummary first = kappas(configs.front());
    report.gamma2 = first.gamma2;
    report.gamma3 = first.gamma3;
    for (const auto& c : configs) {
        const ScalingSummary s = kappas(c);
        if (s.gamma2 != report.gamma2 || s.gamma3 != report.gamma3)
            throw PreconditionError("config '" + c.label + "' has (gamma2, gamma3) = (" +
                                    s.gamma2.str() + ", " + s.gamma3.str() + "), group has (" +
                                    report.gamma2.str() + ", " + report.gamma3.str() + ")");
    }
    std::vector<double> w1, w2;
    for (const auto& c : configs) {
        SweepResult sweep = width_sweep(c, widths, seeds, data, schedule, options);
        GroupEntry entry;
        entry.label = c.label;
        entry.s_w1 = fit_layer(sweep.rows, Layer::W1);
        entry.s_w2 = fit_layer(sweep.rows, Layer::W2);
        entry.rows = std::move(sweep.rows);
        w1.push_back(entry.s_w1.slope);
        w2.push_back(entry.s_w2.slope);
        report.entries.push_back(std::move(entry));
    }
    report.spread_w1 = spread(w1);
    report.spread_w2 = spread(w2);
    return report;
}

std::vector<std::string> run_csv_header() {
    return {"gamma2", "gamma3", "m",     "seed",  "rd_w1",       "rd_w2",
            "zeta",   "final_loss", "steps", "stop_reason", "config"};
}

std::vector<std::string> run_csv_cells(const RunRow& r) {
    return {format_double(r.gamma2), format_double(r.gamma3),     std::to_string(r.m),
            std::to_string(r.seed),  format_double(r.rd_w1),      format_double(r.rd_w2),
            format_double(r.zeta),   format_double(r.final_loss), std::to_string(r.steps),
            std::string(to_string(r.stop_reason)), r.config};
}

RunRow parse_run_cells(const std::vector<std::string>& header, const std::vector<std::string>& cells) {
    auto at = [&](std::string_view name) -> const std::string& {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return cells.at(i);
        throw FormatError("run csv lacks column '" + std::string(name) + "'");
    };
    RunRow r;
    try {
        r.gamma2 = parse_number(at("gamma2"));
        r.gamma3 = parse_number(at("gamma3"));
        r.m = std::stoll(at("m"));
        r.seed = std::stoull(at("seed"));
        r.rd_w1 = parse_number(at("rd_w1"));
        r.rd_w2 = parse_number(at("rd_w2"));
        r.zeta = parse_number(at("zeta"));
        r.final_loss = parse_number(at("final_loss"));
        r.steps = std::stoll(at("steps"));
    } catch (const std::logic_error& e) {
        throw FormatError(std::string("run csv: ") + e.what());
    }
    r.stop_reason = parse_stop_reason(at("stop_reason"));
    r.config = at("config");
    return r;
}

}  // namespace phasemap
