#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "phasemap/metrics.hpp"
#include "phasemap/model.hpp"
#include "phasemap/scaling.hpp"

namespace phasemap {

// Training schedule expressed in normalized time. The step size handed to
// gradient descent is effective_lr(config, normalized_lr), so every
// configuration with the same kappas follows the same trajectory.
struct ExperimentSchedule {
    double normalized_lr = 1.0;
    std::int64_t max_steps = 100000;
    double rel_loss_target = 1e-3;
    double divergence_cap = 1e6;
    bool backtracking = true;
    double lr_growth = 1.02;

    Schedule resolve(const HyperConfig& config) const;
};

struct RunRow {
    double gamma2 = 0;
    double gamma3 = 0;
    std::int64_t m = 0;
    std::uint64_t seed = 0;
    double rd_w1 = 0;
    double rd_w2 = 0;
    double zeta = 0;
    double final_loss = 0;
    std::int64_t steps = 0;
    StopReason stop_reason = StopReason::max_steps;
    std::string config;  // label of the HyperConfig that produced the run

    bool usable() const;
};

struct RunOutcome {
    RunRow row;
    TrainRecord record;
    RegimeMetrics metrics;
};

RunOutcome train_and_measure(const HyperConfig& config, std::uint64_t seed, const Dataset& data,
                             const ExperimentSchedule& schedule);
RunRow run_one(const HyperConfig& config, std::uint64_t seed, const Dataset& data,
               const ExperimentSchedule& schedule);

// Runs fn(0..count-1) on `workers` threads. The first exception thrown by
// any task is rethrown after all workers stop.
void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& fn);

// (gamma2, gamma3, m, seed, config label)
using RunKey = std::tuple<double, double, std::int64_t, std::uint64_t, std::string>;
RunKey key_of(const RunRow& row);

// Completed runs keyed by RunKey, optionally backed by an
// append-only CSV so an interrupted scan can resume. Thread-safe; all file
// writes go through one mutex.
class RunStore {
public:
    RunStore() = default;
    explicit RunStore(std::filesystem::path csv_path);

    std::optional<RunRow> find(const RunKey& key) const;
    void record(const RunRow& row);
    std::vector<RunRow> rows() const;
    std::size_t size() const;

private:
    mutable std::mutex mu_;
    std::map<RunKey, RunRow> rows_;
    std::optional<std::filesystem::path> path_;
};

struct SweepResult {
    double gamma2 = 0;
    double gamma3 = 0;
    std::vector<RunRow> rows;
};

struct ScanOptions {
    int workers = 1;
    RunStore* store = nullptr;
};

// Trains base.at_width(m) for every (m, seed). Diverged runs stay in the
// result but never enter a fit.
SweepResult width_sweep(const HyperConfig& base, std::span<const std::int64_t> widths,
                        std::span<const std::uint64_t> seeds, const Dataset& data,
                        const ExperimentSchedule& schedule, const ScanOptions& options = {});
SweepResult width_sweep(const GammaPoint& point, std::span<const std::int64_t> widths,
                        std::span<const std::uint64_t> seeds, const Dataset& data,
                        const ExperimentSchedule& schedule, const ScanOptions& options = {});

struct WidthPoint {
    double m;
    double rd;
};

struct SlopeFit {
    double slope = 0;
    double intercept = 0;
    double r_squared = 0;
    int n_points = 0;
    int n_excluded = 0;
};

// OLS of log(rd) on log(m) after averaging rd over repeated widths.
// Non-positive or non-finite rd values are dropped and counted.
SlopeFit fit_slope(std::span<const WidthPoint> points);

enum class Layer { W1, W2 };
SlopeFit fit_layer(std::span<const RunRow> rows, Layer layer);

// Linear-interpolation roots of a (gamma, slope) series sorted by gamma.
std::vector<double> zero_crossing(std::span<const std::pair<double, double>> series);

struct PhaseCell {
    double gamma2 = 0;
    double gamma3 = 0;
    std::optional<SlopeFit> s_w1;
    std::optional<SlopeFit> s_w2;
    // Mean condensation index over seeds at the largest width.
    double zeta_mean = 0;
    int n_seeds = 0;
    std::string error;
};

enum class Axis { gamma2, gamma3 };

struct BoundaryStar {
    Layer layer;
    Axis along;        // the coordinate being interpolated
    double fixed = 0;  // value of the other coordinate
    double star = 0;
};

struct PhaseScan {
    std::vector<double> gamma2_grid;
    std::vector<double> gamma3_grid;
    std::vector<PhaseCell> cells;  // gamma2-major
    std::vector<RunRow> runs;
    std::vector<BoundaryStar> stars;

    const PhaseCell& cell(std::size_t i2, std::size_t i3) const {
        return cells[i2 * gamma3_grid.size() + i3];
    }
};

PhaseCell summarize_cell(double gamma2, double gamma3, std::span<const RunRow> rows);
std::vector<BoundaryStar> boundary_stars(const PhaseScan& scan);

PhaseScan phase_scan(std::span<const double> gamma2_grid, std::span<const double> gamma3_grid,
                     std::span<const std::int64_t> widths, std::span<const std::uint64_t> seeds,
                     const Dataset& data, const ExperimentSchedule& schedule,
                     const ScanOptions& options = {}, double alpha_exponent = 0.0);

struct GroupEntry {
    std::string label;
    SlopeFit s_w1;
    SlopeFit s_w2;
    std::vector<RunRow> rows;
};

struct GroupReport {
    Rational gamma2;
    Rational gamma3;
    std::vector<GroupEntry> entries;
    double spread_w1 = 0;  // max pairwise |difference| of S_W1
    double spread_w2 = 0;
};

GroupReport group_consistency(std::span<const HyperConfig> configs,
                              std::span<const std::int64_t> widths,
                              std::span<const std::uint64_t> seeds, const Dataset& data,
                              const ExperimentSchedule& schedule, const ScanOptions& options = {});

// CSV columns: gamma2,gamma3,m,seed,rd_w1,rd_w2,zeta,final_loss,steps,stop_reason,config
std::vector<std::string> run_csv_header();
std::vector<std::string> run_csv_cells(const RunRow& row);
RunRow parse_run_cells(const std::vector<std::string>& header, const std::vector<std::string>& cells);

}  // namespace phasemap
