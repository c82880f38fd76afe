#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "phasemap/scaling.hpp"

namespace phasemap {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Three-layer ReLU network  f(x) = (1/alpha) * A * relu(W2 * [relu(W1 * [x;1]) (;1)]).
//
// w1 is m x (d+1) with the first-layer bias in its last column. w2 is m x m,
// or m x (m+1) when the second layer carries a bias column. a is d_out x m.
struct Network {
    Matrix w1;
    Matrix w2;
    Matrix a;
    double alpha = 1.0;

    std::int64_t width() const { return w1.rows(); }
    std::int64_t input_dim() const { return w1.cols() - 1; }
    std::int64_t output_dim() const { return a.rows(); }
    bool layer2_bias() const { return w2.cols() == w2.rows() + 1; }

    // Throws ShapeMismatch / InvalidConfig when the invariants do not hold.
    void validate() const;

    static Network zeros(std::int64_t m, std::int64_t d, std::int64_t d_out, double alpha = 1.0,
                         bool layer2_bias = false);
};

struct Dataset {
    Matrix x;  // n x d
    Matrix y;  // n x d_out

    std::int64_t size() const { return x.rows(); }
    std::int64_t input_dim() const { return x.cols(); }
    std::int64_t output_dim() const { return y.cols(); }
    void validate() const;
};

// Intermediate values of one forward pass, kept for the backward pass.
struct ForwardCache {
    Matrix x_aug;  // n x (d+1)
    Matrix z1;     // n x m
    Matrix h1;     // n x m, or n x (m+1) with the appended constant
    Matrix z2;     // n x m
    Matrix h2;     // n x m
    Matrix out;    // n x d_out
};

struct Gradients {
    Matrix w1;
    Matrix w2;
    Matrix a;
};

using Rng = std::mt19937_64;

// Draws every entry (bias columns included) from N(0, beta_i^2) in the order
// W1 row-major, W2 row-major, A row-major.
Network init_network(const HyperConfig& config, Rng& rng);
Network init_network(const HyperConfig& config, std::uint64_t seed);

ForwardCache forward(const Network& net, const Matrix& x);
Matrix predict(const Network& net, const Matrix& x);

// (1/2n) * sum_i ||f(x_i) - y_i||^2
double loss(const Network& net, const Dataset& data);
double loss_from_output(const Matrix& out, const Matrix& y);

// Exact gradients of the empirical risk. relu'(0) is taken as 0.
Gradients backward(const Network& net, const Dataset& data);
Gradients backward(const Network& net, const ForwardCache& cache, const Matrix& y);

enum class StopReason { converged, max_steps, diverged, stalled };

std::string_view to_string(StopReason r);
StopReason parse_stop_reason(std::string_view s);

struct Schedule {
    double lr = 1e-2;
    std::int64_t max_steps = 100000;
    // Stop once loss <= rel_loss_target * initial loss.
    double rel_loss_target = 1e-3;
    // Diverged once loss > divergence_cap * initial loss (plain GD only).
    double divergence_cap = 1e6;
    // Backtracking step control: a step that raises the loss is retried at
    // half the step size; accepted steps grow it by lr_growth.
    bool backtracking = false;
    double lr_growth = 1.0;
    int max_halvings = 60;
    std::int64_t record_every = 1;

    void validate() const;
};

struct LossPoint {
    std::int64_t step;
    double loss;
};

struct TrainRecord {
    std::vector<LossPoint> loss_curve;
    Network initial;
    Network final;
    std::int64_t steps_taken = 0;
    StopReason stop_reason = StopReason::max_steps;
    double initial_loss = 0.0;
    double final_loss = 0.0;
    double initial_lr = 0.0;
    double final_lr = 0.0;
    std::int64_t rejected_steps = 0;
    double seconds = 0.0;
};

// Full-batch gradient descent on a private copy of `net`.
TrainRecord train(Network net, const Dataset& data, const Schedule& schedule);

// Binary checkpoint: see docs/formats.md.
struct CheckpointMeta {
    std::uint64_t seed = 0;
    std::string config_hash;
};

void save_checkpoint(const std::filesystem::path& path, const Network& net,
                     const CheckpointMeta& meta);
Network load_checkpoint(const std::filesystem::path& path, CheckpointMeta* meta = nullptr);

}  // namespace phasemap
