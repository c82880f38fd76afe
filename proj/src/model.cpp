#include "phasemap/model.hpp"

#include <bit>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>

#include "json.hpp"

#include "phasemap/errors.hpp"

namespace phasemap {

namespace {

std::string dims(const Matrix& m) {
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

// One distribution object for the whole network: libstdc++ generates normals
// in pairs, and a fresh object per matrix would drop the cached half.
void fill_normal(Matrix& target, double scale, std::normal_distribution<double>& normal, Rng& rng) {
    for (Eigen::Index r = 0; r < target.rows(); ++r)
        for (Eigen::Index c = 0; c < target.cols(); ++c) target(r, c) = scale * normal(rng);
}

bool all_finite(const Network& net) {
    return net.w1.allFinite() && net.w2.allFinite() && net.a.allFinite();
}

}  // namespace

void Network::validate() const {
    const auto m = w1.rows();
    if (m < 1) throw ShapeMismatch("network needs at least one hidden neuron");
    if (w1.cols() < 2) throw ShapeMismatch("w1 must be m x (d+1), got " + dims(w1));
    if (w2.rows() != m || (w2.cols() != m && w2.cols() != m + 1))
        throw ShapeMismatch("w2 must be m x m or m x (m+1) for m=" + std::to_string(m) + ", got " +
                            dims(w2));
    if (a.cols() != m || a.rows() < 1)
        throw ShapeMismatch("a must be d_out x m for m=" + std::to_string(m) + ", got " + dims(a));
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw InvalidConfig("alpha must be positive");
}

Network Network::zeros(std::int64_t m, std::int64_t d, std::int64_t d_out, double alpha,
                       bool layer2_bias) {
    Network net;
    net.w1 = Matrix::Zero(m, d + 1);
    net.w2 = Matrix::Zero(m, layer2_bias ? m + 1 : m);
    net.a = Matrix::Zero(d_out, m);
    net.alpha = alpha;
    return net;
}

void Dataset::validate() const {
    if (x.rows() < 1) throw ShapeMismatch("dataset is empty");
    if (x.rows() != y.rows())
        throw ShapeMismatch("x has " + std::to_string(x.rows()) + " rows but y has " +
                            std::to_string(y.rows()));
    if (x.cols() < 1 || y.cols() < 1) throw ShapeMismatch("dataset needs d >= 1 and d_out >= 1");
}

Network init_network(const HyperConfig& config, Rng& rng) {
    config.validate();
    const double b1 = config.beta1_value();
    const double b2 = config.beta2_value();
    const double b3 = config.beta3_value();
    const double alpha = config.alpha_value();
    for (double v : {b1, b2, b3, alpha})
        if (!(v > 0.0) || !std::isfinite(v))
            throw InvalidConfig("initialization scales must be positive and finite");
    Network net = Network::zeros(config.m, config.d, config.d_out, alpha, config.layer2_bias);
    std::normal_distribution<double> normal(0.0, 1.0);
    fill_normal(net.w1, b1, normal, rng);
    fill_normal(net.w2, b2, normal, rng);
    fill_normal(net.a, b3, normal, rng);
    return net;
}

Network init_network(const HyperConfig& config, std::uint64_t seed) {
    Rng rng(seed);
    return init_network(config, rng);
}

ForwardCache forward(const Network& net, const Matrix& x) {
    if (x.cols() != net.input_dim())
        throw ShapeMismatch("input has " + std::to_string(x.cols()) + " columns, network expects " +
                            std::to_string(net.input_dim()));
    const auto n = x.rows();
    const auto m = net.width();
    ForwardCache c;
    c.x_aug.resize(n, x.cols() + 1);
    c.x_aug.leftCols(x.cols()) = x;
    c.x_aug.col(x.cols()).setOnes();

    c.z1.noalias() = c.x_aug * net.w1.transpose();
    c.h1.resize(n, net.w2.cols());
    c.h1.leftCols(m) = c.z1.cwiseMax(0.0);
    if (net.layer2_bias()) c.h1.col(m).setOnes();

    c.z2.noalias() = c.h1 * net.w2.transpose();
    c.h2 = c.z2.cwiseMax(0.0);
    c.out.noalias() = c.h2 * net.a.transpose();
    c.out /= net.alpha;
    return c;
}

Matrix predict(const Network& net, const Matrix& x) { return forward(net, x).out; }

double loss_from_output(const Matrix& out, const Matrix& y) {
    if (out.rows() != y.rows() || out.cols() != y.cols())
        throw ShapeMismatch("predictions " + dims(out) + " vs targets " + dims(y));
    return 0.5 * (out - y).squaredNorm() / static_cast<double>(y.rows());
}

double loss(const Network& net, const Dataset& data) {
    data.validate();
    return loss_from_output(forward(net, data.x).out, data.y);
}

Gradients backward(const Network& net, const ForwardCache& cache, const Matrix& y) {
    const auto n = static_cast<double>(y.rows());
    const auto m = net.width();
    const double scale = 1.0 / (n * net.alpha);

    const Matrix residual = cache.out - y;  // n x d_out, the e_i
    Gradients g;
    g.a.noalias() = scale * residual.transpose() * cache.h2;

    Matrix delta2 = scale * residual * net.a;  // n x m
    delta2.array() *= (cache.z2.array() > 0.0).cast<double>();
    g.w2.noalias() = delta2.transpose() * cache.h1;

    Matrix delta1;
    delta1.noalias() = delta2 * net.w2.leftCols(m);
    delta1.array() *= (cache.z1.array() > 0.0).cast<double>();
    g.w1.noalias() = delta1.transpose() * cache.x_aug;
    return g;
}

Gradients backward(const Network& net, const Dataset& data) {
    data.validate();
    return backward(net, forward(net, data.x), data.y);
}

std::string_view to_string(StopReason r) {
    switch (r) {
        case StopReason::converged: return "converged";
        case StopReason::max_steps: return "max_steps";
        case StopReason::diverged: return "diverged";
        case StopReason::stalled: return "stalled";
    }
    return "?";
}

StopReason parse_stop_reason(std::string_view s) {
    if (s == "converged") return StopReason::converged;
    if (s == "max_steps") return StopReason::max_steps;
    if (s == "diverged") return StopReason::diverged;
    if (s == "stalled") return StopReason::stalled;
    throw FormatError("unknown stop reason '" + std::string(s) + "'");
}

void Schedule::validate() const {
    if (!(lr > 0.0) || !std::isfinite(lr)) throw InvalidConfig("learning rate must be positive");
    if (max_steps < 0) throw InvalidConfig("max_steps must be non-negative");
    if (!(rel_loss_target >= 0.0)) throw InvalidConfig("rel_loss_target must be non-negative");
    if (!(divergence_cap > 1.0)) throw InvalidConfig("divergence_cap must exceed 1");
    if (!(lr_growth >= 1.0)) throw InvalidConfig("lr_growth must be >= 1");
    if (max_halvings < 0) throw InvalidConfig("max_halvings must be non-negative");
    if (record_every < 1) throw InvalidConfig("record_every must be >= 1");
}

TrainRecord train(Network net, const Dataset& data, const Schedule& schedule) {
    net.validate();
    data.validate();
    schedule.validate();
    const auto started = std::chrono::steady_clock::now();

    TrainRecord rec;
    rec.initial = net;
    rec.initial_lr = schedule.lr;

    ForwardCache cache = forward(net, data.x);
    double current = loss_from_output(cache.out, data.y);
    rec.initial_loss = current;
    rec.loss_curve.push_back({0, current});

    const double target = schedule.rel_loss_target * rec.initial_loss;
    const double cap = schedule.divergence_cap * rec.initial_loss;
    double lr = schedule.lr;
    std::int64_t step = 0;

    auto finish = [&](StopReason why) {
        rec.stop_reason = why;
        rec.steps_taken = step;
        rec.final_loss = current;
        rec.final_lr = lr;
        if (rec.loss_curve.back().step != step) rec.loss_curve.push_back({step, current});
    };

    if (!std::isfinite(current) || !all_finite(net)) {
        finish(StopReason::diverged);
    } else if (current <= target) {
        finish(StopReason::converged);
    } else {
        // The m x m gradient of W2 is never formed. A step is the rank-n
        // update  W2 -= lr * delta2^T h1, and trial forwards use
        //   z2' = h1' W2^T - lr * (h1' h1^T) delta2,
        // so each trial costs one read of W2 and each accepted step one more
        // read-modify-write.
        const auto m = net.width();
        const double inv_n = 1.0 / static_cast<double>(data.size());
        Matrix residual, delta2, delta1, gw1, ga, w1_trial, a_trial, cross;
        ForwardCache trial;
        trial.x_aug = cache.x_aug;
        bool done = false;
        while (!done && step < schedule.max_steps) {
            const double scale = inv_n / net.alpha;
            residual = cache.out - data.y;
            ga.noalias() = scale * residual.transpose() * cache.h2;
            delta2.noalias() = scale * residual * net.a;
            delta2.array() *= (cache.z2.array() > 0.0).cast<double>();
            delta1.noalias() = delta2 * net.w2.leftCols(m);
            delta1.array() *= (cache.z1.array() > 0.0).cast<double>();
            gw1.noalias() = delta1.transpose() * cache.x_aug;
            if (!delta2.allFinite() || !gw1.allFinite() || !ga.allFinite()) {
                finish(StopReason::diverged);
                done = true;
                break;
            }

            double trial_loss = 0.0;
            int halvings = 0;
            for (;;) {
                w1_trial.noalias() = net.w1 - lr * gw1;
                a_trial.noalias() = net.a - lr * ga;
                trial.z1.noalias() = trial.x_aug * w1_trial.transpose();
                trial.h1.resize(trial.z1.rows(), net.w2.cols());
                trial.h1.leftCols(m) = trial.z1.cwiseMax(0.0);
                if (net.layer2_bias()) trial.h1.col(m).setOnes();
                cross.noalias() = lr * trial.h1 * cache.h1.transpose();
                trial.z2.noalias() = trial.h1 * net.w2.transpose();
                trial.z2.noalias() -= cross * delta2;
                trial.h2 = trial.z2.cwiseMax(0.0);
                trial.out.noalias() = trial.h2 * a_trial.transpose();
                trial.out /= net.alpha;
                trial_loss = loss_from_output(trial.out, data.y);
                if (!schedule.backtracking) break;
                if (std::isfinite(trial_loss) && trial_loss <= current) break;
                if (halvings == schedule.max_halvings) break;
                lr *= 0.5;
                ++halvings;
                ++rec.rejected_steps;
            }
            if (schedule.backtracking && !(std::isfinite(trial_loss) && trial_loss <= current)) {
                finish(StopReason::stalled);
                done = true;
                break;
            }
            net.w2.noalias() -= (lr * delta2.transpose()) * cache.h1;
            net.w1.swap(w1_trial);
            net.a.swap(a_trial);
            std::swap(cache, trial);
            current = trial_loss;
            ++step;
            if (schedule.backtracking) lr *= schedule.lr_growth;
            if (step % schedule.record_every == 0) rec.loss_curve.push_back({step, current});

            if (!std::isfinite(current) || current > cap) {
                finish(StopReason::diverged);
                done = true;
            } else if (current <= target) {
                finish(StopReason::converged);
                done = true;
            }
        }
        if (!done) finish(StopReason::max_steps);
    }
    rec.final = std::move(net);
    rec.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return rec;
}

namespace {

constexpr char kMagic[8] = {'P', 'H', 'M', 'A', 'P', 'C', 'K', '1'};

void write_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& is) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) throw FormatError("truncated checkpoint header");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

void write_f64(std::ostream& os, double v) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
}

void write_matrix(std::ostream& os, const Matrix& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) write_f64(os, m(r, c));
}

void read_matrix(std::istream& is, Matrix& m) {
    std::vector<unsigned char> buf(static_cast<std::size_t>(m.size()) * 8);
    if (!is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size())))
        throw FormatError("truncated checkpoint weights");
    std::size_t k = 0;
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            std::uint64_t bits = 0;
            for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(buf[k + i]) << (8 * i);
            k += 8;
            m(r, c) = std::bit_cast<double>(bits);
        }
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Network& net,
                     const CheckpointMeta& meta) {
    net.validate();
    nlohmann::json header = {
        {"format_version", 1},      {"m", net.width()},
        {"d", net.input_dim()},     {"d_out", net.output_dim()},
        {"alpha", net.alpha},       {"layer2_bias", net.layer2_bias()},
        {"seed", meta.seed},        {"config_hash", meta.config_hash},
    };
    const std::string text = header.dump();
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open " + path.string() + " for writing");
    os.write(kMagic, sizeof kMagic);
    write_u32(os, static_cast<std::uint32_t>(text.size()));
    os.write(text.data(), static_cast<std::streamsize>(text.size()));
    write_matrix(os, net.w1);
    write_matrix(os, net.w2);
    write_matrix(os, net.a);
    if (!os) throw IoError("failed writing " + path.string());
}

Network load_checkpoint(const std::filesystem::path& path, CheckpointMeta* meta) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path.string());
    char magic[8];
    if (!is.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0)
        throw FormatError(path.string() + " is not a phasemap checkpoint");
    const auto len = read_u32(is);
    if (len > (1u << 20)) throw FormatError("checkpoint header too large");
    std::string text(len, '\0');
    if (!is.read(text.data(), len)) throw FormatError("truncated checkpoint header");
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("checkpoint header: ") + e.what());
    }
    Network net;
    try {
        const auto m = header.at("m").get<std::int64_t>();
        const auto d = header.at("d").get<std::int64_t>();
        const auto d_out = header.at("d_out").get<std::int64_t>();
        if (m < 1 || d < 1 || d_out < 1 || m > (1 << 20) || d > (1 << 24) || d_out > (1 << 20))
            throw FormatError("checkpoint dimensions out of range");
        const bool bias = header.value("layer2_bias", false);
        const auto body = static_cast<std::uintmax_t>(
            8 * (m * (d + 1) + m * (bias ? m + 1 : m) + d_out * m));
        if (std::filesystem::file_size(path) != sizeof kMagic + 4 + len + body)
            throw FormatError("checkpoint size does not match its header (m=" + std::to_string(m) + ")");
        net = Network::zeros(m, d, d_out, header.at("alpha").get<double>(), bias);
        if (meta) {
            meta->seed = header.value("seed", std::uint64_t{0});
            meta->config_hash = header.value("config_hash", std::string{});
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("checkpoint header: ") + e.what());
    }
    read_matrix(is, net.w1);
    read_matrix(is, net.w2);
    read_matrix(is, net.a);
    if (is.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes in checkpoint");
    net.validate();
    return net;
}

}  // namespace phasemap
