#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "phasemap/data.hpp"
#include "phasemap/errors.hpp"
#include "phasemap/model.hpp"

using namespace phasemap;
namespace fs = std::filesystem;

namespace {

HyperConfig small_config(std::int64_t m, std::int64_t d, std::int64_t d_out = 1, bool bias = false) {
    HyperConfig c;
    c.m = m;
    c.d = d;
    c.d_out = d_out;
    c.beta1 = PowerLaw::constant(Rational(1));
    c.beta2 = PowerLaw::constant(Rational(1, 4));
    c.beta3 = PowerLaw::constant(Rational(1, 9));
    c.alpha = PowerLaw::constant(Rational(4));
    c.layer2_bias = bias;
    return c;
}

Dataset gaussian_data(std::int64_t n, std::int64_t d, std::int64_t d_out, std::uint64_t seed) {
    Rng rng(seed);
    std::normal_distribution<double> g;
    Dataset data{Matrix(n, d), Matrix(n, d_out)};
    for (Eigen::Index i = 0; i < data.x.size(); ++i) data.x.data()[i] = g(rng);
    for (Eigen::Index i = 0; i < data.y.size(); ++i) data.y.data()[i] = g(rng);
    return data;
}

double kink_margin(const Network& net, const Dataset& data) {
    const ForwardCache c = forward(net, data.x);
    return std::min(c.z1.cwiseAbs().minCoeff(), c.z2.cwiseAbs().minCoeff());
}

// Central differences over every entry of `w`, which must alias a matrix of `net`.
Matrix numeric_grad(Network& net, Matrix& w, const Dataset& data, double h) {
    Matrix g(w.rows(), w.cols());
    for (Eigen::Index i = 0; i < w.size(); ++i) {
        const double keep = w.data()[i];
        w.data()[i] = keep + h;
        const double up = loss(net, data);
        w.data()[i] = keep - h;
        const double down = loss(net, data);
        w.data()[i] = keep;
        g.data()[i] = (up - down) / (2 * h);
    }
    return g;
}

double rel_err(const Matrix& a, const Matrix& b) {
    return (a - b).norm() / std::max({a.norm(), b.norm(), 1e-12});
}

fs::path temp_path(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "phasemap_test_model";
    fs::create_directories(dir);
    return dir / name;
}

}  // namespace

TEST_CASE("forward matches a direct evaluation") {
    Network net = Network::zeros(2, 1, 1, 2.0);
    net.w1 << 1, 0.5, -1, 1;
    net.w2 << 1, 2, -1, 1;
    net.a << 3, -1;
    Dataset data{Matrix(1, 1), Matrix(1, 1)};
    data.x << 2;
    data.y << 0;
    // h1 = relu([2.5, -1]) = [2.5, 0]; h2 = relu([2.5, -2.5]) = [2.5, 0]; out = 7.5 / 2
    const ForwardCache c = forward(net, data.x);
    CHECK(c.out(0, 0) == doctest::Approx(3.75));
    CHECK(loss(net, data) == doctest::Approx(0.5 * 3.75 * 3.75));
}

TEST_CASE("analytic gradients match central differences") {
    std::mt19937_64 pick(7);
    int checked = 0;
    for (int trial = 0; checked < 30 && trial < 200; ++trial) {
        const auto m = std::uniform_int_distribution<int>(1, 10)(pick);
        const auto d = std::uniform_int_distribution<int>(1, 3)(pick);
        const auto n = std::uniform_int_distribution<int>(1, 5)(pick);
        const auto d_out = std::uniform_int_distribution<int>(1, 2)(pick);
        const bool bias = trial % 3 == 0;
        Network net = init_network(small_config(m, d, d_out, bias), 1000 + trial);
        const Dataset data = gaussian_data(n, d, d_out, 5000 + trial);
        if (kink_margin(net, data) < 1e-3) continue;
        ++checked;
        const Gradients g = backward(net, data);
        const double h = 1e-6;
        CHECK(rel_err(g.w1, numeric_grad(net, net.w1, data, h)) < 1e-5);
        CHECK(rel_err(g.w2, numeric_grad(net, net.w2, data, h)) < 1e-5);
        CHECK(rel_err(g.a, numeric_grad(net, net.a, data, h)) < 1e-5);
    }
    CHECK(checked == 30);
}

TEST_CASE("relu derivative at zero is zero") {
    Network net = Network::zeros(1, 1, 1);
    net.w1 << 0, 0;
    net.w2 << 1;
    net.a << 1;
    Dataset data{Matrix::Ones(1, 1), Matrix::Ones(1, 1)};
    const Gradients g = backward(net, data);
    CHECK(g.w1.isZero());
    CHECK(g.w2.isZero());
}

TEST_CASE("initialization is deterministic and uses the configured scales") {
    HyperConfig c = small_config(5000, 1);
    c.beta1 = PowerLaw::constant(Rational(9, 100));
    const Network a = init_network(c, 42);
    const Network b = init_network(c, 42);
    CHECK(a.w1 == b.w1);
    CHECK(a.w2 == b.w2);
    CHECK(a.a == b.a);
    CHECK_FALSE(init_network(c, 43).w2 == a.w2);
    const double var = a.w1.squaredNorm() / static_cast<double>(a.w1.size());
    CHECK(var == doctest::Approx(0.09).epsilon(0.05));
    const double var2 = a.w2.squaredNorm() / static_cast<double>(a.w2.size());
    CHECK(var2 == doctest::Approx(0.25).epsilon(0.01));
}

TEST_CASE("draw order is W1, W2, A, each row-major") {
    const HyperConfig c = small_config(3, 2);
    const Network net = init_network(c, 9);
    Rng rng(9);
    std::normal_distribution<double> g;
    for (Eigen::Index r = 0; r < 3; ++r)
        for (Eigen::Index k = 0; k < 3; ++k) CHECK(net.w1(r, k) == g(rng));
    for (Eigen::Index r = 0; r < 3; ++r)
        for (Eigen::Index k = 0; k < 3; ++k) CHECK(net.w2(r, k) == 0.5 * g(rng));
}

TEST_CASE("loss and predictions are invariant to permuting hidden neurons") {
    const HyperConfig c = small_config(8, 2, 2);
    const Network net = init_network(c, 3);
    const Dataset data = gaussian_data(5, 2, 2, 4);
    Eigen::PermutationMatrix<Eigen::Dynamic> p1(8), p2(8);
    p1.setIdentity();
    p2.setIdentity();
    std::mt19937_64 rng(1);
    std::shuffle(p1.indices().data(), p1.indices().data() + 8, rng);
    std::shuffle(p2.indices().data(), p2.indices().data() + 8, rng);
    Network q = net;
    q.w1 = p1 * net.w1;
    q.w2 = p2 * net.w2 * p1.transpose();
    q.a = net.a * p2.transpose();
    CHECK(loss(q, data) == doctest::Approx(loss(net, data)).epsilon(1e-13));
    CHECK(rel_err(predict(q, data.x), predict(net, data.x)) < 1e-13);
}

TEST_CASE("shape errors") {
    Network net = Network::zeros(3, 2, 1);
    CHECK_THROWS_AS(forward(net, Matrix::Zero(4, 3)), ShapeMismatch);
    net.w2 = Matrix::Zero(3, 5);
    CHECK_THROWS_AS(net.validate(), ShapeMismatch);
    Dataset bad{Matrix::Zero(3, 1), Matrix::Zero(2, 1)};
    CHECK_THROWS_AS(bad.validate(), ShapeMismatch);
}

TEST_CASE("train matches a plain gradient descent loop") {
    const HyperConfig c = small_config(20, 1, 1, true);
    const Dataset data = synthetic_1d();
    const Network start = init_network(c, 11);
    Schedule s;
    s.lr = 0.05;
    s.max_steps = 50;
    s.rel_loss_target = 0;
    const TrainRecord rec = train(start, data, s);
    CHECK(rec.stop_reason == StopReason::max_steps);
    CHECK(rec.steps_taken == 50);

    Network ref = start;
    for (int k = 0; k < 50; ++k) {
        const Gradients g = backward(ref, data);
        ref.w1 -= s.lr * g.w1;
        ref.w2 -= s.lr * g.w2;
        ref.a -= s.lr * g.a;
    }
    CHECK(rel_err(rec.final.w1, ref.w1) < 1e-12);
    CHECK(rel_err(rec.final.w2, ref.w2) < 1e-12);
    CHECK(rel_err(rec.final.a, ref.a) < 1e-12);
    CHECK(rec.final_loss == doctest::Approx(loss(ref, data)).epsilon(1e-10));
    CHECK(rec.loss_curve.size() == 51);
}

TEST_CASE("stop reasons") {
    const HyperConfig c = small_config(10, 1);
    const Dataset data = synthetic_1d();
    const Network start = init_network(c, 1);
    Schedule s;
    s.lr = 0.05;

    s.max_steps = 0;
    auto rec = train(start, data, s);
    CHECK(rec.stop_reason == StopReason::max_steps);
    CHECK(rec.final.w1 == start.w1);
    CHECK(rec.steps_taken == 0);

    s.max_steps = 100000;
    s.rel_loss_target = 0.5;
    rec = train(start, data, s);
    CHECK(rec.stop_reason == StopReason::converged);
    CHECK(rec.final_loss <= 0.5 * rec.initial_loss);

    Dataset fitted = data;
    fitted.y = predict(start, data.x);
    rec = train(start, fitted, s);
    CHECK(rec.stop_reason == StopReason::converged);
    CHECK(rec.steps_taken == 0);

    s.lr = 1e4;
    s.rel_loss_target = 1e-3;
    rec = train(start, data, s);
    CHECK(rec.stop_reason == StopReason::diverged);

    s.backtracking = true;
    s.lr_growth = 1.05;
    rec = train(start, data, s);
    CHECK(rec.stop_reason != StopReason::diverged);
    CHECK(rec.rejected_steps > 0);
    for (std::size_t k = 1; k < rec.loss_curve.size(); ++k)
        CHECK(rec.loss_curve[k].loss <= rec.loss_curve[k - 1].loss);

    CHECK(parse_stop_reason(to_string(StopReason::stalled)) == StopReason::stalled);
    CHECK_THROWS_AS(parse_stop_reason("bogus"), FormatError);
}

TEST_CASE("checkpoint round trip and corruption") {
    const Network net = init_network(small_config(6, 2, 3, true), 5);
    const fs::path p = temp_path("net.bin");
    save_checkpoint(p, net, {77, "abc"});
    CheckpointMeta meta;
    const Network back = load_checkpoint(p, &meta);
    CHECK(back.w1 == net.w1);
    CHECK(back.w2 == net.w2);
    CHECK(back.a == net.a);
    CHECK(back.alpha == net.alpha);
    CHECK(meta.seed == 77);
    CHECK(meta.config_hash == "abc");

    const auto size = fs::file_size(p);
    fs::resize_file(p, size - 3);
    CHECK_THROWS_AS(load_checkpoint(p), FormatError);
    save_checkpoint(p, net, {});
    {
        std::ofstream app(p, std::ios::binary | std::ios::app);
        app << "x";
    }
    CHECK_THROWS_AS(load_checkpoint(p), FormatError);
    {
        std::ofstream junk(p, std::ios::binary | std::ios::trunc);
        junk << "not a checkpoint at all";
    }
    CHECK_THROWS_AS(load_checkpoint(p), FormatError);
    CHECK_THROWS_AS(load_checkpoint(temp_path("missing.bin")), IoError);
}
