#include "phasemap/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "phasemap/errors.hpp"

namespace phasemap {

namespace {

std::span<const double> as_span(const Matrix& m) {
    return {m.data(), static_cast<std::size_t>(m.size())};
}

std::size_t selected_count(Eigen::Index m, double fraction) {
    if (!(fraction > 0.0) || fraction > 1.0)
        throw PreconditionError("fraction must lie in (0, 1]");
    // The small slack keeps e.g. 0.3*10 from rounding up to 4.
    const auto k = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(m) - 1e-9));
    return std::max<std::size_t>(k, 1);
}

}  // namespace

double relative_change(std::span<const double> theta_init, std::span<const double> theta_final) {
    if (theta_init.size() != theta_final.size())
        throw ShapeMismatch("parameter vectors differ in length");
    double diff = 0.0, norm = 0.0;
    for (std::size_t i = 0; i < theta_init.size(); ++i) {
        const double delta = theta_final[i] - theta_init[i];
        diff += delta * delta;
        norm += theta_final[i] * theta_final[i];
    }
    if (norm == 0.0) throw UndefinedMetric("relative change with zero final norm");
    return std::sqrt(diff) / std::sqrt(norm);
}

double relative_change(const Matrix& init, const Matrix& final) {
    if (init.rows() != final.rows() || init.cols() != final.cols())
        throw ShapeMismatch("weight snapshots differ in shape");
    return relative_change(as_span(init), as_span(final));
}

double cosine(std::span<const double> u, std::span<const double> v) {
    if (u.size() != v.size()) throw ShapeMismatch("cosine of vectors with different lengths");
    double uv = 0.0, uu = 0.0, vv = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        uv += u[i] * v[i];
        uu += u[i] * u[i];
        vv += v[i] * v[i];
    }
    if (uu == 0.0 || vv == 0.0) throw UndefinedMetric("cosine with a zero vector");
    return std::clamp(uv / (std::sqrt(uu) * std::sqrt(vv)), -1.0, 1.0);
}

std::vector<Eigen::Index> top_rows_by_norm(const Matrix& w, double fraction) {
    const std::size_t k = selected_count(w.rows(), fraction);
    const Vector norms = w.rowwise().norm();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(w.rows()));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return norms(a) > norms(b); });
    order.resize(std::min(k, order.size()));
    return order;
}

CosineMatrix cosine_matrix(const Matrix& w, double fraction) {
    CosineMatrix out;
    out.rows = top_rows_by_norm(w, fraction);
    const auto k = static_cast<Eigen::Index>(out.rows.size());
    Matrix unit(k, w.cols());
    for (Eigen::Index i = 0; i < k; ++i) {
        const auto row = w.row(out.rows[static_cast<std::size_t>(i)]);
        const double n = row.norm();
        if (n == 0.0) throw UndefinedMetric("zero row among the selected rows");
        unit.row(i) = row / n;
    }
    out.values = Matrix::Zero(k, k);
    out.values.selfadjointView<Eigen::Lower>().rankUpdate(unit);
    for (Eigen::Index j = 0; j < k; ++j) {
        out.values(j, j) = 1.0;
        for (Eigen::Index i = j + 1; i < k; ++i) {
            const double c = std::clamp(out.values(i, j), -1.0, 1.0);
            out.values(i, j) = c;
            out.values(j, i) = c;
        }
    }
    return out;
}

double condensation_index(const Matrix& w) {
    if (w.rows() < 2) throw PreconditionError("condensation index needs at least two rows");
    const CosineMatrix cm = cosine_matrix(w, 0.5);
    const auto k = static_cast<double>(cm.rows.size());
    return cm.values.cwiseAbs().sum() / (k * k);
}

Matrix scatter_w1(const Network& net) { return net.w1; }

double circular_variance(const Matrix& points, double fraction) {
    if (points.cols() != 2) throw ShapeMismatch("circular variance needs 2-d points");
    const auto rows = top_rows_by_norm(points, fraction);
    double cx = 0.0, cy = 0.0;
    for (auto r : rows) {
        const double n = points.row(r).norm();
        if (n == 0.0) throw UndefinedMetric("zero point among the selected rows");
        cx += points(r, 0) / n;
        cy += points(r, 1) / n;
    }
    const auto k = static_cast<double>(rows.size());
    return 1.0 - std::hypot(cx / k, cy / k);
}

RegimeMetrics regime_metrics(const TrainRecord& record) {
    RegimeMetrics out;
    out.rd_w1 = relative_change(record.initial.w1, record.final.w1);
    out.rd_w2 = relative_change(record.initial.w2, record.final.w2);
    if (record.final.width() >= 2) {
        out.zeta = condensation_index(record.final.w2);
        out.zeta_init = condensation_index(record.initial.w2);
    } else {
        out.zeta = out.zeta_init = 1.0;
    }
    out.w1_init = scatter_w1(record.initial);
    out.w1_final = scatter_w1(record.final);
    return out;
}

}  // namespace phasemap
