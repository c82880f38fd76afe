#pragma once

#include <span>
#include <vector>

#include "phasemap/model.hpp"

namespace phasemap {

// ||final - init|| / ||final||. Throws UndefinedMetric when ||final|| = 0.
double relative_change(std::span<const double> theta_init, std::span<const double> theta_final);
double relative_change(const Matrix& init, const Matrix& final);

// u.v / (|u| |v|), clamped to [-1, 1].
double cosine(std::span<const double> u, std::span<const double> v);

// Rows with the largest L2 norm, descending; ties go to the lower index.
std::vector<Eigen::Index> top_rows_by_norm(const Matrix& w, double fraction);

struct CosineMatrix {
    Matrix values;                    // k x k, symmetric, unit diagonal
    std::vector<Eigen::Index> rows;  // selected row indices, descending norm
};

// Pairwise cosine similarity of the ceil(fraction*m) largest-norm rows.
CosineMatrix cosine_matrix(const Matrix& w, double fraction = 0.5);

// Mean |cosine| over all ordered pairs (diagonal included) of the top half
// of rows by norm. 1 when those rows are all parallel or anti-parallel.
double condensation_index(const Matrix& w);

// Rows of W1 as points in R^{d+1}.
Matrix scatter_w1(const Network& net);

// 1 - |mean unit vector| over the top `fraction` of 2-d rows by norm.
double circular_variance(const Matrix& points, double fraction = 0.5);

struct RegimeMetrics {
    double rd_w1 = 0;
    double rd_w2 = 0;
    double zeta = 0;       // condensation index of the final W2
    double zeta_init = 0;  // same for the initial W2
    Matrix w1_init;
    Matrix w1_final;
};

RegimeMetrics regime_metrics(const TrainRecord& record);

}  // namespace phasemap
