#pragma once

#include "phasemap/model.hpp"
#include "phasemap/scaling.hpp"

namespace phasemap {

// Weights divided by their initialization scales, so that a freshly
// initialized network has standard-normal entries. The output is
// kappa3 * a_bar * relu(W2_bar * relu(W1_bar * x)) without the second-layer
// bias; with it the constant column does not rescale and the identity is
// only approximate.
struct NormalizedNetwork {
    Matrix w1;
    Matrix w2;
    Matrix a;
    double kappa1 = 1;
    double kappa2 = 1;
    double kappa3 = 1;
    double time_factor = 1;
};

NormalizedNetwork normalize(const Network& net, const HyperConfig& config);

// Predictions computed from the normalized quantities alone.
Matrix normalized_predict(const NormalizedNetwork& net, const Matrix& x);

}  // namespace phasemap
