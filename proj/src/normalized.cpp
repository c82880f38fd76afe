#include "phasemap/normalized.hpp"

#include "phasemap/errors.hpp"

namespace phasemap {

NormalizedNetwork normalize(const Network& net, const HyperConfig& config) {
    net.validate();
    if (net.width() != config.m || net.input_dim() != config.d || net.output_dim() != config.d_out)
        throw ShapeMismatch("network dimensions do not match the config");
    const ScalingSummary s = kappas(config);
    NormalizedNetwork out;
    out.w1 = net.w1 / config.beta1_value();
    out.w2 = net.w2 / config.beta2_value();
    out.a = net.a / config.beta3_value();
    out.kappa1 = s.kappa1;
    out.kappa2 = s.kappa2;
    out.kappa3 = s.kappa3;
    out.time_factor = s.time_factor;
    return out;
}

Matrix normalized_predict(const NormalizedNetwork& net, const Matrix& x) {
    Network shadow;
    shadow.w1 = net.w1;
    shadow.w2 = net.w2;
    shadow.a = net.a;
    shadow.alpha = 1.0;
    return net.kappa3 * predict(shadow, x);
}

}  // namespace phasemap
