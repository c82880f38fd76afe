#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "phasemap/rational.hpp"

namespace phasemap {

// A width-dependent scale  sqrt(coef_sq) * (m + offset)^exponent.
//
// Storing the squared coefficient keeps table entries such as sqrt(2/d)
// exact. A non-zero offset covers fan-sum forms like sqrt(2/(m+1)); it does
// not change the asymptotic exponent.
struct PowerLaw {
    Rational coef_sq{1};
    Rational exponent{0};
    std::int64_t offset = 0;

    static PowerLaw constant(Rational coef_sq = Rational(1)) { return {coef_sq, Rational(0), 0}; }
    static PowerLaw power(Rational exponent) { return {Rational(1), exponent, 0}; }

    double coefficient() const;
    double value(std::int64_t m) const;
    std::string str() const;

    friend bool operator==(const PowerLaw&, const PowerLaw&) = default;
};

// Symbolic product  sqrt(coef_sq) * prod_k (m + offset_k)^{e_k}.
// Canonical form: factors with zero exponent are dropped, equal offsets
// merged, so == is exact symbolic equality.
class ScaleExpr {
public:
    ScaleExpr() = default;
    explicit ScaleExpr(const PowerLaw& law);
    ScaleExpr(Rational coef_sq, std::map<std::int64_t, Rational> factors);

    const Rational& coef_sq() const { return coef_sq_; }
    const std::map<std::int64_t, Rational>& factors() const { return factors_; }

    // Leading exponent in m as m -> infinity.
    Rational exponent() const;
    double value(std::int64_t m) const;
    std::string str() const;

    friend ScaleExpr operator*(const ScaleExpr& a, const ScaleExpr& b);
    friend ScaleExpr operator/(const ScaleExpr& a, const ScaleExpr& b);
    friend bool operator==(const ScaleExpr&, const ScaleExpr&) = default;

private:
    Rational coef_sq_{1};
    std::map<std::int64_t, Rational> factors_;
};

// Full initialization and output-scale specification for one network.
struct HyperConfig {
    PowerLaw alpha;
    PowerLaw beta1;
    PowerLaw beta2;
    PowerLaw beta3;
    std::int64_t m = 1;
    std::int64_t d = 1;
    std::int64_t d_out = 1;
    // beta2 = B * beta3 when declared; checked symbolically by validate().
    std::optional<Rational> B;
    // Bias column on the second hidden layer. Off by default: the appended
    // constant does not rescale with beta1, so it breaks the normalized model.
    bool layer2_bias = false;
    std::string label;

    void validate() const;
    HyperConfig at_width(std::int64_t width) const;

    double alpha_value() const { return alpha.value(m); }
    double beta1_value() const { return beta1.value(m); }
    double beta2_value() const { return beta2.value(m); }
    double beta3_value() const { return beta3.value(m); }
};

struct ScalingSummary {
    ScaleExpr kappa1_expr, kappa2_expr, kappa3_expr;
    double kappa1 = 1, kappa2 = 1, kappa3 = 1;
    Rational gamma2, gamma3;
    // (alpha * kappa1 * kappa2 * kappa3)^(-2/3), the normalized-time factor.
    double time_factor = 1;
};

ScalingSummary kappas(const HyperConfig& config);

// Step size that advances every configuration by `normalized_lr` units of
// normalized time per gradient step: normalized_lr / time_factor.
double effective_lr(const HyperConfig& config, double normalized_lr);

enum class Preset { NTK, LeCun, He, Xavier };

Preset parse_preset(std::string_view name);
std::string_view preset_name(Preset p);
HyperConfig preset(Preset name, std::int64_t m, std::int64_t d, std::int64_t d_out = 1);
HyperConfig preset(std::string_view name, std::int64_t m, std::int64_t d, std::int64_t d_out = 1);

struct GammaPoint {
    Rational gamma2;
    Rational gamma3;
    Rational alpha_exponent{0};
    Rational B{1};
};

// Inverse map: power laws with beta2 = B*beta3 and alpha = m^alpha_exponent
// whose kappa exponents are exactly -gamma2 and -gamma3.
HyperConfig config_from_gammas(const GammaPoint& point, std::int64_t m, std::int64_t d,
                               std::int64_t d_out = 1);

}  // namespace phasemap
