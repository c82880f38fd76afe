#include "phasemap/scaling.hpp"

#include <cmath>
#include <sstream>

#include "phasemap/errors.hpp"

namespace phasemap {

namespace {

double pow_rational(double base, const Rational& e) {
    if (e.is_zero()) return 1.0;
    if (e.den() == 1) return std::pow(base, static_cast<double>(e.num()));
    if (e.den() == 2) return std::pow(std::sqrt(base), static_cast<double>(e.num()));
    return std::pow(base, e.to_double());
}

std::string factor_str(std::int64_t offset, const Rational& e) {
    std::string base = offset == 0 ? "m" : "(m+" + std::to_string(offset) + ")";
    if (e == Rational(1)) return base;
    return base + "^" + (e.den() == 1 ? e.str() : "(" + e.str() + ")");
}

}  // namespace

double PowerLaw::coefficient() const { return std::sqrt(coef_sq.to_double()); }

double PowerLaw::value(std::int64_t m) const {
    return coefficient() * pow_rational(static_cast<double>(m + offset), exponent);
}

std::string PowerLaw::str() const { return ScaleExpr(*this).str(); }

ScaleExpr::ScaleExpr(const PowerLaw& law) : coef_sq_(law.coef_sq) {
    if (!law.exponent.is_zero()) factors_.emplace(law.offset, law.exponent);
}

ScaleExpr::ScaleExpr(Rational coef_sq, std::map<std::int64_t, Rational> factors)
    : coef_sq_(coef_sq) {
    for (auto& [offset, e] : factors)
        if (!e.is_zero()) factors_.emplace(offset, e);
}

Rational ScaleExpr::exponent() const {
    Rational total;
    for (const auto& [offset, e] : factors_) total += e;
    return total;
}

double ScaleExpr::value(std::int64_t m) const {
    double v = std::sqrt(coef_sq_.to_double());
    for (const auto& [offset, e] : factors_) v *= pow_rational(static_cast<double>(m + offset), e);
    return v;
}

std::string ScaleExpr::str() const {
    std::ostringstream os;
    if (coef_sq_ == Rational(1))
        os << "1";
    else
        os << "sqrt(" << coef_sq_ << ")";
    for (const auto& [offset, e] : factors_) os << " * " << factor_str(offset, e);
    return os.str();
}

ScaleExpr operator*(const ScaleExpr& a, const ScaleExpr& b) {
    auto factors = a.factors_;
    for (const auto& [offset, e] : b.factors_) factors[offset] += e;
    return ScaleExpr(a.coef_sq_ * b.coef_sq_, std::move(factors));
}

ScaleExpr operator/(const ScaleExpr& a, const ScaleExpr& b) {
    auto factors = a.factors_;
    for (const auto& [offset, e] : b.factors_) factors[offset] -= e;
    return ScaleExpr(a.coef_sq_ / b.coef_sq_, std::move(factors));
}

void HyperConfig::validate() const {
    if (m < 1) throw InvalidConfig("width m must be positive, got " + std::to_string(m));
    if (d < 1) throw InvalidConfig("input dimension must be positive");
    if (d_out < 1) throw InvalidConfig("output dimension must be positive");
    const std::pair<const char*, const PowerLaw*> laws[] = {
        {"alpha", &alpha}, {"beta1", &beta1}, {"beta2", &beta2}, {"beta3", &beta3}};
    for (const auto& [name, law] : laws) {
        if (law->coef_sq.sign() <= 0)
            throw InvalidConfig(std::string(name) + " coefficient must be positive");
        if (law->offset < 0) throw InvalidConfig(std::string(name) + " offset must be non-negative");
    }
    if (B) {
        if (B->sign() <= 0) throw InvalidConfig("B must be positive");
        const PowerLaw expected{*B * *B * beta3.coef_sq, beta3.exponent, beta3.offset};
        if (!(beta2 == expected))
            throw InvalidConfig("beta2 law " + beta2.str() + " is not B*beta3 = " + expected.str());
    }
}

HyperConfig HyperConfig::at_width(std::int64_t width) const {
    HyperConfig c = *this;
    c.m = width;
    return c;
}

ScalingSummary kappas(const HyperConfig& config) {
    config.validate();
    const ScaleExpr a(config.alpha), b1(config.beta1), b2(config.beta2), b3(config.beta3);
    ScalingSummary s;
    s.kappa1_expr = b3 / b2;
    s.kappa2_expr = b3 / b1;
    s.kappa3_expr = b1 * b2 * b3 / a;
    s.kappa1 = s.kappa1_expr.value(config.m);
    s.kappa2 = s.kappa2_expr.value(config.m);
    s.kappa3 = s.kappa3_expr.value(config.m);
    s.gamma2 = -s.kappa2_expr.exponent();
    s.gamma3 = -s.kappa3_expr.exponent();
    s.time_factor = std::pow(config.alpha_value() * s.kappa1 * s.kappa2 * s.kappa3, -2.0 / 3.0);
    return s;
}

double effective_lr(const HyperConfig& config, double normalized_lr) {
    if (!(normalized_lr > 0.0) || !std::isfinite(normalized_lr))
        throw InvalidConfig("normalized learning rate must be positive");
    return normalized_lr / kappas(config).time_factor;
}

Preset parse_preset(std::string_view name) {
    if (name == "NTK" || name == "ntk") return Preset::NTK;
    if (name == "LeCun" || name == "Lecun" || name == "lecun") return Preset::LeCun;
    if (name == "He" || name == "he") return Preset::He;
    if (name == "Xavier" || name == "xavier") return Preset::Xavier;
    throw InvalidConfig("unknown preset '" + std::string(name) + "'");
}

std::string_view preset_name(Preset p) {
    switch (p) {
        case Preset::NTK: return "NTK";
        case Preset::LeCun: return "LeCun";
        case Preset::He: return "He";
        case Preset::Xavier: return "Xavier";
    }
    return "?";
}

HyperConfig preset(Preset name, std::int64_t m, std::int64_t d, std::int64_t d_out) {
    const Rational half(-1, 2);
    HyperConfig c;
    c.m = m;
    c.d = d;
    c.d_out = d_out;
    c.label = std::string(preset_name(name));
    switch (name) {
        case Preset::NTK:
            // alpha = sqrt(m1 m2) = m under equal widths.
            c.alpha = PowerLaw::power(Rational(1));
            c.B = Rational(1);
            break;
        case Preset::LeCun:
            c.beta3 = {Rational(1), half, 0};
            c.beta2 = {Rational(1), half, 0};
            c.beta1 = PowerLaw::constant(Rational(1, d));
            c.B = Rational(1);
            break;
        case Preset::He:
            c.beta3 = {Rational(2), half, 0};
            c.beta2 = {Rational(2), half, 0};
            c.beta1 = PowerLaw::constant(Rational(2, d));
            c.B = Rational(1);
            break;
        case Preset::Xavier:
            // sqrt(2/(m2+d_out)), sqrt(2/(m1+m2)), sqrt(2/(d+m1)).
            c.beta3 = {Rational(2), half, d_out};
            c.beta2 = {Rational(1), half, 0};
            c.beta1 = {Rational(2), half, d};
            break;
    }
    c.validate();
    return c;
}

HyperConfig preset(std::string_view name, std::int64_t m, std::int64_t d, std::int64_t d_out) {
    return preset(parse_preset(name), m, d, d_out);
}

HyperConfig config_from_gammas(const GammaPoint& point, std::int64_t m, std::int64_t d,
                               std::int64_t d_out) {
    if (point.B.sign() <= 0) throw InvalidConfig("B must be positive");
    const Rational& a = point.alpha_exponent;
    const Rational b3 = (a - point.gamma2 - point.gamma3) / Rational(3);
    const Rational b1 = (a + Rational(2) * point.gamma2 - point.gamma3) / Rational(3);
    HyperConfig c;
    c.alpha = PowerLaw::power(a);
    c.beta1 = PowerLaw::power(b1);
    c.beta3 = PowerLaw::power(b3);
    c.beta2 = {point.B * point.B, b3, 0};
    c.B = point.B;
    c.m = m;
    c.d = d;
    c.d_out = d_out;
    c.label = "gamma2=" + point.gamma2.str() + ",gamma3=" + point.gamma3.str() +
              ",alpha=m^" + a.str();
    c.validate();
    return c;
}

}  // namespace phasemap
