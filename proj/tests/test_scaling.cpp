#include "doctest.h"

#include <cmath>

#include "phasemap/errors.hpp"
#include "phasemap/scaling.hpp"

using namespace phasemap;

namespace {

ScaleExpr expr(Rational coef_sq, std::map<std::int64_t, Rational> factors = {}) {
    return ScaleExpr(coef_sq, std::move(factors));
}

}  // namespace

TEST_CASE("power law values") {
    const PowerLaw law{Rational(2), Rational(-1, 2), 1};
    CHECK(law.value(99) == doctest::Approx(std::sqrt(2.0 / 100.0)).epsilon(1e-15));
    CHECK(PowerLaw::power(Rational(1)).value(250) == 250.0);
    CHECK(PowerLaw::constant(Rational(1, 4)).value(7) == 0.5);
}

TEST_CASE("scale expressions are canonical") {
    const ScaleExpr a(PowerLaw{Rational(1), Rational(1, 2), 0});
    const ScaleExpr b(PowerLaw{Rational(1), Rational(-1, 2), 0});
    CHECK(a * b == ScaleExpr());
    CHECK((a * b).factors().empty());
    CHECK((a / b).exponent() == Rational(1));
    const ScaleExpr c(PowerLaw{Rational(3), Rational(-1, 2), 5});
    CHECK((a * c).exponent() == Rational(0));
    CHECK((a * c).factors().size() == 2);
}

TEST_CASE("presets: kappa expressions and gammas") {
    for (std::int64_t d : {1, 3, 784}) {
        CAPTURE(d);
        const auto ntk = kappas(preset(Preset::NTK, 100, d));
        CHECK(ntk.kappa2_expr == expr(Rational(1)));
        CHECK(ntk.kappa3_expr == expr(Rational(1), {{0, Rational(-1)}}));
        CHECK(ntk.gamma2 == Rational(0));
        CHECK(ntk.gamma3 == Rational(1));

        const auto lecun = kappas(preset("LeCun", 100, d));
        CHECK(lecun.kappa2_expr == expr(Rational(d), {{0, Rational(-1, 2)}}));
        CHECK(lecun.kappa3_expr == expr(Rational(1, d), {{0, Rational(-1)}}));
        CHECK(lecun.gamma2 == Rational(1, 2));
        CHECK(lecun.gamma3 == Rational(1));

        const auto he = kappas(preset("He", 100, d));
        CHECK(he.kappa2_expr == expr(Rational(d), {{0, Rational(-1, 2)}}));
        CHECK(he.kappa3_expr == expr(Rational(8, d), {{0, Rational(-1)}}));
        CHECK(he.gamma2 == Rational(1, 2));
        CHECK(he.gamma3 == Rational(1));
    }
}

TEST_CASE("Xavier laws follow the fan-sum formulas") {
    const std::int64_t d = 784;
    const HyperConfig x = preset(Preset::Xavier, 100, d);
    CHECK(x.beta3.value(100) == doctest::Approx(std::sqrt(2.0 / 101.0)).epsilon(1e-15));
    CHECK(x.beta2.value(100) == doctest::Approx(std::sqrt(2.0 / 200.0)).epsilon(1e-15));
    CHECK(x.beta1.value(100) == doctest::Approx(std::sqrt(2.0 / 884.0)).epsilon(1e-15));
    const auto s = kappas(x);
    // kappa2 = sqrt((d+m)/(m+1)) has no net power of m.
    CHECK(s.kappa2_expr == expr(Rational(1), {{1, Rational(-1, 2)}, {d, Rational(1, 2)}}));
    CHECK(s.gamma2 == Rational(0));
    CHECK(s.gamma3 == Rational(3, 2));
}

TEST_CASE("unknown preset") {
    CHECK_THROWS_AS(parse_preset("foo"), InvalidConfig);
    CHECK(parse_preset("lecun") == Preset::LeCun);
    CHECK(preset_name(Preset::Xavier) == "Xavier");
}

TEST_CASE("inverse map round trips exactly") {
    for (int a = -6; a <= 6; a += 3)
        for (int g2 = 0; g2 <= 15; g2 += 3)
            for (int g3 = 0; g3 <= 30; g3 += 5) {
                const GammaPoint p{Rational(g2, 10), Rational(g3, 10), Rational(a, 10), Rational(1)};
                const auto s = kappas(config_from_gammas(p, 100, 1));
                CHECK(s.gamma2 == p.gamma2);
                CHECK(s.gamma3 == p.gamma3);
            }
    const GammaPoint with_b{Rational(7, 10), Rational(5, 2), Rational(0), Rational(3, 2)};
    const HyperConfig c = config_from_gammas(with_b, 500, 2);
    CHECK(c.beta2.value(500) == doctest::Approx(1.5 * c.beta3.value(500)).epsilon(1e-15));
    CHECK(kappas(c).gamma3 == Rational(5, 2));
}

TEST_CASE("inverse map reproduces the reference group configurations") {
    struct Row {
        Rational alpha, a, w2, w1, g2, g3;
    };
    const Row rows[] = {
        {Rational(-1, 2), Rational(-8, 15), Rational(-8, 15), Rational(-8, 15), Rational(0), Rational(11, 10)},
        {Rational(0), Rational(-11, 30), Rational(-11, 30), Rational(-11, 30), Rational(0), Rational(11, 10)},
        {Rational(1, 2), Rational(-1, 5), Rational(-1, 5), Rational(-1, 5), Rational(0), Rational(11, 10)},
        {Rational(-3, 10), Rational(-7, 6), Rational(-7, 6), Rational(-7, 15), Rational(7, 10), Rational(5, 2)},
        {Rational(0), Rational(-16, 15), Rational(-16, 15), Rational(-11, 30), Rational(7, 10), Rational(5, 2)},
        {Rational(3, 10), Rational(-29, 30), Rational(-29, 30), Rational(-4, 15), Rational(7, 10), Rational(5, 2)},
    };
    for (const auto& r : rows) {
        CAPTURE(r.alpha);
        const HyperConfig c = config_from_gammas({r.g2, r.g3, r.alpha, Rational(1)}, 100, 1);
        CHECK(c.alpha.exponent == r.alpha);
        CHECK(c.beta3.exponent == r.a);
        CHECK(c.beta2.exponent == r.w2);
        CHECK(c.beta1.exponent == r.w1);
        const auto s = kappas(c);
        CHECK(s.gamma2 == r.g2);
        CHECK(s.gamma3 == r.g3);
    }
}

TEST_CASE("declared B is checked symbolically") {
    HyperConfig c = config_from_gammas({Rational(0), Rational(1)}, 10, 1);
    c.beta2.exponent = Rational(-1, 4);
    CHECK_THROWS_AS(c.validate(), InvalidConfig);
    c.B.reset();
    CHECK_NOTHROW(c.validate());
    c.alpha.coef_sq = Rational(0);
    CHECK_THROWS_AS(c.validate(), InvalidConfig);
}

TEST_CASE("time factor is beta3^-2") {
    for (const auto& c : {preset(Preset::NTK, 300, 2), preset(Preset::Xavier, 300, 2),
                          config_from_gammas({Rational(7, 10), Rational(5, 2), Rational(3, 10)}, 300, 2)}) {
        const double b3 = c.beta3_value();
        CHECK(kappas(c).time_factor == doctest::Approx(1.0 / (b3 * b3)).epsilon(1e-12));
        CHECK(effective_lr(c, 0.5) == doctest::Approx(0.5 * b3 * b3).epsilon(1e-12));
    }
    CHECK_THROWS_AS(effective_lr(preset(Preset::NTK, 10, 1), 0.0), InvalidConfig);
}
