#include "doctest.h"

#include <filesystem>

#include "phasemap/config.hpp"
#include "phasemap/errors.hpp"
#include "phasemap/output.hpp"

using namespace phasemap;
using nlohmann::json;

TEST_CASE("defaults") {
    const RunConfig c = parse_config(json::object());
    CHECK(c.widths == std::vector<std::int64_t>{100, 500, 1000, 2000, 5000});
    CHECK(c.seeds.size() == 8);
    CHECK(c.gamma2_grid == std::vector<double>{0, 0.25, 0.5, 0.75, 1, 1.25, 1.5});
    REQUIRE(c.gamma3_grid.size() == 11);
    CHECK(c.gamma3_grid[3] == 0.9);
    CHECK(c.gamma3_grid.back() == 3.0);
    CHECK_FALSE(c.layer2_bias);
    CHECK(std::holds_alternative<SyntheticSpec>(c.data.source));
}

TEST_CASE("model forms") {
    auto model = [](const json& m) { return parse_config({{"model", m}}).model; };

    const ModelSpec p = model({{"preset", "He"}});
    CHECK(std::get<Preset>(p.source) == Preset::He);
    CHECK(kappas(p.resolve(100, 1, 1, false)).gamma2 == Rational(1, 2));

    const ModelSpec g = model({{"gamma2", 0.7}, {"gamma3", "5/2"}, {"alpha_exp", -0.3}});
    const HyperConfig hc = g.resolve(1000, 1, 1, false);
    CHECK(hc.beta1.exponent == Rational(-7, 15));
    CHECK(hc.beta3.exponent == Rational(-7, 6));

    const ModelSpec l = model({{"laws",
                                {{"alpha", {{"exp", "1/2"}}},
                                 {"beta1", {{"exp", "-1/5"}}},
                                 {"beta2", {{"exp", "-1/5"}}},
                                 {"beta3", {{"exp", "-1/5"}}}}},
                               {"B", 1},
                               {"label", "alpha=m^0.5"}});
    const HyperConfig lc = l.resolve(100, 1, 1, true);
    CHECK(lc.label == "alpha=m^0.5");
    CHECK(lc.layer2_bias);
    const auto s = kappas(lc);
    CHECK(s.gamma2 == Rational(0));
    CHECK(s.gamma3 == Rational(11, 10));

    const ModelSpec c = model({{"laws", {{"beta1", {{"coef", 0.5}}}, {"beta3", {{"coef_sq", "2/3"}, {"exp", -1}, {"offset", 1}}}}}});
    const HyperConfig cc = c.resolve(10, 1, 1, false);
    CHECK(cc.beta1.coef_sq == Rational(1, 4));
    CHECK(cc.beta3.offset == 1);
}

TEST_CASE("rejected configs") {
    CHECK_THROWS_AS(parse_config({{"modle", {{"preset", "NTK"}}}}), InvalidConfig);
    CHECK_THROWS_AS(parse_config({{"model", {{"preset", "NTK"}, {"gamma2", 0}}}}), InvalidConfig);
    CHECK_THROWS_AS(parse_config({{"model", {{"gamma2", 0}}}}), InvalidConfig);
    CHECK_THROWS_AS(parse_config({{"model", {{"preset", "foo"}}}}), InvalidConfig);
    CHECK_THROWS_AS(parse_config({{"model", {{"gamma2", 0}, {"gamma3", 1}, {"B", -1}}}}), InvalidConfig);
    CHECK_THROWS_AS(parse_config({{"widths", {500, 100}}}), InvalidConfig);
    CHECK_THROWS_AS(parse_config({{"widths", {100}}}), InvalidConfig);
    CHECK_THROWS_AS(parse_config({{"widths", "huge"}}), InvalidConfig);
    CHECK_THROWS_AS(parse_config({{"seeds", {1, 1}}}), InvalidConfig);
    CHECK_THROWS_AS(parse_config({{"seeds", json::array()}}), InvalidConfig);
    CHECK_THROWS_AS(parse_config({{"schedule", {{"normalized_lr", 0}}}}), InvalidConfig);
    CHECK_THROWS_AS(parse_config({{"schedule", {{"max_steps", "many"}}}}), InvalidConfig);
    CHECK_THROWS_AS(parse_config({{"data", {{"synthetic", {{0.5, 1}, {0.5, 2}}}}}}), InvalidConfig);
    CHECK_THROWS_AS(parse_config({{"data", {{"idx", {{"images", "a"}}}}}}), InvalidConfig);
    CHECK_THROWS_AS(parse_config({{"grid", {{"gamma2", json::array()}}}}), InvalidConfig);
    CHECK_THROWS_AS(load_config("/nonexistent/config.json"), InvalidConfig);

    // Well-formed but inconsistent laws fail at resolution.
    const RunConfig bad = parse_config(
        {{"model", {{"laws", {{"beta2", {{"exp", -1}}}, {"beta3", {{"exp", "-1/2"}}}}}, {"B", 1}}}});
    CHECK_THROWS_AS(bad.model.resolve(10, 1, 1, false), InvalidConfig);
}

TEST_CASE("widths, seeds and grids") {
    CHECK(parse_config({{"widths", "large"}}).widths == std::vector<std::int64_t>{100, 1000, 2000, 5000, 10000});
    CHECK(parse_config({{"widths", "large2500"}}).widths == std::vector<std::int64_t>{100, 1000, 2500, 5000, 10000});
    CHECK(parse_config({{"seeds", {{"count", 3}, {"first", 10}}}}).seeds == std::vector<std::uint64_t>{10, 11, 12});
    const RunConfig g = parse_config({{"grid", {{"gamma2", {0.0}}, {"gamma3", {{"start", 0.9}, {"stop", 2.1}, {"step", 0.6}}}}}});
    CHECK(g.gamma2_grid == std::vector<double>{0.0});
    CHECK(g.gamma3_grid == std::vector<double>{0.9, 1.5, 2.1});
}

TEST_CASE("idx paths resolve against the config directory") {
    const RunConfig c = parse_config({{"data", {{"idx", {{"images", "i.gz"}, {"labels", "/abs/l.gz"}, {"limit", 100}}}}}},
                                     "/some/dir");
    const auto& idx = std::get<IdxSource>(c.data.source);
    CHECK(idx.images == std::filesystem::path("/some/dir/i.gz"));
    CHECK(idx.labels == std::filesystem::path("/abs/l.gz"));
    CHECK(idx.limit == 100);
}

TEST_CASE("resolved echo parses back to the same config") {
    const json beta1 = {{"coef_sq", 2}, {"exp", "-1/2"}, {"offset", 3}};
    const json doc = {{"model", {{"gamma2", "7/10"}, {"gamma3", 2.5}}},
                      {"group", json::array({{{"preset", "Xavier"}}, {{"laws", {{"beta1", beta1}}}}})},
                      {"widths", {10, 20}},
                      {"seeds", {{"count", 2}}},
                      {"schedule", {{"max_steps", 50}, {"backtracking", false}}},
                      {"data", {{"synthetic", {{0.0, 1.0}, {1.0, 0.0}}}}}};
    const RunConfig c = parse_config(doc);
    const RunConfig back = parse_config(to_json(c));
    CHECK(to_json(back) == to_json(c));
    CHECK(config_hash(back) == config_hash(c));
    RunConfig changed = c;
    changed.schedule.max_steps = 51;
    CHECK(config_hash(changed) != config_hash(c));
}
