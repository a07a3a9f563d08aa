#include <doctest.h>

#include <nlohmann/json.hpp>

#include "helpers.hpp"
#include "hyperctrl/config.hpp"
#include "hyperctrl/errors.hpp"

using namespace hyperctrl;
using nlohmann::json;

TEST_SUITE("config") {

TEST_CASE("every bundled preset loads") {
    const auto names = preset_names();
    CHECK(names.size() >= 6);
    for (const auto& name : names) {
        CAPTURE(name);
        CHECK_NOTHROW(testing::preset(name));
    }
}

TEST_CASE("the counterexample preset carries its counterexample data") {
    const auto cx = counterexample_from_json(load_preset("thm1-ref"));
    REQUIRE(cx.has_value());
    CHECK(cx->k == 1);
    CHECK(cx->m == 2);
    CHECK(cx->ell == 2);
    CHECK(cx->eps == doctest::Approx(0.1));
    CHECK(cx->lambdas == std::vector<double>{1.0, 1.0, 2.0});
    CHECK_FALSE(counterexample_from_json(load_preset("ref-k1m1")).has_value());
}

TEST_CASE("speed, polynomial and grid couplings parse") {
    const json j = json::parse(R"({
        "k": 1, "m": 1,
        "speeds": [{"kind": "affine", "a": 1.0, "b": 1.0}, {"kind": "grid", "x": [0, 0.5, 1], "v": [2, 2, 2]}],
        "B": [[0.5]],
        "coupling": {"kind": "grid", "t": [0, 1], "x": [0, 1],
                     "entries": [{"i": 1, "j": 2, "v": [[0, 1], [2, 3]]}]}
    })");
    const auto spec = system_from_json(j);
    CHECK(spec.lambda(1, 0.5) == doctest::Approx(1.5));
    CHECK(spec.tau(2) == doctest::Approx(0.5));
    CHECK(spec.C(0.5, 0.5)(0, 1) == doctest::Approx(1.5));
    CHECK(spec.C(0.5, 0.5)(1, 0) == 0.0);

    const auto poly = testing::preset("k2m1-poly");
    // Term i = 1, j = 3 has c = [[0.5, 0], [0.3, 0.2]]: 0.5 + 0.3 t + 0.2 t x.
    CHECK(poly.C(0.5, 0.4)(0, 2) == doctest::Approx(0.5 + 0.15 + 0.04));
}

TEST_CASE("malformed configs are configuration errors") {
    CHECK_THROWS_AS(system_from_json(json::parse(R"({"k": 1, "m": 1, "speeds": [], "B": [[1]]})")), ConfigError);
    CHECK_THROWS_AS(system_from_json(json::parse(R"({"m": 1})")), ConfigError);
    CHECK_THROWS_AS(system_from_json(json::parse(
                        R"({"k": 1, "m": 1, "speeds": [{"kind": "const", "value": 1}, {"kind": "wobbly"}], "B": [[1]]})")),
                    ConfigError);
    CHECK_THROWS_AS(system_from_json(json::parse(
                        R"({"k": 1, "m": 1, "speeds": [{"kind": "const", "value": 1}, {"kind": "const", "value": 1}], "B": [[1, 2]]})")),
                    ConfigError);
    CHECK_THROWS_AS(load_preset("no-such-preset"), ConfigError);
    try {
        read_json_file("/definitely/missing.json");
        FAIL("expected a configuration error");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("/definitely/missing.json") != std::string::npos);
    }
}

}  // TEST_SUITE
