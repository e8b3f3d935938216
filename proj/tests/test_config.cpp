#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include "penn/config.hpp"
#include "penn/plant.hpp"

using namespace penn;
using Catch::Matchers::ContainsSubstring;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// smallest parseable config: one muscle, everything else defaulted
std::string minimal_config() {
    return "[muscle.only]\n"
           "f_max = 50\n"
           "l_opt = 0.07\n"
           "l_tendon_slack = 0.12\n"
           "phi_opt_rad = 0.05\n"
           "k_fl = 0.45\n"
           "mtu_c0 = 0.18991251822764765\n"
           "mtu_c1 = -0.012\n"
           "mtu_c2 = 0.0015\n"
           "mtu_c3 = -0.0003\n";
}

} // namespace

TEST_CASE("shipped example config reproduces the built-in wrist plant") {
    const std::string text = read_file(std::string(PENN_REPO_DIR) + "/configs/wrist.ini");
    auto rc = cfg::parse_run_config(text, "wrist.ini");

    Plant ref = default_wrist_plant();
    REQUIRE(rc.plant.size() == ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i) {
        CHECK(rc.plant.muscles[i].f_max == ref.muscles[i].f_max);
        CHECK(rc.plant.muscles[i].l_opt == ref.muscles[i].l_opt);
        CHECK(rc.plant.muscles[i].l_tendon_slack == ref.muscles[i].l_tendon_slack);
        CHECK(rc.plant.muscles[i].phi_opt == ref.muscles[i].phi_opt);
        CHECK(rc.plant.muscles[i].k_fl == ref.muscles[i].k_fl);
        for (int k = 0; k < 4; ++k)
            CHECK(rc.plant.geometry.mtu_coeffs[i][k] == ref.geometry.mtu_coeffs[i][k]);
    }
    CHECK(rc.plant.joint.inertia == ref.joint.inertia);
    CHECK(rc.plant.activation.a_shape == ref.activation.a_shape);
    CHECK(rc.muscle_names ==
          std::vector<std::string>{"fcr", "fcu", "ecrl", "ecu", "edc"});
    CHECK(rc.model.window == 16);
    CHECK(rc.train.batch_phase2 == 32);
    CHECK(rc.filters.band_hi_hz == 450.0);
}

TEST_CASE("defaults fill every section that is absent") {
    auto rc = cfg::parse_run_config(minimal_config(), "mini.ini");
    CHECK(rc.seed == 1);
    CHECK(rc.sim.dt == 0.001);
    CHECK(rc.sim.duration == 10.0);
    CHECK(rc.n_trials == 5);
    CHECK(rc.train.lr == 0.001);
    CHECK(rc.train.patience == 30);
    CHECK(rc.train.split_train == 0.85);
    CHECK(rc.model.dropout_rate == 0.3);
    CHECK(rc.filters.band_lo_hz == 20.0);
    CHECK(rc.plant.muscles[0].lambda_al == 0.15);
    CHECK(rc.plant.muscles[0].v_max_factor == 10.0);
    CHECK(rc.plant.geometry.theta_min == -1.2);
    CHECK(rc.out_dir.empty());
}

TEST_CASE("master seed flows into simulate and train unless overridden") {
    auto rc = cfg::parse_run_config("[run]\nseed = 77\n" + minimal_config(), "s.ini");
    CHECK(rc.seed == 77);
    CHECK(rc.sim.seed == 77);
    CHECK(rc.train.seed == 77);

    auto rc2 = cfg::parse_run_config(
        "[run]\nseed = 77\n[simulate]\nseed = 3\n[train]\nseed = 4\n" + minimal_config(),
        "s.ini");
    CHECK(rc2.sim.seed == 3);
    CHECK(rc2.train.seed == 4);
    CHECK(rc2.seed == 77);
}

TEST_CASE("resolved serialization is a parse fixed point with exact doubles") {
    const std::string text = read_file(std::string(PENN_REPO_DIR) + "/configs/wrist.ini");
    auto rc = cfg::parse_run_config(text, "wrist.ini");
    rc.sim.dt = 1.0 / 3.0;  // not representable in short decimal
    rc.train.lr = 1e-300;
    rc.plant.joint.gravity = std::nextafter(9.81, 10.0);
    rc.out_dir = "runs/a";

    const std::string once = cfg::config_to_ini(rc);
    auto rc2 = cfg::parse_run_config(once, "resolved.ini");
    CHECK(rc2.sim.dt == rc.sim.dt);
    CHECK(rc2.train.lr == rc.train.lr);
    CHECK(rc2.plant.joint.gravity == rc.plant.joint.gravity);
    CHECK(rc2.out_dir == "runs/a");
    CHECK(cfg::config_to_ini(rc2) == once);
}

TEST_CASE("parse errors carry file and line") {
    auto parse = [](const std::string& text) {
        return cfg::parse_run_config(text, "bad.ini");
    };

    SECTION("unknown key in a known section") {
        CHECK_THROWS_WITH(parse(minimal_config() + "[train]\nlrr = 0.1\n"),
                          ContainsSubstring("bad.ini:12") &&
                              ContainsSubstring("unknown key 'lrr'") &&
                              ContainsSubstring("[train]"));
    }
    SECTION("unknown section") {
        CHECK_THROWS_WITH(parse(minimal_config() + "[nonsense]\nx = 1\n"),
                          ContainsSubstring("bad.ini:11") &&
                              ContainsSubstring("unknown section [nonsense]"));
    }
    SECTION("duplicate key") {
        CHECK_THROWS_WITH(parse("[train]\nlr = 1\nlr = 2\n"),
                          ContainsSubstring("bad.ini:3") &&
                              ContainsSubstring("duplicate key 'lr'"));
    }
    SECTION("duplicate section") {
        CHECK_THROWS_WITH(parse("[train]\n[run]\n[train]\n"),
                          ContainsSubstring("bad.ini:3") &&
                              ContainsSubstring("duplicate section [train]"));
    }
    SECTION("value that is not a number") {
        CHECK_THROWS_WITH(parse(minimal_config() + "[train]\nlr = fast\n"),
                          ContainsSubstring("bad.ini:12") &&
                              ContainsSubstring("train.lr is not a number"));
    }
    SECTION("key before any section") {
        CHECK_THROWS_WITH(parse("seed = 1\n"),
                          ContainsSubstring("bad.ini:1") &&
                              ContainsSubstring("before any [section]"));
    }
    SECTION("missing required muscle key names the field path") {
        std::string text = minimal_config();
        const auto at = text.find("f_max = 50\n");
        text.erase(at, 11);
        CHECK_THROWS_WITH(parse(text),
                          ContainsSubstring("bad.ini:1") &&
                              ContainsSubstring("missing required key 'f_max'") &&
                              ContainsSubstring("muscle.only.f_max"));
    }
    SECTION("unterminated section header") {
        CHECK_THROWS_WITH(parse("[run\nseed = 1\n"),
                          ContainsSubstring("bad.ini:1") &&
                              ContainsSubstring("unterminated"));
    }
    SECTION("invalid section name") {
        CHECK_THROWS_WITH(parse("[Run]\n"), ContainsSubstring("invalid section name"));
    }
    SECTION("empty value") {
        CHECK_THROWS_WITH(parse("[run]\nseed =\n"),
                          ContainsSubstring("bad.ini:2") && ContainsSubstring("no value"));
    }
    SECTION("no muscles at all") {
        CHECK_THROWS_WITH(parse("[run]\nseed = 1\n"),
                          ContainsSubstring("at least one [muscle.<name>] section"));
    }
    SECTION("boolean typo") {
        CHECK_THROWS_WITH(parse(minimal_config() + "[train]\nunfreeze_physics_phase2 = yes\n"),
                          ContainsSubstring("must be true or false"));
    }
    SECTION("bad excitation kind") {
        CHECK_THROWS_WITH(parse(minimal_config() + "[excitation]\nkind = square\n"),
                          ContainsSubstring("sum_of_sines or random_walk"));
    }
    SECTION("invalid plant value surfaces as a config error") {
        std::string text = minimal_config();
        const auto at = text.find("f_max = 50");
        text.replace(at, 10, "f_max = -1");
        CHECK_THROWS_WITH(parse(text), ContainsSubstring("invalid plant") &&
                                           ContainsSubstring("f_max"));
    }
}

TEST_CASE("command-line overrides rewrite and extend the document") {
    const std::string base = "[run]\nseed = 2\n" + minimal_config();

    SECTION("override an existing key") {
        auto rc = cfg::parse_run_config(base, "o.ini", {"run.seed=9"});
        CHECK(rc.seed == 9);
    }
    SECTION("set a key in a section the file does not have") {
        auto rc = cfg::parse_run_config(base, "o.ini", {"train.lr=0.01", "model.window=8"});
        CHECK(rc.train.lr == 0.01);
        CHECK(rc.model.window == 8);
    }
    SECTION("muscle keys address through the dotted section") {
        auto rc = cfg::parse_run_config(base, "o.ini", {"muscle.only.f_max=61.5"});
        CHECK(rc.plant.muscles[0].f_max == 61.5);
    }
    SECTION("last override wins") {
        auto rc = cfg::parse_run_config(base, "o.ini", {"run.seed=5", "run.seed=6"});
        CHECK(rc.seed == 6);
    }
    SECTION("unknown override key is rejected by the schema sweep") {
        CHECK_THROWS_WITH(cfg::parse_run_config(base, "o.ini", {"train.lrr=1"}),
                          ContainsSubstring("--set") &&
                              ContainsSubstring("unknown key 'lrr'"));
    }
    SECTION("malformed override specs") {
        CHECK_THROWS_WITH(cfg::parse_run_config(base, "o.ini", {"train.lr"}),
                          ContainsSubstring("section.key=value"));
        CHECK_THROWS_WITH(cfg::parse_run_config(base, "o.ini", {"lr=1"}),
                          ContainsSubstring("has no section"));
        CHECK_THROWS_WITH(cfg::parse_run_config(base, "o.ini", {"train.lr="}),
                          ContainsSubstring("has no value"));
        CHECK_THROWS_WITH(cfg::parse_run_config(base, "o.ini", {"train.Lr=1"}),
                          ContainsSubstring("not a valid section.key"));
    }
    SECTION("bad value in an override reports the override, not a line") {
        CHECK_THROWS_WITH(cfg::parse_run_config(base, "o.ini", {"train.lr=soon"}),
                          ContainsSubstring("--set") &&
                              ContainsSubstring("train.lr is not a number"));
    }
}

TEST_CASE("comments blank lines and whitespace are tolerated") {
    const std::string text =
        "# header comment\n"
        "\n"
        "; alt comment\n"
        "  [run]  \n"
        "  seed   =   4  \n"
        "\r\n" +
        minimal_config();
    auto rc = cfg::parse_run_config(text, "w.ini");
    CHECK(rc.seed == 4);
}
