#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "mmw/config.hpp"
#include "mmw/error.hpp"
#include "optimize.hpp"
#include "text.hpp"

using namespace mmw;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    return ErrorCode::Internal;
}

}  // namespace

TEST_CASE("config text round trips exactly") {
    for (const auto& name : band_preset_names()) {
        ConfigFile c;
        c.band = band_preset(name);
        c.network.band = c.band;
        c.network.bs_array = parse_array("4x8", c.network.bs_array);
        c.network.d_shift = 37.25;
        c.network.suppress_los = true;
        c.network.force_state = LinkState::Nlos;
        c.network.dl_tx_power = 0.1 + 0.2;  // not a short decimal
        const auto text = config_to_text(c);
        const auto back = parse_config(text);
        CHECK(config_to_text(back) == text);
        CHECK(back.band.nlos_alpha == c.band.nlos_alpha);
        CHECK(back.network.dl_tx_power == c.network.dl_tx_power);
        CHECK(back.network.bs_array.n_horizontal == 4);
        CHECK(back.network.bs_array.n_vertical == 8);
        CHECK(back.network.bs_array.downtilt == doctest::Approx(c.network.bs_array.downtilt).epsilon(1e-15));
        CHECK(back.network.force_state == LinkState::Nlos);
        CHECK(back.network.band.name == c.band.name);
    }
}

TEST_CASE("config presets, comments and overrides") {
    const auto c = parse_config(
        "; a comment\n"
        "[BandParameters]\n"
        "preset = 73ghz-nyc\n"
        "zeta = 5.5\n"
        "[NetworkConfig]\n"
        "ues_per_cell = 7\n"
        "ue_array = 8x8\n");
    CHECK(c.band.carrier_freq == 73.0);
    CHECK(c.band.zeta == 5.5);
    CHECK(c.network.ues_per_cell == 7);
    CHECK(c.network.ue_array.size() == 64);
    CHECK(c.network.band.zeta == 5.5);
}

TEST_CASE("config errors") {
    CHECK(code_of([] { parse_config("[BandParameters]\nbogus = 1\n"); }) == ErrorCode::Parse);
    CHECK(code_of([] { parse_config("[Other]\nx = 1\n"); }) == ErrorCode::Parse);
    CHECK(code_of([] { parse_config("[BandParameters]\nzeta = abc\n"); }) == ErrorCode::Parse);
    CHECK(code_of([] { parse_config("[NetworkConfig]\nues_per_cell = 2.5\n"); }) == ErrorCode::Parse);
    CHECK(code_of([] { parse_config("[BandParameters]\nr_tau = 0.5\n"); }) == ErrorCode::InvalidArgument);
    CHECK(code_of([] { parse_config("[BandParameters\n"); }) == ErrorCode::Parse);
    CHECK(code_of([] { load_config("/nonexistent/card.ini"); }) == ErrorCode::Io);
}

TEST_CASE("config files and band resolution") {
    ConfigFile c;
    c.band = band_preset("28ghz-nyc");
    c.band.name = "custom";
    c.band.lambda_k = 2.5;
    const auto path = (std::filesystem::temp_directory_path() / "mmw_card.ini").string();
    save_config(path, c);
    CHECK(resolve_band(path).lambda_k == 2.5);
    CHECK(resolve_band("73ghz-nyc").carrier_freq == 73.0);
    std::filesystem::remove(path);
}

TEST_CASE("band field access") {
    auto b = band_preset("28ghz-nyc");
    CHECK(band_field(b, "a_out") == 0.0334);
    set_band_field(b, "a_out", 0.05);
    CHECK(b.a_out == 0.05);
    CHECK(code_of([&] { band_field(b, "name"); }) == ErrorCode::InvalidArgument);
    CHECK(code_of([&] { set_band_field(b, "nope", 1.0); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("array parsing") {
    const auto g = parse_array("3X5");
    CHECK(g.n_horizontal == 3);
    CHECK(g.n_vertical == 5);
    for (const char* bad : {"8", "0x4", "x4", "4x", "2.5x2", "axb"})
        CHECK(code_of([&] { parse_array(bad); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("number formatting is shortest round trip") {
    for (double v : {0.1, 1.0 / 3.0, 1e-300, 72.0, -0.0334, 6.02214076e23}) {
        double back = 0.0;
        REQUIRE(detail::parse_num(detail::fmt_num(v), back));
        CHECK(back == v);
    }
    CHECK(detail::fmt_num(72.0) == "72");
    double x = 0.0;
    CHECK(detail::parse_num("+2.5", x));
    CHECK(x == 2.5);
    CHECK(!detail::parse_num("2.5abc", x));
    CHECK(!detail::parse_num("", x));
}

TEST_CASE("Nelder-Mead minimises the Rosenbrock function") {
    auto rosen = [](const std::vector<double>& p) {
        return 100.0 * std::pow(p[1] - p[0] * p[0], 2) + std::pow(1.0 - p[0], 2);
    };
    const auto r = detail::nelder_mead(rosen, {-1.2, 1.0}, {0.5, 0.5}, 5000, 1e-14, 1e-10);
    CHECK(r.converged);
    CHECK(r.x[0] == doctest::Approx(1.0).epsilon(1e-5));
    CHECK(r.x[1] == doctest::Approx(1.0).epsilon(1e-5));
    CHECK(r.f < 1e-10);
}
