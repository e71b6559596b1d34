#include <cmath>
#include <limits>
#include <map>
#include <numbers>

#include <boost/math/distributions/chi_squared.hpp>

#include "doctest.h"
#include "mmw/channel_model.hpp"
#include "mmw/error.hpp"
#include "oracles.hpp"

using namespace mmw;

TEST_CASE("link state probabilities follow the closed form") {
    const auto b = band_preset("28ghz-nyc");
    for (double d : {0.0, 10.0, 50.0, 100.0, 155.7, 200.0, 400.0, 1000.0}) {
        const auto p = link_state_probabilities(d, b);
        const auto o = oracle::link_state(d, 0.0334, 5.2, 0.0149);
        CHECK(p.p_out == doctest::Approx(o.out).epsilon(1e-12));
        CHECK(p.p_los == doctest::Approx(o.los).epsilon(1e-12));
        CHECK(p.p_nlos == doctest::Approx(o.nlos).epsilon(1e-12));
        CHECK(p.p_out + p.p_los + p.p_nlos == doctest::Approx(1.0));
    }
    CHECK(outage_onset_distance(b) == doctest::Approx(5.2 / 0.0334));
}

TEST_CASE("link state row at 200 m") {
    const auto p = link_state_probabilities(200.0, band_preset("28ghz-nyc"));
    CHECK(p.p_out == doctest::Approx(0.7724).epsilon(5e-4));
    CHECK(p.p_los == doctest::Approx(0.0116).epsilon(5e-3));
    CHECK(p.p_nlos == doctest::Approx(0.2160).epsilon(5e-4));
}

TEST_CASE("d_shift and LOS suppression") {
    const auto b = band_preset("28ghz-nyc");
    for (double d = 0.0; d <= 400.0; d += 7.0) {
        double prev = -1.0;
        for (double shift : {0.0, 25.0, 50.0, 75.0}) {
            LinkOverrides ov;
            ov.d_shift = shift;
            const auto p = link_state_probabilities(d, b, ov);
            CHECK(p.p_out >= prev);
            prev = p.p_out;
            ov.suppress_los = true;
            const auto q = link_state_probabilities(d, b, ov);
            CHECK(q.p_los == 0.0);
            CHECK(q.p_nlos == doctest::Approx(p.p_los + p.p_nlos));
            CHECK(q.p_out == p.p_out);
        }
    }
    // the shift applies only to the outage term
    LinkOverrides ov;
    ov.d_shift = 50.0;
    const auto p = link_state_probabilities(100.0, b, ov);
    const auto o = oracle::link_state(150.0, 0.0334, 5.2, 0.0149);
    CHECK(p.p_out == doctest::Approx(o.out).epsilon(1e-12));
    CHECK(p.p_los == doctest::Approx((1.0 - o.out) * std::exp(-0.0149 * 100.0)).epsilon(1e-12));
}

TEST_CASE("forced states") {
    const auto b = band_preset("28ghz-nyc");
    Rng rng(3);
    for (auto s : {LinkState::Los, LinkState::Nlos, LinkState::Outage}) {
        LinkOverrides ov;
        ov.force_state = s;
        for (int i = 0; i < 20; ++i) CHECK(sample_link_state(500.0, b, rng, ov) == s);
    }
    LinkOverrides out;
    out.force_state = LinkState::Outage;
    const auto link = sample_link(50.0, 0.1, b, rng, out);
    CHECK(link.outage());
    CHECK(link.clusters.empty());
    CHECK(std::isinf(link.omni_path_loss));
    CHECK(link.omni_gain() == 0.0);
}

TEST_CASE("state letters round trip") {
    for (auto s : {LinkState::Los, LinkState::Nlos, LinkState::Outage})
        CHECK(state_from_letter(state_letter(s)) == s);
    CHECK_THROWS_AS(state_from_letter('x'), Error);
}

TEST_CASE("path loss golden numbers") {
    const auto b28 = band_preset("28ghz-nyc");
    const auto b73 = band_preset("73ghz-nyc");
    CHECK(median_path_loss(100.0, LinkState::Nlos, b28) == doctest::Approx(130.4).epsilon(1e-9));
    CHECK(median_path_loss(1.0, LinkState::Los, b28) == doctest::Approx(61.4).epsilon(1e-12));
    CHECK(median_path_loss(1.0, LinkState::Los, b73) == doctest::Approx(69.8).epsilon(1e-12));
    CHECK(median_path_loss(73.0, LinkState::Nlos, b73) ==
          doctest::Approx(oracle::log_distance(b73.nlos_alpha, b73.nlos_beta, 73.0)));
    CHECK_THROWS_AS(median_path_loss(100.0, LinkState::Outage, b28), Error);
    const double umi = umi_path_loss(100.0, 2.5);
    CHECK(umi == doctest::Approx(22.7 + 36.7 * 2.0 + 26.0 * std::log10(2.5)));
    const double gap = median_path_loss(100.0, LinkState::Nlos, b28) - umi;
    CHECK(gap >= 20.0);
    CHECK(gap <= 25.0);
}

TEST_CASE("path loss shadowing has the card sigma") {
    const auto b = band_preset("28ghz-nyc");
    Rng rng(11);
    const int n = 100000;
    double s = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = sample_path_loss(100.0, LinkState::Nlos, b, rng) - 130.4;
        s += x;
        s2 += x * x;
    }
    const double m = s / n;
    const double sd = std::sqrt(s2 / n - m * m);
    CHECK(std::abs(m) < 4.0 * 8.7 / std::sqrt(n));
    CHECK(sd == doctest::Approx(8.7).epsilon(0.02));
}

TEST_CASE("cluster count is censored Poisson") {
    const auto b = band_preset("28ghz-nyc");
    Rng rng(5);
    const int n = 100000;
    std::map<int, int> hist;
    for (int i = 0; i < n; ++i) ++hist[sample_num_clusters(b, rng)];
    CHECK(hist.count(0) == 0);
    for (int k : {1, 2}) {
        const double p = oracle::censored_poisson(k, 1.8);
        const double se = std::sqrt(p * (1.0 - p) / n);
        CHECK(std::abs(hist[k] / double(n) - p) < 3.0 * se);
    }
    CHECK(oracle::censored_poisson(1, 1.8) == doctest::Approx(0.4628).epsilon(1e-3));
    CHECK(oracle::censored_poisson(2, 1.8) == doctest::Approx(0.2678).epsilon(1e-3));

    // chi-square over k = 1..5 and a pooled tail
    double chi2 = 0.0, tail_p = 1.0;
    int tail_n = n;
    for (int k = 1; k <= 5; ++k) {
        const double e = n * oracle::censored_poisson(k, 1.8);
        chi2 += (hist[k] - e) * (hist[k] - e) / e;
        tail_p -= oracle::censored_poisson(k, 1.8);
        tail_n -= hist[k];
    }
    chi2 += (tail_n - n * tail_p) * (tail_n - n * tail_p) / (n * tail_p);
    const boost::math::chi_squared dist(5.0);
    CHECK(boost::math::cdf(boost::math::complement(dist, chi2)) > 0.01);
}

TEST_CASE("two-cluster power split matches the Laplace-Gaussian law") {
    const auto b = band_preset("28ghz-nyc");
    Rng rng(21);
    std::vector<double> weak;
    for (int i = 0; i < 100000; ++i) {
        const auto f = sample_cluster_power_fractions(2, b, rng);
        CHECK_MESSAGE(f[0] + f[1] == doctest::Approx(1.0), "fractions sum to one");
        weak.push_back(std::min(f[0], f[1]));
    }
    const double bl = 10.0 * (b.r_tau - 1.0) / std::numbers::ln10;
    const double s = std::numbers::sqrt2 * b.zeta;
    // weak <= t iff |X| >= 10 log10((1 - t) / t)
    auto cdf = [&](double t) {
        if (t >= 0.5) return 1.0;
        const double x = 10.0 * std::log10((1.0 - t) / t);
        return 2.0 * (1.0 - oracle::laplace_gauss_cdf(x, bl, s));
    };
    const double d = oracle::ks_statistic(weak, cdf);
    CHECK(oracle::ks_pvalue(d, weak.size()) > 0.01);
}

TEST_CASE("power fractions are normalized and positive") {
    const auto b = band_preset("73ghz-nyc");
    Rng rng(8);
    for (int k = 1; k <= 8; ++k) {
        const auto f = sample_cluster_power_fractions(k, b, rng);
        REQUIRE(f.size() == static_cast<std::size_t>(k));
        double sum = 0.0;
        for (double x : f) {
            CHECK(x > 0.0);
            CHECK(x <= 1.0);
            sum += x;
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("cluster geometry") {
    const auto b = band_preset("28ghz-nyc");
    Rng rng(9);
    const double el = los_elevation(50.0, 10.0, 2.0);
    CHECK(el == doctest::Approx(std::atan2(8.0, 50.0)));
    std::vector<double> bs_az, ue_az, bs_sp, ue_sp;
    for (int i = 0; i < 25000; ++i) {
        for (const auto& c : sample_cluster_geometry(4, LinkState::Nlos, el, b, rng)) {
            CHECK(c.aod_el == doctest::Approx(-el));
            CHECK(c.aoa_el == doctest::Approx(el));
            CHECK(c.spread_aod_el == 0.0);
            CHECK(c.aod_az >= 0.0);
            CHECK(c.aod_az < 2.0 * std::numbers::pi);
            bs_az.push_back(c.aod_az);
            ue_az.push_back(c.aoa_az);
            bs_sp.push_back(rad2deg(c.spread_aod_az));
            ue_sp.push_back(rad2deg(c.spread_aoa_az));
        }
    }
    auto uniform = [](double x) { return x / (2.0 * std::numbers::pi); };
    CHECK(oracle::ks_pvalue(oracle::ks_statistic(bs_az, uniform), bs_az.size()) > 0.01);
    CHECK(oracle::ks_pvalue(oracle::ks_statistic(ue_az, uniform), ue_az.size()) > 0.01);
    auto expo = [](double mean) { return [mean](double x) { return 1.0 - std::exp(-x / mean); }; };
    CHECK(oracle::ks_pvalue(oracle::ks_statistic(bs_sp, expo(10.2)), bs_sp.size()) > 0.01);
    CHECK(oracle::ks_pvalue(oracle::ks_statistic(ue_sp, expo(15.5)), ue_sp.size()) > 0.01);
    double m = 0.0;
    for (double x : ue_sp) m += x;
    m /= static_cast<double>(ue_sp.size());
    CHECK(std::abs(m - 15.5) < 0.3);
}

TEST_CASE("link realization") {
    const auto b = band_preset("28ghz-nyc");
    Rng rng(4);
    int usable = 0;
    for (int i = 0; i < 2000; ++i) {
        const double d = rng.uniform(30.0, 200.0);
        const auto link = sample_link(d, los_elevation(d, 10.0, 2.0), b, rng);
        CHECK(link.distance == d);
        if (link.outage()) continue;
        ++usable;
        CHECK(!link.clusters.empty());
        double sum = 0.0;
        for (const auto& c : link.clusters) sum += c.power_fraction;
        CHECK(sum == doctest::Approx(1.0));
        CHECK(link.omni_gain() == doctest::Approx(std::pow(10.0, -0.1 * link.omni_path_loss)));
    }
    CHECK(usable > 0);
}

TEST_CASE("presets and validation") {
    const auto names = band_preset_names();
    CHECK(names.size() >= 3);
    for (const auto& n : names) CHECK_NOTHROW(band_preset(n).validate());
    CHECK_THROWS_AS(band_preset("nope"), Error);
    auto bad = band_preset("28ghz-nyc");
    bad.r_tau = 1.0;
    CHECK_THROWS_AS(bad.validate(), Error);
    bad = band_preset("28ghz-nyc");
    bad.nlos_sigma = 0.0;
    CHECK_THROWS_AS(bad.validate(), Error);
    bad = band_preset("28ghz-nyc");
    bad.ue_az_spread_mean = -1.0;
    CHECK_THROWS_AS(bad.validate(), Error);

    const auto r1 = band_preset("rank-one-smoke");
    Rng rng(1);
    for (int i = 0; i < 100; ++i) CHECK(sample_num_clusters(r1, rng) == 1);
}

TEST_CASE("angle helpers") {
    CHECK(wrap_angle(-0.5) == doctest::Approx(2.0 * std::numbers::pi - 0.5));
    CHECK(wrap_angle(7.0) == doctest::Approx(7.0 - 2.0 * std::numbers::pi));
    CHECK(rad2deg(deg2rad(33.0)) == doctest::Approx(33.0));
    CHECK(in_validity_range(30.0));
    CHECK(!in_validity_range(201.0));
}
