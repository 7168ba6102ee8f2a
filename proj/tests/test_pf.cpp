#include <doctest.h>

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "pofbm/pf.hpp"

using namespace pofbm;

namespace {

sde::ModelSpec ou(double h, double tau2 = 0.2, double x0 = 0.0) {
    sde::ModelConfig cfg;
    cfg.hurst = h;
    cfg.tau2 = tau2;
    cfg.x0 = x0;
    return sde::make_ou_model(cfg);
}

// both drift and diffusion zero: every particle keeps the initial state
sde::ModelSpec frozen_model() {
    auto m = ou(0.4, 0.2, 0.7);
    m.name = "frozen";
    m.drift = [](const sde::ParamVector&, double) { return 0.0; };
    m.diffusion = [](const sde::ParamVector&, double) { return 0.0; };
    return m;
}

double logsumexp(const std::vector<double>& v) {
    double mx = v[0];
    for (double x : v) mx = std::max(mx, x);
    double s = 0.0;
    for (double x : v) s += std::exp(x - mx);
    return mx + std::log(s);
}

}  // namespace

TEST_SUITE("pf") {
    TEST_CASE("multinomial resampling degenerate and uniform cases") {
        RngStream rng(StreamKey{5, stream_purpose::kResample, 0, 0, 0, 1, 0});
        std::vector<double> point_mass{1.0, 0.0, 0.0, 0.0};
        for (std::size_t idx : pf::resample_multinomial(point_mass, rng)) CHECK(idx == 0);

        std::vector<double> single{1.0};
        for (std::size_t idx : pf::resample_multinomial(single, rng)) CHECK(idx == 0);

        const std::size_t n = 8, draws = 100000 / n;
        std::vector<double> uniform(n, 1.0 / n);
        std::vector<std::size_t> counts(n, 0);
        for (std::size_t d = 0; d < draws; ++d) {
            RngStream r(StreamKey{6, stream_purpose::kResample, 0, 0, 0, d, 0});
            for (std::size_t idx : pf::resample_multinomial(uniform, r)) ++counts[idx];
        }
        const double total = static_cast<double>(draws * n);
        const double p = 1.0 / n;
        const double se = std::sqrt(p * (1.0 - p) / total);
        for (std::size_t i = 0; i < n; ++i)
            CHECK(std::abs(static_cast<double>(counts[i]) / total - p) < 3.0 * se);

        std::vector<double> bad{0.0, 0.0};
        CHECK_THROWS_AS(pf::resample_multinomial(bad, rng), DegenerateWeights);
    }

    TEST_CASE("single particle: log C is the path log-likelihood and the draw is its history") {
        const auto m = ou(0.4);
        sde::ParamVector th{{1.0, 0.5}};
        const std::vector<double> y{0.3, -0.2, 0.5, 0.1};
        pf::ParticleSystem sys;
        const auto res = pf::pf_single(m, th, 3, 1, y, pf::FilterRunId{11, 3, 0, 0}, {}, nullptr,
                                       nullptr, &sys);
        // replay the single path through the pseudo map
        const auto emb = fgn::build_embedding(m.hurst, 8);
        const auto pseudo = fgn::pseudo_path(emb, res.trajectory.blocks, 3);
        std::vector<double> skel;
        sde::unit_skeleton(m, th, m.initial_state(th), pseudo, skel);
        double expect = 0.0;
        for (std::size_t t = 0; t < y.size(); ++t) expect += m.log_obs(th, y[t], skel[t]);
        CHECK(res.logc.log_value == doctest::Approx(expect).epsilon(1e-13));
        // with one particle the drawn trajectory is the only history
        for (std::size_t t = 0; t < y.size(); ++t)
            for (std::size_t k = 0; k < 16; ++k)
                CHECK(res.trajectory.blocks[t].z[k] == sys.pool[t][k]);
    }

    TEST_CASE("one observation: C tilde is the weight average") {
        const auto m = ou(0.4);
        sde::ParamVector th{{1.0, 0.5}};
        const std::vector<double> y{0.4};
        pf::FilterDiag diag;
        diag.capture_particles = true;
        const auto res =
            pf::pf_single(m, th, 2, 32, y, pf::FilterRunId{13, 2, 0, 0}, {}, nullptr, &diag);
        REQUIRE(diag.log_g_fine.size() == 1);
        const double expect =
            logsumexp(diag.log_g_fine[0]) - std::log(32.0);
        CHECK(res.logc.log_value == doctest::Approx(expect).epsilon(1e-13));
    }

    TEST_CASE("normalizing constant is unbiased against the Kalman oracle at H = 1/2") {
        const double theta = 1.0, sigma = 0.5, tau2 = 0.2, x0 = 0.5;
        const int level = 3;
        const auto m = ou(0.5, tau2, x0);
        sde::ParamVector th{{theta, sigma}};
        const std::vector<double> y{0.6, 0.2, -0.1, 0.4, 0.3};
        const double exact = oracles::kalman_ou_loglik(theta, sigma, tau2, x0, level, y);
        const std::size_t reps = 400;
        std::vector<double> ratios;
        ratios.reserve(reps);
        for (std::size_t r = 0; r < reps; ++r) {
            const auto res = pf::pf_single(m, th, level, 64, y, pf::FilterRunId{17, 3, r, 0});
            ratios.push_back(std::exp(res.logc.log_value - exact));
        }
        CHECK(std::abs(oracles::mean(ratios) - 1.0) < 3.0 * oracles::mc_se(ratios));
    }

    TEST_CASE("coupled filter equals the single filter when states are frozen") {
        const auto m = frozen_model();
        sde::ParamVector th{{1.0, 0.0}};
        const std::vector<double> y{0.7, 0.9, 0.5};
        const pf::FilterRunId run{23, 4, 9, 2};
        const auto single = pf::pf_single(m, th, 4, 16, y, run);
        const auto coupled = pf::pf_coupled(m, th, 4, 16, y, run);
        CHECK(single.logc.log_value == coupled.logc.log_value);
        for (std::size_t t = 0; t < y.size(); ++t)
            for (std::size_t k = 0; k < 32; ++k)
                CHECK(single.trajectory.blocks[t].z[k] == coupled.trajectory.blocks[t].z[k]);
    }

    TEST_CASE("coupled weights dominate both branches pathwise") {
        const auto m = ou(0.4);
        sde::ParamVector th{{0.8, 0.6}};
        const std::vector<double> y{0.2, -0.4, 0.6, 0.0, 0.3};
        pf::FilterDiag diag;
        diag.capture_particles = true;
        pf::pf_coupled(m, th, 4, 24, y, pf::FilterRunId{29, 4, 0, 0}, {}, nullptr, &diag);
        REQUIRE(diag.log_g_fine.size() == y.size());
        for (std::size_t t = 0; t < y.size(); ++t) {
            for (std::size_t i = 0; i < 24; ++i) {
                const double gf = diag.log_g_fine[t][i];
                const double gc = diag.log_g_coarse[t][i];
                const double w = std::max(gf, gc);
                CHECK(w >= gf);
                CHECK(w >= gc);
                CHECK((w == gf || w == gc));
            }
        }
    }

    TEST_CASE("max-coupled likelihood dominates the single-level one on average") {
        const auto m = ou(0.4);
        sde::ParamVector th{{1.0, 0.5}};
        const std::vector<double> y{0.2, -0.1, 0.4, 0.1, -0.3, 0.5, 0.0, 0.2, -0.2, 0.1};
        const std::size_t reps = 200;
        std::vector<double> single, coupled;
        for (std::size_t r = 0; r < reps; ++r) {
            single.push_back(
                pf::pf_single(m, th, 5, 50, y, pf::FilterRunId{31, 5, r, 0}).logc.log_value);
            coupled.push_back(
                pf::pf_coupled(m, th, 5, 50, y, pf::FilterRunId{37, 5, r, 0}).logc.log_value);
        }
        const double se = std::sqrt(oracles::mc_se(single) * oracles::mc_se(single) +
                                    oracles::mc_se(coupled) * oracles::mc_se(coupled));
        CHECK(oracles::mean(coupled) >= oracles::mean(single) - 3.0 * se);
    }

    TEST_CASE("traced trajectories are consistent with the ancestry") {
        const auto m = ou(0.4);
        sde::ParamVector th{{1.0, 0.5}};
        const std::vector<double> y{0.3, -0.2, 0.5, 0.1, 0.0, 0.4};
        pf::ParticleSystem sys;
        pf::pf_single(m, th, 3, 16, y, pf::FilterRunId{41, 3, 0, 0}, {}, nullptr, nullptr, &sys);
        for (std::uint64_t draw = 0; draw < 5; ++draw) {
            RngStream rng(StreamKey{43, stream_purpose::kTrajectoryDraw, 0, 0, 0, draw, 0});
            const auto traj = pf::trace_trajectory(sys, rng);
            // independently locate the sampled slot, then walk the ancestry
            RngStream rng2(StreamKey{43, stream_purpose::kTrajectoryDraw, 0, 0, 0, draw, 0});
            std::size_t cur = pf::sample_index(sys.final_weights, rng2);
            for (std::size_t t = y.size(); t >= 1; --t) {
                for (std::size_t k = 0; k < 16; ++k)
                    CHECK(traj.blocks[t - 1].z[k] == sys.pool[t - 1][cur * 16 + k]);
                cur = static_cast<std::size_t>(sys.ancestry[t - 1][cur]);
            }
        }
    }

    TEST_CASE("cost ledger counts operations exactly") {
        const auto m = ou(0.4);
        sde::ParamVector th{{1.0, 0.5}};
        const std::vector<double> y{0.1, 0.2, 0.3};
        CostLedger ledger;
        pf::pf_single(m, th, 3, 10, y, pf::FilterRunId{47, 3, 0, 0}, {}, &ledger);
        // N * T * delta^{-1} Euler steps
        CHECK(ledger.euler_steps == doctest::Approx(10.0 * 3.0 * 8.0));
        // one size-16 FFT per block sample
        CHECK(ledger.fft_cost == doctest::Approx(10.0 * 3.0 * 16.0 * 4.0));
        // multinomial resampling every step after the first
        CHECK(ledger.resample_ops == doctest::Approx(10.0 * 2.0));
    }

    TEST_CASE("fixed run ids reproduce bit-identically, fresh ids differ") {
        const auto m = ou(0.4);
        sde::ParamVector th{{1.0, 0.5}};
        const std::vector<double> y{0.3, -0.2};
        const auto a = pf::pf_single(m, th, 3, 8, y, pf::FilterRunId{51, 3, 1, 2});
        const auto b = pf::pf_single(m, th, 3, 8, y, pf::FilterRunId{51, 3, 1, 2});
        const auto c = pf::pf_single(m, th, 3, 8, y, pf::FilterRunId{51, 3, 1, 3});
        CHECK(a.logc.log_value == b.logc.log_value);
        CHECK(a.logc.log_value != c.logc.log_value);
    }

    TEST_CASE("degenerate weights raise") {
        auto m = ou(0.4);
        m.log_obs = [](const sde::ParamVector&, double, double) {
            return -std::numeric_limits<double>::infinity();
        };
        sde::ParamVector th{{1.0, 0.5}};
        const std::vector<double> y{0.1};
        CHECK_THROWS_AS(pf::pf_single(m, th, 2, 4, y, pf::FilterRunId{53, 2, 0, 0}),
                        DegenerateWeights);
    }
}
