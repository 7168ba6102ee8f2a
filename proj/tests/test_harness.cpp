#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <vector>

#include "oracles.hpp"
#include "pofbm/csv.hpp"
#include "pofbm/harness.hpp"

using namespace pofbm;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("pofbm_test_" + std::to_string(counter()++));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    static int& counter() {
        static int c = 0;
        return c;
    }
    std::string str() const { return path.string(); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    out << text;
}

config::ExperimentConfig tiny_config() {
    config::ExperimentConfig cfg;
    cfg.model.hurst = 0.4;
    cfg.level = 3;
    cfg.particles = 8;
    cfg.iterations = 40;
    cfg.span = 4;
    cfg.seed = 99;
    return cfg;
}

std::vector<double> tiny_data() { return {0.3, -0.2, 0.4, 0.1}; }

}  // namespace

TEST_SUITE("harness") {
    TEST_CASE("ingest validates header and contiguity") {
        TempDir dir;
        write_file(dir.file("ok.csv"), "t,y\n1,0.5\n2,-0.25\n3,1.0\n");
        const auto y = harness::ingest_csv(dir.file("ok.csv"));
        REQUIRE(y.size() == 3);
        CHECK(y[0] == 0.5);
        CHECK(y[1] == -0.25);
        CHECK(y[2] == 1.0);

        write_file(dir.file("gap.csv"), "t,y\n1,0.5\n3,1.0\n");
        CHECK_THROWS_AS(harness::ingest_csv(dir.file("gap.csv")), NonContiguousTime);

        write_file(dir.file("hdr.csv"), "time,value\n1,0.5\n");
        CHECK_THROWS_AS(harness::ingest_csv(dir.file("hdr.csv")), MalformedCSV);

        write_file(dir.file("bad.csv"), "t,y\n1,zap\n");
        CHECK_THROWS_AS(harness::ingest_csv(dir.file("bad.csv")), MalformedCSV);
    }

    TEST_CASE("synth output round-trips bit-exactly through the CSV layer") {
        sde::ModelConfig mc;
        const auto model = sde::make_ou_model(mc);
        sde::ParamVector truth{{1.0, 0.5}};
        const auto data = sde::synth_generate(model, truth, 5, 12, 2024);
        TempDir dir;
        {
            csv::Writer w(dir.file("data.csv"), "t,y");
            for (std::size_t t = 0; t < data.y.size(); ++t)
                w.row({std::to_string(t + 1), csv::format_double(data.y[t])});
        }
        const auto y = harness::ingest_csv(dir.file("data.csv"));
        REQUIRE(y.size() == data.y.size());
        for (std::size_t t = 0; t < y.size(); ++t) CHECK(y[t] == data.y[t]);
    }

    TEST_CASE("rate fit recovers an exact line and rejects tiny inputs") {
        std::vector<double> mse, cost;
        for (double logm : {-1.0, -2.0, -3.5, -5.0}) {
            mse.push_back(std::exp(logm));
            cost.push_back(std::exp(4.2 - 1.5 * logm));
        }
        const auto fit = harness::rate_fit(mse, cost);
        CHECK(fit.slope == doctest::Approx(-1.5).epsilon(1e-12));
        CHECK(fit.intercept == doctest::Approx(4.2).epsilon(1e-10));
        CHECK(fit.residual < 1e-12);
        CHECK_THROWS_AS(harness::rate_fit({1.0, 2.0}, {1.0, 2.0}), InsufficientPoints);
    }

    TEST_CASE("config parsing, defaults, and strict schema") {
        const auto ini = config::Ini::parse_string(
            "[model]\nname = ou\nh = 0.45\ntau2 = 0.3  # comment\n"
            "[mcmc]\nlevel = 5\nsteps = 0.1, 0.2\nwrite_noise = false\n"
            "[study]\nlevels = 3,4,5\n[run]\nseed = 77\n");
        const auto cfg = config::config_from_ini(ini);
        CHECK(cfg.model.hurst == 0.45);
        CHECK(cfg.model.tau2 == 0.3);
        CHECK(cfg.level == 5);
        CHECK(cfg.proposal_steps == std::vector<double>{0.1, 0.2});
        CHECK_FALSE(cfg.write_noise);
        CHECK(cfg.study_levels == std::vector<int>{3, 4, 5});
        CHECK(cfg.seed == 77);
        // untouched defaults
        CHECK(cfg.epsilon == 0.1);
        CHECK(cfg.l_min == 3);
        CHECK(cfg.repeats == 20);

        CHECK_THROWS_AS(config::config_from_ini(config::Ini::parse_string("[nope]\nx = 1\n")),
                        ConfigError);
        CHECK_THROWS_AS(config::config_from_ini(config::Ini::parse_string("[model]\nhh = 1\n")),
                        ConfigError);
        CHECK_THROWS_AS(config::Ini::parse_string("key_without_section = 1\n"), ConfigError);
        CHECK_THROWS_AS(
            config::config_from_ini(config::Ini::parse_string("[model]\nh = 1.5\n")),
            ConfigError);
    }

    TEST_CASE("noise sidecar round trip") {
        TempDir dir;
        pf::TrajectoryDraw rec;
        rec.level = 2;
        rec.blocks.resize(3);
        double v = 0.25;
        for (std::size_t t = 0; t < 3; ++t) {
            rec.blocks[t].t = t + 1;
            for (std::size_t k = 0; k < 8; ++k) rec.blocks[t].z.push_back(v += 0.5);
        }
        {
            harness::SidecarWriter w(dir.file("noise.bin"), 2, 3, 8);
            w.append(rec);
            w.append(rec);
        }
        const auto data = harness::read_sidecar(dir.file("noise.bin"));
        CHECK(data.level == 2);
        CHECK(data.span == 3);
        CHECK(data.block_len == 8);
        REQUIRE(data.records.size() == 2);
        for (const auto& r : data.records)
            for (std::size_t t = 0; t < 3; ++t)
                for (std::size_t k = 0; k < 8; ++k)
                    CHECK(r.blocks[t].z[k] == rec.blocks[t].z[k]);
    }

    TEST_CASE("parallel_for is deterministic across worker counts") {
        std::vector<double> one(64), four(64);
        auto fill = [](std::vector<double>& out) {
            return [&out](std::size_t i) {
                RngStream rng(StreamKey{5, stream_purpose::kGeneric, 0, i, 0, 0, 0});
                out[i] = rng.normal();
            };
        };
        harness::parallel_for(64, 1, fill(one));
        harness::parallel_for(64, 4, fill(four));
        for (std::size_t i = 0; i < 64; ++i) CHECK(one[i] == four[i]);
    }

    TEST_CASE("single-level run: zero iterations and reproducibility") {
        auto cfg = tiny_config();
        cfg.iterations = 0;
        const auto res0 = harness::run_single_level(cfg, tiny_data(), 7, "");
        CHECK(res0.records_used == 1);
        CHECK(res0.iterations == 0);

        cfg.iterations = 30;
        const auto a = harness::run_single_level(cfg, tiny_data(), 7, "");
        const auto b = harness::run_single_level(cfg, tiny_data(), 7, "");
        REQUIRE(a.params.size() == 2);
        CHECK(a.params[0].corrected_mean == b.params[0].corrected_mean);
        CHECK(a.params[1].corrected_mean == b.params[1].corrected_mean);
        CHECK(a.ledger.total() == b.ledger.total());
        CHECK(a.records_used == 30);
    }

    TEST_CASE("single-level run writes the documented files") {
        TempDir dir;
        auto cfg = tiny_config();
        cfg.iterations = 10;
        const auto res = harness::run_single_level(cfg, tiny_data(), 3, dir.str());
        (void)res;
        for (const char* name : {"chain.csv", "summary.csv", "states.csv", "cost.csv"})
            CHECK(fs::exists(dir.path / name));
        CHECK(fs::exists(dir.path / "noise.bin"));
        const auto chain = csv::read(dir.file("chain.csv"));
        CHECK(chain.header ==
              std::vector<std::string>{"iter", "theta", "sigma", "log_c", "accepted"});
        CHECK(chain.rows.size() == 11);
        const auto side = harness::read_sidecar(dir.file("noise.bin"));
        CHECK(side.records.size() == 11);
        CHECK(side.block_len == 16);
    }

    TEST_CASE("multilevel with L = l_min reduces to the corrected single level") {
        auto cfg = tiny_config();
        cfg.l_min = 3;
        cfg.l_cap = 3;
        cfg.epsilon = 0.5;
        cfg.base_m = 20.0;
        const auto ml_res = harness::run_multilevel(cfg, tiny_data(), 21, "");
        CHECK(ml_res.allocation.top_level == 3);
        REQUIRE(ml_res.estimate.levels.size() == 1);

        auto single_cfg = cfg;
        single_cfg.level = 3;
        single_cfg.iterations = ml_res.allocation.iterations[0];
        const auto single = harness::run_single_level(single_cfg, tiny_data(), 21, "");
        CHECK(ml_res.estimate.totals[0] == doctest::Approx(single.params[0].corrected_mean));
        CHECK(ml_res.estimate.totals[1] == doctest::Approx(single.params[1].corrected_mean));
    }

    TEST_CASE("multilevel cost ledger equals the per-level sum") {
        auto cfg = tiny_config();
        cfg.epsilon = 0.25;
        cfg.l_min = 3;
        cfg.l_cap = 4;
        cfg.base_m = 10.0;
        const auto res = harness::run_multilevel(cfg, tiny_data(), 31, "");
        REQUIRE(res.estimate.levels.size() == 2);
        double total = 0.0;
        for (const auto& lvl : res.estimate.levels) total += lvl.cost.total();
        CHECK(res.estimate.cost.total() == doctest::Approx(total).epsilon(1e-12));
    }

    TEST_CASE("multilevel estimate agrees with a high-level single run on a toy") {
        auto cfg = tiny_config();
        cfg.seed = 404;
        cfg.l_min = 3;
        cfg.l_cap = 4;
        cfg.epsilon = 0.25;  // L = 4
        cfg.base_m = 60.0;
        const auto y = tiny_data();

        std::vector<double> ml_theta;
        for (std::uint64_t rep = 0; rep < 8; ++rep)
            ml_theta.push_back(harness::run_multilevel(cfg, y, 1000 + rep * 8, "").estimate.totals[0]);

        auto single_cfg = cfg;
        single_cfg.level = 4;
        single_cfg.iterations = 4000;
        single_cfg.keep_trace = true;
        const auto single = harness::run_single_level(single_cfg, y, 5, "");
        const double se_single =
            oracles::batch_means_se(single.trace_params[0]);  // ignores J wobble, close enough
        const double se_ml = oracles::mc_se(ml_theta);
        const double tol = 3.0 * std::sqrt(se_single * se_single + se_ml * se_ml);
        CHECK(std::abs(oracles::mean(ml_theta) - single.params[0].corrected_mean) < tol);
    }

    TEST_CASE("study CSVs have the documented columns; empty study writes no script") {
        TempDir dir;
        harness::StudyResult empty;
        empty.params = {"theta", "sigma"};
        empty.reference = {0.0, 0.0};
        empty.reference_se = {0.0, 0.0};
        harness::emit_plots(empty, dir.str());
        const auto pts = csv::read(dir.file("study_points.csv"));
        CHECK(pts.header == std::vector<std::string>{"method", "param", "level", "epsilon", "mse",
                                                     "cost", "estimate_mean", "reference"});
        CHECK(pts.rows.empty());
        const auto rates = csv::read(dir.file("study_rates.csv"));
        CHECK(rates.header == std::vector<std::string>{"method", "param", "slope", "intercept",
                                                       "residual", "points"});
        CHECK_FALSE(fs::exists(dir.path / "plot_study.py"));

        harness::StudyPoint pt;
        pt.method = "pmcmc";
        pt.param = "theta";
        pt.level = 3;
        pt.mse = 0.1;
        pt.cost = 1000.0;
        harness::StudyResult nonempty = empty;
        nonempty.points = {pt};
        harness::emit_plots(nonempty, dir.str());
        CHECK(fs::exists(dir.path / "plot_study.py"));
    }
}
