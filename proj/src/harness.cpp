#include "pofbm/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <iostream>
#include <memory>
#include <mutex>
#include <thread>

#include "pofbm/csv.hpp"
#include "pofbm/fgn.hpp"
#include "pofbm/pf.hpp"

namespace pofbm::harness {

namespace fs = std::filesystem;

namespace {

std::string join(const std::string& dir, const std::string& name) {
    return dir.empty() ? name : dir + "/" + name;
}

void ensure_dir(const std::string& dir) {
    if (dir.empty()) return;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IOError("cannot create directory " + dir + ": " + ec.message());
}

std::string fmt(double v) { return csv::format_double(v); }

// Batch-means standard error of a self-normalized ratio estimator.
double batch_means_ratio_se(const std::vector<double>& phi, const std::vector<double>& log_j,
                            std::size_t n_batches = 32) {
    const std::size_t n = phi.size();
    if (n < 2 * n_batches) n_batches = std::max<std::size_t>(2, n / 2);
    const std::size_t len = n / n_batches;
    std::vector<double> batch;
    double mx = -std::numeric_limits<double>::infinity();
    for (double lj : log_j) mx = std::max(mx, lj);
    for (std::size_t b = 0; b < n_batches; ++b) {
        double num = 0.0, den = 0.0;
        for (std::size_t i = b * len; i < (b + 1) * len; ++i) {
            const double w = std::exp(log_j[i] - mx);
            num += w * phi[i];
            den += w;
        }
        if (den > 0.0) batch.push_back(num / den);
    }
    if (batch.size() < 2) return std::numeric_limits<double>::infinity();
    double mean = 0.0;
    for (double v : batch) mean += v;
    mean /= static_cast<double>(batch.size());
    double var = 0.0;
    for (double v : batch) var += (v - mean) * (v - mean);
    var /= static_cast<double>(batch.size() - 1);
    return std::sqrt(var / static_cast<double>(batch.size()));
}

pmcmc::ChainSettings chain_settings(const ExperimentConfig& cfg, int level, std::size_t m,
                                    std::size_t n_params) {
    pmcmc::ChainSettings s;
    s.level = level;
    s.n_particles = cfg.effective_particles();
    s.iterations = m;
    s.filter.resample_threshold = cfg.resample_threshold;
    s.max_init_retries = cfg.max_init_retries;
    auto steps = cfg.proposal_steps;
    if (steps.size() == 1) steps.assign(n_params, steps[0]);
    if (steps.size() != n_params)
        throw ConfigError("mcmc.steps needs 1 or " + std::to_string(n_params) + " entries");
    s.proposal.log_steps = steps;
    return s;
}

}  // namespace

std::vector<double> ingest_csv(const std::string& path) {
    csv::Table table;
    try {
        table = csv::read(path);
    } catch (const IOError& e) {
        throw MalformedCSV(e.what());
    }
    if (table.header.size() != 2 || table.header[0] != "t" || table.header[1] != "y")
        throw MalformedCSV(path + ": expected header 't,y'");
    std::vector<double> y;
    long long expected = 1;
    for (const auto& row : table.rows) {
        if (row.size() != 2) throw MalformedCSV(path + ": expected two fields per row");
        const long long t = csv::parse_int(row[0]);
        if (t != expected)
            throw NonContiguousTime(path + ": expected t=" + std::to_string(expected) + ", got " +
                                    std::to_string(t));
        y.push_back(csv::parse_double(row[1]));
        ++expected;
    }
    if (y.empty()) throw MalformedCSV(path + ": no observations");
    return y;
}

void parallel_for(std::size_t n_tasks, std::size_t workers,
                  const std::function<void(std::size_t)>& fn) {
    if (n_tasks == 0) return;
    workers = std::max<std::size_t>(1, std::min(workers, n_tasks));
    if (workers == 1) {
        for (std::size_t i = 0; i < n_tasks; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto body = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n_tasks) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(body);
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

SidecarWriter::SidecarWriter(const std::string& path, int level, std::size_t span,
                             std::size_t block_len)
    : level_(level), span_(span), block_len_(block_len) {
    f_ = std::fopen(path.c_str(), "wb");
    if (!f_) throw IOError("cannot open " + path + " for writing");
    const char magic[8] = {'P', 'O', 'F', 'B', 'M', 'Z', '0', '1'};
    std::fwrite(magic, 1, 8, f_);
    const std::uint32_t lvl = static_cast<std::uint32_t>(level);
    const std::uint64_t t64 = span, b64 = block_len, zero = 0;
    std::fwrite(&lvl, sizeof(lvl), 1, f_);
    std::fwrite(&t64, sizeof(t64), 1, f_);
    std::fwrite(&b64, sizeof(b64), 1, f_);
    std::fwrite(&zero, sizeof(zero), 1, f_);  // record count, patched on close
}

SidecarWriter::~SidecarWriter() {
    if (f_) {
        std::fseek(f_, 8 + 4 + 8 + 8, SEEK_SET);
        std::fwrite(&count_, sizeof(count_), 1, f_);
        std::fclose(f_);
    }
}

void SidecarWriter::append(const pf::TrajectoryDraw& draw) {
    for (const auto& block : draw.blocks)
        std::fwrite(block.z.data(), sizeof(double), block.z.size(), f_);
    ++count_;
}

SidecarData read_sidecar(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw IOError("cannot open " + path);
    char magic[8];
    std::uint32_t lvl = 0;
    std::uint64_t span = 0, block_len = 0, count = 0;
    bool ok = std::fread(magic, 1, 8, f) == 8 && std::memcmp(magic, "POFBMZ01", 8) == 0 &&
              std::fread(&lvl, sizeof(lvl), 1, f) == 1 && std::fread(&span, 8, 1, f) == 1 &&
              std::fread(&block_len, 8, 1, f) == 1 && std::fread(&count, 8, 1, f) == 1;
    if (!ok) {
        std::fclose(f);
        throw IOError(path + ": bad sidecar header");
    }
    SidecarData data;
    data.level = static_cast<int>(lvl);
    data.span = span;
    data.block_len = block_len;
    data.records.resize(count);
    for (auto& rec : data.records) {
        rec.level = data.level;
        rec.blocks.resize(span);
        for (std::size_t t = 0; t < span; ++t) {
            rec.blocks[t].t = t + 1;
            rec.blocks[t].z.resize(block_len);
            if (std::fread(rec.blocks[t].z.data(), sizeof(double), block_len, f) != block_len) {
                std::fclose(f);
                throw IOError(path + ": truncated sidecar");
            }
        }
    }
    std::fclose(f);
    return data;
}

SingleLevelResult run_single_level(const ExperimentConfig& cfg, const std::vector<double>& y,
                                   std::uint64_t chain_id, const std::string& out_dir) {
    const auto model = cfg.make_model();
    const std::size_t span = y.size();
    const std::size_t n_params = model.params.size();
    const auto settings = chain_settings(cfg, cfg.level, cfg.iterations, n_params);
    const auto map = fgn::build_full_path_map(model.hurst, cfg.level, span);

    ensure_dir(out_dir);
    std::unique_ptr<csv::Writer> chain_csv;
    std::unique_ptr<SidecarWriter> sidecar;
    if (!out_dir.empty()) {
        std::string header = "iter";
        for (const auto& p : model.params) header += "," + p.name;
        header += ",log_c,accepted";
        chain_csv = std::make_unique<csv::Writer>(join(out_dir, "chain.csv"), header);
        if (cfg.write_noise)
            sidecar = std::make_unique<SidecarWriter>(
                join(out_dir, "noise.bin"), cfg.level, span,
                2 * (static_cast<std::size_t>(1) << cfg.level));
    }

    const std::size_t m_iters = cfg.iterations;
    const std::size_t burn =
        static_cast<std::size_t>(std::floor(cfg.burn_in_fraction * static_cast<double>(m_iters)));

    // phi list: parameters, then the unit-skeleton states for the
    // corrected state estimates.
    ml::SelfNormAccumulator corrected(n_params + span);
    std::vector<double> uncorrected(n_params + span, 0.0);
    std::size_t used = 0;

    struct Cache {
        bool valid = false;
        double log_j0 = 0.0;
        std::vector<double> phi;
        std::vector<double> pseudo;
    } cache;

    std::vector<double> trace_log_j0;
    std::vector<std::vector<double>> trace_params(cfg.keep_trace ? n_params : 0);

    CostLedger ledger;
    ledger.w_euler = cfg.w_euler;
    ledger.w_fft = cfg.w_fft;
    ledger.w_resample = cfg.w_resample;

    auto sink = [&](std::size_t iter, const pmcmc::ChainRecord& rec, bool is_new) {
        if (is_new) cache.valid = false;
        if (chain_csv) {
            std::vector<std::string> row{std::to_string(iter)};
            for (std::size_t j = 0; j < n_params; ++j) row.push_back(fmt(rec.theta[j]));
            row.push_back(fmt(rec.log_c));
            row.push_back(rec.accepted ? "1" : "0");
            chain_csv->row(row);
        }
        if (sidecar) sidecar->append(rec.noise);
        // the estimator consumes records 1..M; with M = 0 it falls back to
        // the initialization record
        if (m_iters > 0 && (iter == 0 || iter <= burn || iter % cfg.thin != 0)) return;
        if (!cache.valid) {
            auto w = ml::weight_j0_full(model, rec.theta, rec.noise, y, map, &ledger);
            cache.log_j0 = w.log_j0;
            cache.phi.assign(n_params + span, 0.0);
            for (std::size_t j = 0; j < n_params; ++j) cache.phi[j] = rec.theta[j];
            for (std::size_t t = 0; t < span; ++t) cache.phi[n_params + t] = w.x_true[t];
            cache.pseudo = std::move(w.x_pseudo);
            cache.valid = true;
        }
        corrected.add(cache.log_j0, cache.phi);
        for (std::size_t j = 0; j < n_params; ++j) uncorrected[j] += cache.phi[j];
        for (std::size_t t = 0; t < span; ++t) uncorrected[n_params + t] += cache.pseudo[t];
        if (cfg.keep_trace) {
            trace_log_j0.push_back(cache.log_j0);
            for (std::size_t j = 0; j < n_params; ++j) trace_params[j].push_back(cache.phi[j]);
        }
        ++used;
    };

    const auto summary = pmcmc::pmmh_single_stream(model, settings, y,
                                                   pmcmc::ChainRunId{cfg.seed, chain_id}, sink,
                                                   &ledger);

    SingleLevelResult result;
    result.level = cfg.level;
    result.iterations = m_iters;
    result.accept_count = summary.accept_count;
    result.records_used = used;
    result.j_ess = corrected.ess();
    result.ledger = ledger;
    if (used == 0) throw AllWeightsDegenerate("no records accumulated");
    for (std::size_t j = 0; j < n_params; ++j) {
        ParamSummary ps;
        ps.name = model.params[j].name;
        ps.uncorrected_mean = uncorrected[j] / static_cast<double>(used);
        ps.corrected_mean = corrected.estimate(j);
        result.params.push_back(ps);
    }
    result.state_mean_uncorrected.resize(span);
    result.state_mean_corrected.resize(span);
    for (std::size_t t = 0; t < span; ++t) {
        result.state_mean_uncorrected[t] = uncorrected[n_params + t] / static_cast<double>(used);
        result.state_mean_corrected[t] = corrected.estimate(n_params + t);
    }
    if (cfg.keep_trace) {
        result.trace_log_j0 = std::move(trace_log_j0);
        result.trace_params = std::move(trace_params);
    }

    if (!out_dir.empty()) {
        csv::Writer summary_csv(join(out_dir, "summary.csv"),
                                "param,uncorrected_mean,corrected_mean,j_ess,records,accept_rate");
        const double arate = m_iters ? static_cast<double>(result.accept_count) /
                                           static_cast<double>(m_iters)
                                     : 0.0;
        for (const auto& p : result.params)
            summary_csv.row({p.name, fmt(p.uncorrected_mean), fmt(p.corrected_mean),
                             fmt(result.j_ess), std::to_string(used), fmt(arate)});
        csv::Writer states_csv(join(out_dir, "states.csv"),
                               "t,y,state_uncorrected,state_corrected");
        for (std::size_t t = 0; t < span; ++t)
            states_csv.row({std::to_string(t + 1), fmt(y[t]), fmt(result.state_mean_uncorrected[t]),
                            fmt(result.state_mean_corrected[t])});
        csv::Writer cost_csv(join(out_dir, "cost.csv"),
                             "euler_steps,fft_cost,resample_ops,total");
        cost_csv.row({fmt(ledger.euler_steps), fmt(ledger.fft_cost), fmt(ledger.resample_ops),
                      fmt(ledger.total())});
        if (cfg.diagnostics) {
            pf::FilterDiag diag;
            CostLedger scratch;
            const auto theta0 = [&] {
                RngStream rng(StreamKey{cfg.seed, stream_purpose::kPriorInit,
                                        static_cast<std::uint64_t>(cfg.level), chain_id, 0, 0, 0});
                return model.sample_prior(rng);
            }();
            pf::pf_single(model, theta0, cfg.level, settings.n_particles, y,
                          pf::FilterRunId{cfg.seed, static_cast<std::uint64_t>(cfg.level), chain_id,
                                          0},
                          settings.filter, &scratch, &diag, nullptr);
            csv::Writer diag_csv(join(out_dir, "pf_diag.csv"), "t,ess,logw_spread");
            for (std::size_t t = 0; t < diag.ess.size(); ++t)
                diag_csv.row({std::to_string(t + 1), fmt(diag.ess[t]), fmt(diag.logw_spread[t])});
        }
    }
    return result;
}

MultilevelResult run_multilevel(const ExperimentConfig& cfg, const std::vector<double>& y,
                                std::uint64_t chain_base, const std::string& out_dir) {
    const auto model = cfg.make_model();
    const std::size_t span = y.size();
    const std::size_t n_params = model.params.size();

    MultilevelResult result;
    result.allocation = ml::allocate(cfg.epsilon, cfg.alpha, cfg.beta, cfg.gamma, cfg.l_min,
                                     cfg.l_cap, cfg.base_m, cfg.effective_particles());
    for (const auto& p : model.params) result.phi_names.push_back(p.name);

    ensure_dir(out_dir);
    std::unique_ptr<csv::Writer> records_csv;

    ml::LevelEstimate base;
    std::vector<ml::LevelEstimate> increments;

    for (int level = result.allocation.l_min; level <= result.allocation.top_level; ++level) {
        const bool is_base = level == result.allocation.l_min;
        const std::size_t m_iters = result.allocation.m_at(level);
        const std::size_t burn = static_cast<std::size_t>(
            std::floor(cfg.burn_in_fraction * static_cast<double>(m_iters)));
        const auto map = fgn::build_full_path_map(model.hurst, level, span);

        config::ExperimentConfig level_cfg = cfg;
        level_cfg.level = level;
        const auto settings = chain_settings(level_cfg, level, m_iters, n_params);

        if (!out_dir.empty()) {
            std::string header = "iter";
            for (const auto& p : model.params) header += "," + p.name;
            header += ",log_c,accepted";
            header += is_base ? ",log_j0" : ",log_j_fine,log_j_coarse";
            records_csv = std::make_unique<csv::Writer>(
                join(out_dir, "records_l" + std::to_string(level) + ".csv"), header);
        }

        CostLedger ledger;
        ledger.w_euler = cfg.w_euler;
        ledger.w_fft = cfg.w_fft;
        ledger.w_resample = cfg.w_resample;

        ml::SelfNormAccumulator fine(n_params);
        ml::SelfNormAccumulator coarse(n_params);
        std::size_t used = 0;

        struct Cache {
            bool valid = false;
            double lj_fine = 0.0, lj_coarse = 0.0;
            std::vector<double> phi_fine, phi_coarse;
        } cache;

        auto sink = [&](std::size_t iter, const pmcmc::ChainRecord& rec, bool is_new) {
            if (is_new) cache.valid = false;
            const bool accumulate = iter > burn && (cfg.thin == 1 || iter % cfg.thin == 0);
            if (!accumulate && !records_csv) return;
            if (accumulate && !cache.valid) {
                if (is_base) {
                    auto w = ml::weight_j0_full(model, rec.theta, rec.noise, y, map, &ledger);
                    cache.lj_fine = w.log_j0;
                    cache.lj_coarse = 0.0;
                    cache.phi_fine.assign(rec.theta.v.begin(), rec.theta.v.end());
                    cache.phi_coarse = cache.phi_fine;
                } else {
                    auto w = ml::weight_jl_full(model, rec.theta, rec.noise, y, map, &ledger);
                    cache.lj_fine = w.log_j_fine;
                    cache.lj_coarse = w.log_j_coarse;
                    // parameter test functions: identical on both branches
                    cache.phi_fine.assign(rec.theta.v.begin(), rec.theta.v.end());
                    cache.phi_coarse = cache.phi_fine;
                }
                cache.valid = true;
            }
            if (records_csv) {
                std::vector<std::string> row{std::to_string(iter)};
                for (std::size_t j = 0; j < n_params; ++j) row.push_back(fmt(rec.theta[j]));
                row.push_back(fmt(rec.log_c));
                row.push_back(rec.accepted ? "1" : "0");
                if (accumulate && cache.valid) {
                    row.push_back(fmt(cache.lj_fine));
                    if (!is_base) row.push_back(fmt(cache.lj_coarse));
                } else {
                    row.push_back("");
                    if (!is_base) row.push_back("");
                }
                records_csv->row(row);
            }
            if (!accumulate) return;
            fine.add(cache.lj_fine, cache.phi_fine);
            if (!is_base) coarse.add(cache.lj_coarse, cache.phi_coarse);
            ++used;
        };

        const pmcmc::ChainRunId run{cfg.seed,
                                    chain_base + static_cast<std::uint64_t>(level - cfg.l_min)};
        if (is_base)
            pmcmc::pmmh_single_stream(model, settings, y, run, sink, &ledger);
        else
            pmcmc::pmmh_coupled_stream(model, settings, y, run, sink, &ledger);

        ml::LevelEstimate est;
        est.level = level;
        est.records = used;
        est.cost = ledger;
        est.ess_fine = fine.ess();
        for (std::size_t j = 0; j < n_params; ++j) est.pi_fine.push_back(fine.estimate(j));
        if (!is_base) {
            est.ess_coarse = coarse.ess();
            for (std::size_t j = 0; j < n_params; ++j) est.pi_coarse.push_back(coarse.estimate(j));
            increments.push_back(est);
        } else {
            base = est;
        }
    }

    result.estimate = ml::telescope(base, increments);

    if (!out_dir.empty()) {
        csv::Writer summary(join(out_dir, "summary.csv"),
                            "param,level,pi_fine,pi_coarse,increment,j_ess_fine,j_ess_coarse,cost");
        for (std::size_t j = 0; j < n_params; ++j) {
            for (const auto& lvl : result.estimate.levels) {
                const bool is_base = lvl.pi_coarse.empty();
                const double pf_val = lvl.pi_fine[j];
                const double pc_val = is_base ? 0.0 : lvl.pi_coarse[j];
                summary.row({result.phi_names[j], std::to_string(lvl.level), fmt(pf_val),
                             is_base ? "" : fmt(pc_val), fmt(is_base ? pf_val : pf_val - pc_val),
                             fmt(lvl.ess_fine), is_base ? "" : fmt(lvl.ess_coarse),
                             fmt(lvl.cost.total())});
            }
        }
        csv::Writer estimate(join(out_dir, "estimate.csv"), "param,estimate,total_cost");
        for (std::size_t j = 0; j < n_params; ++j)
            estimate.row({result.phi_names[j], fmt(result.estimate.totals[j]),
                          fmt(result.estimate.cost.total())});
    }
    return result;
}

RateFit rate_fit(const std::vector<double>& mse, const std::vector<double>& cost) {
    if (mse.size() != cost.size()) throw DimensionMismatch("rate_fit: size mismatch");
    if (mse.size() < 3) throw InsufficientPoints("rate fit needs >= 3 points");
    const std::size_t n = mse.size();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = std::log(mse[i]);
        const double y = std::log(cost[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double dn = static_cast<double>(n);
    const double denom = dn * sxx - sx * sx;
    if (denom == 0.0) throw InsufficientPoints("rate fit is degenerate");
    RateFit fit;
    fit.points = n;
    fit.slope = (dn * sxy - sx * sy) / denom;
    fit.intercept = (sy - fit.slope * sx) / dn;
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = std::log(cost[i]) - (fit.intercept + fit.slope * std::log(mse[i]));
        ss += r * r;
    }
    fit.residual = std::sqrt(ss / dn);
    return fit;
}

StudyResult mse_study(const ExperimentConfig& cfg, const std::vector<double>& y,
                      const std::string& out_dir) {
    const auto model = cfg.make_model();
    const std::size_t n_params = model.params.size();
    const std::size_t n_points = cfg.study_levels.size();
    const std::size_t repeats = cfg.repeats;
    if (n_points == 0) throw ConfigError("study.levels is empty");
    const int min_level = *std::min_element(cfg.study_levels.begin(), cfg.study_levels.end());
    const int max_level = *std::max_element(cfg.study_levels.begin(), cfg.study_levels.end());

    // Pinned study design: the single-level method at level l runs
    // M = single_m0 * 2^{l - min} iterations (variance scales with the bias
    // target); the multilevel method targets epsilon_l = 2^{-alpha l}.
    std::vector<std::size_t> m_single(n_points);
    std::vector<double> eps_ml(n_points);
    std::size_t m_largest = 0;
    for (std::size_t p = 0; p < n_points; ++p) {
        const int level = cfg.study_levels[p];
        m_single[p] = static_cast<std::size_t>(
            std::ceil(cfg.single_m0 * std::ldexp(1.0, level - min_level)));
        eps_ml[p] = std::pow(2.0, -cfg.alpha * level);
        m_largest = std::max(m_largest, m_single[p]);
        const auto alloc = ml::allocate(eps_ml[p], cfg.alpha, cfg.beta, cfg.gamma, cfg.l_min, level,
                                        cfg.ml_base_m, cfg.effective_particles());
        for (auto m : alloc.iterations) m_largest = std::max(m_largest, m);
    }

    // Reference: one long J0-corrected run one level above the study range.
    config::ExperimentConfig ref_cfg = cfg;
    ref_cfg.level = max_level + 1;
    ref_cfg.iterations = std::max<std::size_t>(
        cfg.ref_min_iterations,
        static_cast<std::size_t>(std::llround(cfg.ref_factor * static_cast<double>(m_largest))));

    struct RunOutput {
        std::vector<double> estimates;
        double cost = 0.0;
    };
    std::vector<RunOutput> single_runs(n_points * repeats);
    std::vector<RunOutput> ml_runs(n_points * repeats);
    SingleLevelResult ref_result;
    std::vector<double> ref_se(n_params, 0.0);

    struct Task {
        int kind;  // 0 = reference, 1 = single, 2 = ml
        std::size_t point = 0;
        std::size_t repeat = 0;
    };
    std::vector<Task> tasks;
    tasks.push_back({0, 0, 0});
    for (std::size_t p = 0; p < n_points; ++p)
        for (std::size_t r = 0; r < repeats; ++r) tasks.push_back({1, p, r});
    for (std::size_t p = 0; p < n_points; ++p)
        for (std::size_t r = 0; r < repeats; ++r) tasks.push_back({2, p, r});

    std::mutex ref_mutex;
    auto run_task = [&](std::size_t idx) {
        const Task task = tasks[idx];
        if (task.kind == 0) {
            // the reference also needs a standard error, so keep its trace
            auto local = ref_cfg;
            local.keep_trace = true;
            auto res = run_single_level(local, y, 1000000, "");
            std::lock_guard<std::mutex> lock(ref_mutex);
            ref_result = std::move(res);
        } else if (task.kind == 1) {
            config::ExperimentConfig c = cfg;
            c.level = cfg.study_levels[task.point];
            c.iterations = m_single[task.point];
            const std::uint64_t chain = 10000 + task.point * 1000 + task.repeat;
            const auto res = run_single_level(c, y, chain, "");
            RunOutput out;
            for (const auto& p : res.params) out.estimates.push_back(p.corrected_mean);
            out.cost = res.ledger.total();
            single_runs[task.point * repeats + task.repeat] = std::move(out);
        } else {
            config::ExperimentConfig c = cfg;
            c.epsilon = eps_ml[task.point];
            c.l_cap = cfg.study_levels[task.point];
            c.base_m = cfg.ml_base_m;
            const std::uint64_t chain = 100000 + task.point * 1000 + task.repeat * 16;
            const auto res = run_multilevel(c, y, chain, "");
            RunOutput out;
            out.estimates = res.estimate.totals;
            out.cost = res.estimate.cost.total();
            ml_runs[task.point * repeats + task.repeat] = std::move(out);
        }
    };
    parallel_for(tasks.size(), cfg.workers, run_task);

    StudyResult study;
    for (const auto& p : model.params) study.params.push_back(p.name);
    study.reference_level = ref_cfg.level;
    study.reference_iterations = ref_cfg.iterations;
    for (const auto& p : ref_result.params) study.reference.push_back(p.corrected_mean);
    for (std::size_t j = 0; j < n_params; ++j)
        ref_se[j] = batch_means_ratio_se(ref_result.trace_params[j], ref_result.trace_log_j0);
    study.reference_se = ref_se;

    auto add_points = [&](const char* method, const std::vector<RunOutput>& runs) {
        for (std::size_t p = 0; p < n_points; ++p) {
            for (std::size_t j = 0; j < n_params; ++j) {
                double mse = 0.0, cost = 0.0, mean = 0.0;
                for (std::size_t r = 0; r < repeats; ++r) {
                    const auto& run = runs[p * repeats + r];
                    const double err = run.estimates[j] - study.reference[j];
                    mse += err * err;
                    cost += run.cost;
                    mean += run.estimates[j];
                }
                StudyPoint pt;
                pt.method = method;
                pt.param = study.params[j];
                pt.level = cfg.study_levels[p];
                pt.epsilon = eps_ml[p];
                pt.mse = mse / static_cast<double>(repeats);
                pt.cost = cost / static_cast<double>(repeats);
                pt.mean_estimate = mean / static_cast<double>(repeats);
                study.points.push_back(pt);
            }
        }
    };
    add_points("pmcmc", single_runs);
    add_points("mlpmcmc", ml_runs);

    for (const char* method : {"pmcmc", "mlpmcmc"}) {
        for (std::size_t j = 0; j < n_params; ++j) {
            std::vector<double> mse, cost;
            for (const auto& pt : study.points)
                if (pt.method == method && pt.param == study.params[j]) {
                    mse.push_back(pt.mse);
                    cost.push_back(pt.cost);
                }
            study.fits.emplace_back(std::string(method) + "/" + study.params[j],
                                    rate_fit(mse, cost));
        }
    }

    if (!out_dir.empty()) {
        ensure_dir(out_dir);
        emit_plots(study, out_dir);
        csv::Writer ref(join(out_dir, "reference.csv"), "param,estimate,se,level,iterations");
        for (std::size_t j = 0; j < n_params; ++j)
            ref.row({study.params[j], fmt(study.reference[j]), fmt(study.reference_se[j]),
                     std::to_string(study.reference_level),
                     std::to_string(study.reference_iterations)});
    }
    return study;
}

namespace {
const char* kPlotScript = R"PY(#!/usr/bin/env python3
"""Render log-log cost versus MSE charts from the study CSVs in this directory."""
import csv
import os
from collections import defaultdict

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

HERE = os.path.dirname(os.path.abspath(__file__))

points = defaultdict(list)
with open(os.path.join(HERE, "study_points.csv")) as f:
    for row in csv.DictReader(f):
        points[(row["param"], row["method"])].append(
            (float(row["mse"]), float(row["cost"])))

params = sorted({param for param, _ in points})
for param in params:
    fig, ax = plt.subplots(figsize=(5, 4))
    for method, marker in (("pmcmc", "o"), ("mlpmcmc", "s")):
        data = sorted(points.get((param, method), []))
        if not data:
            continue
        ax.loglog([m for m, _ in data], [c for _, c in data],
                  marker=marker, label=method)
    ax.set_xlabel("MSE")
    ax.set_ylabel("cost")
    ax.set_title(param)
    ax.legend()
    fig.tight_layout()
    fig.savefig(os.path.join(HERE, f"cost_vs_mse_{param}.png"), dpi=150)
    plt.close(fig)
print("wrote", ", ".join(f"cost_vs_mse_{p}.png" for p in params))
)PY";
}  // namespace

void emit_plots(const StudyResult& study, const std::string& out_dir) {
    ensure_dir(out_dir);
    {
        csv::Writer pts(join(out_dir, "study_points.csv"),
                        "method,param,level,epsilon,mse,cost,estimate_mean,reference");
        for (const auto& pt : study.points) {
            double ref = 0.0;
            for (std::size_t j = 0; j < study.params.size(); ++j)
                if (study.params[j] == pt.param) ref = study.reference[j];
            pts.row({pt.method, pt.param, std::to_string(pt.level), fmt(pt.epsilon), fmt(pt.mse),
                     fmt(pt.cost), fmt(pt.mean_estimate), fmt(ref)});
        }
    }
    {
        csv::Writer rates(join(out_dir, "study_rates.csv"),
                          "method,param,slope,intercept,residual,points");
        for (const auto& [key, fit] : study.fits) {
            const auto slash = key.find('/');
            rates.row({key.substr(0, slash), key.substr(slash + 1), fmt(fit.slope),
                       fmt(fit.intercept), fmt(fit.residual), std::to_string(fit.points)});
        }
    }
    if (!study.points.empty()) {
        std::FILE* f = std::fopen(join(out_dir, "plot_study.py").c_str(), "wb");
        if (!f) throw IOError("cannot write plot script");
        std::fputs(kPlotScript, f);
        std::fclose(f);
    }
}

int cmd_synth(const ExperimentConfig& cfg) {
    const auto model = cfg.make_model();
    sde::ParamVector theta_true;
    theta_true.v = {cfg.theta_true, cfg.sigma_true};
    if (model.params.size() != theta_true.size())
        throw ConfigError("model '" + cfg.model_name + "' expects " +
                          std::to_string(model.params.size()) + " true parameter values");
    const auto data = sde::synth_generate(model, theta_true, cfg.synth_level, cfg.span, cfg.seed);
    ensure_dir(cfg.out_dir);
    {
        csv::Writer w(join(cfg.out_dir, "data.csv"), "t,y");
        for (std::size_t t = 0; t < data.y.size(); ++t)
            w.row({std::to_string(t + 1), fmt(data.y[t])});
    }
    if (cfg.write_truth) {
        csv::Writer w(join(cfg.out_dir, "truth.csv"), "t,x");
        for (std::size_t t = 0; t < data.truth.unit.size(); ++t)
            w.row({std::to_string(t + 1), fmt(data.truth.unit[t])});
    }
    std::cout << "synth: wrote " << data.y.size() << " observations to "
              << join(cfg.out_dir, "data.csv") << "\n";
    return 0;
}

int cmd_fgn_check(const ExperimentConfig& cfg) {
    ensure_dir(cfg.out_dir);
    {
        csv::Writer w(join(cfg.out_dir, "autocov.csv"), "h,lag,gamma");
        for (double h : cfg.check_hs)
            for (std::size_t k = 0; k <= cfg.check_max_lag; ++k)
                w.row({fmt(h), std::to_string(k), fmt(fgn::autocov(h, k))});
    }
    {
        csv::Writer w(join(cfg.out_dir, "spectrum.csv"),
                      "h,m,min_eigenvalue,max_eigenvalue,clipped");
        for (double h : cfg.check_hs) {
            for (std::size_t m : cfg.check_ms) {
                const auto emb = fgn::build_embedding(h, m);
                const auto [mn, mx] =
                    std::minmax_element(emb.eigenvalues.begin(), emb.eigenvalues.end());
                w.row({fmt(h), std::to_string(m), fmt(*mn), fmt(*mx),
                       std::to_string(emb.clipped)});
            }
        }
    }
    std::cout << "fgn-check: wrote autocov.csv and spectrum.csv to " << cfg.out_dir << "\n";
    return 0;
}

int cmd_pmcmc(const ExperimentConfig& cfg) {
    const auto y = ingest_csv(cfg.data_path);
    const auto res = run_single_level(cfg, y, 0, cfg.out_dir);
    std::cout << "pmcmc: level " << res.level << ", " << res.iterations << " iterations, "
              << "acceptance " << (res.iterations ? static_cast<double>(res.accept_count) /
                                                        static_cast<double>(res.iterations)
                                                  : 0.0)
              << ", J-ESS " << res.j_ess << "\n";
    for (const auto& p : res.params)
        std::cout << "  " << p.name << ": corrected " << p.corrected_mean << " (uncorrected "
                  << p.uncorrected_mean << ")\n";
    return 0;
}

int cmd_mlpmcmc(const ExperimentConfig& cfg) {
    const auto y = ingest_csv(cfg.data_path);
    const auto res = run_multilevel(cfg, y, 0, cfg.out_dir);
    std::cout << "mlpmcmc: levels " << res.allocation.l_min << ".." << res.allocation.top_level
              << ", epsilon " << res.allocation.epsilon << "\n";
    for (std::size_t j = 0; j < res.phi_names.size(); ++j)
        std::cout << "  " << res.phi_names[j] << ": " << res.estimate.totals[j] << "\n";
    return 0;
}

int cmd_study(const ExperimentConfig& cfg) {
    std::vector<double> y;
    if (fs::exists(cfg.data_path)) {
        y = ingest_csv(cfg.data_path);
    } else {
        const auto model = cfg.make_model();
        sde::ParamVector theta_true;
        theta_true.v = {cfg.theta_true, cfg.sigma_true};
        y = sde::synth_generate(model, theta_true, cfg.synth_level, cfg.span, cfg.seed).y;
        ensure_dir(cfg.out_dir);
        csv::Writer w(join(cfg.out_dir, "study_data.csv"), "t,y");
        for (std::size_t t = 0; t < y.size(); ++t) w.row({std::to_string(t + 1), fmt(y[t])});
    }
    const auto study = mse_study(cfg, y, cfg.out_dir);
    for (const auto& [key, fit] : study.fits)
        std::cout << "  " << key << ": slope " << fit.slope << " (residual " << fit.residual
                  << ")\n";
    return 0;
}

int cmd_rates(const ExperimentConfig& cfg) {
    const auto table = csv::read(join(cfg.out_dir, "study_points.csv"));
    if (table.header.empty() || table.header[0] != "method")
        throw MalformedCSV("study_points.csv has an unexpected header");
    std::vector<std::pair<std::string, std::pair<std::vector<double>, std::vector<double>>>>
        groups;
    for (const auto& row : table.rows) {
        const std::string key = row[0] + "/" + row[1];
        auto it = std::find_if(groups.begin(), groups.end(),
                               [&](const auto& g) { return g.first == key; });
        if (it == groups.end()) {
            groups.push_back({key, {}});
            it = groups.end() - 1;
        }
        it->second.first.push_back(csv::parse_double(row[4]));
        it->second.second.push_back(csv::parse_double(row[5]));
    }
    csv::Writer rates(join(cfg.out_dir, "study_rates.csv"),
                      "method,param,slope,intercept,residual,points");
    for (const auto& [key, data] : groups) {
        const auto fit = rate_fit(data.first, data.second);
        const auto slash = key.find('/');
        rates.row({key.substr(0, slash), key.substr(slash + 1), fmt(fit.slope),
                   fmt(fit.intercept), fmt(fit.residual), std::to_string(fit.points)});
        std::cout << "  " << key << ": slope " << fit.slope << "\n";
    }
    return 0;
}

int cmd_plots(const ExperimentConfig& cfg) {
    const auto table = csv::read(join(cfg.out_dir, "study_points.csv"));
    if (!table.rows.empty()) {
        std::FILE* f = std::fopen(join(cfg.out_dir, "plot_study.py").c_str(), "wb");
        if (!f) throw IOError("cannot write plot script");
        std::fputs(kPlotScript, f);
        std::fclose(f);
        std::cout << "plots: wrote plot_study.py (run with python3)\n";
    } else {
        std::cout << "plots: study is empty, no script written\n";
    }
    return 0;
}

}  // namespace pofbm::harness
