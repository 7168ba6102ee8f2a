#include "pofbm/pf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace pofbm::pf {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double logsumexp(const std::vector<double>& v) {
    double mx = kNegInf;
    for (double x : v)
        if (x > mx) mx = x;
    if (!std::isfinite(mx)) return kNegInf;
    double s = 0.0;
    for (double x : v) s += std::exp(x - mx);
    return mx + std::log(s);
}

// Normalizes log weights in place into plain weights; returns ESS.
double normalize(const std::vector<double>& logw, std::vector<double>& w) {
    const double lse = logsumexp(logw);
    if (!std::isfinite(lse)) throw DegenerateWeights("all particle weights vanished");
    w.resize(logw.size());
    double sum_sq = 0.0;
    for (std::size_t i = 0; i < logw.size(); ++i) {
        w[i] = std::exp(logw[i] - lse);
        sum_sq += w[i] * w[i];
    }
    return 1.0 / sum_sq;
}

double spread(const std::vector<double>& logw) {
    double lo = std::numeric_limits<double>::infinity(), hi = kNegInf;
    for (double x : logw) {
        if (!std::isfinite(x)) continue;
        lo = std::min(lo, x);
        hi = std::max(hi, x);
    }
    return (hi >= lo) ? hi - lo : 0.0;
}

// Shared implementation of Algorithms 1 and 2: the coupled variant carries a
// coarse state per particle and weights by the max of the two observation
// densities.
FilterResult run_filter(const sde::ModelSpec& model, const sde::ParamVector& theta, int level,
                        std::size_t n, const std::vector<double>& y, const FilterRunId& run,
                        const FilterOptions& opts, bool coupled, CostLedger* ledger,
                        FilterDiag* diag, ParticleSystem* keep_system) {
    if (n == 0) throw Error("particle filter needs at least one particle");
    if (y.empty()) throw Error("particle filter needs at least one observation");
    if (coupled && level < 1) throw Error("coupled filter needs level >= 1");

    const std::size_t span = y.size();
    const std::size_t m = static_cast<std::size_t>(1) << level;
    const std::size_t zlen = 2 * m;
    const double delta = fgn::LevelIndex(level).delta();
    const double delta_c = coupled ? fgn::LevelIndex(level - 1).delta() : 0.0;
    const auto emb = fgn::build_embedding(model.hurst, m);
    const double scale = std::pow(delta, model.hurst);

    const double x0 = model.initial_state(theta);
    std::vector<double> xf(n, x0), xc(coupled ? n : 0, x0);
    std::vector<double> logw(n, -std::log(static_cast<double>(n)));
    std::vector<double> w(n);
    std::vector<double> incr(m), coarse(coupled ? m / 2 : 0);
    std::vector<std::complex<double>> scratch;

    ParticleSystem local;
    ParticleSystem& sys = keep_system ? *keep_system : local;
    sys.n_particles = n;
    sys.span = span;
    sys.level = level;
    sys.pool.assign(span, std::vector<double>(n * zlen));
    sys.ancestry.assign(span, std::vector<int>(n));
    std::iota(sys.ancestry[0].begin(), sys.ancestry[0].end(), 0);

    if (diag) {
        diag->ess.clear();
        diag->logw_spread.clear();
        diag->log_g_fine.clear();
        diag->log_g_coarse.clear();
    }

    double log_c = 0.0;
    std::vector<double> logg(n), step_gf, step_gc;
    std::vector<double> xf_new(n), xc_new(coupled ? n : 0);

    for (std::size_t t = 1; t <= span; ++t) {
        if (t > 1) {
            const double ess = normalize(logw, w);
            if (ess < opts.resample_threshold * static_cast<double>(n)) {
                RngStream rng(StreamKey{run.seed, stream_purpose::kResample, run.level, run.chain,
                                        run.iter, t, 0});
                const auto idx = resample_multinomial(w, rng);
                for (std::size_t i = 0; i < n; ++i) {
                    sys.ancestry[t - 1][i] = static_cast<int>(idx[i]);
                    xf_new[i] = xf[idx[i]];
                    if (coupled) xc_new[i] = xc[idx[i]];
                }
                xf.swap(xf_new);
                if (coupled) xc.swap(xc_new);
                std::fill(logw.begin(), logw.end(), -std::log(static_cast<double>(n)));
                if (ledger) ledger->add_resample(static_cast<double>(n));
            } else {
                std::iota(sys.ancestry[t - 1].begin(), sys.ancestry[t - 1].end(), 0);
                for (std::size_t i = 0; i < n; ++i) logw[i] = std::log(w[i]);
            }
        }

        if (diag && diag->capture_particles) {
            step_gf.assign(n, 0.0);
            step_gc.assign(n, 0.0);
        }

        double* pool_row = sys.pool[t - 1].data();
        for (std::size_t i = 0; i < n; ++i) {
            RngStream rng(StreamKey{run.seed, stream_purpose::kBlockDraw, run.level, run.chain,
                                    run.iter, t, i + 1});
            double* z = pool_row + i * zlen;
            for (std::size_t k = 0; k < zlen; ++k) z[k] = rng.normal();

            fgn::sample_block_unit(emb, z, incr.data(), scratch, ledger);
            for (auto& v : incr) v *= scale;
            xf[i] = sde::unit_map(model, theta, xf[i], incr.data(), m, delta, ledger);
            double lg = model.log_obs(theta, y[t - 1], xf[i]);
            if (coupled) {
                for (std::size_t k = 0; k < m / 2; ++k) coarse[k] = incr[2 * k] + incr[2 * k + 1];
                xc[i] = sde::unit_map(model, theta, xc[i], coarse.data(), m / 2, delta_c, ledger);
                const double lgc = model.log_obs(theta, y[t - 1], xc[i]);
                if (diag && diag->capture_particles) {
                    step_gf[i] = lg;
                    step_gc[i] = lgc;
                }
                lg = std::max(lg, lgc);
            } else if (diag && diag->capture_particles) {
                step_gf[i] = lg;
            }
            logg[i] = lg;
        }

        // log C accumulation: current normalized weights times the new
        // unnormalized ones; with resampling every step this is
        // log((1/N) sum_i g_t^i).
        std::vector<double> acc(n);
        for (std::size_t i = 0; i < n; ++i) acc[i] = logw[i] + logg[i];
        const double inc = logsumexp(acc);
        if (!std::isfinite(inc))
            throw DegenerateWeights("all weights vanished at t=" + std::to_string(t));
        log_c += inc;
        logw.swap(acc);

        if (diag) {
            std::vector<double> tmp;
            diag->ess.push_back(normalize(logw, tmp));
            diag->logw_spread.push_back(spread(logg));
            if (diag->capture_particles) {
                diag->log_g_fine.push_back(step_gf);
                if (coupled) diag->log_g_coarse.push_back(step_gc);
            }
        }
    }

    normalize(logw, sys.final_weights);

    RngStream traj_rng(StreamKey{run.seed, stream_purpose::kTrajectoryDraw, run.level, run.chain,
                                 run.iter, span + 1, 0});
    FilterResult result;
    result.logc.log_value = log_c;
    result.trajectory = trace_trajectory(sys, traj_rng);
    return result;
}

}  // namespace

std::vector<std::size_t> resample_multinomial(const std::vector<double>& weights, RngStream& rng) {
    const std::size_t n = weights.size();
    std::vector<double> cum(n);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double wi = weights[i];
        if (!(wi >= 0.0) || !std::isfinite(wi))
            throw DegenerateWeights("resample_multinomial: invalid weight");
        acc += wi;
        cum[i] = acc;
    }
    if (acc <= 0.0) throw DegenerateWeights("resample_multinomial: zero weight mass");
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double u = rng.uniform() * acc;
        idx[i] = static_cast<std::size_t>(
            std::lower_bound(cum.begin(), cum.end(), u) - cum.begin());
        if (idx[i] >= n) idx[i] = n - 1;
    }
    return idx;
}

std::size_t sample_index(const std::vector<double>& normalized_weights, RngStream& rng) {
    const double u = rng.uniform();
    double acc = 0.0;
    for (std::size_t i = 0; i < normalized_weights.size(); ++i) {
        acc += normalized_weights[i];
        if (u <= acc) return i;
    }
    return normalized_weights.size() - 1;
}

TrajectoryDraw trace_trajectory(const ParticleSystem& sys, RngStream& rng) {
    if (sys.final_weights.empty()) throw DegenerateWeights("trace_trajectory: no final weights");
    const std::size_t zlen = 2 * (static_cast<std::size_t>(1) << sys.level);
    TrajectoryDraw draw;
    draw.level = sys.level;
    draw.blocks.resize(sys.span);
    std::size_t cur = sample_index(sys.final_weights, rng);
    for (std::size_t t = sys.span; t >= 1; --t) {
        const double* row = sys.pool[t - 1].data() + cur * zlen;
        draw.blocks[t - 1].t = t;
        draw.blocks[t - 1].z.assign(row, row + zlen);
        cur = static_cast<std::size_t>(sys.ancestry[t - 1][cur]);
    }
    return draw;
}

FilterResult pf_single(const sde::ModelSpec& model, const sde::ParamVector& theta, int level,
                       std::size_t n, const std::vector<double>& y, const FilterRunId& run,
                       const FilterOptions& opts, CostLedger* ledger, FilterDiag* diag,
                       ParticleSystem* keep_system) {
    return run_filter(model, theta, level, n, y, run, opts, false, ledger, diag, keep_system);
}

FilterResult pf_coupled(const sde::ModelSpec& model, const sde::ParamVector& theta, int level,
                        std::size_t n, const std::vector<double>& y, const FilterRunId& run,
                        const FilterOptions& opts, CostLedger* ledger, FilterDiag* diag,
                        ParticleSystem* keep_system) {
    return run_filter(model, theta, level, n, y, run, opts, true, ledger, diag, keep_system);
}

}  // namespace pofbm::pf
