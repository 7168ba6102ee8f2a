#include "pofbm/pmcmc.hpp"

#include <cmath>

namespace pofbm::pmcmc {

sde::ParamVector propose(const sde::ParamVector& theta, const ProposalConfig& cfg,
                         RngStream& rng) {
    if (cfg.log_steps.size() != theta.size())
        throw DimensionMismatch("proposal has " + std::to_string(cfg.log_steps.size()) +
                                " step sizes for " + std::to_string(theta.size()) + " parameters");
    sde::ParamVector out = theta;
    for (std::size_t j = 0; j < out.size(); ++j)
        out.v[j] = theta[j] * std::exp(cfg.log_steps[j] * rng.normal());
    return out;
}

double accept_log_ratio(double log_c_new, double log_prior_new, double log_c_old,
                        double log_prior_old, double log_jacobian_correction) {
    const double r =
        (log_c_new + log_prior_new) - (log_c_old + log_prior_old) + log_jacobian_correction;
    return std::min(0.0, r);
}

namespace {

using FilterFn = pf::FilterResult (*)(const sde::ModelSpec&, const sde::ParamVector&, int,
                                      std::size_t, const std::vector<double>&,
                                      const pf::FilterRunId&, const pf::FilterOptions&,
                                      CostLedger*, pf::FilterDiag*, pf::ParticleSystem*);

ChainSummary run_chain(const sde::ModelSpec& model, const ChainSettings& settings,
                       const std::vector<double>& y, const ChainRunId& run, const RecordSink& sink,
                       CostLedger* ledger, FilterFn filter) {
    const auto lvl = static_cast<std::uint64_t>(settings.level);

    ChainRecord current;
    bool initialized = false;
    for (std::size_t attempt = 0; attempt <= settings.max_init_retries; ++attempt) {
        RngStream prior_rng(
            StreamKey{run.seed, stream_purpose::kPriorInit, lvl, run.chain, attempt, 0, 0});
        const auto theta0 = model.sample_prior(prior_rng);
        try {
            const auto res = filter(model, theta0, settings.level, settings.n_particles, y,
                                    pf::FilterRunId{run.seed, lvl, run.chain, attempt},
                                    settings.filter, ledger, nullptr, nullptr);
            current.theta = theta0;
            current.noise = res.trajectory;
            current.log_c = res.logc.log_value;
            current.accepted = false;
            initialized = true;
            break;
        } catch (const DegenerateWeights&) {
            continue;
        }
    }
    if (!initialized)
        throw DegenerateWeights("chain initialization failed after " +
                                std::to_string(settings.max_init_retries) + " retries");

    double log_prior_cur = model.log_prior(current.theta);
    sink(0, current, true);

    ChainSummary summary;
    summary.iterations = settings.iterations;
    for (std::size_t i = 1; i <= settings.iterations; ++i) {
        RngStream prop_rng(
            StreamKey{run.seed, stream_purpose::kProposal, lvl, run.chain, i, 0, 0});
        const auto theta_new = propose(current.theta, settings.proposal, prop_rng);
        const double log_prior_new = model.log_prior(theta_new);

        bool accept = false;
        pf::FilterResult res;
        if (std::isfinite(log_prior_new)) {
            // retries would shift the stream; iteration filters use iter = i + max_init_retries
            // to stay disjoint from initialization attempts.
            res = filter(model, theta_new, settings.level, settings.n_particles, y,
                         pf::FilterRunId{run.seed, lvl, run.chain, settings.max_init_retries + i},
                         settings.filter, ledger, nullptr, nullptr);
            double corr = 0.0;
            for (std::size_t j = 0; j < theta_new.size(); ++j)
                corr += std::log(theta_new[j] / current.theta[j]);
            const double log_alpha = accept_log_ratio(res.logc.log_value, log_prior_new,
                                                      current.log_c, log_prior_cur, corr);
            RngStream acc_rng(
                StreamKey{run.seed, stream_purpose::kAccept, lvl, run.chain, i, 0, 0});
            accept = std::log(acc_rng.uniform()) < log_alpha;
        }

        if (accept) {
            current.theta = theta_new;
            current.noise = res.trajectory;
            current.log_c = res.logc.log_value;
            current.accepted = true;
            log_prior_cur = log_prior_new;
            ++summary.accept_count;
            sink(i, current, true);
        } else {
            current.accepted = false;
            sink(i, current, false);
        }
    }
    return summary;
}

Chain collect(const sde::ModelSpec& model, const ChainSettings& settings,
              const std::vector<double>& y, const ChainRunId& run,
              ChainSummary (*stream)(const sde::ModelSpec&, const ChainSettings&,
                                     const std::vector<double>&, const ChainRunId&,
                                     const RecordSink&, CostLedger*)) {
    Chain chain;
    chain.level = settings.level;
    chain.n_particles = settings.n_particles;
    chain.span = y.size();
    chain.records.reserve(settings.iterations + 1);
    auto sink = [&chain](std::size_t, const ChainRecord& rec, bool) {
        chain.records.push_back(rec);
    };
    const auto summary = stream(model, settings, y, run, sink, &chain.ledger);
    chain.accept_count = summary.accept_count;
    return chain;
}

}  // namespace

ChainSummary pmmh_single_stream(const sde::ModelSpec& model, const ChainSettings& settings,
                                const std::vector<double>& y, const ChainRunId& run,
                                const RecordSink& sink, CostLedger* ledger) {
    return run_chain(model, settings, y, run, sink, ledger, &pf::pf_single);
}

ChainSummary pmmh_coupled_stream(const sde::ModelSpec& model, const ChainSettings& settings,
                                 const std::vector<double>& y, const ChainRunId& run,
                                 const RecordSink& sink, CostLedger* ledger) {
    return run_chain(model, settings, y, run, sink, ledger, &pf::pf_coupled);
}

Chain pmmh_single(const sde::ModelSpec& model, const ChainSettings& settings,
                  const std::vector<double>& y, const ChainRunId& run) {
    return collect(model, settings, y, run, &pmmh_single_stream);
}

Chain pmmh_coupled(const sde::ModelSpec& model, const ChainSettings& settings,
                   const std::vector<double>& y, const ChainRunId& run) {
    return collect(model, settings, y, run, &pmmh_coupled_stream);
}

}  // namespace pofbm::pmcmc
