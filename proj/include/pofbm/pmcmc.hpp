#pragma once

#include <functional>
#include <vector>

#include "pofbm/pf.hpp"
#include "pofbm/sde.hpp"

namespace pofbm::pmcmc {

struct ProposalConfig {
    std::vector<double> log_steps;  // per-parameter RW std deviations on log scale
};

struct ChainRecord {
    sde::ParamVector theta;
    pf::TrajectoryDraw noise;
    double log_c = 0.0;
    bool accepted = false;  // record 0 carries false
};

struct Chain {
    int level = 0;
    std::size_t n_particles = 0;
    std::size_t span = 0;
    std::vector<ChainRecord> records;  // 0..M
    std::size_t accept_count = 0;
    CostLedger ledger;
};

struct ChainSettings {
    int level = 0;
    std::size_t n_particles = 0;
    std::size_t iterations = 0;  // M
    ProposalConfig proposal;
    pf::FilterOptions filter;
    std::size_t max_init_retries = 100;
};

struct ChainRunId {
    std::uint64_t seed = 0;
    std::uint64_t chain = 0;
};

// theta'_j = theta_j * exp(s_j xi_j); symmetric in log space.
sde::ParamVector propose(const sde::ParamVector& theta, const ProposalConfig& cfg, RngStream& rng);

// min(0, (log_c' + log_prior') - (log_c + log_prior) + correction); the
// correction is the log-scale change-of-variables term sum_j log(theta'_j/theta_j).
double accept_log_ratio(double log_c_new, double log_prior_new, double log_c_old,
                        double log_prior_old, double log_jacobian_correction);

// Streaming record consumer: called once per iteration 0..M. is_new is false
// exactly when the iteration rejected and the record duplicates the previous
// one, so per-record post-processing can be cached.
using RecordSink = std::function<void(std::size_t iter, const ChainRecord& rec, bool is_new)>;

struct ChainSummary {
    std::size_t accept_count = 0;
    std::size_t iterations = 0;
};

ChainSummary pmmh_single_stream(const sde::ModelSpec& model, const ChainSettings& settings,
                                const std::vector<double>& y, const ChainRunId& run,
                                const RecordSink& sink, CostLedger* ledger = nullptr);

ChainSummary pmmh_coupled_stream(const sde::ModelSpec& model, const ChainSettings& settings,
                                 const std::vector<double>& y, const ChainRunId& run,
                                 const RecordSink& sink, CostLedger* ledger = nullptr);

Chain pmmh_single(const sde::ModelSpec& model, const ChainSettings& settings,
                  const std::vector<double>& y, const ChainRunId& run);

Chain pmmh_coupled(const sde::ModelSpec& model, const ChainSettings& settings,
                   const std::vector<double>& y, const ChainRunId& run);

}  // namespace pofbm::pmcmc
