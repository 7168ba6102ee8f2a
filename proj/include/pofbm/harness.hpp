#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "pofbm/config.hpp"
#include "pofbm/cost.hpp"
#include "pofbm/ml.hpp"
#include "pofbm/pmcmc.hpp"
#include "pofbm/sde.hpp"

namespace pofbm::harness {

using config::ExperimentConfig;

std::vector<double> ingest_csv(const std::string& path);

// Runs fn(0..n_tasks-1) across a fixed-size pool. Tasks own their RNG
// streams, so results do not depend on the worker count.
void parallel_for(std::size_t n_tasks, std::size_t workers,
                  const std::function<void(std::size_t)>& fn);

struct ParamSummary {
    std::string name;
    double uncorrected_mean = 0.0;
    double corrected_mean = 0.0;
};

struct SingleLevelResult {
    int level = 0;
    std::size_t iterations = 0;
    std::size_t accept_count = 0;
    std::size_t records_used = 0;
    double j_ess = 0.0;
    std::vector<ParamSummary> params;
    std::vector<double> state_mean_uncorrected;
    std::vector<double> state_mean_corrected;
    CostLedger ledger;
    // populated when cfg.keep_trace is set (batch-means standard errors)
    std::vector<double> trace_log_j0;
    std::vector<std::vector<double>> trace_params;
};

// out_dir empty: compute only, write nothing.
SingleLevelResult run_single_level(const ExperimentConfig& cfg, const std::vector<double>& y,
                                   std::uint64_t chain_id, const std::string& out_dir);

struct MultilevelResult {
    ml::Allocation allocation;
    ml::MultilevelEstimate estimate;
    std::vector<std::string> phi_names;
};

MultilevelResult run_multilevel(const ExperimentConfig& cfg, const std::vector<double>& y,
                                std::uint64_t chain_base, const std::string& out_dir);

struct RateFit {
    double slope = 0.0;
    double intercept = 0.0;
    double residual = 0.0;  // RMS of fit residuals
    std::size_t points = 0;
};

// Least-squares fit of log cost on log MSE; needs >= 3 points.
RateFit rate_fit(const std::vector<double>& mse, const std::vector<double>& cost);

struct StudyPoint {
    std::string method;  // "pmcmc" | "mlpmcmc"
    std::string param;
    int level = 0;
    double epsilon = 0.0;
    double mse = 0.0;
    double cost = 0.0;
    double mean_estimate = 0.0;
};

struct StudyResult {
    std::vector<StudyPoint> points;
    std::vector<std::string> params;
    std::vector<double> reference;     // per param
    std::vector<double> reference_se;  // batch-means standard error
    int reference_level = 0;
    std::size_t reference_iterations = 0;
    std::vector<std::pair<std::string, RateFit>> fits;  // key "method/param"
};

StudyResult mse_study(const ExperimentConfig& cfg, const std::vector<double>& y,
                      const std::string& out_dir);

void emit_plots(const StudyResult& study, const std::string& out_dir);

// CLI subcommand entry points; return process exit codes.
int cmd_synth(const ExperimentConfig& cfg);
int cmd_fgn_check(const ExperimentConfig& cfg);
int cmd_pmcmc(const ExperimentConfig& cfg);
int cmd_mlpmcmc(const ExperimentConfig& cfg);
int cmd_study(const ExperimentConfig& cfg);
int cmd_rates(const ExperimentConfig& cfg);
int cmd_plots(const ExperimentConfig& cfg);

// Noise sidecar (binary, little-endian): magic "POFBMZ01", u32 level, u64 T,
// u64 block_len, u64 num_records, then records * T * block_len doubles in
// time order.
class SidecarWriter {
public:
    SidecarWriter(const std::string& path, int level, std::size_t span, std::size_t block_len);
    ~SidecarWriter();
    void append(const pf::TrajectoryDraw& draw);

private:
    std::FILE* f_ = nullptr;
    int level_;
    std::size_t span_;
    std::size_t block_len_;
    std::uint64_t count_ = 0;
};

struct SidecarData {
    int level = 0;
    std::size_t span = 0;
    std::size_t block_len = 0;
    std::vector<pf::TrajectoryDraw> records;
};

SidecarData read_sidecar(const std::string& path);

}  // namespace pofbm::harness
