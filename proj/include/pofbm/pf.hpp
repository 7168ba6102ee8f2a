#pragma once

#include <cstdint>
#include <vector>

#include "pofbm/cost.hpp"
#include "pofbm/errors.hpp"
#include "pofbm/fgn.hpp"
#include "pofbm/rng.hpp"
#include "pofbm/sde.hpp"

namespace pofbm::pf {

struct NormConstEstimate {
    double log_value = 0.0;
};

struct TrajectoryDraw {
    int level = 0;
    std::vector<fgn::NoiseBlock> blocks;  // z_{1:2 delta^{-1}, 1:T} of the sampled ancestry
};

// Per-particle noise-block pool plus ancestry indices; enough to trace any
// surviving trajectory after the pass.
struct ParticleSystem {
    std::size_t n_particles = 0;
    std::size_t span = 0;
    int level = 0;
    std::vector<std::vector<double>> pool;     // pool[t]: n_particles * 2m, row-major
    std::vector<std::vector<int>> ancestry;    // ancestry[t][i]: parent slot at t-1
    std::vector<double> final_weights;         // normalized
};

struct FilterDiag {
    std::vector<double> ess;                     // per time step
    std::vector<double> logw_spread;             // max - min finite log-weight
    bool capture_particles = false;
    std::vector<std::vector<double>> log_g_fine;   // per step, per particle
    std::vector<std::vector<double>> log_g_coarse; // coupled filter only
};

// Identifies the RNG streams of one filter pass.
struct FilterRunId {
    std::uint64_t seed = 0;
    std::uint64_t level = 0;
    std::uint64_t chain = 0;
    std::uint64_t iter = 0;
};

struct FilterOptions {
    double resample_threshold = 1.0;  // resample when ESS < threshold * N; 1.0 = every step
};

struct FilterResult {
    NormConstEstimate logc;
    TrajectoryDraw trajectory;
};

// Categorical draws by inverse CDF; indices are 0-based.
std::vector<std::size_t> resample_multinomial(const std::vector<double>& weights, RngStream& rng);

std::size_t sample_index(const std::vector<double>& normalized_weights, RngStream& rng);

TrajectoryDraw trace_trajectory(const ParticleSystem& system, RngStream& rng);

FilterResult pf_single(const sde::ModelSpec& model, const sde::ParamVector& theta, int level,
                       std::size_t n_particles, const std::vector<double>& y,
                       const FilterRunId& run, const FilterOptions& opts = {},
                       CostLedger* ledger = nullptr, FilterDiag* diag = nullptr,
                       ParticleSystem* keep_system = nullptr);

FilterResult pf_coupled(const sde::ModelSpec& model, const sde::ParamVector& theta, int level,
                        std::size_t n_particles, const std::vector<double>& y,
                        const FilterRunId& run, const FilterOptions& opts = {},
                        CostLedger* ledger = nullptr, FilterDiag* diag = nullptr,
                        ParticleSystem* keep_system = nullptr);

}  // namespace pofbm::pf
