#pragma once

#include <cstdint>
#include <vector>

#include "pofbm/cost.hpp"
#include "pofbm/fgn.hpp"
#include "pofbm/pf.hpp"
#include "pofbm/sde.hpp"

namespace pofbm::ml {

struct CorrectionWeight {
    double log_j = 0.0;
};

enum class Branch { fine, coarse };

// log J0 = sum_t [log g(y_t | x_t^true) - log g(y_t | x_t^pseudo)], both
// trajectories rebuilt from the stored noise blocks of a level-l_min chain
// record. x_true is returned for test-function evaluation.
struct Level0Weight {
    double log_j0 = 0.0;
    std::vector<double> x_true;
    std::vector<double> x_pseudo;
};

Level0Weight weight_j0_full(const sde::ModelSpec& model, const sde::ParamVector& theta,
                            const pf::TrajectoryDraw& noise, const std::vector<double>& y,
                            const fgn::FullPathMap& map, CostLedger* ledger = nullptr);

CorrectionWeight weight_J0(const sde::ModelSpec& model, const sde::ParamVector& theta,
                           const pf::TrajectoryDraw& noise, const std::vector<double>& y,
                           const fgn::FullPathMap& map, CostLedger* ledger = nullptr);

// Fine and coarse correction weights of a coupled level-l record. They share
// the per-step max denominator; the numerators use the true path at level l
// and its coarsening at level l-1.
struct CoupledWeights {
    double log_j_fine = 0.0;
    double log_j_coarse = 0.0;
    std::vector<double> x_true_fine;
    std::vector<double> x_true_coarse;
    std::vector<double> log_denominator;  // per-t max terms
};

CoupledWeights weight_jl_full(const sde::ModelSpec& model, const sde::ParamVector& theta,
                              const pf::TrajectoryDraw& noise, const std::vector<double>& y,
                              const fgn::FullPathMap& map, CostLedger* ledger = nullptr);

CorrectionWeight weight_Jl(const sde::ModelSpec& model, const sde::ParamVector& theta,
                           const pf::TrajectoryDraw& noise, const std::vector<double>& y,
                           const fgn::FullPathMap& map, Branch which,
                           CostLedger* ledger = nullptr);

// sum_i phi_i J_i / sum_i J_i with the weights carried in log form.
double self_normalized(const std::vector<double>& phi, const std::vector<double>& log_j);

// Streaming version handling several test functions against one weight
// stream; rescales on-the-fly so only log weights are ever exponentiated
// relative to the running maximum.
class SelfNormAccumulator {
public:
    explicit SelfNormAccumulator(std::size_t n_phi);
    void add(double log_j, const std::vector<double>& phi_values);
    double estimate(std::size_t which) const;
    double ess() const;
    std::size_t count() const { return count_; }

private:
    std::vector<double> num_;
    double den_ = 0.0;
    double den_sq_ = 0.0;
    double max_log_ = 0.0;
    bool any_ = false;
    std::size_t count_ = 0;
};

struct Allocation {
    double epsilon = 0.0;
    int l_min = 0;
    int top_level = 0;                    // L
    std::vector<std::size_t> iterations;  // M_l for l = l_min..L
    std::vector<std::size_t> particles;   // N_l
    std::size_t m_at(int level) const { return iterations[static_cast<std::size_t>(level - l_min)]; }
    std::size_t n_at(int level) const { return particles[static_cast<std::size_t>(level - l_min)]; }
};

// L = smallest level with Delta_L^alpha <= epsilon (capped at l_cap);
// M_l = ceil(base_m * eps^-2 * Delta_l^{(beta+gamma)/2} * sum_k Delta_k^{(beta-gamma)/2}).
Allocation allocate(double epsilon, double alpha, double beta, double gamma, int l_min, int l_cap,
                    double base_m, std::size_t base_n);

struct LevelEstimate {
    int level = 0;
    std::vector<double> pi_fine;    // one entry per test function
    std::vector<double> pi_coarse;  // empty for the base level
    double ess_fine = 0.0;
    double ess_coarse = 0.0;
    std::size_t records = 0;
    CostLedger cost;
};

struct MultilevelEstimate {
    std::vector<LevelEstimate> levels;
    std::vector<double> totals;  // per test function
    CostLedger cost;
};

MultilevelEstimate telescope(const LevelEstimate& base,
                             const std::vector<LevelEstimate>& increments);

}  // namespace pofbm::ml
