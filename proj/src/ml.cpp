#include "pofbm/ml.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace pofbm::ml {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_record(const pf::TrajectoryDraw& noise, const std::vector<double>& y,
                  const fgn::FullPathMap& map) {
    if (noise.level != map.level)
        throw DimensionMismatch("record level " + std::to_string(noise.level) +
                                " does not match map level " + std::to_string(map.level));
    if (noise.blocks.size() != y.size() || noise.blocks.size() != map.span)
        throw DimensionMismatch("record span does not match observations/map");
}

double sum_log_obs(const sde::ModelSpec& model, const sde::ParamVector& theta,
                   const std::vector<double>& y, const std::vector<double>& x) {
    double s = 0.0;
    for (std::size_t t = 0; t < y.size(); ++t) s += model.log_obs(theta, y[t], x[t]);
    return s;
}

}  // namespace

Level0Weight weight_j0_full(const sde::ModelSpec& model, const sde::ParamVector& theta,
                            const pf::TrajectoryDraw& noise, const std::vector<double>& y,
                            const fgn::FullPathMap& map, CostLedger* ledger) {
    check_record(noise, y, map);
    Level0Weight out;
    try {
        const double x0 = model.initial_state(theta);
        const auto pseudo = fgn::pseudo_path(map.block_emb, noise.blocks, map.level, ledger);
        sde::unit_skeleton(model, theta, x0, pseudo, out.x_pseudo, ledger);
        const auto truth = fgn::full_path(map, noise.blocks, ledger);
        sde::unit_skeleton(model, theta, x0, truth, out.x_true, ledger);
        out.log_j0 = sum_log_obs(model, theta, y, out.x_true) -
                     sum_log_obs(model, theta, y, out.x_pseudo);
    } catch (const NonFiniteState& e) {
        throw NonFiniteWeight(e.what());
    }
    if (!std::isfinite(out.log_j0)) throw NonFiniteWeight("log J0 is not finite");
    return out;
}

CorrectionWeight weight_J0(const sde::ModelSpec& model, const sde::ParamVector& theta,
                           const pf::TrajectoryDraw& noise, const std::vector<double>& y,
                           const fgn::FullPathMap& map, CostLedger* ledger) {
    return CorrectionWeight{weight_j0_full(model, theta, noise, y, map, ledger).log_j0};
}

CoupledWeights weight_jl_full(const sde::ModelSpec& model, const sde::ParamVector& theta,
                              const pf::TrajectoryDraw& noise, const std::vector<double>& y,
                              const fgn::FullPathMap& map, CostLedger* ledger) {
    check_record(noise, y, map);
    if (map.level < 1) throw Error("coupled weights need level >= 1");
    CoupledWeights out;
    try {
        const double x0 = model.initial_state(theta);
        const auto pseudo_fine = fgn::pseudo_path(map.block_emb, noise.blocks, map.level, ledger);
        const auto pseudo_coarse = fgn::coarsen(pseudo_fine);
        const auto true_fine = fgn::full_path(map, noise.blocks, ledger);
        const auto true_coarse = fgn::coarsen(true_fine);

        std::vector<double> x_pf, x_pc;
        sde::unit_skeleton(model, theta, x0, pseudo_fine, x_pf, ledger);
        sde::unit_skeleton(model, theta, x0, pseudo_coarse, x_pc, ledger);
        sde::unit_skeleton(model, theta, x0, true_fine, out.x_true_fine, ledger);
        sde::unit_skeleton(model, theta, x0, true_coarse, out.x_true_coarse, ledger);

        out.log_denominator.resize(y.size());
        double denom = 0.0;
        for (std::size_t t = 0; t < y.size(); ++t) {
            const double lg = std::max(model.log_obs(theta, y[t], x_pf[t]),
                                       model.log_obs(theta, y[t], x_pc[t]));
            out.log_denominator[t] = lg;
            denom += lg;
        }
        out.log_j_fine = sum_log_obs(model, theta, y, out.x_true_fine) - denom;
        out.log_j_coarse = sum_log_obs(model, theta, y, out.x_true_coarse) - denom;
    } catch (const NonFiniteState& e) {
        throw NonFiniteWeight(e.what());
    }
    if (!std::isfinite(out.log_j_fine) || !std::isfinite(out.log_j_coarse))
        throw NonFiniteWeight("coupled log J is not finite");
    return out;
}

CorrectionWeight weight_Jl(const sde::ModelSpec& model, const sde::ParamVector& theta,
                           const pf::TrajectoryDraw& noise, const std::vector<double>& y,
                           const fgn::FullPathMap& map, Branch which, CostLedger* ledger) {
    const auto w = weight_jl_full(model, theta, noise, y, map, ledger);
    return CorrectionWeight{which == Branch::fine ? w.log_j_fine : w.log_j_coarse};
}

double self_normalized(const std::vector<double>& phi, const std::vector<double>& log_j) {
    if (phi.size() != log_j.size() || phi.empty())
        throw DimensionMismatch("self_normalized: mismatched or empty inputs");
    SelfNormAccumulator acc(1);
    for (std::size_t i = 0; i < phi.size(); ++i) acc.add(log_j[i], {phi[i]});
    return acc.estimate(0);
}

SelfNormAccumulator::SelfNormAccumulator(std::size_t n_phi) : num_(n_phi, 0.0) {}

void SelfNormAccumulator::add(double log_j, const std::vector<double>& phi_values) {
    if (phi_values.size() != num_.size())
        throw DimensionMismatch("accumulator arity mismatch");
    ++count_;
    if (std::isnan(log_j)) throw NonFiniteWeight("log J is NaN");
    if (log_j == kNegInf) return;  // zero weight contributes nothing
    if (!any_ || log_j > max_log_) {
        const double rescale = any_ ? std::exp(max_log_ - log_j) : 0.0;
        for (auto& v : num_) v *= rescale;
        den_ *= rescale;
        den_sq_ *= rescale * rescale;
        max_log_ = log_j;
        any_ = true;
    }
    const double w = std::exp(log_j - max_log_);
    for (std::size_t k = 0; k < num_.size(); ++k) num_[k] += w * phi_values[k];
    den_ += w;
    den_sq_ += w * w;
}

double SelfNormAccumulator::estimate(std::size_t which) const {
    if (!any_ || den_ <= 0.0)
        throw AllWeightsDegenerate("no finite correction weights accumulated");
    return num_[which] / den_;
}

double SelfNormAccumulator::ess() const {
    if (!any_ || den_sq_ <= 0.0) return 0.0;
    return den_ * den_ / den_sq_;
}

Allocation allocate(double epsilon, double alpha, double beta, double gamma, int l_min, int l_cap,
                    double base_m, std::size_t base_n) {
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw InvalidRates("epsilon must be in (0,1)");
    if (!(alpha > 0.0) || !(beta > 0.0)) throw InvalidRates("alpha and beta must be positive");
    if (!(gamma >= 1.0)) throw InvalidRates("gamma must be >= 1");
    if (l_min < 0 || l_cap < l_min) throw InvalidRates("need 0 <= l_min <= l_cap");
    if (!(base_m > 0.0) || base_n == 0) throw InvalidRates("base M and base N must be positive");

    // smallest L with 2^{-L alpha} <= epsilon
    int top = static_cast<int>(std::ceil(std::log2(1.0 / epsilon) / alpha - 1e-12));
    top = std::max(top, l_min);
    top = std::min(top, l_cap);

    Allocation alloc;
    alloc.epsilon = epsilon;
    alloc.l_min = l_min;
    alloc.top_level = top;

    double sum = 0.0;
    for (int k = l_min; k <= top; ++k)
        sum += std::pow(std::ldexp(1.0, -k), 0.5 * (beta - gamma));
    const double eps2 = 1.0 / (epsilon * epsilon);
    for (int l = l_min; l <= top; ++l) {
        const double dl = std::ldexp(1.0, -l);
        const double raw = base_m * eps2 * std::pow(dl, 0.5 * (beta + gamma)) * sum;
        alloc.iterations.push_back(static_cast<std::size_t>(std::max(1.0, std::ceil(raw - 1e-9))));
        alloc.particles.push_back(base_n);
    }
    return alloc;
}

MultilevelEstimate telescope(const LevelEstimate& base,
                             const std::vector<LevelEstimate>& increments) {
    MultilevelEstimate out;
    out.totals = base.pi_fine;
    out.levels.push_back(base);
    out.cost.merge(base.cost);
    int expected = base.level + 1;
    for (const auto& inc : increments) {
        if (inc.level != expected)
            throw MissingLevel("expected level " + std::to_string(expected) + ", got " +
                               std::to_string(inc.level));
        if (inc.pi_fine.size() != out.totals.size() || inc.pi_coarse.size() != out.totals.size())
            throw DimensionMismatch("level estimate arity mismatch");
        for (std::size_t k = 0; k < out.totals.size(); ++k)
            out.totals[k] += inc.pi_fine[k] - inc.pi_coarse[k];
        out.levels.push_back(inc);
        out.cost.merge(inc.cost);
        ++expected;
    }
    return out;
}

}  // namespace pofbm::ml
