#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pofbm/cost.hpp"
#include "pofbm/errors.hpp"
#include "pofbm/fgn.hpp"
#include "pofbm/rng.hpp"

namespace pofbm::sde {

struct ParamVector {
    std::vector<double> v;
    double operator[](std::size_t i) const { return v[i]; }
    std::size_t size() const { return v.size(); }
};

struct GammaPrior {
    double shape = 1.0;
    double scale = 1.0;
    double log_pdf(double x) const;
    double sample(RngStream& rng) const { return rng.gamma(shape, scale); }
    double mean() const { return shape * scale; }
};

struct ParamDef {
    std::string name;
    GammaPrior prior;
};

// State maps used when a state-dependent diffusion registers a Lamperti
// substitution: eta is the antiderivative of 1/sigma, eta_inv its inverse.
struct LampertiHooks {
    std::function<double(const ParamVector&, double)> eta;
    std::function<double(const ParamVector&, double)> eta_inv;
};

struct ModelSpec {
    std::string name;
    double hurst = 0.5;
    double tau2 = 0.2;  // observation variance for Gaussian models; reporting only otherwise
    std::vector<ParamDef> params;
    std::function<double(const ParamVector&, double)> drift;
    std::function<double(const ParamVector&, double)> diffusion;
    std::function<double(const ParamVector&, double, double)> log_obs;  // (theta, y, x)
    std::function<double(const ParamVector&, double, RngStream&)> sample_obs;
    std::function<double(const ParamVector&)> initial_state;
    bool constant_diffusion = false;
    std::optional<LampertiHooks> lamperti_hooks;

    double log_prior(const ParamVector& theta) const;
    ParamVector sample_prior(RngStream& rng) const;
    int param_index(const std::string& name) const;
};

struct LatentTrajectory {
    int level = 0;
    std::vector<double> grid;  // x at times delta, 2 delta, ..., T
    std::vector<double> unit;  // x at times 1, ..., T
};

double euler_step(const ModelSpec& model, const ParamVector& theta, double x, double db,
                  double delta);

// Composition of delta^{-1} Euler steps over one unit interval.
double unit_map(const ModelSpec& model, const ParamVector& theta, double x_prev,
                const double* increments, std::size_t count, double delta,
                CostLedger* ledger = nullptr);

double unit_map(const ModelSpec& model, const ParamVector& theta, double x_prev,
                const fgn::IncrementPath& increments, CostLedger* ledger = nullptr);

LatentTrajectory trajectory_map(const ModelSpec& model, const ParamVector& theta, double x0,
                                const fgn::IncrementPath& path, CostLedger* ledger = nullptr);

// Unit-time skeleton only; the fast path for weight computations.
void unit_skeleton(const ModelSpec& model, const ParamVector& theta, double x0,
                   const fgn::IncrementPath& path, std::vector<double>& out,
                   CostLedger* ledger = nullptr);

ModelSpec lamperti(const ModelSpec& model);

struct SynthData {
    std::vector<double> y;
    LatentTrajectory truth;
};

SynthData synth_generate(const ModelSpec& model, const ParamVector& theta_true, int level,
                         std::size_t span, std::uint64_t seed, CostLedger* ledger = nullptr);

// Model registry. "ou" ships built in: dX = -theta X dt + sigma dB^H,
// y_t ~ N(x_t, tau2).
struct ModelConfig {
    double hurst = 0.4;
    double tau2 = 0.2;
    double x0 = 0.0;
    GammaPrior theta_prior{1.0, 1.0};
    GammaPrior sigma_prior{0.5, 1.0};
};

using ModelBuilder = std::function<ModelSpec(const ModelConfig&)>;
void register_model(const std::string& name, ModelBuilder builder);
ModelSpec make_model(const std::string& name, const ModelConfig& cfg);
ModelSpec make_ou_model(const ModelConfig& cfg);

}  // namespace pofbm::sde
