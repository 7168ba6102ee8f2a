#include "pofbm/sde.hpp"

#include <cmath>

namespace pofbm::sde {

namespace {
constexpr double kLog2Pi = 1.8378770664093454835606594728112;
}

double GammaPrior::log_pdf(double x) const {
    if (x <= 0.0) return -std::numeric_limits<double>::infinity();
    return (shape - 1.0) * std::log(x) - x / scale - std::lgamma(shape) - shape * std::log(scale);
}

double ModelSpec::log_prior(const ParamVector& theta) const {
    double lp = 0.0;
    for (std::size_t j = 0; j < params.size(); ++j) lp += params[j].prior.log_pdf(theta[j]);
    return lp;
}

ParamVector ModelSpec::sample_prior(RngStream& rng) const {
    ParamVector theta;
    theta.v.reserve(params.size());
    for (const auto& p : params) theta.v.push_back(p.prior.sample(rng));
    return theta;
}

int ModelSpec::param_index(const std::string& pname) const {
    for (std::size_t j = 0; j < params.size(); ++j)
        if (params[j].name == pname) return static_cast<int>(j);
    throw Error("model " + name + " has no parameter named " + pname);
}

double euler_step(const ModelSpec& model, const ParamVector& theta, double x, double db,
                  double delta) {
    const double next = x + model.drift(theta, x) * delta + model.diffusion(theta, x) * db;
    if (!std::isfinite(next))
        throw NonFiniteState("euler_step produced " + std::to_string(next));
    return next;
}

double unit_map(const ModelSpec& model, const ParamVector& theta, double x_prev,
                const double* increments, std::size_t count, double delta, CostLedger* ledger) {
    double x = x_prev;
    for (std::size_t k = 0; k < count; ++k) {
        x = x + model.drift(theta, x) * delta + model.diffusion(theta, x) * increments[k];
    }
    if (!std::isfinite(x)) throw NonFiniteState("unit map produced " + std::to_string(x));
    if (ledger) ledger->add_euler(static_cast<double>(count));
    return x;
}

double unit_map(const ModelSpec& model, const ParamVector& theta, double x_prev,
                const fgn::IncrementPath& increments, CostLedger* ledger) {
    if (increments.span != 1)
        throw DimensionMismatch("unit_map expects a span-1 increment path");
    return unit_map(model, theta, x_prev, increments.values.data(), increments.values.size(),
                    fgn::LevelIndex(increments.level).delta(), ledger);
}

void unit_skeleton(const ModelSpec& model, const ParamVector& theta, double x0,
                   const fgn::IncrementPath& path, std::vector<double>& out, CostLedger* ledger) {
    const std::size_t m = path.values.size() / path.span;
    const double delta = fgn::LevelIndex(path.level).delta();
    out.resize(path.span);
    double x = x0;
    for (std::size_t t = 0; t < path.span; ++t) {
        x = unit_map(model, theta, x, path.values.data() + t * m, m, delta, ledger);
        out[t] = x;
    }
}

LatentTrajectory trajectory_map(const ModelSpec& model, const ParamVector& theta, double x0,
                                const fgn::IncrementPath& path, CostLedger* ledger) {
    LatentTrajectory traj;
    traj.level = path.level;
    traj.grid.resize(path.values.size());
    traj.unit.resize(path.span);
    const std::size_t m = path.values.size() / path.span;
    const double delta = fgn::LevelIndex(path.level).delta();
    double x = x0;
    for (std::size_t k = 0; k < path.values.size(); ++k) {
        x = euler_step(model, theta, x, path.values[k], delta);
        traj.grid[k] = x;
        if ((k + 1) % m == 0) traj.unit[(k + 1) / m - 1] = x;
    }
    if (ledger) ledger->add_euler(static_cast<double>(path.values.size()));
    return traj;
}

ModelSpec lamperti(const ModelSpec& model) {
    ModelSpec out = model;
    if (model.constant_diffusion) {
        out.name = model.name + "-lamperti";
        out.constant_diffusion = true;
        auto base_drift = model.drift;
        auto base_diffusion = model.diffusion;
        auto base_obs = model.log_obs;
        auto base_sample = model.sample_obs;
        auto base_x0 = model.initial_state;
        out.drift = [base_drift, base_diffusion](const ParamVector& th, double u) {
            const double s = base_diffusion(th, 0.0);
            return base_drift(th, s * u) / s;
        };
        out.diffusion = [](const ParamVector&, double) { return 1.0; };
        out.log_obs = [base_obs, base_diffusion](const ParamVector& th, double y, double u) {
            return base_obs(th, y, base_diffusion(th, 0.0) * u);
        };
        if (base_sample)
            out.sample_obs = [base_sample, base_diffusion](const ParamVector& th, double u,
                                                           RngStream& rng) {
                return base_sample(th, base_diffusion(th, 0.0) * u, rng);
            };
        out.initial_state = [base_x0, base_diffusion](const ParamVector& th) {
            return base_x0(th) / base_diffusion(th, 0.0);
        };
        return out;
    }
    if (!model.lamperti_hooks)
        throw UnsupportedDiffusion("model " + model.name +
                                   " has state-dependent diffusion and no registered antiderivative");
    const auto hooks = *model.lamperti_hooks;
    auto base_drift = model.drift;
    auto base_diffusion = model.diffusion;
    auto base_obs = model.log_obs;
    auto base_x0 = model.initial_state;
    out.name = model.name + "-lamperti";
    out.drift = [base_drift, base_diffusion, hooks](const ParamVector& th, double u) {
        const double x = hooks.eta_inv(th, u);
        return base_drift(th, x) / base_diffusion(th, x);
    };
    out.diffusion = [](const ParamVector&, double) { return 1.0; };
    out.log_obs = [base_obs, hooks](const ParamVector& th, double y, double u) {
        return base_obs(th, y, hooks.eta_inv(th, u));
    };
    out.initial_state = [base_x0, hooks](const ParamVector& th) {
        return hooks.eta(th, base_x0(th));
    };
    out.constant_diffusion = true;
    return out;
}

SynthData synth_generate(const ModelSpec& model, const ParamVector& theta_true, int level,
                         std::size_t span, std::uint64_t seed, CostLedger* ledger) {
    const std::size_t m = static_cast<std::size_t>(1) << level;
    std::vector<fgn::NoiseBlock> blocks(span);
    for (std::size_t t = 0; t < span; ++t) {
        RngStream rng(StreamKey{seed, stream_purpose::kSynthNoise, static_cast<std::uint64_t>(level),
                                0, 0, t + 1, 0});
        blocks[t].t = t + 1;
        blocks[t].z.resize(2 * m);
        for (auto& z : blocks[t].z) z = rng.normal();
    }
    const auto map = fgn::build_full_path_map(model.hurst, level, span);
    const auto path = fgn::full_path(map, blocks, ledger);
    SynthData data;
    data.truth = trajectory_map(model, theta_true, model.initial_state(theta_true), path, ledger);
    data.y.resize(span);
    for (std::size_t t = 0; t < span; ++t) {
        RngStream rng(StreamKey{seed, stream_purpose::kSynthObs, static_cast<std::uint64_t>(level),
                                0, 0, t + 1, 0});
        data.y[t] = model.sample_obs(theta_true, data.truth.unit[t], rng);
    }
    return data;
}

namespace {
std::map<std::string, ModelBuilder>& registry() {
    static std::map<std::string, ModelBuilder> reg = {{"ou", make_ou_model}};
    return reg;
}
}  // namespace

void register_model(const std::string& name, ModelBuilder builder) {
    registry()[name] = std::move(builder);
}

ModelSpec make_model(const std::string& name, const ModelConfig& cfg) {
    auto it = registry().find(name);
    if (it == registry().end()) throw ConfigError("unknown model '" + name + "'");
    return it->second(cfg);
}

ModelSpec make_ou_model(const ModelConfig& cfg) {
    ModelSpec model;
    model.name = "ou";
    model.hurst = cfg.hurst;
    model.tau2 = cfg.tau2;
    model.params = {{"theta", cfg.theta_prior}, {"sigma", cfg.sigma_prior}};
    model.drift = [](const ParamVector& th, double x) { return -th[0] * x; };
    model.diffusion = [](const ParamVector& th, double) { return th[1]; };
    const double tau2 = cfg.tau2;
    model.log_obs = [tau2](const ParamVector&, double y, double x) {
        const double d = y - x;
        return -0.5 * (kLog2Pi + std::log(tau2)) - 0.5 * d * d / tau2;
    };
    const double tau = std::sqrt(cfg.tau2);
    model.sample_obs = [tau](const ParamVector&, double x, RngStream& rng) {
        return x + tau * rng.normal();
    };
    const double x0 = cfg.x0;
    model.initial_state = [x0](const ParamVector&) { return x0; };
    model.constant_diffusion = true;
    return model;
}

}  // namespace pofbm::sde
