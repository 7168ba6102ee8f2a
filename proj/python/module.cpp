#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "pofbm/fgn.hpp"
#include "pofbm/harness.hpp"
#include "pofbm/ml.hpp"
#include "pofbm/pf.hpp"
#include "pofbm/pmcmc.hpp"
#include "pofbm/sde.hpp"

namespace py = pybind11;
using namespace pofbm;

namespace {

std::vector<fgn::NoiseBlock> to_blocks(const std::vector<std::vector<double>>& z) {
    std::vector<fgn::NoiseBlock> blocks(z.size());
    for (std::size_t t = 0; t < z.size(); ++t) {
        blocks[t].t = t + 1;
        blocks[t].z = z[t];
    }
    return blocks;
}

sde::ModelSpec make_ou(double h, double tau2, double x0, double theta_shape, double theta_scale,
                       double sigma_shape, double sigma_scale) {
    sde::ModelConfig cfg;
    cfg.hurst = h;
    cfg.tau2 = tau2;
    cfg.x0 = x0;
    cfg.theta_prior = {theta_shape, theta_scale};
    cfg.sigma_prior = {sigma_shape, sigma_scale};
    return sde::make_ou_model(cfg);
}

}  // namespace

PYBIND11_MODULE(_pofbm, m) {
    m.doc() = "Particle MCMC for partially observed SDEs driven by fractional Brownian motion";

    py::register_exception<Error>(m, "PofbmError");

    py::class_<sde::ModelSpec>(m, "Model")
        .def_property_readonly("name", [](const sde::ModelSpec& s) { return s.name; })
        .def_property_readonly("hurst", [](const sde::ModelSpec& s) { return s.hurst; })
        .def_property_readonly("param_names", [](const sde::ModelSpec& s) {
            std::vector<std::string> names;
            for (const auto& p : s.params) names.push_back(p.name);
            return names;
        });

    m.def("autocov", &fgn::autocov, py::arg("h"), py::arg("lag"),
          "fGN autocovariance at integer lag");

    m.def(
        "embedding_eigenvalues",
        [](double h, std::size_t m_size) { return fgn::build_embedding(h, m_size).eigenvalues; },
        py::arg("h"), py::arg("m"), "circulant spectrum of the length-2m embedding");

    m.def(
        "sample_block",
        [](double h, int level, const std::vector<double>& z) {
            const auto emb = fgn::build_embedding(h, static_cast<std::size_t>(1) << level);
            fgn::NoiseBlock block{1, z};
            return fgn::sample_block(emb, block, level).values;
        },
        py::arg("h"), py::arg("level"), py::arg("z"));

    m.def(
        "pseudo_path",
        [](double h, int level, const std::vector<std::vector<double>>& z) {
            const auto emb = fgn::build_embedding(h, static_cast<std::size_t>(1) << level);
            return fgn::pseudo_path(emb, to_blocks(z), level).values;
        },
        py::arg("h"), py::arg("level"), py::arg("z"));

    m.def(
        "full_path",
        [](double h, int level, const std::vector<std::vector<double>>& z) {
            const auto map = fgn::build_full_path_map(h, level, z.size());
            return fgn::full_path(map, to_blocks(z)).values;
        },
        py::arg("h"), py::arg("level"), py::arg("z"));

    m.def(
        "coarsen",
        [](int level, const std::vector<double>& values) {
            fgn::IncrementPath path;
            path.level = level;
            path.span = 1;
            path.values = values;
            return fgn::coarsen(path).values;
        },
        py::arg("level"), py::arg("values"));

    m.def("make_ou", &make_ou, py::arg("h") = 0.4, py::arg("tau2") = 0.2, py::arg("x0") = 0.0,
          py::arg("theta_shape") = 1.0, py::arg("theta_scale") = 1.0,
          py::arg("sigma_shape") = 0.5, py::arg("sigma_scale") = 1.0);

    m.def(
        "synth",
        [](const sde::ModelSpec& model, const std::vector<double>& theta_true, int level,
           std::size_t span, std::uint64_t seed) {
            sde::ParamVector theta{theta_true};
            const auto data = sde::synth_generate(model, theta, level, span, seed);
            py::dict out;
            out["y"] = data.y;
            out["x"] = data.truth.unit;
            return out;
        },
        py::arg("model"), py::arg("theta_true"), py::arg("level"), py::arg("T"), py::arg("seed"));

    m.def(
        "pf_single",
        [](const sde::ModelSpec& model, const std::vector<double>& theta, int level,
           std::size_t n_particles, const std::vector<double>& y, std::uint64_t seed) {
            sde::ParamVector th{theta};
            const auto res = pf::pf_single(model, th, level, n_particles, y,
                                           pf::FilterRunId{seed, static_cast<std::uint64_t>(level),
                                                           0, 0});
            return res.logc.log_value;
        },
        py::arg("model"), py::arg("theta"), py::arg("level"), py::arg("n_particles"),
        py::arg("y"), py::arg("seed"), "log normalizing-constant estimate");

    m.def(
        "pmmh_single",
        [](const sde::ModelSpec& model, int level, std::size_t n_particles,
           std::size_t iterations, const std::vector<double>& y, std::uint64_t seed,
           const std::vector<double>& steps) {
            pmcmc::ChainSettings settings;
            settings.level = level;
            settings.n_particles = n_particles;
            settings.iterations = iterations;
            settings.proposal.log_steps = steps;
            const auto chain = pmcmc::pmmh_single(model, settings, y, pmcmc::ChainRunId{seed, 0});
            std::vector<std::vector<double>> thetas;
            std::vector<double> log_c;
            for (const auto& rec : chain.records) {
                thetas.push_back(rec.theta.v);
                log_c.push_back(rec.log_c);
            }
            py::dict out;
            out["theta"] = thetas;
            out["log_c"] = log_c;
            out["accept_rate"] =
                iterations ? static_cast<double>(chain.accept_count) / iterations : 0.0;
            return out;
        },
        py::arg("model"), py::arg("level"), py::arg("n_particles"), py::arg("iterations"),
        py::arg("y"), py::arg("seed"), py::arg("steps") = std::vector<double>{0.25, 0.25});

    m.def(
        "allocate",
        [](double epsilon, double alpha, double beta, double gamma, int l_min, int l_cap,
           double base_m, std::size_t base_n) {
            const auto a = ml::allocate(epsilon, alpha, beta, gamma, l_min, l_cap, base_m, base_n);
            py::dict out;
            out["l_min"] = a.l_min;
            out["L"] = a.top_level;
            out["iterations"] = a.iterations;
            out["particles"] = a.particles;
            return out;
        },
        py::arg("epsilon"), py::arg("alpha") = 0.5, py::arg("beta") = 0.5, py::arg("gamma") = 1.0,
        py::arg("l_min") = 3, py::arg("l_cap") = 7, py::arg("base_m") = 1.0,
        py::arg("base_n") = 100);

    m.def("self_normalized", &ml::self_normalized, py::arg("phi"), py::arg("log_j"));

    m.def(
        "rate_fit",
        [](const std::vector<double>& mse, const std::vector<double>& cost) {
            const auto fit = harness::rate_fit(mse, cost);
            py::dict out;
            out["slope"] = fit.slope;
            out["intercept"] = fit.intercept;
            out["residual"] = fit.residual;
            return out;
        },
        py::arg("mse"), py::arg("cost"), "least-squares fit of log cost on log MSE");
}
