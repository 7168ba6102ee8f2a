#include "oracles.hpp"

#include <cmath>
#include <stdexcept>

namespace oracles {

double fgn_gamma(double h, double lag) {
    const double k = std::abs(lag);
    const double e = 2.0 * h;
    if (k == 0.0) return 1.0;
    return 0.5 * (std::pow(k + 1.0, e) - 2.0 * std::pow(k, e) + std::pow(k - 1.0, e));
}

double fbm_cov(double h, double s, double t) {
    return 0.5 * (std::pow(s, 2.0 * h) + std::pow(t, 2.0 * h) -
                  std::pow(std::abs(t - s), 2.0 * h));
}

double kalman_ou_loglik(double theta, double sigma, double tau2, double x0, int level,
                        const std::vector<double>& y) {
    const double delta = std::ldexp(1.0, -level);
    const std::size_t m = static_cast<std::size_t>(1) << level;
    const double step = 1.0 - theta * delta;
    double phi = 1.0, q = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
        q = step * step * q + sigma * sigma * delta;
        phi *= step;
    }
    double mean = x0, var = 0.0, loglik = 0.0;
    for (double obs : y) {
        const double pm = phi * mean;
        const double pv = phi * phi * var + q;
        const double s = pv + tau2;
        const double d = obs - pm;
        loglik += -0.5 * (std::log(2.0 * M_PI * s) + d * d / s);
        const double gain = pv / s;
        mean = pm + gain * d;
        var = (1.0 - gain) * pv;
    }
    return loglik;
}

double ou_pseudo_unit_variance(double theta, double sigma, double h, int level) {
    const double delta = std::ldexp(1.0, -level);
    const std::size_t m = static_cast<std::size_t>(1) << level;
    const double step = 1.0 - theta * delta;
    std::vector<double> c(m);
    for (std::size_t j = 0; j < m; ++j) c[j] = std::pow(step, static_cast<double>(m - 1 - j));
    const double scale = std::pow(delta, 2.0 * h);
    double q = 0.0;
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j)
            q += c[i] * c[j] * scale * fgn_gamma(h, static_cast<double>(i) - static_cast<double>(j));
    return sigma * sigma * q;
}

namespace {
double log_bivariate_normal(double y1, double y2, double m1, double m2, double v11, double v12,
                            double v22) {
    const double det = v11 * v22 - v12 * v12;
    if (det <= 0.0) throw std::runtime_error("toy oracle: singular covariance");
    const double d1 = y1 - m1, d2 = y2 - m2;
    const double quad = (v22 * d1 * d1 - 2.0 * v12 * d1 * d2 + v11 * d2 * d2) / det;
    return -std::log(2.0 * M_PI) - 0.5 * std::log(det) - 0.5 * quad;
}

double log_gamma_pdf(double x, double shape, double scale) {
    return (shape - 1.0) * std::log(x) - x / scale - std::lgamma(shape) -
           shape * std::log(scale);
}
}  // namespace

double toy_posterior_mean_theta(double y1, double y2, double h, double tau2, double x0, int level,
                                const ToyPrior& theta_prior, const ToyPrior& sigma_prior,
                                std::size_t theta_grid, std::size_t u_grid, double theta_max,
                                double u_max) {
    const double dt = theta_max / static_cast<double>(theta_grid);
    const double du = u_max / static_cast<double>(u_grid);
    const double delta = std::ldexp(1.0, -level);
    const std::size_t m = static_cast<std::size_t>(1) << level;

    long double num = 0.0L, den = 0.0L;
    for (std::size_t i = 0; i < theta_grid; ++i) {
        const double theta = (static_cast<double>(i) + 0.5) * dt;
        const double step = 1.0 - theta * delta;
        double phi = 1.0;
        for (std::size_t k = 0; k < m; ++k) phi *= step;
        const double q_unit = ou_pseudo_unit_variance(theta, 1.0, h, level);
        for (std::size_t j = 0; j < u_grid; ++j) {
            const double u = (static_cast<double>(j) + 0.5) * du;
            const double sigma = u * u;
            const double q = sigma * sigma * q_unit;
            const double m1 = phi * x0;
            const double m2 = phi * m1;
            // x1 = m1 + w1, x2 = phi x1 + w2, y_t = x_t + eps_t
            const double v11 = q + tau2;
            const double v12 = phi * q;
            const double v22 = phi * phi * q + q + tau2;
            const double loglik = log_bivariate_normal(y1, y2, m1, m2, v11, v12, v22);
            const double logprior = log_gamma_pdf(theta, theta_prior.shape, theta_prior.scale) +
                                    log_gamma_pdf(sigma, sigma_prior.shape, sigma_prior.scale) +
                                    std::log(2.0 * u);
            const long double w = std::exp(static_cast<long double>(loglik + logprior));
            num += theta * w;
            den += w;
        }
    }
    return static_cast<double>(num / den);
}

double ou_expected_sample_variance(double theta, double sigma, double h, double tau2, double x0,
                                   int level, std::size_t span) {
    const double delta = std::ldexp(1.0, -level);
    const std::size_t m = static_cast<std::size_t>(1) << level;
    const double step = 1.0 - theta * delta;
    std::vector<double> c(m);
    for (std::size_t j = 0; j < m; ++j) c[j] = std::pow(step, static_cast<double>(m - 1 - j));
    double phi = std::pow(step, static_cast<double>(m));
    const double scale = sigma * sigma * std::pow(delta, 2.0 * h);

    // W(d) = Cov(w_t, w_{t+d}) for the unit-time innovations
    std::vector<double> w_cov(span, 0.0);
    for (std::size_t d = 0; d < span; ++d) {
        double s = 0.0;
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < m; ++j)
                s += c[i] * c[j] *
                     fgn_gamma(h, static_cast<double>(d * m) + static_cast<double>(j) -
                                      static_cast<double>(i));
        w_cov[d] = scale * s;
    }

    // X_t = phi^t x0 + sum_{u<=t} phi^{t-u} w_u
    std::vector<double> phi_pow(span + 1, 1.0);
    for (std::size_t t = 1; t <= span; ++t) phi_pow[t] = phi_pow[t - 1] * phi;
    std::vector<std::vector<double>> cov(span, std::vector<double>(span, 0.0));
    for (std::size_t s = 1; s <= span; ++s)
        for (std::size_t t = s; t <= span; ++t) {
            double acc = 0.0;
            for (std::size_t u = 1; u <= s; ++u)
                for (std::size_t v = 1; v <= t; ++v)
                    acc += phi_pow[s - u] * phi_pow[t - v] *
                           w_cov[static_cast<std::size_t>(
                               std::abs(static_cast<long long>(u) - static_cast<long long>(v)))];
            cov[s - 1][t - 1] = acc;
            cov[t - 1][s - 1] = acc;
        }

    std::vector<double> mean(span);
    for (std::size_t t = 1; t <= span; ++t) mean[t - 1] = phi_pow[t] * x0;

    // E[s^2] = (1/(T-1)) (sum E y_t^2 - T E ybar^2)
    const double n = static_cast<double>(span);
    double sum_sq = 0.0;
    for (std::size_t t = 0; t < span; ++t) sum_sq += cov[t][t] + tau2 + mean[t] * mean[t];
    double var_sum = 0.0, mean_sum = 0.0;
    for (std::size_t s = 0; s < span; ++s) {
        mean_sum += mean[s];
        for (std::size_t t = 0; t < span; ++t) var_sum += cov[s][t];
    }
    var_sum += n * tau2;
    const double e_bar_sq = (var_sum + mean_sum * mean_sum) / (n * n);
    return (sum_sq - n * e_bar_sq) / (n - 1.0);
}

double mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double sample_variance(const std::vector<double>& v) {
    const double m = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size() - 1);
}

double mc_se(const std::vector<double>& v) {
    return std::sqrt(sample_variance(v) / static_cast<double>(v.size()));
}

double batch_means_se(const std::vector<double>& v, std::size_t n_batches) {
    if (v.size() < 2 * n_batches) n_batches = std::max<std::size_t>(2, v.size() / 2);
    const std::size_t len = v.size() / n_batches;
    std::vector<double> batches;
    for (std::size_t b = 0; b < n_batches; ++b) {
        double s = 0.0;
        for (std::size_t i = b * len; i < (b + 1) * len; ++i) s += v[i];
        batches.push_back(s / static_cast<double>(len));
    }
    return std::sqrt(sample_variance(batches) / static_cast<double>(batches.size()));
}

}  // namespace oracles
