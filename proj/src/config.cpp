#include "pofbm/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

namespace pofbm::config {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

double to_double(const std::string& s, const std::string& what) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ConfigError(what + ": cannot parse '" + s + "' as a number");
    }
}

long long to_int(const std::string& s, const std::string& what) {
    try {
        std::size_t pos = 0;
        const long long v = std::stoll(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ConfigError(what + ": cannot parse '" + s + "' as an integer");
    }
}

// section -> allowed keys; empty set means free-form (none currently)
const std::map<std::string, std::set<std::string>>& schema() {
    static const std::map<std::string, std::set<std::string>> s = {
        {"model", {"name", "theta", "sigma", "x0", "tau2", "h"}},
        {"priors", {"theta_shape", "theta_scale", "sigma_shape", "sigma_scale"}},
        {"data", {"path", "T"}},
        {"synth", {"level", "write_truth"}},
        {"mcmc",
         {"level", "particles", "iterations", "steps", "burn_in_fraction", "resample_threshold",
          "max_init_retries", "write_noise", "diagnostics"}},
        {"ml", {"l_min", "l_cap", "epsilon", "alpha", "beta", "gamma", "base_m", "thin"}},
        {"study",
         {"levels", "repeats", "single_m0", "ml_base_m", "ref_factor", "ref_min_iterations"}},
        {"cost", {"w_euler", "w_fft", "w_resample"}},
        {"fgn_check", {"hs", "ms", "max_lag"}},
        {"run", {"seed", "out", "workers"}},
    };
    return s;
}

}  // namespace

Ini Ini::parse_string(const std::string& text) {
    Ini ini;
    std::stringstream in(text);
    std::string line, section;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find_first_of("#;");
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("line " + std::to_string(lineno) + ": unterminated section");
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty())
                throw ConfigError("line " + std::to_string(lineno) + ": empty section name");
            ini.sections_[section];
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
        if (section.empty())
            throw ConfigError("line " + std::to_string(lineno) + ": key outside any section");
        ini.sections_[section][key] = value;
    }
    return ini;
}

Ini Ini::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_string(ss.str());
}

bool Ini::has(const std::string& section, const std::string& key) const {
    auto sit = sections_.find(section);
    return sit != sections_.end() && sit->second.count(key) > 0;
}

std::string Ini::get(const std::string& section, const std::string& key,
                     const std::string& fallback) const {
    auto sit = sections_.find(section);
    if (sit == sections_.end()) return fallback;
    auto kit = sit->second.find(key);
    return kit == sit->second.end() ? fallback : kit->second;
}

double Ini::get_double(const std::string& section, const std::string& key, double fallback) const {
    if (!has(section, key)) return fallback;
    return to_double(get(section, key, ""), section + "." + key);
}

long long Ini::get_int(const std::string& section, const std::string& key,
                       long long fallback) const {
    if (!has(section, key)) return fallback;
    return to_int(get(section, key, ""), section + "." + key);
}

bool Ini::get_bool(const std::string& section, const std::string& key, bool fallback) const {
    if (!has(section, key)) return fallback;
    std::string v = get(section, key, "");
    std::transform(v.begin(), v.end(), v.begin(), ::tolower);
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError(section + "." + key + ": cannot parse '" + v + "' as a boolean");
}

std::vector<double> Ini::get_double_list(const std::string& section, const std::string& key,
                                         const std::vector<double>& fallback) const {
    if (!has(section, key)) return fallback;
    std::vector<double> out;
    for (const auto& item : split_list(get(section, key, "")))
        out.push_back(to_double(item, section + "." + key));
    if (out.empty()) throw ConfigError(section + "." + key + ": empty list");
    return out;
}

std::vector<long long> Ini::get_int_list(const std::string& section, const std::string& key,
                                         const std::vector<long long>& fallback) const {
    if (!has(section, key)) return fallback;
    std::vector<long long> out;
    for (const auto& item : split_list(get(section, key, "")))
        out.push_back(to_int(item, section + "." + key));
    if (out.empty()) throw ConfigError(section + "." + key + ": empty list");
    return out;
}

sde::ModelSpec ExperimentConfig::make_model() const {
    return sde::make_model(model_name, model);
}

ExperimentConfig config_from_ini(const Ini& ini) {
    for (const auto& [section, keys] : ini.sections()) {
        auto sit = schema().find(section);
        if (sit == schema().end()) throw ConfigError("unknown config section [" + section + "]");
        for (const auto& [key, value] : keys) {
            (void)value;
            if (!sit->second.count(key))
                throw ConfigError("unknown key '" + key + "' in section [" + section + "]");
        }
    }

    ExperimentConfig cfg;
    cfg.model_name = ini.get("model", "name", cfg.model_name);
    cfg.theta_true = ini.get_double("model", "theta", cfg.theta_true);
    cfg.sigma_true = ini.get_double("model", "sigma", cfg.sigma_true);
    cfg.model.x0 = ini.get_double("model", "x0", cfg.model.x0);
    cfg.model.tau2 = ini.get_double("model", "tau2", cfg.model.tau2);
    cfg.model.hurst = ini.get_double("model", "h", cfg.model.hurst);
    if (!(cfg.model.hurst > 0.0 && cfg.model.hurst < 1.0))
        throw ConfigError("model.h must be in (0,1)");
    if (cfg.model.tau2 < 0.0) throw ConfigError("model.tau2 must be nonnegative");

    cfg.model.theta_prior.shape = ini.get_double("priors", "theta_shape", 1.0);
    cfg.model.theta_prior.scale = ini.get_double("priors", "theta_scale", 1.0);
    cfg.model.sigma_prior.shape = ini.get_double("priors", "sigma_shape", 0.5);
    cfg.model.sigma_prior.scale = ini.get_double("priors", "sigma_scale", 1.0);

    cfg.data_path = ini.get("data", "path", cfg.data_path);
    cfg.span = static_cast<std::size_t>(ini.get_int("data", "T", 100));
    if (cfg.span == 0) throw ConfigError("data.T must be positive");

    cfg.synth_level = static_cast<int>(ini.get_int("synth", "level", cfg.synth_level));
    cfg.write_truth = ini.get_bool("synth", "write_truth", cfg.write_truth);

    cfg.level = static_cast<int>(ini.get_int("mcmc", "level", cfg.level));
    cfg.particles = static_cast<std::size_t>(ini.get_int("mcmc", "particles", 0));
    cfg.iterations = static_cast<std::size_t>(ini.get_int("mcmc", "iterations", 2000));
    cfg.proposal_steps = ini.get_double_list("mcmc", "steps", cfg.proposal_steps);
    cfg.burn_in_fraction = ini.get_double("mcmc", "burn_in_fraction", 0.0);
    cfg.resample_threshold = ini.get_double("mcmc", "resample_threshold", 1.0);
    cfg.max_init_retries = static_cast<std::size_t>(ini.get_int("mcmc", "max_init_retries", 100));
    cfg.write_noise = ini.get_bool("mcmc", "write_noise", true);
    cfg.diagnostics = ini.get_bool("mcmc", "diagnostics", false);
    if (cfg.burn_in_fraction < 0.0 || cfg.burn_in_fraction >= 1.0)
        throw ConfigError("mcmc.burn_in_fraction must be in [0,1)");
    if (!(cfg.resample_threshold > 0.0 && cfg.resample_threshold <= 1.0))
        throw ConfigError("mcmc.resample_threshold must be in (0,1]");

    cfg.l_min = static_cast<int>(ini.get_int("ml", "l_min", cfg.l_min));
    cfg.l_cap = static_cast<int>(ini.get_int("ml", "l_cap", cfg.l_cap));
    cfg.epsilon = ini.get_double("ml", "epsilon", cfg.epsilon);
    cfg.alpha = ini.get_double("ml", "alpha", cfg.alpha);
    cfg.beta = ini.get_double("ml", "beta", cfg.beta);
    cfg.gamma = ini.get_double("ml", "gamma", cfg.gamma);
    cfg.base_m = ini.get_double("ml", "base_m", cfg.base_m);
    cfg.thin = static_cast<std::size_t>(ini.get_int("ml", "thin", 1));
    if (cfg.thin == 0) throw ConfigError("ml.thin must be positive");

    const auto levels = ini.get_int_list("study", "levels", {3, 4, 5, 6});
    cfg.study_levels.assign(levels.begin(), levels.end());
    cfg.repeats = static_cast<std::size_t>(ini.get_int("study", "repeats", 20));
    cfg.single_m0 = ini.get_double("study", "single_m0", cfg.single_m0);
    cfg.ml_base_m = ini.get_double("study", "ml_base_m", cfg.ml_base_m);
    cfg.ref_factor = ini.get_double("study", "ref_factor", cfg.ref_factor);
    cfg.ref_min_iterations =
        static_cast<std::size_t>(ini.get_int("study", "ref_min_iterations", 2000));

    cfg.w_euler = ini.get_double("cost", "w_euler", 1.0);
    cfg.w_fft = ini.get_double("cost", "w_fft", 1.0);
    cfg.w_resample = ini.get_double("cost", "w_resample", 1.0);

    cfg.check_hs = ini.get_double_list("fgn_check", "hs", cfg.check_hs);
    const auto ms = ini.get_int_list("fgn_check", "ms", {16, 64, 256, 1024});
    cfg.check_ms.assign(ms.begin(), ms.end());
    cfg.check_max_lag = static_cast<std::size_t>(ini.get_int("fgn_check", "max_lag", 5));

    cfg.seed = static_cast<std::uint64_t>(ini.get_int("run", "seed", 1));
    cfg.out_dir = ini.get("run", "out", cfg.out_dir);
    cfg.workers = static_cast<std::size_t>(ini.get_int("run", "workers", 1));
    if (cfg.workers == 0) throw ConfigError("run.workers must be positive");
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    return config_from_ini(Ini::parse_file(path));
}

}  // namespace pofbm::config
