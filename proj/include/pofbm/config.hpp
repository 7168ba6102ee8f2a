#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "pofbm/errors.hpp"
#include "pofbm/sde.hpp"

namespace pofbm::config {

// Nested sections of key = value; '#' and ';' start comments. Unknown
// sections or keys are rejected so typos fail loudly. The full schema is
// documented in docs/formats.md.
class Ini {
public:
    static Ini parse_file(const std::string& path);
    static Ini parse_string(const std::string& text);

    bool has(const std::string& section, const std::string& key) const;
    std::string get(const std::string& section, const std::string& key,
                    const std::string& fallback) const;
    double get_double(const std::string& section, const std::string& key, double fallback) const;
    long long get_int(const std::string& section, const std::string& key,
                      long long fallback) const;
    bool get_bool(const std::string& section, const std::string& key, bool fallback) const;
    std::vector<double> get_double_list(const std::string& section, const std::string& key,
                                        const std::vector<double>& fallback) const;
    std::vector<long long> get_int_list(const std::string& section, const std::string& key,
                                        const std::vector<long long>& fallback) const;

    const std::map<std::string, std::map<std::string, std::string>>& sections() const {
        return sections_;
    }

private:
    std::map<std::string, std::map<std::string, std::string>> sections_;
};

struct ExperimentConfig {
    // [model]
    std::string model_name = "ou";
    sde::ModelConfig model;       // hurst=0.4, tau2=0.2, x0=0, section [model]/[priors]
    double theta_true = 1.0;
    double sigma_true = 0.5;

    // [data]
    std::string data_path = "data.csv";
    std::size_t span = 100;  // T

    // [synth]
    int synth_level = 7;
    bool write_truth = true;

    // [mcmc]
    int level = 7;
    std::size_t particles = 0;  // 0 means N = T
    std::size_t iterations = 2000;
    std::vector<double> proposal_steps = {0.25, 0.25};
    double burn_in_fraction = 0.0;
    double resample_threshold = 1.0;
    std::size_t max_init_retries = 100;
    bool write_noise = true;
    bool diagnostics = false;

    // [ml]
    int l_min = 3;
    int l_cap = 7;
    double epsilon = 0.1;
    double alpha = 0.5;
    double beta = 0.5;
    double gamma = 1.0;
    double base_m = 1.0;
    std::size_t thin = 1;

    // [study]
    std::vector<int> study_levels = {3, 4, 5, 6};
    std::size_t repeats = 20;
    double single_m0 = 150.0;       // single-level iterations at the lowest study level
    double ml_base_m = 8.0;         // base M multiplier for the allocation
    double ref_factor = 10.0;       // reference iterations = factor * largest M_l
    std::size_t ref_min_iterations = 2000;

    // [cost]
    double w_euler = 1.0;
    double w_fft = 1.0;
    double w_resample = 1.0;

    // [fgn_check]
    std::vector<double> check_hs = {0.2, 0.4, 0.6, 0.8};
    std::vector<std::size_t> check_ms = {16, 64, 256, 1024};
    std::size_t check_max_lag = 5;

    // runtime (CLI flags override)
    std::uint64_t seed = 1;
    std::string out_dir = "out";
    std::size_t workers = 1;

    // internal, not part of the file schema
    bool keep_trace = false;

    sde::ModelSpec make_model() const;
    std::size_t effective_particles() const { return particles == 0 ? span : particles; }
};

ExperimentConfig load_config(const std::string& path);
ExperimentConfig config_from_ini(const Ini& ini);

}  // namespace pofbm::config
