#pragma once

#include <cmath>
#include <cstdint>

namespace pofbm {

// Machine-independent operation counts. fft_cost accumulates n*log2(n) per
// FFT executed (Bluestein sub-transforms count individually) plus the dense
// whiten/complement work of the true-path coupling, so it is the "path map"
// bucket rather than wall time.
struct CostLedger {
    double euler_steps = 0.0;
    double fft_cost = 0.0;
    double resample_ops = 0.0;

    double w_euler = 1.0;
    double w_fft = 1.0;
    double w_resample = 1.0;

    void add_euler(double n) { euler_steps += n; }
    void add_fft(std::size_t n) {
        if (n > 1) fft_cost += static_cast<double>(n) * std::log2(static_cast<double>(n));
    }
    void add_dense(double ops) { fft_cost += ops; }
    void add_resample(double n) { resample_ops += n; }

    double total() const {
        return w_euler * euler_steps + w_fft * fft_cost + w_resample * resample_ops;
    }

    void merge(const CostLedger& other) {
        euler_steps += other.euler_steps;
        fft_cost += other.fft_cost;
        resample_ops += other.resample_ops;
    }
};

}  // namespace pofbm
