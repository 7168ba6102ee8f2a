#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include "pofbm/cost.hpp"

namespace pofbm {

// In-place complex FFT, any length. Power-of-two lengths run the iterative
// radix-2 kernel; everything else goes through Bluestein's chirp transform.
// When a ledger is supplied every executed transform (including Bluestein
// sub-transforms) contributes n*log2(n) to fft_cost.
void fft(std::vector<std::complex<double>>& data, bool inverse, CostLedger* ledger = nullptr);

bool is_power_of_two(std::size_t n);
std::size_t next_power_of_two(std::size_t n);

}  // namespace pofbm
