#include <doctest.h>

#include <cmath>
#include <complex>
#include <vector>

#include "pofbm/fft.hpp"
#include "pofbm/rng.hpp"

namespace {

using cdouble = std::complex<double>;

std::vector<cdouble> naive_dft(const std::vector<cdouble>& x, bool inverse) {
    const std::size_t n = x.size();
    const double sign = inverse ? 1.0 : -1.0;
    std::vector<cdouble> out(n, {0.0, 0.0});
    for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t j = 0; j < n; ++j) {
            const double ang = sign * 2.0 * M_PI * static_cast<double>(j * k) / n;
            out[k] += x[j] * cdouble(std::cos(ang), std::sin(ang));
        }
        if (inverse) out[k] /= static_cast<double>(n);
    }
    return out;
}

std::vector<cdouble> random_signal(std::size_t n, std::uint64_t seed) {
    pofbm::RngStream rng(pofbm::StreamKey{seed, 99, 0, 0, 0, n, 0});
    std::vector<cdouble> x(n);
    for (auto& v : x) v = cdouble(rng.normal(), rng.normal());
    return x;
}

}  // namespace

TEST_SUITE("fft") {
    TEST_CASE("matches a naive DFT for power-of-two and general sizes") {
        for (std::size_t n : {1u, 2u, 4u, 8u, 16u, 64u, 3u, 6u, 12u, 24u, 50u, 100u, 200u}) {
            auto x = random_signal(n, 7);
            const auto expected = naive_dft(x, false);
            auto got = x;
            pofbm::fft(got, false);
            for (std::size_t k = 0; k < n; ++k) {
                CHECK(std::abs(got[k] - expected[k]) < 1e-9 * (1.0 + std::abs(expected[k])));
            }
        }
    }

    TEST_CASE("inverse matches a naive inverse DFT") {
        for (std::size_t n : {8u, 12u, 100u}) {
            auto x = random_signal(n, 11);
            const auto expected = naive_dft(x, true);
            auto got = x;
            pofbm::fft(got, true);
            for (std::size_t k = 0; k < n; ++k)
                CHECK(std::abs(got[k] - expected[k]) < 1e-9 * (1.0 + std::abs(expected[k])));
        }
    }

    TEST_CASE("round trip is the identity") {
        for (std::size_t n : {16u, 24u, 129u}) {
            const auto x = random_signal(n, 13);
            auto y = x;
            pofbm::fft(y, false);
            pofbm::fft(y, true);
            for (std::size_t k = 0; k < n; ++k) CHECK(std::abs(y[k] - x[k]) < 1e-10);
        }
    }

    TEST_CASE("ledger counts n log2 n per transform") {
        pofbm::CostLedger ledger;
        std::vector<cdouble> x(16, {1.0, 0.0});
        pofbm::fft(x, false, &ledger);
        CHECK(ledger.fft_cost == doctest::Approx(16.0 * 4.0));
    }

    TEST_CASE("power-of-two helpers") {
        CHECK(pofbm::is_power_of_two(1));
        CHECK(pofbm::is_power_of_two(64));
        CHECK_FALSE(pofbm::is_power_of_two(0));
        CHECK_FALSE(pofbm::is_power_of_two(12));
        CHECK(pofbm::next_power_of_two(12) == 16);
        CHECK(pofbm::next_power_of_two(16) == 16);
    }
}
