#include <doctest.h>

#include <cmath>
#include <vector>

#include "pofbm/rng.hpp"

using pofbm::RngStream;
using pofbm::StreamKey;

TEST_SUITE("rng") {
    TEST_CASE("streams are deterministic and key-separated") {
        RngStream a(StreamKey{42, 1, 3, 7, 2, 5, 9});
        RngStream b(StreamKey{42, 1, 3, 7, 2, 5, 9});
        RngStream c(StreamKey{42, 1, 3, 7, 2, 5, 10});
        bool any_diff = false;
        for (int i = 0; i < 16; ++i) {
            const auto x = a.next_u64();
            CHECK(x == b.next_u64());
            if (x != c.next_u64()) any_diff = true;
        }
        CHECK(any_diff);
    }

    TEST_CASE("uniform stays inside (0,1)") {
        RngStream rng(StreamKey{1, 2, 3, 4, 5, 6, 7});
        for (int i = 0; i < 10000; ++i) {
            const double u = rng.uniform();
            CHECK(u > 0.0);
            CHECK(u < 1.0);
        }
    }

    TEST_CASE("normal moments") {
        RngStream rng(StreamKey{7, 1, 0, 0, 0, 0, 0});
        const int n = 200000;
        double s1 = 0.0, s2 = 0.0;
        for (int i = 0; i < n; ++i) {
            const double z = rng.normal();
            s1 += z;
            s2 += z * z;
        }
        const double mean = s1 / n;
        const double var = s2 / n - mean * mean;
        CHECK(std::abs(mean) < 3.0 / std::sqrt(static_cast<double>(n)));
        CHECK(std::abs(var - 1.0) < 3.0 * std::sqrt(2.0 / n));
    }

    TEST_CASE("gamma moments") {
        for (double shape : {0.5, 1.0, 2.5}) {
            RngStream rng(StreamKey{11, 1, 0, 0, 0, static_cast<std::uint64_t>(shape * 10), 0});
            const int n = 100000;
            double s1 = 0.0;
            for (int i = 0; i < n; ++i) s1 += rng.gamma(shape, 2.0);
            const double mean = s1 / n;
            const double se = std::sqrt(shape * 4.0 / n);  // var = shape * scale^2
            CHECK(std::abs(mean - shape * 2.0) < 4.0 * se);
        }
    }

    TEST_CASE("golden values pin the u64 stream") {
        // Frozen outputs guard the stream contract
        // (seed, purpose, level, chain, iter, t, particle).
        RngStream rng(StreamKey{123456789, 1, 2, 3, 4, 5, 6});
        const std::vector<std::uint64_t> expected = {
            1044020314766600264ULL,
            10904962082533826720ULL,
            9624915718928261845ULL,
            10860424113738624603ULL,
        };
        for (std::uint64_t want : expected) CHECK(rng.next_u64() == want);
    }
}
