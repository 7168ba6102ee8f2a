#pragma once

#include <stdexcept>
#include <string>

namespace pofbm {

// Base class for all library errors. The CLI maps ConfigError to exit code 2
// and everything else derived from Error to exit code 3.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

#define POFBM_DEFINE_ERROR(NAME)                                   \
    class NAME : public Error {                                    \
    public:                                                        \
        explicit NAME(const std::string& msg) : Error(#NAME ": " + msg) {} \
    }

POFBM_DEFINE_ERROR(NegativeSpectrum);
POFBM_DEFINE_ERROR(DimensionMismatch);
POFBM_DEFINE_ERROR(OddLength);
POFBM_DEFINE_ERROR(NonFiniteState);
POFBM_DEFINE_ERROR(UnsupportedDiffusion);
POFBM_DEFINE_ERROR(DegenerateWeights);
POFBM_DEFINE_ERROR(NonFiniteWeight);
POFBM_DEFINE_ERROR(AllWeightsDegenerate);
POFBM_DEFINE_ERROR(InvalidRates);
POFBM_DEFINE_ERROR(MissingLevel);
POFBM_DEFINE_ERROR(MalformedCSV);
POFBM_DEFINE_ERROR(NonContiguousTime);
POFBM_DEFINE_ERROR(InsufficientPoints);
POFBM_DEFINE_ERROR(IOError);
POFBM_DEFINE_ERROR(ConfigError);

#undef POFBM_DEFINE_ERROR

}  // namespace pofbm
