#pragma once

#include <stdexcept>
#include <string>

namespace btda {

struct NotPositiveDefinite : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NonFiniteEncountered : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};

struct NonFiniteLoss : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ParamCountTooLarge : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DivergedTraining : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct MismatchedSampleSets : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DegenerateSampleCount : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ZeroVarianceInput : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct MalformedIdx : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace btda
