#pragma once

#include "kfl/linalg.hpp"

#include <cstdint>
#include <random>

namespace kfl {

/// Independent random streams derived from one base seed. Each noise source
/// gets its own generator so that e.g. the process noise can be replayed
/// while the measurement channel changes.
enum class Stream : std::uint32_t {
    process = 1,
    measurement = 2,
    informative = 3,
    query_offsets = 4,
    instance = 5,
    trial = 6,
};

std::mt19937_64 make_stream(std::uint64_t seed, Stream stream, std::uint64_t sub = 0);

/// Draws zero-mean Gaussian vectors with a fixed covariance.
class GaussianSampler {
public:
    GaussianSampler(const Mat& covariance, std::mt19937_64 engine);

    Vec operator()();

private:
    Mat factor_;
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace kfl
