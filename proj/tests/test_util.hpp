#pragma once

#include "kfl/linalg.hpp"

#include <random>

namespace kfl::test {

inline Mat random_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols,
                         double scale = 1.0)
{
    std::normal_distribution<double> normal(0.0, scale);
    return Mat::NullaryExpr(rows, cols, [&] { return normal(rng); });
}

inline Vec random_vector(std::mt19937_64& rng, Eigen::Index size, double scale = 1.0)
{
    return random_matrix(rng, size, 1, scale);
}

inline Mat scalar(double value) { return Mat::Constant(1, 1, value); }

}  // namespace kfl::test
