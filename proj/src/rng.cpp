#include "kfl/rng.hpp"

namespace kfl {

std::mt19937_64 make_stream(std::uint64_t seed, Stream stream, std::uint64_t sub)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu),
                      static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream),
                      static_cast<std::uint32_t>(sub & 0xffffffffu),
                      static_cast<std::uint32_t>(sub >> 32)};
    return std::mt19937_64(seq);
}

GaussianSampler::GaussianSampler(const Mat& covariance, std::mt19937_64 engine)
    : factor_(psd_factor(covariance)), engine_(std::move(engine))
{
}

Vec GaussianSampler::operator()()
{
    Vec z(factor_.cols());
    for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = normal_(engine_);
    return factor_ * z;
}

}  // namespace kfl
