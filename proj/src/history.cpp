#include "kfl/history.hpp"

namespace kfl {

Vec stack_history(const std::vector<Vec>& y, long t, int h, Eigen::Index p)
{
    Vec out = Vec::Zero(p * h);
    for (int s = 1; s <= h; ++s) {
        const long idx = t - s;
        if (idx >= 0 && idx < static_cast<long>(y.size()))
            out.segment((s - 1) * p, p) = y[static_cast<std::size_t>(idx)];
    }
    return out;
}

}  // namespace kfl
