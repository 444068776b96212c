#pragma once

#include "kfl/linalg.hpp"

#include <vector>

namespace kfl {

/// [y_{t-1}; y_{t-2}; ...; y_{t-h}] with y_s = 0 for s < 0.
Vec stack_history(const std::vector<Vec>& y, long t, int h, Eigen::Index p);

/// Rolling version of stack_history for online use: holds the last h
/// outputs, newest first.
class HistoryWindow {
public:
    HistoryWindow(Eigen::Index p, int h) : p_(p), h_(h), stacked_(Vec::Zero(p * h)) {}

    const Vec& stacked() const { return stacked_; }

    void push(const Vec& y_t)
    {
        if (h_ > 1) {
            stacked_.segment(p_, p_ * (h_ - 1)) = stacked_.head(p_ * (h_ - 1)).eval();
        }
        stacked_.head(p_) = y_t;
    }

private:
    Eigen::Index p_;
    int h_;
    Vec stacked_;
};

}  // namespace kfl
