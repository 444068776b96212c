#pragma once

#include "kfl/linalg.hpp"
#include "kfl/system.hpp"

#include <cstddef>
#include <string_view>
#include <vector>

namespace kfl {

/// Error covariances Sigma_t and gains L_t of the finite-step Kalman filter,
/// indexed t = 0..T-1 with Sigma_0 = 0 and L_0 = 0.
struct RiccatiSequence {
    std::vector<Mat> Sigma;
    std::vector<Mat> L;

    std::size_t length() const { return Sigma.size(); }
};

struct SteadyKalman {
    Mat Sigma;
    Mat L;
    double residual = 0.0;
    int iterations = 0;
};

/// Prior-knowledge bundle: alpha0 I <= W, V <= alpha1 I, ||C|| <= psi,
/// ||Sigma|| <= sigma_bar.
struct KnownConstants {
    double alpha0 = 0.0;
    double alpha1 = 0.0;
    double psi = 0.0;
    double sigma_bar = 0.0;

    double kappa_F() const;
    double gamma_F() const;

    /// Throws DomainError when the bundle itself is inconsistent.
    void validate() const;

    /// True when the bounds hold for the given system and its DARE solution.
    bool bounds(const LtiSystem& system, const SteadyKalman& steady, double tol = 1e-10) const;
};

enum class FilterKind { state, output };

std::string_view to_string(FilterKind kind);
FilterKind filter_kind_from_string(std::string_view name);

/// Truncated linear filter [P_1 ... P_h], each block d x p, stored as one
/// d x (p h) matrix. vec() concatenates rows.
class FilterParams {
public:
    FilterParams() = default;
    FilterParams(FilterKind kind, Eigen::Index d, Eigen::Index p, int h, double radius);
    FilterParams(FilterKind kind, Mat stacked, Eigen::Index p, double radius);

    FilterKind kind() const { return kind_; }
    int h() const { return h_; }
    Eigen::Index d() const { return stacked_.rows(); }
    Eigen::Index p() const { return p_; }
    double radius() const { return radius_; }

    const Mat& stacked() const { return stacked_; }
    Mat& stacked() { return stacked_; }

    /// Block s in 1..h.
    Mat block(int s) const;
    void set_block(int s, const Mat& value);

    Vec vec() const;
    static FilterParams from_vec(FilterKind kind, const Vec& v, Eigen::Index d, Eigen::Index p,
                                 int h, double radius);

    double frobenius() const { return stacked_.norm(); }
    bool in_ball(double tol = 1e-12) const { return frobenius() <= radius_ * (1.0 + tol); }

private:
    FilterKind kind_ = FilterKind::output;
    Mat stacked_;
    Eigen::Index p_ = 0;
    int h_ = 0;
    double radius_ = 0.0;
};

/// One step of Sigma' = A S A^T - A S C^T (C S C^T + V)^{-1} C S A^T + W.
Mat riccati_step(const Mat& sigma_prev, const LtiSystem& system);

/// Kalman gain A S C^T (C S C^T + V)^{-1}.
Mat kalman_gain(const Mat& sigma, const LtiSystem& system);

RiccatiSequence riccati_sequence(const LtiSystem& system, std::size_t T);

/// Fixed-point iteration of the Riccati map from Sigma = 0 until the relative
/// Frobenius change is at most tol.
SteadyKalman solve_dare(const LtiSystem& system, double tol = 1e-12, int max_iter = 1'000'000);

/// ||Sigma - RHS(Sigma)||_F for the algebraic Riccati equation.
double dare_residual(const Mat& sigma, const LtiSystem& system);

struct Estimates {
    std::vector<Vec> state;
    std::vector<Vec> output;
};

/// x^_0 = 0, x^_{t+1} = (A - L_t C) x^_t + L_t y_t. Returns x^_t, C x^_t for
/// t = 0..y.size()-1.
Estimates kf_estimate(const LtiSystem& system, const RiccatiSequence& gains,
                      const std::vector<Vec>& y);

/// Same recursion with the constant steady-state gain.
Estimates steady_kf_estimate(const LtiSystem& system, const SteadyKalman& steady,
                             const std::vector<Vec>& y);

/// Truncated filter using the last h outputs of `y` with zero padding.
Estimates truncated_estimate(const LtiSystem& system, const FilterParams& params,
                             const std::vector<Vec>& y);

/// Radius of the feasible ball for the given kind:
/// state  sqrt(min(p, n)) kappa_F^2 / (1 - gamma_F),
/// output sqrt(p) psi kappa_F^2 / (1 - gamma_F).
double filter_radius(FilterKind kind, Eigen::Index n, Eigen::Index p,
                     const KnownConstants& consts);

/// M*_s = (A - LC)^{s-1} L or N*_s = C (A - LC)^{s-1} L for s = 1..h.
FilterParams truncated_params(const LtiSystem& system, const SteadyKalman& steady, int h,
                              FilterKind kind, const KnownConstants& consts);

KnownConstants known_constants_from_system(const LtiSystem& system, const SteadyKalman& steady,
                                           double inflation = 1.0);

/// h = max(1, floor(ln T / ln(1 / gamma_F))).
int horizon_h(std::size_t T, double gamma_F);

}  // namespace kfl
