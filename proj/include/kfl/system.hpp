#pragma once

#include "kfl/linalg.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace kfl {

/// x_{t+1} = A x_t + w_t,  y_t = C x_t + v_t  with w ~ N(0, W), v ~ N(0, V).
///
/// B and K describe an optional static output-feedback loop u_t = K y_t that
/// must be closed with close_loop() before simulation. Vtilde is the noise
/// covariance of the direct state channel x~_t = x_t + v~_t.
struct LtiSystem {
    Mat A;
    Mat C;
    Mat W;
    Mat V;
    std::optional<Mat> B;
    std::optional<Mat> K;
    std::optional<Mat> Vtilde;

    Eigen::Index n() const { return A.rows(); }
    Eigen::Index p() const { return C.rows(); }

    /// Checks dimensions and that every covariance is symmetric PSD.
    void validate() const;
};

struct Trajectory {
    std::vector<Vec> x;
    std::vector<Vec> y;
    std::vector<Vec> w;
    std::vector<Vec> v;
    std::optional<std::vector<Vec>> xtilde;
    std::uint64_t seed = 0;

    std::size_t length() const { return y.size(); }

    /// y_t, with the convention y_t = 0 for t < 0.
    Vec output_at(long t) const;
};

/// Simulates from x_0 = 0 with Gaussian noise from the process and
/// measurement streams of `seed`. Identical inputs give identical output.
Trajectory simulate(const LtiSystem& system, std::size_t T, std::uint64_t seed);

/// Same recursion with caller-supplied noise; w.size() == v.size() == T.
Trajectory simulate_with_noise(const LtiSystem& system, const std::vector<Vec>& w,
                               const std::vector<Vec>& v);

/// x~_t = x_t + v~_t, v~ drawn from the informative stream of `seed`.
std::vector<Vec> informative_measurements(const Trajectory& traj, const Mat& Vtilde,
                                          std::uint64_t seed);

/// A, C with i.i.d. Uniform(0,1) entries, A rescaled to the target spectral
/// radius, W = w_var I, V = v_var I.
LtiSystem make_random_instance(int n, int p, double rho_target, double w_var, double v_var,
                               std::uint64_t seed);

/// Linearized longitudinal Boeing 747 dynamics with a stored stabilizing
/// static output-feedback gain (loop still open; see close_loop).
LtiSystem make_boeing747();

/// Stored gain K (2x3) for make_boeing747(): the stabilizing gain of least
/// stationary state variance for u = K y; rho(A + B K C) ~ 0.968.
Mat boeing747_feedback_gain();

/// Alternative stabilizing gain minimizing rho(A + B K C) (~ 0.717). Its
/// closed loop has about three times the stationary state variance.
Mat boeing747_min_radius_gain();

/// A <- A + B K C; B and K are cleared.
LtiSystem close_loop(const LtiSystem& system);

/// Scalar instance a = 1/5, c = 1/r, process variance r^2 sigma_w,
/// measurement variance sigma_v; r must be one of {1, 4, -2}.
LtiSystem make_lower_bound_instance(double r, double sigma_w, double sigma_v);

struct SpectralEnvelope {
    double rho = 0.0;
    double kappa_A = 1.0;
    double gamma_A = 0.5;
    int k_max = 0;
};

/// gamma_A = (1 + rho(A)) / 2 and kappa_A = max_k ||A^k|| / gamma_A^k over
/// k = 0..k_max, where k_max is the first k >= 64 with ratio below one.
SpectralEnvelope spectral_envelope(const Mat& A);

struct NoiseDiagnostics {
    double delta = 0.0;
    std::size_t T = 0;
    double Rx = 0.0;
    double Ry = 0.0;
};

/// sqrt(5 tr(Q) ln(3T / delta)); the high-probability bound on max_t ||noise_t||.
double noise_bound_radius(double trace, std::size_t T, double delta);

NoiseDiagnostics noise_bounds(const LtiSystem& system, const SpectralEnvelope& envelope,
                              std::size_t T, double delta);

}  // namespace kfl
