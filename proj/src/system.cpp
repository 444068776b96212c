#include "kfl/system.hpp"

#include "kfl/errors.hpp"
#include "kfl/rng.hpp"

#include <cmath>
#include <string>

namespace kfl {

namespace {

void require_shape(const Mat& m, Eigen::Index rows, Eigen::Index cols, const char* name)
{
    if (m.rows() != rows || m.cols() != cols) {
        throw DimensionError(std::string(name) + " must be " + std::to_string(rows) + "x" +
                             std::to_string(cols) + ", got " + std::to_string(m.rows()) + "x" +
                             std::to_string(m.cols()));
    }
}

}  // namespace

void LtiSystem::validate() const
{
    const auto nn = n();
    const auto pp = p();
    if (nn < 1 || pp < 1) throw DimensionError("system needs n >= 1 and p >= 1");
    require_shape(A, nn, nn, "A");
    require_shape(C, pp, nn, "C");
    require_shape(W, nn, nn, "W");
    require_shape(V, pp, pp, "V");
    require_psd(W, "W");
    require_psd(V, "V");
    if (B) {
        if (B->rows() != nn || B->cols() < 1) throw DimensionError("B must have n rows");
    }
    if (K) {
        if (!B) throw DimensionError("K given without B");
        require_shape(*K, B->cols(), pp, "K");
    }
    if (Vtilde) {
        require_shape(*Vtilde, nn, nn, "Vtilde");
        require_psd(*Vtilde, "Vtilde");
    }
}

Vec Trajectory::output_at(long t) const
{
    if (t < 0) return Vec::Zero(y.empty() ? 0 : y.front().size());
    return y.at(static_cast<std::size_t>(t));
}

Trajectory simulate_with_noise(const LtiSystem& system, const std::vector<Vec>& w,
                               const std::vector<Vec>& v)
{
    system.validate();
    if (system.K) throw ConfigError("K", "close the feedback loop before simulating");
    if (w.empty()) throw DomainError("empty trajectory: T must be positive");
    if (w.size() != v.size()) throw DimensionError("w and v noise sequences differ in length");

    const std::size_t T = w.size();
    Trajectory traj;
    traj.w = w;
    traj.v = v;
    traj.x.reserve(T);
    traj.y.reserve(T);

    Vec x = Vec::Zero(system.n());
    for (std::size_t t = 0; t < T; ++t) {
        if (w[t].size() != system.n() || v[t].size() != system.p())
            throw DimensionError("noise sample has the wrong dimension");
        traj.x.push_back(x);
        traj.y.push_back(system.C * x + v[t]);
        x = system.A * x + w[t];
    }
    return traj;
}

Trajectory simulate(const LtiSystem& system, std::size_t T, std::uint64_t seed)
{
    system.validate();
    if (T == 0) throw DomainError("empty trajectory: T must be positive");

    GaussianSampler draw_w(system.W, make_stream(seed, Stream::process));
    GaussianSampler draw_v(system.V, make_stream(seed, Stream::measurement));
    std::vector<Vec> w(T);
    std::vector<Vec> v(T);
    for (std::size_t t = 0; t < T; ++t) {
        w[t] = draw_w();
        v[t] = draw_v();
    }
    Trajectory traj = simulate_with_noise(system, w, v);
    traj.seed = seed;
    return traj;
}

std::vector<Vec> informative_measurements(const Trajectory& traj, const Mat& Vtilde,
                                          std::uint64_t seed)
{
    require_psd(Vtilde, "Vtilde");
    if (!traj.x.empty() && traj.x.front().size() != Vtilde.rows())
        throw DimensionError("Vtilde does not match the state dimension");

    GaussianSampler draw(Vtilde, make_stream(seed, Stream::informative));
    std::vector<Vec> out;
    out.reserve(traj.x.size());
    for (const Vec& x : traj.x) out.push_back(x + draw());
    return out;
}

LtiSystem make_random_instance(int n, int p, double rho_target, double w_var, double v_var,
                               std::uint64_t seed)
{
    if (!(rho_target > 0.0 && rho_target < 1.0))
        throw DomainError("rho_target must lie in (0, 1)");
    if (n < 1 || p < 1) throw DimensionError("random instance needs n, p >= 1");

    auto engine = make_stream(seed, Stream::instance);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    LtiSystem sys;
    double rho = 0.0;
    while (rho == 0.0) {
        sys.A = Mat::NullaryExpr(n, n, [&] { return unit(engine); });
        rho = spectral_radius(sys.A);
    }
    sys.A *= rho_target / rho;
    sys.C = Mat::NullaryExpr(p, n, [&] { return unit(engine); });
    sys.W = w_var * Mat::Identity(n, n);
    sys.V = v_var * Mat::Identity(p, p);
    sys.validate();
    return sys;
}

Mat boeing747_feedback_gain()
{
    Mat K(2, 3);
    K << -0.64877, 0.12645, 0.87159,
         -0.77839, 0.10783, 0.39309;
    return K;
}

Mat boeing747_min_radius_gain()
{
    Mat K(2, 3);
    K << -0.15726, -0.07425, 0.09706,
         -0.05207, -0.07783, -0.07793;
    return K;
}

LtiSystem make_boeing747()
{
    LtiSystem sys;
    sys.A.resize(4, 4);
    sys.A << 0.99, 0.03, -0.02, -0.32,
             0.01, 0.47, 4.7, 0.0,
             0.02, -0.06, 0.4, 0.0,
             0.01, -0.04, 0.72, 0.99;
    Mat B(4, 2);
    B << 0.01, 0.99,
         -3.44, 1.66,
         -0.83, 0.44,
         -0.47, 0.25;
    sys.B = B;
    sys.C = Mat::Identity(3, 4);
    sys.W = 0.0025 * Mat::Identity(4, 4);
    sys.V = 0.0025 * Mat::Identity(3, 3);
    sys.K = boeing747_feedback_gain();
    sys.validate();

    if (spectral_radius(sys.A + B * *sys.K * sys.C) >= 1.0)
        throw InstabilityError("stored Boeing 747 gain does not stabilize the loop");
    return sys;
}

LtiSystem close_loop(const LtiSystem& system)
{
    if (!system.B) throw ConfigError("B", "close_loop needs an input matrix");
    if (!system.K) throw ConfigError("K", "close_loop needs a feedback gain");
    system.validate();

    LtiSystem closed = system;
    closed.A = system.A + *system.B * *system.K * system.C;
    closed.B.reset();
    closed.K.reset();
    if (spectral_radius(closed.A) >= 1.0)
        throw InstabilityError("closed-loop matrix A + BKC is not Schur stable");
    return closed;
}

LtiSystem make_lower_bound_instance(double r, double sigma_w, double sigma_v)
{
    if (r != 1.0 && r != 4.0 && r != -2.0) throw DomainError("r must be one of {1, 4, -2}");
    if (!(sigma_w > 0.0)) throw DomainError("sigma_w must be positive");
    if (!(sigma_v >= 0.0)) throw DomainError("sigma_v must be nonnegative");

    LtiSystem sys;
    sys.A = Mat::Constant(1, 1, 0.2);
    sys.C = Mat::Constant(1, 1, 1.0 / r);
    sys.W = Mat::Constant(1, 1, r * r * sigma_w);
    sys.V = Mat::Constant(1, 1, sigma_v);
    return sys;
}

SpectralEnvelope spectral_envelope(const Mat& A)
{
    SpectralEnvelope env;
    env.rho = spectral_radius(A);
    if (env.rho >= 1.0) throw InstabilityError("spectral envelope needs rho(A) < 1");
    env.gamma_A = 0.5 * (1.0 + env.rho);

    constexpr int k_min = 64;
    constexpr int k_cap = 1'000'000;
    const double log_gamma = std::log(env.gamma_A);

    Mat power = Mat::Identity(A.rows(), A.cols());
    double kappa = 0.0;
    for (int k = 0; k <= k_cap; ++k) {
        const double norm = spectral_norm(power);
        const double ratio = norm == 0.0 ? 0.0 : std::exp(std::log(norm) - k * log_gamma);
        kappa = std::max(kappa, ratio);
        if (k >= k_min && ratio < 1.0) {
            env.k_max = k;
            env.kappa_A = std::max(1.0, kappa);
            return env;
        }
        power = power * A;
    }
    throw ConvergenceError("spectral envelope ratio did not decay", kappa);
}

double noise_bound_radius(double trace, std::size_t T, double delta)
{
    if (!(delta > 0.0)) throw DomainError("delta must be positive");
    if (T == 0) throw DomainError("T must be positive");
    return std::sqrt(5.0 * trace * std::log(3.0 * static_cast<double>(T) / delta));
}

NoiseDiagnostics noise_bounds(const LtiSystem& system, const SpectralEnvelope& envelope,
                              std::size_t T, double delta)
{
    if (!(delta > 0.0 && delta < 1.0)) throw DomainError("delta must lie in (0, 1)");
    NoiseDiagnostics d;
    d.delta = delta;
    d.T = T;
    const double gain = envelope.kappa_A / (1.0 - envelope.gamma_A);
    d.Rx = noise_bound_radius(system.W.trace(), T, delta) * gain;
    d.Ry = spectral_norm(system.C) * d.Rx + noise_bound_radius(system.V.trace(), T, delta);
    return d;
}

}  // namespace kfl
