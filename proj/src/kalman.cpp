#include "kfl/kalman.hpp"

#include "kfl/errors.hpp"
#include "kfl/history.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace kfl {

namespace {

/// Returns (A S C^T) (C S C^T + V)^{-1} applied on the right, i.e. the gain,
/// or a zero gain when C S = 0 and the innovation covariance is singular.
Mat gain_or_zero(const Mat& sigma, const LtiSystem& system)
{
    const Mat cs = system.C * sigma;
    const Mat innovation = symmetrize(cs * system.C.transpose() + system.V);
    Eigen::LLT<Mat> llt(innovation);
    if (llt.info() != Eigen::Success) {
        if (cs.norm() == 0.0) return Mat::Zero(system.n(), system.p());
        throw LinearSolveError("innovation covariance C S C^T + V is singular");
    }
    const Mat asct = system.A * cs.transpose();
    return llt.solve(asct.transpose()).transpose();
}

}  // namespace

double KnownConstants::kappa_F() const { return std::sqrt(sigma_bar / alpha0); }

double KnownConstants::gamma_F() const { return 1.0 - alpha0 / (2.0 * sigma_bar); }

void KnownConstants::validate() const
{
    if (!(alpha0 > 0.0)) throw DomainError("alpha0 must be positive");
    if (!(alpha1 >= alpha0)) throw DomainError("alpha1 must be >= alpha0");
    if (!(psi >= 0.0)) throw DomainError("psi must be nonnegative");
    if (!(sigma_bar >= alpha0)) throw DomainError("sigma_bar must be >= alpha0");
}

bool KnownConstants::bounds(const LtiSystem& system, const SteadyKalman& steady,
                            double tol) const
{
    return lambda_min(system.W) >= alpha0 - tol && lambda_max(system.W) <= alpha1 + tol &&
           lambda_min(system.V) >= alpha0 - tol && lambda_max(system.V) <= alpha1 + tol &&
           spectral_norm(system.C) <= psi + tol && spectral_norm(steady.Sigma) <= sigma_bar + tol;
}

std::string_view to_string(FilterKind kind)
{
    return kind == FilterKind::state ? "state" : "output";
}

FilterKind filter_kind_from_string(std::string_view name)
{
    if (name == "state") return FilterKind::state;
    if (name == "output") return FilterKind::output;
    throw DomainError("unknown filter kind '" + std::string(name) + "'");
}

FilterParams::FilterParams(FilterKind kind, Eigen::Index d, Eigen::Index p, int h, double radius)
    : kind_(kind), stacked_(Mat::Zero(d, p * h)), p_(p), h_(h), radius_(radius)
{
    if (h < 1) throw DomainError("filter length h must be >= 1");
    if (!(radius > 0.0)) throw DomainError("filter radius must be positive");
}

FilterParams::FilterParams(FilterKind kind, Mat stacked, Eigen::Index p, double radius)
    : kind_(kind), stacked_(std::move(stacked)), p_(p), radius_(radius)
{
    if (p < 1 || stacked_.cols() % p != 0 || stacked_.cols() == 0)
        throw DimensionError("stacked filter width must be a positive multiple of p");
    h_ = static_cast<int>(stacked_.cols() / p);
    if (!(radius > 0.0)) throw DomainError("filter radius must be positive");
}

Mat FilterParams::block(int s) const
{
    if (s < 1 || s > h_) throw DomainError("block index out of range");
    return stacked_.middleCols((s - 1) * p_, p_);
}

void FilterParams::set_block(int s, const Mat& value)
{
    if (s < 1 || s > h_) throw DomainError("block index out of range");
    if (value.rows() != d() || value.cols() != p_) throw DimensionError("block has wrong shape");
    stacked_.middleCols((s - 1) * p_, p_) = value;
}

Vec FilterParams::vec() const
{
    Vec out(stacked_.size());
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        out.data(), stacked_.rows(), stacked_.cols()) = stacked_;
    return out;
}

FilterParams FilterParams::from_vec(FilterKind kind, const Vec& v, Eigen::Index d,
                                    Eigen::Index p, int h, double radius)
{
    if (v.size() != d * p * h) throw DimensionError("vectorized filter has the wrong length");
    Mat stacked = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                                 Eigen::RowMajor>>(v.data(), d, p * h);
    return FilterParams(kind, std::move(stacked), p, radius);
}

Mat riccati_step(const Mat& sigma_prev, const LtiSystem& system)
{
    const Mat gain = gain_or_zero(sigma_prev, system);
    const Mat as = system.A * sigma_prev;
    // A S A^T - L (C S A^T) + W, with L (C S A^T) = A S C^T S^{-1} C S A^T.
    const Mat next =
        as * system.A.transpose() - gain * (system.C * as.transpose()) + system.W;
    return symmetrize(next);
}

Mat kalman_gain(const Mat& sigma, const LtiSystem& system) { return gain_or_zero(sigma, system); }

RiccatiSequence riccati_sequence(const LtiSystem& system, std::size_t T)
{
    if (T == 0) throw DomainError("riccati_sequence needs T >= 1");
    system.validate();
    RiccatiSequence seq;
    seq.Sigma.reserve(T);
    seq.L.reserve(T);
    Mat sigma = Mat::Zero(system.n(), system.n());
    for (std::size_t t = 0; t < T; ++t) {
        seq.Sigma.push_back(sigma);
        seq.L.push_back(kalman_gain(sigma, system));
        if (t + 1 < T) sigma = riccati_step(sigma, system);
    }
    return seq;
}

double dare_residual(const Mat& sigma, const LtiSystem& system)
{
    return (sigma - riccati_step(sigma, system)).norm();
}

SteadyKalman solve_dare(const LtiSystem& system, double tol, int max_iter)
{
    system.validate();
    Mat sigma = Mat::Zero(system.n(), system.n());
    double change = 0.0;
    for (int k = 1; k <= max_iter; ++k) {
        Mat next = riccati_step(sigma, system);
        const double diff = (next - sigma).norm();
        const double scale = next.norm();
        change = scale > 0.0 ? diff / scale : diff;
        sigma = std::move(next);
        if (change <= tol) {
            SteadyKalman out;
            out.Sigma = sigma;
            out.L = kalman_gain(sigma, system);
            out.residual = dare_residual(sigma, system);
            out.iterations = k;
            if (spectral_radius(system.A - out.L * system.C) >= 1.0)
                throw InstabilityError("steady-state filter matrix A - LC is not stable");
            return out;
        }
    }
    throw ConvergenceError("DARE fixed-point iteration did not converge within " +
                               std::to_string(max_iter) + " iterations",
                           dare_residual(sigma, system));
}

Estimates kf_estimate(const LtiSystem& system, const RiccatiSequence& gains,
                      const std::vector<Vec>& y)
{
    if (gains.L.size() < y.size())
        throw DimensionError("gain sequence shorter than the output sequence");
    Estimates est;
    est.state.reserve(y.size());
    est.output.reserve(y.size());
    Vec xhat = Vec::Zero(system.n());
    for (std::size_t t = 0; t < y.size(); ++t) {
        est.state.push_back(xhat);
        est.output.push_back(system.C * xhat);
        const Mat& L = gains.L[t];
        xhat = (system.A - L * system.C) * xhat + L * y[t];
    }
    return est;
}

Estimates steady_kf_estimate(const LtiSystem& system, const SteadyKalman& steady,
                             const std::vector<Vec>& y)
{
    Estimates est;
    est.state.reserve(y.size());
    est.output.reserve(y.size());
    const Mat closed = system.A - steady.L * system.C;
    Vec xhat = Vec::Zero(system.n());
    for (const Vec& yt : y) {
        est.state.push_back(xhat);
        est.output.push_back(system.C * xhat);
        xhat = closed * xhat + steady.L * yt;
    }
    return est;
}

Estimates truncated_estimate(const LtiSystem& system, const FilterParams& params,
                             const std::vector<Vec>& y)
{
    Estimates est;
    for (std::size_t t = 0; t < y.size(); ++t) {
        const Vec hist = stack_history(y, static_cast<long>(t), params.h(), params.p());
        const Vec value = params.stacked() * hist;
        if (params.kind() == FilterKind::state) {
            est.state.push_back(value);
            est.output.push_back(system.C * value);
        } else {
            est.output.push_back(value);
        }
    }
    return est;
}

double filter_radius(FilterKind kind, Eigen::Index n, Eigen::Index p,
                     const KnownConstants& consts)
{
    const double kf = consts.kappa_F();
    const double base = kf * kf / (1.0 - consts.gamma_F());
    if (kind == FilterKind::state)
        return std::sqrt(static_cast<double>(std::min(n, p))) * base;
    return std::sqrt(static_cast<double>(p)) * consts.psi * base;
}

FilterParams truncated_params(const LtiSystem& system, const SteadyKalman& steady, int h,
                              FilterKind kind, const KnownConstants& consts)
{
    if (h < 1) throw DomainError("truncation length h must be >= 1");
    const auto n = system.n();
    const auto p = system.p();
    const Eigen::Index d = kind == FilterKind::state ? n : p;
    FilterParams params(kind, d, p, h, filter_radius(kind, n, p, consts));

    const Mat closed = system.A - steady.L * system.C;
    Mat block = steady.L;
    for (int s = 1; s <= h; ++s) {
        params.set_block(s, kind == FilterKind::state ? block : Mat(system.C * block));
        block = closed * block;
    }
    if (!params.in_ball(1e-9))
        throw ConsistencyError("optimal truncated filter lies outside its feasible ball");
    return params;
}

KnownConstants known_constants_from_system(const LtiSystem& system, const SteadyKalman& steady,
                                           double inflation)
{
    if (!(inflation >= 1.0)) throw DomainError("inflation must be >= 1");
    KnownConstants c;
    c.alpha0 = std::min(lambda_min(system.W), lambda_min(system.V));
    if (!(c.alpha0 > 0.0)) throw DomainError("W and V must be positive definite for alpha0 > 0");
    c.alpha1 = std::max(lambda_max(system.W), lambda_max(system.V)) * inflation;
    c.psi = spectral_norm(system.C) * inflation;
    c.sigma_bar = spectral_norm(steady.Sigma) * inflation;
    c.validate();
    return c;
}

int horizon_h(std::size_t T, double gamma_F)
{
    if (!(gamma_F > 0.0 && gamma_F < 1.0)) throw DomainError("gamma_F must lie in (0, 1)");
    if (T < 2) throw DomainError("horizon_h needs T >= 2");
    // The 1e-9 slack keeps exact ratios such as ln 8 / ln 2 from rounding down.
    const double ratio = std::log(static_cast<double>(T)) / std::log(1.0 / gamma_F);
    return std::max(1, static_cast<int>(std::floor(ratio + 1e-9)));
}

}  // namespace kfl
