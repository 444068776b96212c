#pragma once

#include <Eigen/Dense>

#include <string>

namespace kfl {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

/// Largest singular value.
double spectral_norm(const Mat& m);

/// Largest eigenvalue modulus of a square matrix.
double spectral_radius(const Mat& m);

Mat symmetrize(const Mat& m);

double lambda_min(const Mat& symmetric);
double lambda_max(const Mat& symmetric);

/// Throws CovarianceError unless `m` is square, exactly symmetric and has
/// eigenvalues >= -tol. `name` is used in the message.
void require_psd(const Mat& m, const std::string& name, double tol = 1e-10);

/// Returns F with F * F^T == P, built from the symmetric eigendecomposition
/// with negative eigenvalues clamped to zero.
Mat psd_factor(const Mat& p);

}  // namespace kfl
